//! Identifies a second-order Volterra model of the laser from a white
//! Gaussian drive and scores it on a PAM-4 test signal.
//!
//! `cargo run --release --example fit_volterra`

use vcsel_e2e::signal::{random_symbols, symbols_to_drive, PamConfig, Waveform};
use vcsel_e2e::surrogate::{fit_volterra, validate, StimulusConfig, Surrogate};
use vcsel_e2e::vcsel::{celsius, integrate_with, junction_temperature, IntegrateOptions, ThermalMode, VcselParams};

fn main() -> vcsel_e2e::Result<()> {
    let laser = VcselParams::default_850();
    let (bias, t_amb) = (8.0, celsius(25.0));
    // thermal state pinned at the bias point: the model has finite memory
    let opts = IntegrateOptions {
        thermal: ThermalMode::Fixed(junction_temperature(&laser, bias, t_amb)?),
        ..Default::default()
    };
    let reference = |w: &Waveform| integrate_with(&laser, w, t_amb, 0, &opts);

    let stim = StimulusConfig { std_ma: 6.0, bias_ma: bias, samples: 400_000, sample_rate: 280e9, seed: 3 };
    let model = fit_volterra(reference, &stim, 0, 32)?;
    println!("h0 {:.3} mW, h1 peak {:.3} mW/mA", model.h0, model.h1.iter().copied().fold(0.0, f64::max));

    let pam = PamConfig::new(4, 28e9, 10, bias, vec![-4.5, -1.5, 1.5, 4.5])?;
    let drive = symbols_to_drive(&random_symbols(5000, 4, 4), &pam)?;
    let v =
        validate(|w| model.eval_waveform(w), model.warmup(), reference, &drive, 10, &stim.describe(), "PAM-4 28 GBd")?;
    println!("PAM-4 test: NRMSE {:.2} %, R^2 {:.4}", 100.0 * v.report.nrmse, v.report.r_squared);
    Ok(())
}
