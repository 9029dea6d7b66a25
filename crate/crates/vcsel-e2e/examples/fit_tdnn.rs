//! Trains a tapped-delay neural network on the laser and compares it with
//! the Volterra model on the same PAM-4 test drive.
//!
//! `cargo run --release --example fit_tdnn`

use vcsel_e2e::nncore::TrainConfig;
use vcsel_e2e::signal::{random_symbols, symbols_to_drive, PamConfig, Waveform};
use vcsel_e2e::surrogate::{fit_tdnn, fit_volterra, validate, StimulusConfig, Surrogate, TdnnConfig};
use vcsel_e2e::vcsel::{celsius, integrate_with, junction_temperature, IntegrateOptions, ThermalMode, VcselParams};

fn main() -> vcsel_e2e::Result<()> {
    let laser = VcselParams::default_850();
    let (bias, t_amb) = (8.0, celsius(25.0));
    let opts = IntegrateOptions {
        thermal: ThermalMode::Fixed(junction_temperature(&laser, bias, t_amb)?),
        ..Default::default()
    };
    let reference = |w: &Waveform| integrate_with(&laser, w, t_amb, 0, &opts);
    let stim = StimulusConfig { std_ma: 6.0, bias_ma: bias, samples: 400_000, sample_rate: 280e9, seed: 3 };

    let cfg = TdnnConfig {
        train: TrainConfig { max_steps: 10_000, seed: 5, ..TdnnConfig::default().train },
        ..TdnnConfig::default()
    };
    let (tdnn, loss) = fit_tdnn(reference, &stim, &cfg)?;
    println!("tdnn: {} steps, final loss {:.2e}", loss.len(), loss[loss.len() - 100..].iter().sum::<f64>() / 100.0);
    let volterra = fit_volterra(reference, &stim, 0, 32)?;

    let pam = PamConfig::new(4, 28e9, 10, bias, vec![-4.5, -1.5, 1.5, 4.5])?;
    let drive = symbols_to_drive(&random_symbols(5000, 4, 4), &pam)?;
    let models: [(&str, &dyn Surrogate); 2] = [("volterra", &volterra), ("tdnn", &tdnn)];
    for (name, m) in models {
        let v = validate(|w| m.eval_waveform(w), m.warmup(), reference, &drive, 10, &stim.describe(), "PAM-4 28 GBd")?;
        println!("{name:>9}: NRMSE {:.2} %, R^2 {:.4}", 100.0 * v.report.nrmse, v.report.r_squared);
    }
    Ok(())
}
