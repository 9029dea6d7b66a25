//! Neural predistortion of the laser drive, learned through a Volterra
//! surrogate with the indirect and the direct architecture.
//!
//! `cargo run --release --example dpd`

use vcsel_e2e::compensate::{residual, train_dpd_dla, train_dpd_ila, DpdConfig};
use vcsel_e2e::nncore::TrainConfig;
use vcsel_e2e::signal::{random_symbols, symbols_to_drive, PamConfig, Waveform};
use vcsel_e2e::surrogate::{fit_volterra, StimulusConfig, Surrogate};
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
    let model = fit_volterra(reference, &stim, 0, 32)?;

    let pam = PamConfig::new(4, 28e9, 10, bias, vec![-4.5, -1.5, 1.5, 4.5])?;
    let x = symbols_to_drive(&random_symbols(10_000, 4, 1), &pam)?;
    let xt = symbols_to_drive(&random_symbols(3000, 4, 2), &pam)?;
    let cfg =
        DpdConfig { train: TrainConfig { max_steps: 4000, ..DpdConfig::default().train }, ..DpdConfig::default() };

    let sur = |s: &[f64]| -> vcsel_e2e::Result<Vec<f64>> { Ok(model.eval(s)) };
    let (ila, _, _) = train_dpd_ila(&sur, x.samples(), &cfg)?;
    let (dla, target, _) = train_dpd_dla(&model, x.samples(), &cfg, None)?;
    println!("target: {:.3} mW/mA, latency {} samples", target.gain, target.latency);

    let laser_out =
        |s: &[f64]| -> vcsel_e2e::Result<Vec<f64>> { Ok(reference(&xt.with_samples(s.to_vec())?)?.into_samples()) };
    let xs = xt.samples();
    let skip = 200;
    for (name, drive) in [("none", xs.to_vec()), ("ila", ila.apply(xs)), ("dla", dla.apply(xs))] {
        let on_model = residual(&model.eval(&drive), xs, &target, skip);
        let on_laser = residual(&laser_out(&drive)?, xs, &target, skip);
        println!("{name:>5}: residual on surrogate {on_model:.3e}, on laser {on_laser:.3e}");
    }
    Ok(())
}
