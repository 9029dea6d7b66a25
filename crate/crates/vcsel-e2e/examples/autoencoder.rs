//! End-to-end PAM-4 autoencoder trained through a surrogate of a hot laser,
//! against fixed equidistant levels with the same decoder.
//!
//! `cargo run --release --example autoencoder [-- TEMP_C]`

use std::sync::Arc;

use vcsel_e2e::channel::FiberParams;
use vcsel_e2e::compensate::Detector;
use vcsel_e2e::e2e::{
    ae_train, ber_vs_snr, equidistant_baseline, AeConfig, LinkReference, SurrogateLink, TrainChannel,
};
use vcsel_e2e::signal::Waveform;
use vcsel_e2e::surrogate::{fit_volterra, StimulusConfig};
use vcsel_e2e::sweep::Budget;
use vcsel_e2e::vcsel::{celsius, integrate_with, junction_temperature, IntegrateOptions, ThermalMode, VcselParams};

fn main() -> vcsel_e2e::Result<()> {
    let t_c: f64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(95.0);
    let laser = VcselParams::default_850();
    let (bias, t_amb) = (8.0, celsius(t_c));
    let opts = IntegrateOptions {
        thermal: ThermalMode::Fixed(junction_temperature(&laser, bias, t_amb)?),
        ..Default::default()
    };
    let reference = |w: &Waveform| integrate_with(&laser, w, t_amb, 0, &opts);
    let stim = StimulusConfig { std_ma: 6.0, bias_ma: bias, samples: 400_000, sample_rate: 280e9, seed: 3 };
    let model = fit_volterra(reference, &stim, 0, 32)?;
    let link = SurrogateLink::new(Arc::new(model), bias, 10, &FiberParams::passthrough(), 0.6)?;

    let cfg = AeConfig { steps: 2000, seed: 4, ..AeConfig::default() };
    let ch = [TrainChannel { temperature_c: t_c, channel: &link }];
    let (ae, _) = ae_train(&ch, &cfg)?;
    let (eq, _) = equidistant_baseline(&ch, &cfg)?;
    println!("learned levels {:.2?} mA", ae.sorted_levels(None));
    println!("equidistant    {:.2?} mA", eq.sorted_levels(None));

    let r = LinkReference::measure(&link, &cfg)?;
    let grid: Vec<f64> = (8..=22).step_by(2).map(f64::from).collect();
    let budget = Budget { min_errors: 50, max_symbols: 200_000, ..Budget::default() };
    for (name, t) in [("ae", &ae), ("equidistant", &eq)] {
        let rec = t.record(&link, &r, None, 50_000, 5)?;
        let det = t.detector(None);
        let c = ber_vs_snr(&det, &rec, rec.usable(det.window_len()), &t.labels(None), &grid, &budget, 6);
        let at = c.snr_at(1e-3).map_or("-".into(), |s| format!("{s:.1} dB"));
        println!("{name:>12}: BER {:.1e} ... {:.1e}, 1e-3 at {at}", c.rate[0], c.rate[c.len() - 1]);
    }
    Ok(())
}
