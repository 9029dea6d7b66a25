//! Temperature-conditioned autoencoder: trained at two temperatures and
//! evaluated in between, where it never saw the laser.
//!
//! `cargo run --release --example ae_temperature`

use std::sync::Arc;

use vcsel_e2e::channel::FiberParams;
use vcsel_e2e::compensate::Detector;
use vcsel_e2e::e2e::{
    ae_train, ber_vs_snr, condition_on_temperature, AeConfig, Channel, LinkReference, SurrogateLink, TrainChannel,
};
use vcsel_e2e::signal::Waveform;
use vcsel_e2e::surrogate::{fit_volterra, StimulusConfig};
use vcsel_e2e::sweep::Budget;
use vcsel_e2e::vcsel::{celsius, integrate_with, junction_temperature, IntegrateOptions, ThermalMode, VcselParams};

fn surrogate_link(laser: &VcselParams, t_c: f64) -> vcsel_e2e::Result<SurrogateLink> {
    let (bias, t_amb) = (8.0, celsius(t_c));
    let opts = IntegrateOptions {
        thermal: ThermalMode::Fixed(junction_temperature(laser, bias, t_amb)?),
        ..Default::default()
    };
    let stim = StimulusConfig { std_ma: 6.0, bias_ma: bias, samples: 300_000, sample_rate: 280e9, seed: 3 };
    let model = fit_volterra(|w: &Waveform| integrate_with(laser, w, t_amb, 0, &opts), &stim, 0, 32)?;
    SurrogateLink::new(Arc::new(model), bias, 10, &FiberParams::passthrough(), 0.6)
}

fn main() -> vcsel_e2e::Result<()> {
    let laser = VcselParams::default_850();
    let train_t = [5.0, 95.0];
    let links: Vec<(f64, SurrogateLink)> =
        [5.0, 50.0, 95.0].iter().map(|&t| Ok((t, surrogate_link(&laser, t)?))).collect::<vcsel_e2e::Result<_>>()?;
    let link_at = |t: f64| &links.iter().find(|(u, _)| *u == t).expect("fitted").1;

    let cfg = condition_on_temperature(&AeConfig { steps: 3000, seed: 4, ..AeConfig::default() }, &train_t)?;
    let ch: Vec<TrainChannel<'_>> =
        train_t.iter().map(|&t| TrainChannel { temperature_c: t, channel: link_at(t) as &dyn Channel }).collect();
    let (ae, _) = ae_train(&ch, &cfg)?;

    let grid: Vec<f64> = (8..=22).step_by(2).map(f64::from).collect();
    let budget = Budget { min_errors: 50, max_symbols: 200_000, ..Budget::default() };
    for (t, link) in &links {
        let r = LinkReference::measure(link, &cfg)?;
        let rec = ae.record(link, &r, Some(*t), 50_000, 5)?;
        let det = ae.detector(Some(*t));
        let c = ber_vs_snr(&det, &rec, rec.usable(det.window_len()), &ae.labels(Some(*t)), &grid, &budget, 6);
        let at = c.snr_at(1e-3).map_or("-".into(), |s| format!("{s:.1} dB"));
        let seen = if train_t.contains(t) { "trained" } else { "unseen" };
        println!("{t:>5} C ({seen}): levels {:.2?} mA, BER 1e-3 at {at}", ae.sorted_levels(Some(*t)));
    }
    Ok(())
}
