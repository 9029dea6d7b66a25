//! Neural equalizer for PAM-4 over laser and 100 m of fiber, compared with a
//! linear FFE and plain integrate-and-dump, then magnitude-pruned.
//!
//! `cargo run --release --example equalizer`

use vcsel_e2e::channel::{FiberParams, Link, PdParams};
use vcsel_e2e::compensate::{
    integrate_dump, linear_ffe_baseline, prune_equalizer, train_equalizer, Detector, EqualizerConfig, PruneConfig,
    SymbolRecord,
};
use vcsel_e2e::e2e::ber_vs_snr;
use vcsel_e2e::signal::{random_symbols, PamConfig};
use vcsel_e2e::sweep::Budget;
use vcsel_e2e::vcsel::{celsius, IntegrateOptions, VcselParams};

fn main() -> vcsel_e2e::Result<()> {
    let pam = PamConfig::new(4, 28e9, 10, 6.5, vec![-4.5, -1.5, 1.5, 4.5])?;
    let link = Link {
        vcsel: VcselParams::default_850(),
        fiber: FiberParams { length_m: 100.0, attenuation_db_per_km: 3.0, f3db_hz: 15e9 },
        pd: PdParams::noiseless(0.6),
        t_amb: celsius(25.0),
        integrate: IntegrateOptions::default(),
    };
    let rec = SymbolRecord::from_link(&link, &pam, random_symbols(40_000, 4, 1), 2)?;
    let cfg = EqualizerConfig::default();
    let u = rec.usable(cfg.window);
    let (train, val, test) = (u.start..20_000, 20_000..25_000, 25_000..u.end);

    let (nn, _) = train_equalizer(&rec, train.clone(), &cfg)?;
    let ffe = linear_ffe_baseline(&rec, train.clone(), &cfg)?;
    let none = integrate_dump(&rec, train.clone(), cfg.window)?;
    let mut pruned = nn.clone();
    let prune = PruneConfig { restarts: 2, ..PruneConfig::default() };
    let report = prune_equalizer(&mut pruned, &rec, train, val, &cfg, &prune)?;
    println!(
        "pruned to {:.0} % sparsity: {} -> {} multiplies per symbol",
        100.0 * report.sparsity,
        report.multiplies_before,
        report.multiplies_after
    );

    let grid: Vec<f64> = (8..=24).step_by(2).map(f64::from).collect();
    let budget = Budget { min_errors: 50, max_symbols: 200_000, ..Budget::default() };
    let detectors: [(&str, &dyn Detector); 4] = [("none", &none), ("ffe", &ffe), ("nn", &nn), ("pruned", &pruned)];
    print!("{:>8}", "SNR dB");
    grid.iter().for_each(|s| print!("{s:>9}"));
    println!();
    for (name, d) in detectors {
        let c = ber_vs_snr(d, &rec, test.clone(), &pam.labels, &grid, &budget, 9);
        print!("{name:>8}");
        c.rate.iter().for_each(|r| print!("{r:>9.1e}"));
        let at = c.snr_at(1e-3).map_or("-".into(), |s| format!("{s:.1} dB"));
        println!("   BER 1e-3 at {at}");
    }
    Ok(())
}
