//! FIR-plus-softmax receiver for PAM-4 in white noise, trained once by
//! differential evolution and once by back-propagation, next to the
//! closed-form symbol error rate.
//!
//! `cargo run --release --example de_receiver`

use vcsel_e2e::compensate::{Detector, SymbolRecord};
use vcsel_e2e::e2e::{
    backprop_train, de_train, ser_vs_snr, theoretical_ser, DeConfig, ReceiverConfig, TrainableReceiver,
};
use vcsel_e2e::signal::random_symbols;
use vcsel_e2e::sweep::Budget;

fn main() -> vcsel_e2e::Result<()> {
    let (sps, levels) = (4, [-3.0, -1.0, 1.0, 3.0]);
    let syms = random_symbols(30_000, 4, 1);
    let raw: Vec<f64> = syms.iter().flat_map(|&s| std::iter::repeat_n(levels[s], sps)).collect();
    let rec = SymbolRecord::new(&raw, syms, 4, sps, 2 * sps)?;

    let cfg = ReceiverConfig {
        de: DeConfig { generations: 600, seed: 2, ..DeConfig::default() },
        ..ReceiverConfig::default()
    };
    let rx = TrainableReceiver::new(&cfg, sps, 4, 3)?;
    let u = rec.usable(rx.window_len());
    let (train, test) = (u.start..15_000, 15_000..u.end);
    let (de_rx, res) = de_train(&rx, &rec, train.clone(), &cfg)?;
    let (bp_rx, _) = backprop_train(&rx, &rec, train, &cfg)?;
    println!(
        "{} parameters, DE best cross-entropy {:.4} after {} generations",
        rx.param_count(),
        res.best_fitness,
        res.history.len()
    );

    let grid: Vec<f64> = (4..=16).step_by(2).map(f64::from).collect();
    let budget = Budget { min_errors: 200, max_symbols: 300_000, ..Budget::default() };
    let de = ser_vs_snr(&de_rx, &rec, test.clone(), &grid, &budget, 7);
    let bp = ser_vs_snr(&bp_rx, &rec, test, &grid, &budget, 8);
    println!("{:>6} {:>10} {:>10} {:>10}", "SNR dB", "DE", "backprop", "theory");
    for (i, s) in grid.iter().enumerate() {
        println!("{s:>6} {:>10.2e} {:>10.2e} {:>10.2e}", de.rate[i], bp.rate[i], theoretical_ser(4, *s));
    }
    Ok(())
}
