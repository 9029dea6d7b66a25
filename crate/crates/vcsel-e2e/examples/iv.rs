//! Static light-current curves of the default laser at three temperatures.
//!
//! `cargo run --release --example iv`

use vcsel_e2e::vcsel::{celsius, figures_of_merit, static_iv, VcselParams};

fn main() -> vcsel_e2e::Result<()> {
    let laser = VcselParams::default_850();
    let currents: Vec<f64> = (0..=250).map(|k| 0.1 * k as f64).collect();
    println!("{:>6} {:>10} {:>10} {:>11} {:>10}", "T (C)", "Ith (mA)", "slope W/A", "rollover mA", "Pmax (mW)");
    for t_c in [25.0, 55.0, 85.0] {
        let curve = static_iv(&laser, &currents, celsius(t_c))?;
        let fom = figures_of_merit(&curve)?;
        let peak = curve.power_mw.iter().copied().fold(0.0, f64::max);
        let roll = fom.rollover_ma.map_or("-".to_string(), |r| format!("{r:.1}"));
        println!("{t_c:>6} {:>10.2} {:>10.3} {roll:>11} {peak:>10.2}", fom.threshold_ma, fom.slope_w_per_a);
    }
    Ok(())
}
