//! Small-signal modulation response versus bias, with a rate-equation
//! perturbation check at one bias point.
//!
//! `cargo run --release --example s21`

use vcsel_e2e::vcsel::{celsius, numeric_s21, s21, small_signal, PerturbationOptions, VcselParams};

fn main() -> vcsel_e2e::Result<()> {
    let laser = VcselParams::default_850();
    let t_amb = celsius(25.0);
    let grid: Vec<f64> = (0..=600).map(|k| 1e8 * k as f64).collect();
    for bias in [2.0, 4.0, 7.0, 10.0] {
        let c = s21(&laser, bias, t_amb, &grid)?;
        let ss = small_signal(&laser, bias, t_amb)?;
        let f3 = c.f3db_hz.map_or("beyond grid".into(), |f| format!("{:.1} GHz", f * 1e-9));
        println!(
            "{bias:>4} mA: f3dB {f3}, peaking {:.2} dB, fr {:.1} GHz, damping {:.2e} /s",
            c.peaking_db,
            ss.f_r_hz * 1e-9,
            ss.gamma_per_s
        );
    }

    let bias = 7.0;
    let ss = small_signal(&laser, bias, t_amb)?;
    let tones: Vec<f64> = (1..=6).map(|k| k as f64 * 0.25 * ss.f_r_hz).collect();
    let num = numeric_s21(&laser, bias, t_amb, &tones, &PerturbationOptions::default())?;
    println!("\nrate-equation tones at {bias} mA:");
    for (f, db) in tones.iter().zip(&num.s21_db) {
        println!("  {:>5.1} GHz  numeric {db:>6.2} dB  analytic {:>6.2} dB", f * 1e-9, ss.s21_db(*f));
    }
    Ok(())
}
