//! PAM-4 through the laser, fiber and photodiode; prints the eye opening
//! and an ASCII density plot of the received eye.
//!
//! `cargo run --release --example eye`

use vcsel_e2e::channel::{FiberParams, Link, PdNoise, PdParams};
use vcsel_e2e::signal::{eye_diagram, random_symbols, symbols_to_drive, vertical_opening, PamConfig};
use vcsel_e2e::vcsel::{celsius, IntegrateOptions, VcselParams};

fn main() -> vcsel_e2e::Result<()> {
    let sps = 10;
    let pam = PamConfig::new(4, 28e9, sps, 8.0, vec![-4.5, -1.5, 1.5, 4.5])?;
    let link = Link {
        vcsel: VcselParams::default_850(),
        fiber: FiberParams::passthrough(),
        pd: PdParams { responsivity_a_per_w: 0.6, noise: PdNoise::Snr { snr_db: 40.0, samples_per_symbol: sps } },
        t_amb: celsius(25.0),
        integrate: IntegrateOptions::default(),
    };
    let syms = random_symbols(2000, 4, 7);
    let y = link.simulate(&symbols_to_drive(&syms, &pam)?, 7)?;

    let (opening, offset) = (0..8 * sps)
        .map(|o| (vertical_opening(y.samples(), &syms, 4, sps, o), o))
        .fold((f64::NEG_INFINITY, 0), |a, b| if b.0 > a.0 { b } else { a });
    println!("vertical opening {opening:.3} mA at offset {offset} samples");

    let skip = 100 * sps + offset % sps;
    let eye = eye_diagram(&y.with_samples(y.samples()[skip..].to_vec())?, sps, 2)?;
    let (lo, hi) =
        eye.traces.iter().flatten().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let rows = 24;
    let mut grid = vec![vec![0usize; eye.width()]; rows];
    for tr in &eye.traces {
        for (k, v) in tr.iter().enumerate() {
            let r = (((hi - v) / (hi - lo)) * (rows - 1) as f64).round() as usize;
            grid[r][k] += 1;
        }
    }
    let peak = grid.iter().flatten().copied().max().unwrap_or(1) as f64;
    for row in grid {
        let line: String = row
            .iter()
            .map(|&n| match n as f64 / peak {
                0.0 => ' ',
                d if d < 0.05 => '.',
                d if d < 0.3 => '+',
                _ => '#',
            })
            .collect();
        println!("|{line}|");
    }
    Ok(())
}
