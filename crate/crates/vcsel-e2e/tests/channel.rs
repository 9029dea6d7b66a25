use proptest::prelude::*;
use vcsel_e2e::channel::{
    fiber_apply, fir_same, gaussian_taps, noise_std_for_snr, pd_detect, FiberParams, Link, PdNoise, PdParams,
};
use vcsel_e2e::signal::{random_symbols, symbols_to_drive, variance, PamConfig, Waveform};
use vcsel_e2e::vcsel::{celsius, IntegrateOptions, VcselParams};

fn fiber() -> FiberParams {
    FiberParams { length_m: 200.0, attenuation_db_per_km: 3.0, f3db_hz: 15e9 }
}

fn wave(seed: u64, n: usize) -> Waveform {
    Waveform::new(280e9, (0..n).map(|i| ((seed as f64 + i as f64) * 0.731).sin() * 3.0 + 1.0).collect()).unwrap()
}

#[test]
fn attenuation_in_db() {
    let w = Waveform::constant(280e9, 2.0, 200).unwrap();
    let y = fiber_apply(&fiber(), &w).unwrap();
    let expected = 2.0 * 10f64.powf(-0.06);
    assert!(y.samples().iter().all(|v| (v - expected).abs() < 1e-12));
}

#[test]
fn gaussian_taps_have_half_power_at_f3db() {
    let fs = 280e9;
    let f3 = 20e9;
    let taps = gaussian_taps(f3, fs);
    let h = |f: f64| {
        let (re, im) = taps.iter().enumerate().fold((0.0, 0.0), |(re, im), (k, t)| {
            let ph = -2.0 * std::f64::consts::PI * f * k as f64 / fs;
            (re + t * ph.cos(), im + t * ph.sin())
        });
        (re * re + im * im).sqrt()
    };
    assert!((h(0.0) - 1.0).abs() < 1e-12);
    assert!((20.0 * h(f3).log10() + 3.0103).abs() < 0.05, "{}", 20.0 * h(f3).log10());
}

#[test]
fn narrow_fiber_needs_oversampling() {
    let w = Waveform::constant(40e9, 1.0, 10).unwrap();
    assert!(fiber_apply(&fiber(), &w).is_err());
}

#[test]
fn snr_noise_reaches_target() {
    let pam = PamConfig::new(4, 28e9, 8, 0.0, vec![-3.0, -1.0, 1.0, 3.0]).unwrap();
    let clean = symbols_to_drive(&random_symbols(50_000, 4, 1), &pam).unwrap();
    let pd = PdParams { responsivity_a_per_w: 1.0, noise: PdNoise::Snr { snr_db: 10.0, samples_per_symbol: 8 } };
    let noisy = pd_detect(&pd, &clean, 7).unwrap();
    let noise: Vec<f64> = noisy.samples().iter().zip(clean.samples()).map(|(a, b)| a - b).collect();
    let expected = noise_std_for_snr(variance(clean.samples()), 10.0, 8);
    // P_ac of equiprobable +-1, +-3 is 5
    assert!((expected / (8.0 * 5.0 / 10.0f64).sqrt() - 1.0).abs() < 0.01);
    assert!((variance(&noise).sqrt() / expected - 1.0).abs() < 0.01);
}

#[test]
fn noiseless_detection_is_responsivity() {
    let w = wave(3, 100);
    let y = pd_detect(&PdParams::noiseless(0.6), &w, 0).unwrap();
    for (a, b) in y.samples().iter().zip(w.samples()) {
        assert!((a - 0.6 * b).abs() < 1e-15);
    }
}

#[test]
fn link_is_seed_deterministic() {
    let pam = PamConfig::new(4, 28e9, 10, 8.0, vec![-4.5, -1.5, 1.5, 4.5]).unwrap();
    let drive = symbols_to_drive(&random_symbols(300, 4, 2), &pam).unwrap();
    let link = Link {
        vcsel: VcselParams::default_850(),
        fiber: fiber(),
        pd: PdParams { responsivity_a_per_w: 0.6, noise: PdNoise::Std(0.05) },
        t_amb: celsius(25.0),
        integrate: IntegrateOptions::default(),
    };
    let a = link.simulate(&drive, 5).unwrap();
    let b = link.simulate(&drive, 5).unwrap();
    let c = link.simulate(&drive, 6).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(a.len(), drive.len());
}

#[test]
fn invalid_receiver_rejected() {
    let pd = PdParams { responsivity_a_per_w: -1.0, noise: PdNoise::Std(-0.1) };
    assert_eq!(pd.violations().len(), 2);
    assert!(pd_detect(&pd, &wave(0, 10), 0).is_err());
}

proptest! {
    #[test]
    fn fiber_is_linear(s1 in 0u64..1000, s2 in 0u64..1000, a in -5.0f64..5.0, b in -5.0f64..5.0) {
        let (x, y) = (wave(s1, 300), wave(s2, 300));
        let mix = x.with_samples(x.samples().iter().zip(y.samples()).map(|(p, q)| a * p + b * q).collect()).unwrap();
        let f = fiber();
        let (fx, fy, fm) = (fiber_apply(&f, &x).unwrap(), fiber_apply(&f, &y).unwrap(), fiber_apply(&f, &mix).unwrap());
        for i in 0..300 {
            let lin = a * fx.samples()[i] + b * fy.samples()[i];
            prop_assert!((fm.samples()[i] - lin).abs() < 1e-9);
        }
    }

    #[test]
    fn fir_preserves_constants(c in -10.0f64..10.0, f3 in 5e9f64..60e9) {
        let taps = gaussian_taps(f3, 280e9);
        let y = fir_same(&vec![c; 64], &taps);
        prop_assert!(y.iter().all(|v| (v - c).abs() < 1e-9));
    }
}
