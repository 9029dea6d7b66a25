use proptest::prelude::*;
use vcsel_e2e::compensate::{Detector, SymbolRecord};
use vcsel_e2e::e2e::{
    ae_train, backprop_train, ber_vs_snr, decide, differential_evolution, equidistant_baseline, equidistant_levels,
    ser_vs_snr, theoretical_ser, AeConfig, Channel, DeConfig, IdentityLink, LinkReference, Normalization,
    ReceiverConfig, TrainChannel, TrainableReceiver,
};
use vcsel_e2e::nncore::{one_hot, Activation, Network, TrainConfig};
use vcsel_e2e::signal::random_symbols;
use vcsel_e2e::sweep::Budget;

fn awgn_record(n: usize, sps: usize, seed: u64) -> SymbolRecord {
    let levels = [-3.0, -1.0, 1.0, 3.0];
    let syms = random_symbols(n, 4, seed);
    let raw: Vec<f64> = syms.iter().flat_map(|&s| std::iter::repeat_n(levels[s], sps)).collect();
    SymbolRecord::new(&raw, syms, 4, sps, 2 * sps).unwrap()
}

fn gap_spread(levels: &[f64]) -> f64 {
    let mut v = levels.to_vec();
    v.sort_by(f64::total_cmp);
    let gaps: Vec<f64> = v.windows(2).map(|w| w[1] - w[0]).collect();
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let (lo, hi) = gaps.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &g| (a.min(g), b.max(g)));
    (hi - lo) / mean
}

#[test]
fn de_minimises_shifted_sphere() {
    let target = [1.5, -2.0, 0.5, 3.0];
    let sphere = |x: &[f64]| x.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    let cfg = DeConfig { generations: 300, seed: 4, ..DeConfig::default() };
    let r = differential_evolution(sphere, &[0.0; 4], 5.0, &cfg).unwrap();
    assert!(r.best_fitness < 1e-8, "{}", r.best_fitness);
    assert_eq!(r.history.len(), 300);
    assert_eq!(sphere(&r.best), r.best_fitness);
}

#[test]
fn de_is_seed_deterministic() {
    let f = |x: &[f64]| x.iter().map(|v| v.abs()).sum::<f64>();
    let cfg = DeConfig { generations: 50, seed: 8, ..DeConfig::default() };
    let a = differential_evolution(f, &[1.0; 3], 2.0, &cfg).unwrap();
    let b = differential_evolution(f, &[1.0; 3], 2.0, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn de_rejects_bad_settings() {
    let f = |_: &[f64]| 0.0;
    assert!(differential_evolution(f, &[0.0; 2], 1.0, &DeConfig { crossover: 1.5, ..DeConfig::default() }).is_err());
    assert!(
        differential_evolution(f, &[0.0; 2], 1.0, &DeConfig { population: Some(3), ..DeConfig::default() }).is_err()
    );
}

#[test]
fn decide_breaks_ties_low() {
    let mut net = Network::random(&[2, 3], &[Activation::Softmax], 1).unwrap();
    net.set_params(&vec![0.0; net.param_count()]).unwrap();
    assert_eq!(decide(&net, &[0.4, -0.2]), 0);
}

#[test]
fn theory_matches_closed_form() {
    // 4-PAM at linear SNR 5: 1.5 * Q(1)
    let snr_db = 10.0 * 5f64.log10();
    let q1 = 0.158_655_253_931_457_05;
    assert!((theoretical_ser(4, snr_db) - 1.5 * q1).abs() < 1e-9, "{}", theoretical_ser(4, snr_db));
}

#[test]
fn matched_filter_receiver_hits_theory() {
    // boxcar over the symbol's own samples, then a MAP softmax demapper
    let sps = 4;
    let rec = awgn_record(40_000, sps, 1);
    let cfg = ReceiverConfig { taps: 5, ..ReceiverConfig::default() };
    let mut rx = TrainableReceiver::new(&cfg, sps, 4, 0).unwrap();
    let mut p = vec![0.25, 0.25, 0.25, 0.25, 0.0];
    // unit-power record: class means at +-1/sqrt5, +-3/sqrt5
    let s5 = 5f64.sqrt();
    let means = [-3.0 / s5, -1.0 / s5, 1.0 / s5, 3.0 / s5];
    let scale = 200.0;
    p.extend(means.iter().map(|m| scale * m));
    p.extend(means.iter().map(|m| -0.5 * scale * m * m));
    rx.set_params(&p).unwrap();
    let u = rec.usable(rx.window_len());
    let b = Budget { min_errors: 2000, max_symbols: 400_000, chunk: 20_000 };
    let c = ser_vs_snr(&rx, &rec, u, &[10.0, 14.0], &b, 3);
    for (i, s) in [10.0, 14.0].iter().enumerate() {
        let th = theoretical_ser(4, *s);
        assert!((c.rate[i] / th - 1.0).abs() < 0.08, "{s} dB: {} vs {th}", c.rate[i]);
    }
}

#[test]
fn backprop_receiver_reaches_theory() {
    let sps = 4;
    let rec = awgn_record(20_000, sps, 2);
    let cfg = ReceiverConfig {
        taps: 9,
        backprop: TrainConfig { max_steps: 1500, seed: 5, ..ReceiverConfig::default().backprop },
        ..ReceiverConfig::default()
    };
    let rx = TrainableReceiver::new(&cfg, sps, 4, 3).unwrap();
    let u = rec.usable(rx.window_len());
    let (bp, trace) = backprop_train(&rx, &rec, u.start..10_000, &cfg).unwrap();
    assert!(trace.last().unwrap() < &trace[0]);
    let b = Budget { min_errors: 1000, max_symbols: 200_000, chunk: 10_000 };
    let c = ser_vs_snr(&bp, &rec, 10_000..u.end, &[12.0], &b, 4);
    let th = theoretical_ser(4, 12.0);
    assert!(c.rate[0] < 1.25 * th, "{} vs {th}", c.rate[0]);
}

#[test]
fn receiver_gradient_matches_differences() {
    let sps = 4;
    let rec = awgn_record(200, sps, 3);
    let cfg = ReceiverConfig { taps: 7, demapper_taps: 3, demapper_hidden: 4, ..ReceiverConfig::default() };
    let rx = TrainableReceiver::new(&cfg, sps, 4, 9).unwrap();
    let mut rx = rx;
    let p0: Vec<f64> = rx.params().iter().enumerate().map(|(i, v)| v + 0.1 * (i as f64).sin()).collect();
    rx.set_params(&p0).unwrap();
    let w = rx.window_len();
    let u = rec.usable(w);
    let ks: Vec<usize> = (u.start..u.start + 10).collect();
    let x: Vec<Vec<f64>> = ks
        .iter()
        .map(|&k| {
            let s = rec.window_start(k, w).unwrap();
            rec.received[s..s + w].iter().enumerate().map(|(j, v)| v + 0.2 * (j as f64 * 1.3).cos()).collect()
        })
        .collect();
    let t: Vec<Vec<f64>> = ks.iter().map(|&k| one_hot(rec.symbols[k], 4)).collect();
    let (_, g) = rx.loss(&x, &t, true);
    let h = 1e-6;
    for i in 0..p0.len() {
        let mut r = rx.clone();
        let mut q = p0.clone();
        q[i] += h;
        r.set_params(&q).unwrap();
        let lp = r.loss(&x, &t, false).0;
        q[i] -= 2.0 * h;
        r.set_params(&q).unwrap();
        let lm = r.loss(&x, &t, false).0;
        let fd = (lp - lm) / (2.0 * h);
        let err = (fd - g[i]).abs() / fd.abs().max(g[i].abs()).max(1e-4);
        assert!(err < 1e-5, "param {i}: {fd} vs {}", g[i]);
    }
}

#[test]
fn equidistant_levels_meet_power() {
    let cfg = AeConfig::default();
    let lv = equidistant_levels(&cfg);
    let p = lv.iter().map(|v| v * v).sum::<f64>() / lv.len() as f64;
    assert!((p - cfg.power).abs() < 1e-12);
    assert!(gap_spread(&lv) < 1e-12);
    let peak = AeConfig { normalization: Normalization::PeakAmplitude, power: 4.5, ..AeConfig::default() };
    let lp = equidistant_levels(&peak);
    assert!((lp.iter().fold(0.0f64, |m, v| m.max(v.abs())) - 4.5).abs() < 1e-12);
}

#[test]
fn awgn_autoencoder_learns_equidistant_levels() {
    let link = IdentityLink { sps: 2 };
    let cfg = AeConfig {
        steps: 3000,
        seed: 7,
        train_snr_db: 16.0,
        learning_rate: 0.02,
        final_learning_rate: Some(5e-4),
        ..AeConfig::default()
    };
    let ch = [TrainChannel { temperature_c: 25.0, channel: &link as &dyn Channel }];
    let (ae, trace) = ae_train(&ch, &cfg).unwrap();
    let (eq, _) = equidistant_baseline(&ch, &cfg).unwrap();
    assert!(trace.last().unwrap() < &trace[0]);
    let lv = ae.levels(None);
    let p = lv.iter().map(|v| v * v).sum::<f64>() / lv.len() as f64;
    assert!((p - cfg.power).abs() < 1e-9);
    assert!(gap_spread(&lv) < 0.1, "{:?}", ae.sorted_levels(None));

    let r = LinkReference::measure(&link, &cfg).unwrap();
    let b = Budget { min_errors: 500, max_symbols: 200_000, chunk: 10_000 };
    let ber = |t: &vcsel_e2e::e2e::Transceiver| {
        let rec = t.record(&link, &r, None, 20_000, 3).unwrap();
        let d = t.detector(None);
        ber_vs_snr(&d, &rec, rec.usable(d.window_len()), &t.labels(None), &[12.0], &b, 4).rate[0]
    };
    let (b_ae, b_eq) = (ber(&ae), ber(&eq));
    assert!(b_ae < 1.3 * b_eq && b_eq < 1.3 * b_ae, "ae {b_ae} eq {b_eq}");
}

#[test]
fn unconditioned_model_rejects_two_channels() {
    let link = IdentityLink { sps: 2 };
    let ch = [
        TrainChannel { temperature_c: 5.0, channel: &link as &dyn Channel },
        TrainChannel { temperature_c: 95.0, channel: &link as &dyn Channel },
    ];
    assert!(ae_train(&ch, &AeConfig { steps: 1, ..AeConfig::default() }).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn de_history_never_increases(seed in 0u64..10_000, dim in 1usize..6) {
        let f = |x: &[f64]| x.iter().enumerate().map(|(i, v)| (i as f64 + 1.0) * (v - 0.3).powi(2) + v.sin()).sum::<f64>();
        let cfg = DeConfig { generations: 40, seed, population: Some(12), ..DeConfig::default() };
        let r = differential_evolution(f, &vec![0.0; dim], 3.0, &cfg).unwrap();
        for w in r.history.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
        prop_assert_eq!(*r.history.last().unwrap(), r.best_fitness);
    }
}
