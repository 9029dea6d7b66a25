use proptest::prelude::*;
use vcsel_e2e::compensate::{
    integrate_dump, linear_ffe_baseline, prune_equalizer, residual, train_dpd_ila, train_equalizer, DpdConfig,
    DpdTarget, EqualizerConfig, Predistorter, PruneConfig, Slicer, SymbolRecord,
};
use vcsel_e2e::e2e::ser_vs_snr;
use vcsel_e2e::nncore::{argmax, batch_loss, gradients, one_hot, Loss, TrainConfig};
use vcsel_e2e::signal::random_symbols;
use vcsel_e2e::sweep::Budget;

/// PAM-4 with rectangular pulses through `y(n) = x(n) + a * x(n - sps)`.
fn isi_record(n: usize, a: f64, seed: u64) -> SymbolRecord {
    let sps = 4;
    let levels = [-3.0, -1.0, 1.0, 3.0];
    let syms = random_symbols(n, 4, seed);
    let x: Vec<f64> = syms.iter().flat_map(|&s| std::iter::repeat_n(levels[s], sps)).collect();
    let y: Vec<f64> = (0..x.len()).map(|i| x[i] + if i >= sps { a * x[i - sps] } else { 0.0 }).collect();
    SymbolRecord::new(&y, syms, 4, sps, 2 * sps).unwrap()
}

fn quick_eq() -> EqualizerConfig {
    EqualizerConfig {
        window: 20,
        hidden: 8,
        train_snr_db: 18.0,
        train: TrainConfig { max_steps: 2500, seed: 3, ..EqualizerConfig::default().train },
    }
}

#[test]
fn slicer_ties_go_to_lower_bin() {
    let s = Slicer::from_class_means(&[3.0, -3.0, 1.0, -1.0]);
    assert_eq!(s.thresholds, vec![-2.0, 0.0, 2.0]);
    assert_eq!(s.slice(0.0), 3);
    assert_eq!(s.slice(1e-12), 2);
    assert_eq!(s.slice(-5.0), 1);
    assert_eq!(s.slice(5.0), 0);
    assert_eq!(argmax(&[0.25, 0.25, 0.25, 0.25]), 0);
}

#[test]
fn record_is_normalised_and_aligned() {
    let rec = isi_record(2000, 0.0, 1);
    let mean = rec.received.iter().sum::<f64>() / rec.received.len() as f64;
    let p = rec.received.iter().map(|v| v * v).sum::<f64>() / rec.received.len() as f64;
    assert!(mean.abs() < 1e-12);
    assert!((p - 1.0).abs() < 1e-12);
    assert_eq!(rec.delay, 0);
    assert!((rec.noise_std(10.0) - 0.4f64.sqrt()).abs() < 1e-12);
}

#[test]
fn nn_equalizer_beats_integrate_and_dump_under_isi() {
    let rec = isi_record(12_000, 0.5, 2);
    let cfg = quick_eq();
    let u = rec.usable(cfg.window);
    let (train, test) = (u.start..8000, 8000..u.end);
    let (nn, trace) = train_equalizer(&rec, train.clone(), &cfg).unwrap();
    let ffe = linear_ffe_baseline(&rec, train.clone(), &cfg).unwrap();
    let none = integrate_dump(&rec, train, cfg.window).unwrap();
    assert!(trace.last().unwrap() < &trace[0]);
    let b = Budget { min_errors: 10_000, max_symbols: 20_000, chunk: 4000 };
    let ser = |d: &dyn vcsel_e2e::compensate::Detector| ser_vs_snr(d, &rec, test.clone(), &[22.0], &b, 5).rate[0];
    let (s_nn, s_ffe, s_none) = (ser(&nn), ser(&ffe), ser(&none));
    assert!(s_nn < 0.01, "nn {s_nn}");
    assert!(s_ffe < 0.01, "ffe {s_ffe}");
    assert!(s_none > 0.1, "none {s_none}");
}

#[test]
fn equalizer_gradient_matches_differences() {
    let rec = isi_record(500, 0.4, 4);
    let cfg = EqualizerConfig { train: TrainConfig { max_steps: 50, ..quick_eq().train }, ..quick_eq() };
    let u = rec.usable(cfg.window);
    let (eq, _) = train_equalizer(&rec, u.clone(), &cfg).unwrap();
    let x: Vec<Vec<f64>> = (u.start..u.start + 8)
        .map(|k| {
            let s = rec.window_start(k, cfg.window).unwrap();
            rec.received[s..s + cfg.window].to_vec()
        })
        .collect();
    let t: Vec<Vec<f64>> = (u.start..u.start + 8).map(|k| one_hot(rec.symbols[k], 4)).collect();
    let (_, g) = gradients(&eq.net, &x, &t, Loss::CrossEntropy).unwrap();
    let an = g.flatten();
    let p = eq.net.params();
    let h = 1e-6;
    for i in 0..p.len() {
        let mut n = eq.net.clone();
        let mut q = p.clone();
        q[i] += h;
        n.set_params(&q).unwrap();
        let lp = batch_loss(&n, &x, &t, Loss::CrossEntropy).unwrap();
        q[i] -= 2.0 * h;
        n.set_params(&q).unwrap();
        let lm = batch_loss(&n, &x, &t, Loss::CrossEntropy).unwrap();
        let fd = (lp - lm) / (2.0 * h);
        let err = (fd - an[i]).abs() / fd.abs().max(an[i].abs()).max(1e-4);
        assert!(err < 1e-5, "param {i}: {fd} vs {}", an[i]);
    }
}

#[test]
fn pruning_reaches_sparsity_and_keeps_masks() {
    let rec = isi_record(6000, 0.5, 6);
    let cfg = EqualizerConfig { train: TrainConfig { max_steps: 800, ..quick_eq().train }, ..quick_eq() };
    let u = rec.usable(cfg.window);
    let (mut eq, _) = train_equalizer(&rec, u.start..4000, &cfg).unwrap();
    let prune =
        PruneConfig { s_final: 0.6, prune_steps: 100, finetune_steps: 100, restarts: 2, validation_windows: 2000 };
    let r = prune_equalizer(&mut eq, &rec, u.start..4000, 4000..u.end, &cfg, &prune).unwrap();
    assert_eq!(r.validation_loss.len(), 2);
    assert!(r.multiplies_after < r.multiplies_before);
    for l in eq.net.layers() {
        let m = l.mask.as_ref().unwrap();
        assert_eq!(m.iter().filter(|k| !**k).count(), (0.6 * l.weights.len() as f64 + 1e-9).floor() as usize);
        assert!(l.weights.iter().zip(m).all(|(w, k)| *k || *w == 0.0));
    }
}

#[test]
fn target_recovers_gain_and_latency() {
    let x: Vec<f64> = (0..4000).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
    let y: Vec<f64> = (0..x.len()).map(|n| if n >= 5 { 1.5 + 0.4 * x[n - 5] } else { 1.5 }).collect();
    let t = DpdTarget::fit(&x, &y, 20).unwrap();
    assert_eq!(t.latency, 5);
    assert!((t.gain - 0.4).abs() < 1e-3);
    assert!(residual(&y, &x, &t, 10) < 1e-5);
}

#[test]
fn ila_inverts_a_memoryless_compression() {
    let x: Vec<f64> =
        random_symbols(6000, 4, 1).iter().flat_map(|&s| std::iter::repeat_n(s as f64 * 2.0 - 3.0, 4)).collect();
    let tx = |x: &[f64]| -> vcsel_e2e::Result<Vec<f64>> { Ok(x.iter().map(|v| v - 0.03 * v * v * v).collect()) };
    let cfg = DpdConfig {
        half_width: 2,
        hidden: 8,
        max_latency: 4,
        train: TrainConfig { max_steps: 3000, seed: 2, ..DpdConfig::default().train },
        ..DpdConfig::default()
    };
    let (p, t, _) = train_dpd_ila(&tx, &x, &cfg).unwrap();
    let before = residual(&tx(&x).unwrap(), &x, &t, 10);
    let after = residual(&tx(&p.apply(&x)).unwrap(), &x, &t, 10);
    assert!(after < 0.2 * before, "{before} -> {after}");
}

proptest! {
    #[test]
    fn identity_predistorter_passes_drive(xs in prop::collection::vec(-10.0f64..10.0, 1..200), hw in 0usize..6, m in -5.0f64..5.0, s in 0.1f64..5.0) {
        let p = Predistorter::identity(hw, m, s).unwrap();
        let y = p.apply(&xs);
        for (a, b) in y.iter().zip(&xs) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
