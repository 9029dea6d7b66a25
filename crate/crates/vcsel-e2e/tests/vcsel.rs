use vcsel_e2e::signal::{nrmse, random_symbols, symbols_to_drive, PamConfig, Waveform};
use vcsel_e2e::vcsel::{
    celsius, figures_of_merit, integrate, integrate_with, numeric_s21, operating_point, s21, small_signal, static_iv,
    IntegrateOptions, PerturbationOptions, ThermalMode, VcselParams, VcselState,
};

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

#[test]
fn gain_clamps_from_cold_start() {
    let p = VcselParams { eps: 0.0, ..VcselParams::athermal_850() };
    let i_th = p.threshold_ma(p.t0);
    for mult in [2.0, 3.0, 5.0] {
        let drive = Waveform::constant(100e9, mult * i_th, 2000).unwrap();
        let opts = IntegrateOptions {
            initial: Some(VcselState { n: 0.0, s: 0.0, t_int: p.t0 }),
            ..IntegrateOptions::default()
        };
        let y = integrate_with(&p, &drive, p.t0, 0, &opts).unwrap();
        let op = operating_point(&p, mult * i_th, p.t0).unwrap();
        let lhs = p.confinement * p.v_g * p.g0 * (op.n - p.n_tr);
        assert!((lhs * p.tau_p - 1.0).abs() < 1e-3, "static clamp {}", lhs * p.tau_p);
        // the dynamic solution settles on the same power
        let last = *y.samples().last().unwrap();
        assert!((last / op.power_mw - 1.0).abs() < 1e-3, "{last} vs {}", op.power_mw);
    }
}

#[test]
fn dynamic_settles_onto_static_curve() {
    let p = VcselParams::default_850();
    let t_amb = celsius(25.0);
    for i in grid(1.0, 15.0, 8) {
        let (n, s) = {
            let op = operating_point(&VcselParams { r_th: 0.0, ..p.clone() }, i, t_amb).unwrap();
            (op.n, op.s)
        };
        // cold start: carriers and photons balanced at ambient, junction not yet heated
        let opts = IntegrateOptions {
            max_step: 2e-12,
            thermal: ThermalMode::Dynamic,
            initial: Some(VcselState { n, s, t_int: t_amb }),
        };
        let drive = Waveform::constant(1e9, i, 4000).unwrap();
        let y = integrate_with(&p, &drive, t_amb, 0, &opts).unwrap();
        let expect = operating_point(&p, i, t_amb).unwrap().power_mw;
        let got = *y.samples().last().unwrap();
        assert!((got / expect - 1.0).abs() < 0.01, "I={i}: dynamic {got} static {expect}");
    }
}

#[test]
fn rollover_falls_with_temperature() {
    let p = VcselParams::default_850();
    let currents = grid(0.0, 25.0, 251);
    let mut last = (f64::INFINITY, f64::INFINITY);
    for tc in [25.0, 55.0, 85.0] {
        let c = static_iv(&p, &currents, celsius(tc)).unwrap();
        let f = figures_of_merit(&c).unwrap();
        let roll = f.rollover_ma.expect("roll-over inside the sweep");
        let peak = c.power_mw.iter().copied().fold(0.0, f64::max);
        assert!(roll < last.0 && peak < last.1, "{tc} C: roll {roll} peak {peak}");
        last = (roll, peak);
    }
}

#[test]
fn threshold_near_closed_form() {
    let p = VcselParams::default_850();
    let c = static_iv(&p, &grid(0.0, 20.0, 401), p.t0).unwrap();
    let f = figures_of_merit(&c).unwrap();
    let analytic =
        1.602e-19 * p.v_a * (p.n_tr + 1.0 / (p.v_g * p.g0 * p.tau_p * p.confinement)) / (p.eta_i * p.tau_n) * 1e3;
    assert!((f.threshold_ma / analytic - 1.0).abs() < 0.10, "fit {} analytic {analytic}", f.threshold_ma);
    assert!(f.diff_resistance_ohm.iter().all(|r| (r - p.r_s).abs() < 1e-6));
}

#[test]
fn resonance_without_compression() {
    let p = VcselParams { eps: 0.0, ..VcselParams::default_850() };
    let ss = small_signal(&p, 6.0, celsius(25.0)).unwrap();
    let g0 = p.g0 * (1.0 - p.a_g * (ss.t_int - p.t0));
    let expect = (p.v_g * g0 * ss.s_bar / p.tau_p).sqrt() / (2.0 * std::f64::consts::PI);
    assert_eq!(ss.f_r_hz, expect);
}

#[test]
fn resonance_rises_with_bias() {
    let p = VcselParams::default_850();
    let mut prev = 0.0;
    for ib in [1.5, 3.0, 5.0, 7.0, 9.0] {
        let f = small_signal(&p, ib, celsius(25.0)).unwrap().f_r_hz;
        assert!(f > prev);
        prev = f;
    }
}

#[test]
fn bandwidth_grows_then_flattens() {
    let p = VcselParams::default_850();
    let f = grid(0.0, 60e9, 601);
    let curves: Vec<_> = [2.0, 4.0, 7.0, 10.0].iter().map(|&ib| s21(&p, ib, celsius(25.0), &f).unwrap()).collect();
    for w in curves.windows(2) {
        assert!(w[1].f3db_hz.unwrap() > w[0].f3db_hz.unwrap());
    }
    assert!(curves[3].peaking_db < 1.0);
}

#[test]
fn numeric_response_tracks_two_pole_model() {
    let p = VcselParams::default_850();
    let t_amb = celsius(25.0);
    for ib in [4.0, 7.0] {
        let ss = small_signal(&p, ib, t_amb).unwrap();
        let f: Vec<f64> = (1..=12).map(|k| k as f64 * 1.5 * ss.f_r_hz / 12.0).collect();
        let num = numeric_s21(&p, ib, t_amb, &f, &PerturbationOptions::default()).unwrap();
        for (k, &fk) in f.iter().enumerate() {
            let d = (num.s21_db[k] - ss.s21_db(fk)).abs();
            assert!(d < 1.0, "I={ib} f={fk:.3e}: numeric {} analytic {}", num.s21_db[k], ss.s21_db(fk));
        }
    }
}

#[test]
fn step_size_converged() {
    let p = VcselParams::default_850();
    let syms = random_symbols(400, 4, 9);
    let run = |sps: usize| {
        let cfg = PamConfig::new(4, 28e9, sps, 8.0, vec![-4.5, -1.5, 1.5, 4.5]).unwrap();
        integrate(&p, &symbols_to_drive(&syms, &cfg).unwrap(), celsius(25.0), 0).unwrap()
    };
    let a = run(10);
    let b = run(20);
    let b_dec: Vec<f64> = b.samples().iter().skip(1).step_by(2).copied().collect();
    assert!(nrmse(&b_dec, a.samples()).unwrap() < 0.005);
}

#[test]
fn reproducible_and_non_negative() {
    let p = VcselParams { rin_std: 0.05, ..VcselParams::default_850() };
    let cfg = PamConfig::new(4, 28e9, 10, 6.0, vec![-6.0, -2.0, 2.0, 6.0]).unwrap();
    let d = symbols_to_drive(&random_symbols(200, 4, 1), &cfg).unwrap();
    let a = integrate(&p, &d, celsius(25.0), 5).unwrap();
    let b = integrate(&p, &d, celsius(25.0), 5).unwrap();
    assert_eq!(a, b);
    assert!(a.samples().iter().all(|&v| v >= 0.0));
}
