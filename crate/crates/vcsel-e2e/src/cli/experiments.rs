use std::collections::BTreeMap;
use std::sync::Arc;

use serde_json::{json, Value};

use super::artifacts::{temp_tag, Artifacts, Metrics};
use super::config::{AeChannel, ExperimentConfig, SurrogateKind};
use crate::channel::PdNoise;
use crate::compensate::{
    integrate_dump, linear_ffe_baseline, prune_equalizer, residual, train_dpd_dla, train_dpd_ila, train_equalizer,
    Detector, Predistorter, SymbolRecord,
};
use crate::e2e::{
    ae_train, backprop_train, ber_vs_snr, condition_on_temperature, de_train, equidistant_baseline, equidistant_levels,
    ser_vs_snr, theoretical_ser, Channel, IdentityLink, LinkReference, SurrogateLink, TrainChannel, TrainableReceiver,
    Transceiver, Transmitter,
};
use crate::error::Result;
use crate::nncore::{moving_average, to_json, Network};
use crate::seed;
use crate::signal::{
    eye_diagram, rail_levels, random_symbols, symbols_to_drive, vertical_opening, ErrorRateCurve, EyeDiagram, Waveform,
};
use crate::surrogate::{fit_tdnn, fit_volterra, validate, StimulusConfig, Surrogate, TdnnModel, VolterraModel};
use crate::vcsel::{
    figures_of_merit, integrate_with, numeric_s21, s21, small_signal, static_iv, PerturbationOptions, VcselParams,
};

pub(super) struct Run<'a> {
    pub cfg: &'a ExperimentConfig,
    pub vcsel: VcselParams,
    pub art: Artifacts,
    pub m: Metrics,
}

impl Run<'_> {
    fn seed(&self, label: &str) -> u64 {
        seed::derive(self.cfg.seed, label)
    }
}

const LOSS_STRIDE: usize = 10;

fn network_body(net: &Network) -> Value {
    serde_json::from_str(&to_json(net)).expect("network JSON round-trips")
}

fn loss_rows(traces: &[&[f64]]) -> Vec<Vec<f64>> {
    let n = traces.iter().map(|t| t.len()).max().unwrap_or(0);
    let avg: Vec<Vec<f64>> = traces.iter().map(|t| moving_average(t, 100)).collect();
    (0..n)
        .step_by(LOSS_STRIDE)
        .map(|i| {
            let mut row = vec![i as f64];
            row.extend(avg.iter().map(|a| a.get(i).copied().unwrap_or(f64::NAN)));
            row
        })
        .collect()
}

fn eye_columns(eye: &EyeDiagram) -> Vec<String> {
    (0..eye.width()).map(|k| format!("s{k}")).collect()
}

fn write_eye(art: &mut Artifacts, name: &str, units: &str, eye: &EyeDiagram, traces: usize) -> Result<()> {
    let cols = eye_columns(eye);
    let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
    art.csv(name, units, &cols, eye.traces.iter().take(traces).cloned())
}

/// Widest vertical eye opening over sampling offsets `0..max_offset`.
fn best_opening(y: &[f64], symbols: &[usize], order: usize, sps: usize, max_offset: usize) -> (f64, usize) {
    (0..max_offset).map(|o| (vertical_opening(y, symbols, order, sps, o), o)).fold((f64::NEG_INFINITY, 0), |a, b| {
        if b.0 > a.0 {
            b
        } else {
            a
        }
    })
}

/// Curve columns: rate, errors, counted per curve.
fn curve_rows(curves: &[&ErrorRateCurve]) -> Vec<Vec<f64>> {
    let n = curves.first().map_or(0, |c| c.len());
    (0..n)
        .map(|i| {
            let mut row = vec![curves[0].snr_db[i]];
            for c in curves {
                row.extend([c.rate[i], c.errors[i] as f64, c.counted[i] as f64]);
            }
            row
        })
        .collect()
}

fn curve_columns(prefix: &str, counted: &str, names: &[&str]) -> Vec<String> {
    let mut cols = vec!["snr_db".to_string()];
    for n in names {
        cols.extend([format!("{prefix}_{n}"), format!("errors_{n}"), format!("{counted}_{n}")]);
    }
    cols
}

/// SNR gain of `better` over `worse` at a target rate. When only `better`
/// reaches the target the gain is bounded below by the top of the grid.
fn gain_db(better: Option<f64>, worse: Option<f64>, grid_top: f64) -> (Option<f64>, bool) {
    match (better, worse) {
        (Some(b), Some(w)) => (Some(w - b), false),
        (Some(b), None) => (Some(grid_top - b), true),
        _ => (None, false),
    }
}

fn laser_reference(run: &Run<'_>, t_c: f64) -> Result<impl Fn(&Waveform) -> Result<Waveform> + Sync> {
    let mut link = run.cfg.link.clone();
    link.temperature_c = t_c;
    let opts = link.integrate_options(&run.vcsel)?;
    let t_amb = link.t_amb();
    let rin = run.seed("rin");
    let p = run.vcsel.clone();
    Ok(move |w: &Waveform| integrate_with(&p, w, t_amb, rin, &opts))
}

fn stimulus(run: &Run<'_>) -> StimulusConfig {
    let s = &run.cfg.surrogate;
    StimulusConfig {
        std_ma: s.std_ma,
        bias_ma: run.cfg.link.bias_ma,
        samples: s.samples,
        sample_rate: run.cfg.link.sample_rate(),
        seed: run.seed("stimulus"),
    }
}

fn fit_tdnn_at(run: &Run<'_>, t_c: f64) -> Result<(TdnnModel, Vec<f64>)> {
    let reference = laser_reference(run, t_c)?;
    let mut cfg = run.cfg.surrogate.tdnn.clone();
    cfg.train.seed = run.seed("tdnn");
    fit_tdnn(&reference, &stimulus(run), &cfg)
}

fn fit_volterra_model(run: &Run<'_>) -> Result<VolterraModel> {
    let s = &run.cfg.surrogate;
    let reference = laser_reference(run, run.cfg.link.temperature_c)?;
    fit_volterra(&reference, &stimulus(run), s.lag_start, s.memory)
}

fn pam_drive(run: &Run<'_>, n: usize, label: &str) -> Result<(Vec<usize>, Waveform)> {
    let pam = run.cfg.link.pam()?;
    let syms = random_symbols(n, pam.order, run.seed(label));
    let drive = symbols_to_drive(&syms, &pam)?;
    Ok((syms, drive))
}

pub(super) fn iv(run: &mut Run<'_>) -> Result<()> {
    let c = &run.cfg.iv;
    let step = c.i_max_ma / (c.points - 1) as f64;
    let currents: Vec<f64> = (0..c.points).map(|k| step * k as f64).collect();
    let mut per_t = BTreeMap::new();
    let mut last: Option<(f64, f64)> = None;
    let (mut roll_falls, mut peak_falls) = (true, true);
    for &t_c in &c.temperatures_c {
        let curve = static_iv(&run.vcsel, &currents, crate::vcsel::celsius(t_c))?;
        let fom = figures_of_merit(&curve)?;
        let peak = curve.power_mw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let rows = curve.csv_rows().zip(&fom.diff_resistance_ohm).map(|(mut r, d)| {
            r.push(*d);
            r
        });
        run.art.csv(
            &format!("ipv_{}.csv", temp_tag(t_c)),
            "current_ma=mA, power_mw=mW, voltage_v=V, diff_resistance_ohm=ohm",
            &["current_ma", "power_mw", "voltage_v", "diff_resistance_ohm"],
            rows,
        )?;
        let roll = fom.rollover_ma.unwrap_or(f64::INFINITY);
        if let Some((r0, p0)) = last {
            roll_falls &= roll < r0;
            peak_falls &= peak < p0;
        }
        last = Some((roll, peak));
        per_t.insert(
            temp_tag(t_c),
            json!({
                "threshold_ma": fom.threshold_ma,
                "slope_w_per_a": fom.slope_w_per_a,
                "rollover_ma": fom.rollover_ma,
                "peak_power_mw": peak,
            }),
        );
    }
    run.m.set("temperatures", per_t);
    run.m.set("rollover_decreases_with_temperature", roll_falls);
    run.m.set("peak_power_decreases_with_temperature", peak_falls);
    Ok(())
}

pub(super) fn s21_experiment(run: &mut Run<'_>) -> Result<()> {
    let c = &run.cfg.s21;
    let t_amb = run.cfg.link.t_amb();
    let f: Vec<f64> = (0..c.points).map(|k| c.f_max_hz * k as f64 / (c.points - 1) as f64).collect();
    let mut curves = Vec::new();
    let mut per_bias = Vec::new();
    for &ib in &c.bias_ma {
        let curve = s21(&run.vcsel, ib, t_amb, &f)?;
        let ss = small_signal(&run.vcsel, ib, t_amb)?;
        per_bias.push(json!({
            "bias_ma": ib,
            "f3db_hz": curve.f3db_hz,
            "peaking_db": curve.peaking_db,
            "f_r_hz": ss.f_r_hz,
            "damping_per_s": ss.gamma_per_s,
        }));
        curves.push(curve);
    }
    let mut cols = vec!["freq_hz".to_string()];
    cols.extend(c.bias_ma.iter().map(|b| format!("s21_db_{b}ma")));
    let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
    let rows = (0..f.len()).map(|k| {
        let mut r = vec![f[k]];
        r.extend(curves.iter().map(|cv| cv.s21_db[k]));
        r
    });
    run.art.csv("s21_analytic.csv", "freq_hz=Hz, s21=dB normalised to DC", &cols, rows)?;

    let f3: Vec<Option<f64>> = curves.iter().map(|cv| cv.f3db_hz).collect();
    let increasing = f3.windows(2).all(|w| matches!((w[0], w[1]), (Some(a), Some(b)) if b > a));
    run.m.set("curves", per_bias);
    run.m.set("f3db_increasing", increasing);
    run.m.set("last_peaking_db", curves.last().map(|c| c.peaking_db));

    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for &ib in &c.numeric_bias_ma {
        let ss = small_signal(&run.vcsel, ib, t_amb)?;
        let tones: Vec<f64> =
            (1..=c.numeric_points).map(|k| k as f64 * 1.5 * ss.f_r_hz / c.numeric_points as f64).collect();
        let num = numeric_s21(&run.vcsel, ib, t_amb, &tones, &PerturbationOptions::default())?;
        for (k, &fk) in tones.iter().enumerate() {
            let a = ss.s21_db(fk);
            worst = worst.max((num.s21_db[k] - a).abs());
            rows.push(vec![ib, fk, num.s21_db[k], a]);
        }
    }
    if !rows.is_empty() {
        run.art.csv(
            "s21_numeric.csv",
            "bias_ma=mA, freq_hz=Hz, s21=dB normalised to DC",
            &["bias_ma", "freq_hz", "numeric_db", "analytic_db"],
            rows,
        )?;
        run.m.set("numeric_max_deviation_db", worst);
    }
    Ok(())
}

pub(super) fn eye(run: &mut Run<'_>) -> Result<()> {
    let c = &run.cfg.eye;
    let l = &run.cfg.link;
    let noise = match c.snr_db {
        Some(snr_db) => PdNoise::Snr { snr_db, samples_per_symbol: l.sps },
        None => PdNoise::None,
    };
    let link = l.link(&run.vcsel, noise)?;
    let (syms, drive) = pam_drive(run, c.symbols, "symbols")?;
    let y = link.simulate(&drive, run.seed("link"))?;
    let skip = c.skip_symbols * l.sps;
    let kept = y.with_samples(y.samples()[skip..].to_vec())?;
    let diagram = eye_diagram(&kept, l.sps, c.span_ui)?;
    write_eye(
        &mut run.art,
        "eye.csv",
        "photocurrent mA; row = one trace, column s<k> = sample k of the window",
        &diagram,
        usize::MAX,
    )?;
    let n_wave = (200 * l.sps).min(kept.len());
    let rows = (0..n_wave).map(|k| vec![k as f64 / l.sample_rate(), drive.samples()[skip + k], kept.samples()[k]]);
    run.art.csv(
        "waveform.csv",
        "time_s=s, drive_ma=mA, photocurrent_ma=mA",
        &["time_s", "drive_ma", "photocurrent_ma"],
        rows,
    )?;

    let (opening, offset) = best_opening(y.samples(), &syms, l.order(), l.sps, 8 * l.sps);
    let samples: Vec<f64> =
        (c.skip_symbols..syms.len()).filter_map(|k| y.samples().get(k * l.sps + offset).copied()).collect();
    run.m.set("vertical_opening_ma", opening);
    run.m.set("sampling_offset_samples", offset);
    run.m.set("rail_levels_ma", rail_levels(&samples, l.order()));
    run.m.set("mean_photocurrent_ma", y.mean());
    Ok(())
}

struct FitOutcome {
    nrmse: f64,
    r_squared: f64,
    output: Waveform,
    eye: EyeDiagram,
}

fn validate_model(
    run: &Run<'_>,
    model: &dyn Surrogate,
    drive: &Waveform,
    describe: &str,
) -> Result<(FitOutcome, Waveform, EyeDiagram)> {
    let reference = laser_reference(run, run.cfg.link.temperature_c)?;
    let test = format!(
        "PAM-{} at {} GBd, {} symbols",
        run.cfg.link.order(),
        run.cfg.link.baud * 1e-9,
        run.cfg.surrogate.test_symbols
    );
    let v = validate(|w| model.eval_waveform(w), model.warmup(), &reference, drive, run.cfg.link.sps, describe, &test)?;
    Ok((
        FitOutcome { nrmse: v.report.nrmse, r_squared: v.report.r_squared, output: v.model_output, eye: v.model_eye },
        v.reference_output,
        v.reference_eye,
    ))
}

fn volterra_files(run: &mut Run<'_>, m: &VolterraModel) -> Result<()> {
    let h1 = m.h1.iter().enumerate().map(|(i, v)| vec![(m.lag_start + i) as f64, *v]);
    run.art.csv("volterra_h1.csv", "lag_samples=samples, h1=mW/mA", &["lag_samples", "h1"], h1)?;
    let cols: Vec<String> = (0..m.memory()).map(|j| format!("lag{}", m.lag_start + j)).collect();
    let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
    run.art.csv("volterra_h2.csv", "h2=mW/mA^2; row i, column j = h2 at lags (i, j)", &cols, m.h2_rows())
}

fn waveform_rows(
    run: &Run<'_>,
    skip: usize,
    drive: &Waveform,
    reference: &Waveform,
    models: &[&Waveform],
) -> Vec<Vec<f64>> {
    let n = run.cfg.surrogate.export_samples.min(drive.len().saturating_sub(skip));
    (skip..skip + n)
        .map(|k| {
            let mut r = vec![k as f64, drive.samples()[k], reference.samples()[k]];
            r.extend(models.iter().map(|w| w.samples()[k]));
            r
        })
        .collect()
}

pub(super) fn fit_volterra_experiment(run: &mut Run<'_>) -> Result<()> {
    let stim = stimulus(run);
    let model = fit_volterra_model(run)?;
    let (_, drive) = pam_drive(run, run.cfg.surrogate.test_symbols, "test")?;
    let (fit, ref_out, ref_eye) = validate_model(run, &model, &drive, &stim.describe())?;
    volterra_files(run, &model)?;
    let rows = waveform_rows(run, model.warmup(), &drive, &ref_out, &[&fit.output]);
    run.art.csv(
        "fit_waveform.csv",
        "sample=index, drive_ma=mA, power=mW",
        &["sample", "drive_ma", "reference_mw", "volterra_mw"],
        rows,
    )?;
    write_eye(&mut run.art, "eye_reference.csv", "optical power mW; row = one trace", &ref_eye, 300)?;
    write_eye(&mut run.art, "eye_volterra.csv", "optical power mW; row = one trace", &fit.eye, 300)?;
    run.m.set("nrmse", fit.nrmse);
    run.m.set("r_squared", fit.r_squared);
    run.m.set("h0_mw", model.h0);
    run.m.set("memory", model.memory());
    run.m.set("stimulus", stim.describe());
    Ok(())
}

fn tdnn_body(m: &TdnnModel) -> Value {
    json!({
        "delays": m.delays,
        "x_mean": m.x_mean,
        "x_std": m.x_std,
        "y_mean": m.y_mean,
        "y_std": m.y_std,
        "sample_rate": m.sample_rate,
        "network": network_body(&m.net),
    })
}

pub(super) fn fit_tdnn_experiment(run: &mut Run<'_>) -> Result<()> {
    let stim = stimulus(run);
    let volterra = fit_volterra_model(run)?;
    let (tdnn, trace) = fit_tdnn_at(run, run.cfg.link.temperature_c)?;
    let (_, drive) = pam_drive(run, run.cfg.surrogate.test_symbols, "test")?;
    let (fv, ref_out, ref_eye) = validate_model(run, &volterra, &drive, &stim.describe())?;
    let (ft, _, _) = validate_model(run, &tdnn, &drive, &stim.describe())?;
    run.art.csv(
        "tdnn_loss.csv",
        "standardised MSE, 100-step moving average",
        &["step", "loss"],
        loss_rows(&[&trace]),
    )?;
    run.art.json(
        "tdnn_model.json",
        "inputs mA, output mW; standardisation stored with the network",
        &tdnn_body(&tdnn),
    )?;
    let skip = volterra.warmup().max(tdnn.warmup());
    let rows = waveform_rows(run, skip, &drive, &ref_out, &[&fv.output, &ft.output]);
    run.art.csv(
        "fit_waveform.csv",
        "sample=index, drive_ma=mA, power=mW",
        &["sample", "drive_ma", "reference_mw", "volterra_mw", "tdnn_mw"],
        rows,
    )?;
    write_eye(&mut run.art, "eye_reference.csv", "optical power mW; row = one trace", &ref_eye, 300)?;
    write_eye(&mut run.art, "eye_tdnn.csv", "optical power mW; row = one trace", &ft.eye, 300)?;
    run.m.set("tdnn_nrmse", ft.nrmse);
    run.m.set("tdnn_r_squared", ft.r_squared);
    run.m.set("volterra_nrmse", fv.nrmse);
    run.m.set("volterra_r_squared", fv.r_squared);
    run.m.set("tdnn_beats_volterra", ft.nrmse <= fv.nrmse);
    run.m.set("stimulus", stim.describe());
    Ok(())
}

pub(super) fn equalizer(run: &mut Run<'_>) -> Result<()> {
    let e = &run.cfg.equalizer;
    let l = &run.cfg.link;
    let link = l.link(&run.vcsel, PdNoise::None)?;
    let pam = l.pam()?;
    let syms = random_symbols(e.symbols, pam.order, run.seed("symbols"));
    let rec = SymbolRecord::from_link(&link, &pam, syms, run.seed("link"))?;
    let mut cfg = e.network.clone();
    cfg.train.seed = run.seed("equalizer");
    let u = rec.usable(cfg.window);
    let train = u.start..e.train_symbols;
    let validation = e.train_symbols..e.train_symbols + e.validation_symbols;
    let test = validation.end..u.end;

    let (nn, trace) = train_equalizer(&rec, train.clone(), &cfg)?;
    let ffe = linear_ffe_baseline(&rec, train.clone(), &cfg)?;
    let none = integrate_dump(&rec, train.clone(), cfg.window)?;
    let mut pruned = nn.clone();
    let pr = prune_equalizer(&mut pruned, &rec, train, validation, &cfg, &e.prune)?;

    let grid = run.cfg.sweep.grid(8.0, 26.0, 1.0);
    let budget = run.cfg.sweep.budget();
    let detectors: [(&str, &dyn Detector); 4] = [("none", &none), ("ffe", &ffe), ("nn", &nn), ("pruned", &pruned)];
    let curves: Vec<ErrorRateCurve> = detectors
        .iter()
        .map(|(name, d)| {
            ber_vs_snr(*d, &rec, test.clone(), &pam.labels, &grid, &budget, run.seed(&format!("sweep-{name}")))
        })
        .collect();
    let names: Vec<&str> = detectors.iter().map(|d| d.0).collect();
    let cols = curve_columns("ber", "bits", &names);
    let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
    let refs: Vec<&ErrorRateCurve> = curves.iter().collect();
    run.art.csv("ber.csv", "snr_db=dB, ber=fraction, errors and bits=counts", &cols, curve_rows(&refs))?;
    run.art.csv("train_loss.csv", "cross-entropy, 100-step moving average", &["step", "loss"], loss_rows(&[&trace]))?;
    run.art.json("equalizer.json", "input: normalised received samples", &network_body(&nn.net))?;
    run.art.json("equalizer_pruned.json", "input: normalised received samples", &network_body(&pruned.net))?;

    let target = 1e-4;
    let at: Vec<Option<f64>> = curves.iter().map(|c| c.snr_at(target)).collect();
    let top = *grid.last().unwrap_or(&0.0);
    let (g_none, bound) = gain_db(at[2], at[0], top);
    let (g_ffe, ffe_bound) = gain_db(at[2], at[1], top);
    let mut snr = BTreeMap::new();
    for (n, a) in names.iter().zip(&at) {
        snr.insert(*n, *a);
    }
    run.m.set("target_ber", target);
    run.m.set("snr_at_target_db", snr);
    run.m.set("sensitivity_gain_db", g_none);
    run.m.set("sensitivity_gain_is_lower_bound", bound);
    run.m.set("gain_over_ffe_db", g_ffe);
    run.m.set("gain_over_ffe_is_lower_bound", ffe_bound);
    run.m.set("pruning_penalty_db", at[3].zip(at[2]).map(|(p, n)| p - n));
    run.m.set("multiplies_before", pr.multiplies_before);
    run.m.set("multiplies_after", pr.multiplies_after);
    run.m.set("multiply_reduction", pr.multiplies_before as f64 / pr.multiplies_after.max(1) as f64);
    run.m.set("sparsity", pr.sparsity);
    run.m.set("prune_validation_loss", &pr.validation_loss);
    run.m.set("prune_chosen_restart", pr.chosen);
    run.m.set("link_delay_samples", rec.delay);
    Ok(())
}

fn fir_transmitter(taps: &[f64]) -> impl Fn(&[f64]) -> Result<Vec<f64>> + Sync + '_ {
    move |x: &[f64]| {
        Ok((0..x.len())
            .map(|n| taps.iter().enumerate().filter(|(k, _)| *k <= n).map(|(k, t)| t * x[n - k]).sum())
            .collect())
    }
}

fn predistorter_body(p: &Predistorter) -> Value {
    json!({
        "half_width": p.half_width,
        "x_mean": p.x_mean,
        "x_scale": p.x_scale,
        "network": network_body(&p.net),
    })
}

pub(super) fn dpd(run: &mut Run<'_>) -> Result<()> {
    let d = &run.cfg.dpd;
    let l = &run.cfg.link;
    let mut cfg = d.network.clone();
    cfg.train.seed = run.seed("dpd");
    let (_, x) = pam_drive(run, d.train_symbols, "train")?;
    let (test_syms, xt) = pam_drive(run, d.test_symbols, "test")?;
    let (x, xt) = (x.samples(), xt.samples());

    let fir = fir_transmitter(&d.fir_taps);
    let (pf, tf, _) = train_dpd_ila(&fir, x, &cfg)?;
    let skip_fir = 100;
    let fir_none = residual(&fir(xt)?, xt, &tf, skip_fir);
    let fir_ila = residual(&fir(&pf.apply(xt))?, xt, &tf, skip_fir);

    let model: Box<dyn Surrogate> = match d.surrogate {
        SurrogateKind::Volterra => Box::new(fit_volterra_model(run)?),
        SurrogateKind::Tdnn => Box::new(fit_tdnn_at(run, l.temperature_c)?.0),
    };
    let reference = laser_reference(run, l.temperature_c)?;
    let wave = Waveform::new(l.sample_rate(), x.to_vec())?;
    let truth = |s: &[f64]| -> Result<Vec<f64>> { Ok(reference(&wave.with_samples(s.to_vec())?)?.into_samples()) };
    let sur = |s: &[f64]| -> Result<Vec<f64>> { Ok(model.eval(s)) };

    let (pi, _, ila_trace) = train_dpd_ila(&sur, x, &cfg)?;
    let (pd, td, dla_trace) = train_dpd_dla(model.as_ref(), x, &cfg, None)?;
    let (pt, tt, _) = train_dpd_ila(&truth, x, &cfg)?;
    let skip = (model.warmup() + cfg.half_width + td.latency).max(100);

    let (y_none, y_ila, y_dla, y_ila_true) =
        (truth(xt)?, truth(&pi.apply(xt))?, truth(&pd.apply(xt))?, truth(&pt.apply(xt))?);
    let r = |y: &[f64]| residual(y, xt, &td, skip);
    let mut surrogate = BTreeMap::new();
    surrogate.insert("none", residual(&sur(xt)?, xt, &td, skip));
    surrogate.insert("ila", residual(&sur(&pi.apply(xt))?, xt, &td, skip));
    surrogate.insert("dla", residual(&sur(&pd.apply(xt))?, xt, &td, skip));
    let mut laser = BTreeMap::new();
    laser.insert("none", r(&y_none));
    laser.insert("ila", r(&y_ila));
    laser.insert("dla", r(&y_dla));
    laser.insert("ila_trained_on_laser", residual(&y_ila_true, xt, &tt, skip));

    let k0 = skip.div_ceil(l.sps);
    let eye = |y: &[f64]| best_opening(&y[k0 * l.sps..], &test_syms[k0..], l.order(), l.sps, td.latency + l.sps).0;
    let mut eyes = BTreeMap::new();
    eyes.insert("none", eye(&y_none));
    eyes.insert("ila", eye(&y_ila));
    eyes.insert("dla", eye(&y_dla));
    eyes.insert("ila_trained_on_laser", eye(&y_ila_true));

    let desired = td.desired(xt);
    let n = run.cfg.surrogate.export_samples.min(xt.len().saturating_sub(skip));
    let rows = (skip..skip + n).map(|k| vec![k as f64, xt[k], desired[k], y_none[k], y_ila[k], y_dla[k]]);
    run.art.csv(
        "dpd_waveform.csv",
        "sample=index, drive_ma=mA, power=mW (rate-equation laser)",
        &["sample", "drive_ma", "desired_mw", "none_mw", "ila_mw", "dla_mw"],
        rows,
    )?;
    run.art.csv(
        "dpd_loss.csv",
        "MSE in standardised units, 100-step moving average",
        &["step", "ila_loss", "dla_loss"],
        loss_rows(&[&ila_trace, &dla_trace]),
    )?;
    run.art.json("predistorter_ila.json", "input and output: drive current mA", &predistorter_body(&pi))?;
    run.art.json("predistorter_dla.json", "input and output: drive current mA", &predistorter_body(&pd))?;

    run.m.set("fir_residual_none", fir_none);
    run.m.set("fir_residual_ila", fir_ila);
    run.m.set("fir_reduction", fir_none / fir_ila);
    run.m.set("surrogate", d.surrogate);
    run.m.set("surrogate_residual", surrogate);
    run.m.set("laser_residual", laser);
    run.m.set("laser_eye_opening_mw", eyes);
    run.m.set("target_latency_samples", td.latency);
    run.m.set("target_gain_mw_per_ma", td.gain);
    Ok(())
}

fn ae_link(run: &Run<'_>, t_c: f64) -> Result<Box<dyn Channel>> {
    let l = &run.cfg.link;
    Ok(match run.cfg.ae.channel {
        AeChannel::Awgn => Box::new(IdentityLink { sps: l.sps }),
        AeChannel::Surrogate => {
            let (tdnn, _) = fit_tdnn_at(run, t_c)?;
            Box::new(SurrogateLink::new(Arc::new(tdnn), l.bias_ma, l.sps, &l.fiber, l.responsivity_a_per_w)?)
        }
    })
}

struct AeEval {
    ae: ErrorRateCurve,
    equidistant: ErrorRateCurve,
}

fn ae_evaluate(
    run: &Run<'_>,
    channel: &dyn Channel,
    ae: &Transceiver,
    eq: &Transceiver,
    t_c: Option<f64>,
    grid: &[f64],
) -> Result<AeEval> {
    let reference = LinkReference::measure(channel, &ae.cfg)?;
    let budget = run.cfg.sweep.budget();
    let curve = |t: &Transceiver, label: &str| -> Result<ErrorRateCurve> {
        let rec = t.record(channel, &reference, t_c, run.cfg.ae.eval_symbols, run.seed("eval"))?;
        let det = t.detector(t_c);
        let range = rec.usable(det.window_len());
        Ok(ber_vs_snr(&det, &rec, range, &t.labels(t_c), grid, &budget, run.seed(label)))
    };
    Ok(AeEval { ae: curve(ae, "sweep-ae")?, equidistant: curve(eq, "sweep-equidistant")? })
}

fn gap_spread(levels: &[f64]) -> f64 {
    let mut v = levels.to_vec();
    v.sort_by(f64::total_cmp);
    let gaps: Vec<f64> = v.windows(2).map(|w| w[1] - w[0]).collect();
    let mean = gaps.iter().sum::<f64>() / gaps.len().max(1) as f64;
    let (lo, hi) = gaps.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &g| (a.min(g), b.max(g)));
    (hi - lo) / mean
}

const AE_TARGET: f64 = 1e-3;

pub(super) fn ae(run: &mut Run<'_>) -> Result<()> {
    let t_c = run.cfg.link.temperature_c;
    let channel = ae_link(run, t_c)?;
    let mut cfg = run.cfg.ae.network.clone();
    cfg.seed = run.seed("ae");
    let ch = [TrainChannel { temperature_c: t_c, channel: channel.as_ref() }];
    let (ae, ae_trace) = ae_train(&ch, &cfg)?;
    let (eq, eq_trace) = equidistant_baseline(&ch, &cfg)?;
    let grid = run.cfg.sweep.grid(4.0, 26.0, 1.0);
    let ev = ae_evaluate(run, channel.as_ref(), &ae, &eq, None, &grid)?;

    let cols = curve_columns("ber", "bits", &["ae", "equidistant"]);
    let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
    run.art.csv(
        "ber.csv",
        "snr_db=dB relative to the equidistant received AC power, ber=fraction",
        &cols,
        curve_rows(&[&ev.ae, &ev.equidistant]),
    )?;
    let (lv, lq) = (ae.levels(None), equidistant_levels(&cfg));
    let labels = ae.labels(None);
    let m = cfg.channel_uses;
    let rows = (0..lv.len()).map(|i| vec![(i / m) as f64, (i % m) as f64, labels[i / m] as f64, lv[i], lq[i]]);
    run.art.csv(
        "levels.csv",
        "levels = drive deviation from bias, mA",
        &["message", "use", "label", "ae_ma", "equidistant_ma"],
        rows,
    )?;
    run.art.csv(
        "train_loss.csv",
        "cross-entropy, 100-step moving average",
        &["step", "ae", "equidistant"],
        loss_rows(&[&ae_trace, &eq_trace]),
    )?;
    if let Transmitter::Learned(enc) = &ae.transmitter {
        run.art.json("encoder.json", "input: one-hot message; output before normalisation", &network_body(enc))?;
    }
    run.art.json("decoder.json", "input: normalised received samples", &network_body(&ae.decoder))?;

    let (a, e) = (ev.ae.snr_at(AE_TARGET), ev.equidistant.snr_at(AE_TARGET));
    let (gain, bound) = gain_db(a, e, *grid.last().unwrap_or(&0.0));
    run.m.set("channel", run.cfg.ae.channel);
    run.m.set("temperature_c", t_c);
    run.m.set("target_ber", AE_TARGET);
    run.m.set("snr_ae_db", a);
    run.m.set("snr_equidistant_db", e);
    run.m.set("ae_gain_db", gain);
    run.m.set("ae_gain_is_lower_bound", bound);
    run.m.set("ae_levels_ma", ae.sorted_levels(None));
    run.m.set("equidistant_levels_ma", eq.sorted_levels(None));
    run.m.set("ae_gap_spread", gap_spread(&lv));
    Ok(())
}

pub(super) fn ae_temp(run: &mut Run<'_>) -> Result<()> {
    let a = &run.cfg.ae;
    let mut temps: Vec<f64> = a.train_temperatures_c.iter().chain(&a.eval_temperatures_c).copied().collect();
    temps.sort_by(f64::total_cmp);
    temps.dedup();
    let links: Vec<(f64, Box<dyn Channel>)> =
        temps.iter().map(|&t| Ok((t, ae_link(run, t)?))).collect::<Result<_>>()?;
    let find = |t: f64| links.iter().find(|(u, _)| *u == t).map(|(_, c)| c.as_ref()).expect("link fitted");

    let mut cfg = condition_on_temperature(&a.network, &a.train_temperatures_c)?;
    cfg.seed = run.seed("ae");
    let ch: Vec<TrainChannel<'_>> =
        a.train_temperatures_c.iter().map(|&t| TrainChannel { temperature_c: t, channel: find(t) }).collect();
    let (ae, ae_trace) = ae_train(&ch, &cfg)?;
    let (eq, eq_trace) = equidistant_baseline(&ch, &cfg)?;
    run.art.csv(
        "train_loss.csv",
        "cross-entropy, 100-step moving average",
        &["step", "ae", "equidistant"],
        loss_rows(&[&ae_trace, &eq_trace]),
    )?;

    let grid = run.cfg.sweep.grid(4.0, 26.0, 1.0);
    let top = *grid.last().unwrap_or(&0.0);
    let mut per_t = BTreeMap::new();
    let mut level_rows = Vec::new();
    for &t in &a.eval_temperatures_c {
        let ev = ae_evaluate(run, find(t), &ae, &eq, Some(t), &grid)?;
        let cols = curve_columns("ber", "bits", &["ae", "equidistant"]);
        let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
        run.art.csv(
            &format!("ber_{}.csv", temp_tag(t)),
            "snr_db=dB relative to the equidistant received AC power, ber=fraction",
            &cols,
            curve_rows(&[&ev.ae, &ev.equidistant]),
        )?;
        for (i, v) in ae.levels(Some(t)).iter().enumerate() {
            level_rows.push(vec![t, i as f64, *v]);
        }
        let (sa, se) = (ev.ae.snr_at(AE_TARGET), ev.equidistant.snr_at(AE_TARGET));
        let (gain, bound) = gain_db(sa, se, top);
        per_t.insert(
            temp_tag(t),
            json!({
                "trained": a.train_temperatures_c.contains(&t),
                "snr_ae_db": sa,
                "snr_equidistant_db": se,
                "ae_gain_db": gain,
                "ae_gain_is_lower_bound": bound,
                "ae_levels_ma": ae.sorted_levels(Some(t)),
            }),
        );
    }
    run.art.csv(
        "levels.csv",
        "temperature_c=C, level=drive deviation from bias mA",
        &["temperature_c", "index", "ae_ma"],
        level_rows,
    )?;
    if let Transmitter::Learned(enc) = &ae.transmitter {
        run.art.json("encoder.json", "input: one-hot message and normalised temperature", &network_body(enc))?;
    }
    run.art.json(
        "decoder.json",
        "input: normalised received samples and normalised temperature",
        &network_body(&ae.decoder),
    )?;
    run.m.set("target_ber", AE_TARGET);
    run.m.set("train_temperatures_c", &a.train_temperatures_c);
    run.m.set("temperatures", per_t);
    Ok(())
}

/// SNR (dB) at which the closed-form SER equals `target`.
pub fn theoretical_snr_at(order: usize, target: f64) -> f64 {
    let (mut lo, mut hi) = (-20.0, 60.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if theoretical_ser(order, mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub const DE_TARGETS: [f64; 5] = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3];

pub(super) fn de_receiver(run: &mut Run<'_>) -> Result<()> {
    let d = &run.cfg.de;
    let order = d.levels.len();
    let syms = random_symbols(d.symbols, order, run.seed("symbols"));
    let raw: Vec<f64> = syms.iter().flat_map(|&s| std::iter::repeat_n(d.levels[s], d.sps)).collect();
    let rec = SymbolRecord::new(&raw, syms, order, d.sps, 2 * d.sps)?;
    let mut cfg = d.receiver.clone();
    cfg.de.seed = run.seed("de");
    cfg.backprop.seed = run.seed("backprop");
    let rx = TrainableReceiver::new(&cfg, d.sps, order, run.seed("receiver-init"))?;
    let u = rec.usable(rx.window_len());
    let train = u.start..d.train_symbols;
    let test = d.train_symbols..u.end;
    let (de_rx, res) = de_train(&rx, &rec, train.clone(), &cfg)?;
    let (bp_rx, trace) = backprop_train(&rx, &rec, train, &cfg)?;

    let grid = run.cfg.sweep.grid(4.0, 18.0, 0.5);
    let budget = run.cfg.sweep.budget();
    let c_de = ser_vs_snr(&de_rx, &rec, test.clone(), &grid, &budget, run.seed("sweep-de"));
    let c_bp = ser_vs_snr(&bp_rx, &rec, test, &grid, &budget, run.seed("sweep-backprop"));
    let mut cols = curve_columns("ser", "symbols", &["de", "backprop"]);
    cols.push("ser_theory".into());
    let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
    let rows = curve_rows(&[&c_de, &c_bp]).into_iter().map(|mut r| {
        r.push(theoretical_ser(order, r[0]));
        r
    });
    run.art.csv("ser.csv", "snr_db=dB, ser=fraction, errors and symbols=counts", &cols, rows)?;
    let hist = res.history.iter().enumerate().map(|(g, f)| vec![g as f64, *f]);
    run.art.csv(
        "de_history.csv",
        "population-best cross-entropy per generation",
        &["generation", "best_fitness"],
        hist,
    )?;
    run.art.csv(
        "backprop_loss.csv",
        "cross-entropy, 100-step moving average",
        &["step", "loss"],
        loss_rows(&[&trace]),
    )?;
    let fir = de_rx.fir.iter().zip(&bp_rx.fir).enumerate().map(|(i, (a, b))| vec![i as f64, *a, *b]);
    run.art.csv("fir.csv", "taps on normalised samples", &["tap", "de", "backprop"], fir)?;

    let mut points = Vec::new();
    let (mut dev_theory, mut dev_twin, mut bp_theory) = (Some(0.0f64), Some(0.0f64), Some(0.0f64));
    for t in DE_TARGETS {
        let th = theoretical_snr_at(order, t);
        let (sd, sb) = (c_de.snr_at(t), c_bp.snr_at(t));
        dev_theory = dev_theory.zip(sd).map(|(m, s)| m.max((s - th).abs()));
        dev_twin = dev_twin.zip(sd.zip(sb)).map(|(m, (a, b))| m.max((a - b).abs()));
        bp_theory = bp_theory.zip(sb).map(|(m, s)| m.max((s - th).abs()));
        points.push(json!({ "ser": t, "theory_db": th, "de_db": sd, "backprop_db": sb }));
    }
    run.m.set("points", points);
    run.m.set("de_max_deviation_from_theory_db", dev_theory);
    run.m.set("de_max_deviation_from_backprop_db", dev_twin);
    run.m.set("backprop_max_deviation_from_theory_db", bp_theory);
    run.m.set("de_best_fitness", res.best_fitness);
    run.m.set("de_generations", res.history.len());
    run.m.set("de_population", cfg.de.population_for(rx.param_count()));
    run.m.set("parameters", rx.param_count());
    Ok(())
}
