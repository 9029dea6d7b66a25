use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::link::Channel;
use crate::compensate::record::peak_lag;
use crate::compensate::{detect_chunk, detect_chunk_ser, Detector, SymbolRecord};
use crate::error::{invalid, Error, Result};
use crate::nncore::{argmax, one_hot, Activation, Gradients, Network, Optimizer, OptimizerKind, Trace};
use crate::seed;
use crate::signal::{gray_labels, ErrorRateCurve};
use crate::sweep::{error_rate_curve, Budget};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Mean square drive deviation over the equiprobable constellation.
    AveragePower,
    /// Largest absolute drive deviation.
    PeakAmplitude,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AeConfig {
    /// Number of messages S.
    pub messages: usize,
    /// Channel uses M per message.
    pub channel_uses: usize,
    pub encoder_hidden: usize,
    /// Hidden ReLU units in the decoder; 0 for a single softmax layer.
    pub decoder_hidden: usize,
    /// Decoder window length in messages.
    pub window_symbols: usize,
    pub normalization: Normalization,
    /// mA^2 for average power, mA for peak amplitude.
    pub power: f64,
    /// Messages per training sequence.
    pub sequence_len: usize,
    /// Sequences per step.
    pub batch: usize,
    pub train_snr_db: f64,
    pub steps: usize,
    pub learning_rate: f64,
    /// Learning rate for the last third of the steps.
    pub final_learning_rate: Option<f64>,
    pub seed: u64,
    /// Training temperatures in degrees C; empty for an unconditioned model.
    pub temperatures_c: Vec<f64>,
}

impl Default for AeConfig {
    fn default() -> Self {
        Self {
            messages: 4,
            channel_uses: 1,
            encoder_hidden: 16,
            decoder_hidden: 0,
            window_symbols: 2,
            normalization: Normalization::AveragePower,
            power: 11.25,
            sequence_len: 64,
            batch: 32,
            train_snr_db: 14.0,
            steps: 4000,
            learning_rate: 3e-3,
            final_learning_rate: None,
            seed: 0,
            temperatures_c: Vec::new(),
        }
    }
}

impl AeConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.messages < 2 {
            v.push(format!("messages must be at least 2 (got {})", self.messages));
        }
        if self.channel_uses == 0 {
            v.push("channel_uses must be at least 1".into());
        }
        if self.encoder_hidden == 0 {
            v.push("encoder_hidden must be at least 1".into());
        }
        if self.window_symbols == 0 {
            v.push("window_symbols must be at least 1".into());
        }
        if !(self.power > 0.0 && self.power.is_finite()) {
            v.push(format!("power must be positive (got {})", self.power));
        }
        if self.sequence_len < self.window_symbols + 2 {
            v.push("sequence_len must exceed window_symbols + 1".into());
        }
        if self.batch == 0 {
            v.push("batch must be at least 1".into());
        }
        if self.train_snr_db.is_nan() {
            v.push("train_snr_db must be a number".into());
        }
        if !(self.learning_rate > 0.0) {
            v.push(format!("learning_rate must be positive (got {})", self.learning_rate));
        }
        if let Some(lr) = self.final_learning_rate.filter(|lr| !(*lr > 0.0)) {
            v.push(format!("final_learning_rate must be positive (got {lr})"));
        }
        if self.temperatures_c.iter().any(|t| !t.is_finite()) {
            v.push("temperatures_c must be finite".into());
        }
        v
    }

    fn check(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(invalid(v.join("; ")))
        }
    }

    pub fn conditioned(&self) -> bool {
        !self.temperatures_c.is_empty()
    }

    /// Normalised temperature input `(T - T_mid) / T_half` over the training
    /// set; `None` for unconditioned models.
    pub fn temperature_feature(&self, t_c: f64) -> Option<f64> {
        let (lo, hi) =
            self.temperatures_c.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &t| (a.min(t), b.max(t)));
        if !lo.is_finite() {
            return None;
        }
        let half = if hi > lo { 0.5 * (hi - lo) } else { 1.0 };
        Some((t_c - 0.5 * (hi + lo)) / half)
    }

    fn extra(&self) -> usize {
        self.conditioned() as usize
    }

    /// Samples in the decoder window.
    pub fn window_len(&self, sps: usize) -> usize {
        self.window_symbols * self.channel_uses * sps
    }
}

/// Adds the temperature feature to a copy of `cfg`.
pub fn condition_on_temperature(cfg: &AeConfig, temperatures_c: &[f64]) -> Result<AeConfig> {
    if temperatures_c.is_empty() {
        return Err(invalid("conditioning needs at least one temperature"));
    }
    Ok(AeConfig { temperatures_c: temperatures_c.to_vec(), ..cfg.clone() })
}

/// Evenly spaced levels meeting the configured power constraint; the same
/// level is repeated on every channel use of a message.
pub fn equidistant_levels(cfg: &AeConfig) -> Vec<f64> {
    let s = cfg.messages;
    let raw: Vec<f64> = (0..s).map(|i| 2.0 * i as f64 - (s - 1) as f64).collect();
    let raw: Vec<f64> = raw.iter().flat_map(|&v| std::iter::repeat_n(v, cfg.channel_uses)).collect();
    normalize(&raw, cfg)
}

fn normalize(raw: &[f64], cfg: &AeConfig) -> Vec<f64> {
    let k = match cfg.normalization {
        Normalization::AveragePower => {
            let p = raw.iter().map(|v| v * v).sum::<f64>() / raw.len() as f64;
            (cfg.power / p).sqrt()
        }
        Normalization::PeakAmplitude => cfg.power / raw.iter().fold(0.0f64, |m, v| m.max(v.abs())),
    };
    raw.iter().map(|v| v * k).collect()
}

fn normalize_backward(raw: &[f64], g: &[f64], cfg: &AeConfig) -> Vec<f64> {
    match cfg.normalization {
        Normalization::AveragePower => {
            let n = raw.len() as f64;
            let p = raw.iter().map(|v| v * v).sum::<f64>() / n;
            let k = (cfg.power / p).sqrt();
            let dot: f64 = raw.iter().zip(g).map(|(a, b)| a * b).sum();
            raw.iter().zip(g).map(|(&r, &gi)| k * (gi - r * dot / (n * p))).collect()
        }
        Normalization::PeakAmplitude => {
            let j = (0..raw.len()).max_by(|&a, &b| raw[a].abs().total_cmp(&raw[b].abs())).expect("non-empty");
            let m = raw[j].abs();
            let dot: f64 = raw.iter().zip(g).map(|(a, b)| a * b).sum();
            let mut out: Vec<f64> = g.iter().map(|gi| cfg.power / m * gi).collect();
            out[j] -= cfg.power / (m * m) * raw[j].signum() * dot;
            out
        }
    }
}

/// Received-signal normalisation and alignment measured with the
/// equidistant constellation. SNR everywhere refers to `p_ac`, so learned and
/// equidistant transmitters see the same noise at the same SNR.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinkReference {
    pub offset: f64,
    pub p_ac: f64,
    /// Samples from a message's start to its arrival.
    pub delay: usize,
}

impl LinkReference {
    pub fn measure(channel: &dyn Channel, cfg: &AeConfig) -> Result<Self> {
        cfg.check()?;
        let lv = equidistant_levels(cfg);
        let m = cfg.channel_uses;
        let msgs = crate::signal::random_symbols(4000, cfg.messages, seed::derive(cfg.seed, "reference"));
        let levels: Vec<f64> = msgs.iter().flat_map(|&s| lv[s * m..(s + 1) * m].iter().copied()).collect();
        let rx = channel.transmit(&levels)?;
        let sps = channel.sps();
        let offset = crate::signal::mean(&rx);
        let p_ac = crate::signal::variance(&rx);
        if !(p_ac > 0.0) {
            return Err(invalid("channel output carries no signal"));
        }
        let tx: Vec<f64> = levels.iter().flat_map(|&v| std::iter::repeat_n(v, sps)).collect();
        let rx_ac: Vec<f64> = rx.iter().map(|v| v - offset).collect();
        let delay = peak_lag(&tx, &rx_ac, 8 * sps * m);
        Ok(Self { offset, p_ac, delay })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Transmitter {
    /// One-hot message (plus temperature) -> ReLU -> linear, then normalised.
    Learned(Network),
    /// Fixed levels, `messages * channel_uses` values.
    Fixed(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transceiver {
    pub cfg: AeConfig,
    pub transmitter: Transmitter,
    pub decoder: Network,
}

fn encoder_input(cfg: &AeConfig, s: usize, feature: Option<f64>) -> Vec<f64> {
    let mut x = one_hot(s, cfg.messages);
    x.extend(feature);
    x
}

impl Transceiver {
    /// Drive deviations per message (`messages * channel_uses`, message
    /// major) at temperature `t_c`.
    pub fn levels(&self, t_c: Option<f64>) -> Vec<f64> {
        tr_levels(self, t_c.and_then(|t| self.cfg.temperature_feature(t)))
    }

    pub fn sorted_levels(&self, t_c: Option<f64>) -> Vec<f64> {
        let mut v = self.levels(t_c);
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn detector(&self, t_c: Option<f64>) -> AeDecoder {
        AeDecoder { net: self.decoder.clone(), feature: t_c.and_then(|t| self.cfg.temperature_feature(t)) }
    }

    /// Bit labels: Gray code over the rank of each message's first level.
    pub fn labels(&self, t_c: Option<f64>) -> Vec<u32> {
        let m = self.cfg.channel_uses;
        let lv = self.levels(t_c);
        let mut order: Vec<usize> = (0..self.cfg.messages).collect();
        order.sort_by(|&a, &b| lv[a * m].total_cmp(&lv[b * m]));
        let gray = gray_labels(self.cfg.messages.next_power_of_two());
        let mut labels = vec![0; self.cfg.messages];
        for (rank, &s) in order.iter().enumerate() {
            labels[s] = gray[rank];
        }
        labels
    }

    /// Noise-free record of `n` random messages through `channel`, normalised
    /// by `reference`.
    pub fn record(
        &self,
        channel: &dyn Channel,
        reference: &LinkReference,
        t_c: Option<f64>,
        n: usize,
        seed: u64,
    ) -> Result<SymbolRecord> {
        let m = self.cfg.channel_uses;
        let lv = self.levels(t_c);
        let msgs = crate::signal::random_symbols(n, self.cfg.messages, seed);
        let levels: Vec<f64> = msgs.iter().flat_map(|&s| lv[s * m..(s + 1) * m].iter().copied()).collect();
        let rx = channel.transmit(&levels)?;
        let s = reference.p_ac.sqrt();
        Ok(SymbolRecord {
            received: rx.iter().map(|v| (v - reference.offset) / s).collect(),
            symbols: msgs,
            order: self.cfg.messages,
            sps: channel.sps() * m,
            samples_per_use: channel.sps(),
            delay: reference.delay,
            p_ac: reference.p_ac,
            offset: reference.offset,
        })
    }
}

/// Decoder network as a window detector.
#[derive(Clone, Debug, PartialEq)]
pub struct AeDecoder {
    pub net: Network,
    pub feature: Option<f64>,
}

impl Detector for AeDecoder {
    fn window_len(&self) -> usize {
        self.net.input_dim() - self.feature.is_some() as usize
    }

    fn decide(&self, window: &[f64]) -> usize {
        match self.feature {
            None => decide(&self.net, window),
            Some(f) => {
                let mut x = window.to_vec();
                x.push(f);
                decide(&self.net, &x)
            }
        }
    }
}

/// Most probable message; ties go to the lowest index.
pub fn decide(decoder: &Network, window: &[f64]) -> usize {
    argmax(&decoder.forward(window).expect("decoder input width"))
}

/// Monte-Carlo bit error rate of `detector` over `range` of a record.
pub fn ber_vs_snr(
    detector: &dyn Detector,
    record: &SymbolRecord,
    range: std::ops::Range<usize>,
    labels: &[u32],
    snr_db: &[f64],
    budget: &Budget,
    seed: u64,
) -> ErrorRateCurve {
    error_rate_curve(snr_db, budget, seed, |snr, s, n| detect_chunk(detector, record, range.clone(), labels, snr, s, n))
}

/// Symbol error counterpart of [`ber_vs_snr`].
pub fn ser_vs_snr(
    detector: &dyn Detector,
    record: &SymbolRecord,
    range: std::ops::Range<usize>,
    snr_db: &[f64],
    budget: &Budget,
    seed: u64,
) -> ErrorRateCurve {
    error_rate_curve(snr_db, budget, seed, |snr, s, n| detect_chunk_ser(detector, record, range.clone(), snr, s, n))
}

/// A channel with the temperature it represents.
#[derive(Clone, Copy)]
pub struct TrainChannel<'a> {
    pub temperature_c: f64,
    pub channel: &'a dyn Channel,
}

/// Trains encoder and decoder jointly by back-propagating the decoder's
/// cross-entropy through the channel. Returns the transceiver and the
/// per-step loss.
pub fn ae_train(channels: &[TrainChannel<'_>], cfg: &AeConfig) -> Result<(Transceiver, Vec<f64>)> {
    cfg.check()?;
    let enc = Network::random(
        &[cfg.messages + cfg.extra(), cfg.encoder_hidden, cfg.channel_uses],
        &[Activation::Relu, Activation::Linear],
        seed::derive(cfg.seed, "encoder"),
    )?;
    fit(channels, cfg, Transmitter::Learned(enc))
}

/// Fixed equidistant levels at the same power; only the decoder is trained.
pub fn equidistant_baseline(channels: &[TrainChannel<'_>], cfg: &AeConfig) -> Result<(Transceiver, Vec<f64>)> {
    cfg.check()?;
    fit(channels, cfg, Transmitter::Fixed(equidistant_levels(cfg)))
}

struct SequenceGrad {
    loss: f64,
    count: usize,
    decoder: Gradients,
    levels: Vec<f64>,
    channel: usize,
}

fn fit(channels: &[TrainChannel<'_>], cfg: &AeConfig, transmitter: Transmitter) -> Result<(Transceiver, Vec<f64>)> {
    if channels.is_empty() {
        return Err(invalid("training needs at least one channel"));
    }
    if cfg.conditioned() {
        let temps: Vec<f64> = channels.iter().map(|c| c.temperature_c).collect();
        if temps != cfg.temperatures_c {
            return Err(invalid("channels must match the configured training temperatures"));
        }
    } else if channels.len() != 1 {
        return Err(invalid("an unconditioned model trains on exactly one channel"));
    }
    let sps = channels[0].channel.sps();
    if channels.iter().any(|c| c.channel.sps() != sps) {
        return Err(invalid("all training channels must share sps"));
    }
    let m = cfg.channel_uses;
    let probe = vec![0.0; m];
    if channels.iter().any(|c| c.channel.gradient(&probe, &vec![0.0; m * sps]).is_none()) {
        return Err(invalid("channel is not differentiable; train the receiver with de_train instead"));
    }
    let refs = channels.iter().map(|c| LinkReference::measure(c.channel, cfg)).collect::<Result<Vec<_>>>()?;
    let width = cfg.window_len(sps);
    let dec_sizes: Vec<usize> = if cfg.decoder_hidden > 0 {
        vec![width + cfg.extra(), cfg.decoder_hidden, cfg.messages]
    } else {
        vec![width + cfg.extra(), cfg.messages]
    };
    let dec_acts: Vec<Activation> =
        if cfg.decoder_hidden > 0 { vec![Activation::Relu, Activation::Softmax] } else { vec![Activation::Softmax] };
    let mut tr = Transceiver {
        cfg: cfg.clone(),
        transmitter,
        decoder: Network::random(&dec_sizes, &dec_acts, seed::derive(cfg.seed, "decoder"))?,
    };
    let mut dec_opt = Optimizer::new(OptimizerKind::Adam, cfg.learning_rate, tr.decoder.param_count());
    let mut enc_opt = match &tr.transmitter {
        Transmitter::Learned(e) => Some(Optimizer::new(OptimizerKind::Adam, cfg.learning_rate, e.param_count())),
        Transmitter::Fixed(_) => None,
    };
    let features: Vec<Option<f64>> = channels.iter().map(|c| cfg.temperature_feature(c.temperature_c)).collect();
    let noise = (sps as f64 / 10f64.powf(cfg.train_snr_db / 10.0)).sqrt();
    let step_root = seed::derive(cfg.seed, "ae-step");
    let mut trace = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        if let Some(lr) = cfg.final_learning_rate.filter(|_| 3 * step >= 2 * cfg.steps) {
            dec_opt.lr = lr;
            if let Some(o) = enc_opt.as_mut() {
                o.lr = lr;
            }
        }
        let levels: Vec<Vec<f64>> = features.iter().map(|&f| tr_levels(&tr, f)).collect();
        let grads: Vec<Result<SequenceGrad>> = (0..cfg.batch)
            .into_par_iter()
            .map(|b| {
                let mut rng = seed::rng(seed::shard(step_root, (step * cfg.batch + b) as u64));
                let ci = if channels.len() > 1 { rng.random_range(0..channels.len()) } else { 0 };
                sequence_grad(&tr, channels[ci].channel, &refs[ci], &levels[ci], features[ci], noise, width, &mut rng)
                    .map(|g| SequenceGrad { channel: ci, ..g })
            })
            .collect();
        let mut dec_g = Gradients::zeros(&tr.decoder);
        let mut lv_g = vec![vec![0.0; cfg.messages * m]; channels.len()];
        let (mut loss, mut count) = (0.0, 0usize);
        for g in grads {
            let g = g?;
            loss += g.loss;
            count += g.count;
            dec_g.add(&g.decoder);
            lv_g[g.channel].iter_mut().zip(&g.levels).for_each(|(a, b)| *a += b);
        }
        let count = count.max(1) as f64;
        loss /= count;
        if !loss.is_finite() {
            return Err(Error::Diverged { step, loss });
        }
        dec_g.scale(1.0 / count);
        dec_opt.step_network(&mut tr.decoder, &dec_g);
        if let (Transmitter::Learned(enc), Some(opt)) = (&mut tr.transmitter, enc_opt.as_mut()) {
            let mut eg = Gradients::zeros(enc);
            for (ci, &f) in features.iter().enumerate() {
                let traces: Vec<Trace> =
                    (0..cfg.messages).map(|s| enc.forward_trace(&encoder_input(cfg, s, f))).collect::<Result<_>>()?;
                let raw: Vec<f64> = traces.iter().flat_map(|t| t.output().to_vec()).collect();
                let g: Vec<f64> = lv_g[ci].iter().map(|v| v / count).collect();
                let graw = normalize_backward(&raw, &g, cfg);
                for (s, t) in traces.iter().enumerate() {
                    enc.backward(t, &graw[s * m..(s + 1) * m], Some(&mut eg));
                }
            }
            opt.step_network(enc, &eg);
        }
        trace.push(loss);
    }
    Ok((tr, trace))
}

fn tr_levels(tr: &Transceiver, feature: Option<f64>) -> Vec<f64> {
    match &tr.transmitter {
        Transmitter::Fixed(v) => v.clone(),
        Transmitter::Learned(enc) => {
            let raw: Vec<f64> = (0..tr.cfg.messages)
                .flat_map(|s| enc.forward(&encoder_input(&tr.cfg, s, feature)).expect("encoder input width"))
                .collect();
            normalize(&raw, &tr.cfg)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn sequence_grad(
    tr: &Transceiver,
    channel: &dyn Channel,
    reference: &LinkReference,
    lv: &[f64],
    feature: Option<f64>,
    noise: f64,
    width: usize,
    rng: &mut seed::Rng,
) -> Result<SequenceGrad> {
    let cfg = &tr.cfg;
    let m = cfg.channel_uses;
    let sps = channel.sps();
    let span = m * sps;
    let msgs: Vec<usize> = (0..cfg.sequence_len).map(|_| rng.random_range(0..cfg.messages)).collect();
    let levels: Vec<f64> = msgs.iter().flat_map(|&s| lv[s * m..(s + 1) * m].iter().copied()).collect();
    let rx = channel.transmit(&levels)?;
    let scale = reference.p_ac.sqrt();
    let r: Vec<f64> = rx
        .iter()
        .map(|v| {
            let z: f64 = StandardNormal.sample(rng);
            (v - reference.offset) / scale + noise * z
        })
        .collect();
    let mut grad_r = vec![0.0; r.len()];
    let mut decoder = Gradients::zeros(&tr.decoder);
    let (mut loss, mut count) = (0.0, 0);
    let mut x = Vec::with_capacity(width + 1);
    for (k, &s) in msgs.iter().enumerate() {
        let centre = k * span + reference.delay + span / 2;
        let Some(start) = centre.checked_sub(width / 2) else { continue };
        if start + width > r.len() {
            continue;
        }
        x.clear();
        x.extend_from_slice(&r[start..start + width]);
        x.extend(feature);
        let t = tr.decoder.forward_trace(&x)?;
        let p = t.output();
        loss -= p[s].max(1e-300).ln();
        count += 1;
        let dz: Vec<f64> = p.iter().enumerate().map(|(i, &pi)| pi - (i == s) as u8 as f64).collect();
        let gx = tr.decoder.backward_pre(&t, &dz, Some(&mut decoder));
        grad_r[start..start + width].iter_mut().zip(&gx).for_each(|(a, b)| *a += b);
    }
    let mut levels_grad = vec![0.0; cfg.messages * m];
    if matches!(tr.transmitter, Transmitter::Learned(_)) {
        let grad_rx: Vec<f64> = grad_r.iter().map(|g| g / scale).collect();
        let gl = channel.gradient(&levels, &grad_rx).expect("checked differentiable");
        for (k, &s) in msgs.iter().enumerate() {
            for u in 0..m {
                levels_grad[s * m + u] += gl[k * m + u];
            }
        }
    }
    Ok(SequenceGrad { loss, count, decoder, levels: levels_grad, channel: 0 })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::channel::FiberParams;
    use crate::e2e::SurrogateLink;
    use crate::surrogate::VolterraModel;

    fn rel_err(fd: f64, an: f64) -> f64 {
        (fd - an).abs() / fd.abs().max(an.abs()).max(1e-4)
    }

    fn link() -> SurrogateLink {
        let m = 6;
        let h1: Vec<f64> = (0..m).map(|i| 0.5 * (-(i as f64) / 2.0).exp()).collect();
        let mut h2 = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                h2[i * m + j] = -0.02 * (-((i + j) as f64) / 3.0).exp();
            }
        }
        let model = VolterraModel::new(2.0, h1, h2, 0, 8.0, 112e9).unwrap();
        let fiber = FiberParams { length_m: 50.0, attenuation_db_per_km: 3.0, f3db_hz: 25e9 };
        SurrogateLink::new(Arc::new(model), 8.0, 4, &fiber, 0.6).unwrap()
    }

    #[test]
    fn normalisation_gradient() {
        let raw = [0.7, -1.3, 2.2, 0.1, -0.4, 1.9];
        let g = [0.3, -0.2, 0.5, 0.9, -1.1, 0.05];
        for normalization in [Normalization::AveragePower, Normalization::PeakAmplitude] {
            let cfg = AeConfig { normalization, messages: 6, ..AeConfig::default() };
            let an = normalize_backward(&raw, &g, &cfg);
            let f = |r: &[f64]| normalize(r, &cfg).iter().zip(&g).map(|(a, b)| a * b).sum::<f64>();
            for i in 0..raw.len() {
                let h = 1e-6;
                let (mut p, mut m) = (raw.to_vec(), raw.to_vec());
                p[i] += h;
                m[i] -= h;
                let fd = (f(&p) - f(&m)) / (2.0 * h);
                assert!(rel_err(fd, an[i]) < 1e-5, "{normalization:?} [{i}]: {fd} vs {}", an[i]);
            }
        }
    }

    #[test]
    fn end_to_end_gradient_through_surrogate() {
        let ch = link();
        let cfg = AeConfig { sequence_len: 12, decoder_hidden: 5, ..AeConfig::default() };
        let enc = Network::random(&[4, 3, 1], &[Activation::Relu, Activation::Linear], 1).unwrap();
        let width = cfg.window_len(ch.sps());
        let dec = Network::random(&[width, 5, 4], &[Activation::Relu, Activation::Softmax], 2).unwrap();
        let tr = Transceiver { cfg: cfg.clone(), transmitter: Transmitter::Learned(enc), decoder: dec };
        let reference = LinkReference::measure(&ch, &cfg).unwrap();
        let lv = vec![-3.1, -0.9, 1.2, 3.3];
        let eval = |tr: &Transceiver, lv: &[f64]| {
            let mut rng = seed::rng(9);
            sequence_grad(tr, &ch, &reference, lv, None, 0.3, width, &mut rng).unwrap()
        };
        let g = eval(&tr, &lv);
        assert!(g.count > 0);
        let h = 1e-6;
        for i in 0..lv.len() {
            let (mut p, mut m) = (lv.clone(), lv.clone());
            p[i] += h;
            m[i] -= h;
            let fd = (eval(&tr, &p).loss - eval(&tr, &m).loss) / (2.0 * h);
            assert!(rel_err(fd, g.levels[i]) < 1e-5, "level {i}: {fd} vs {}", g.levels[i]);
        }
        let params = tr.decoder.params();
        let an = g.decoder.flatten();
        for i in (0..params.len()).step_by(3) {
            let shift = |d: f64| {
                let mut t = tr.clone();
                let mut q = params.clone();
                q[i] += d;
                t.decoder.set_params(&q).unwrap();
                eval(&t, &lv).loss
            };
            let fd = (shift(h) - shift(-h)) / (2.0 * h);
            assert!(rel_err(fd, an[i]) < 1e-5, "decoder param {i}: {fd} vs {}", an[i]);
        }
    }
}
