use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Linear,
    Relu,
    Tanh,
    Softmax,
}

/// Fully connected layer. `weights` is row-major `outputs x inputs`; a mask
/// entry of `false` pins the weight at zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub activation: Activation,
    pub mask: Option<Vec<bool>>,
}

impl Dense {
    pub fn new(
        inputs: usize,
        outputs: usize,
        weights: Vec<f64>,
        biases: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        if inputs == 0 || outputs == 0 {
            return Err(invalid("layer widths must be positive"));
        }
        if weights.len() != inputs * outputs {
            return Err(Error::Shape { expected: inputs * outputs, got: weights.len() });
        }
        if biases.len() != outputs {
            return Err(Error::Shape { expected: outputs, got: biases.len() });
        }
        Ok(Self { inputs, outputs, weights, biases, activation, mask: None })
    }

    /// Xavier-uniform for tanh/linear/softmax, He-normal for ReLU; zero biases.
    pub fn random(inputs: usize, outputs: usize, activation: Activation, rng: &mut seed::Rng) -> Result<Self> {
        let n = inputs * outputs;
        let weights = match activation {
            Activation::Relu => {
                let normal = Normal::new(0.0, (2.0 / inputs as f64).sqrt()).map_err(|e| invalid(e.to_string()))?;
                (0..n).map(|_| normal.sample(rng)).collect()
            }
            _ => {
                let a = (6.0 / (inputs + outputs) as f64).sqrt();
                (0..n).map(|_| rng.random_range(-a..=a)).collect()
            }
        };
        Self::new(inputs, outputs, weights, vec![0.0; outputs], activation)
    }

    pub fn is_kept(&self, idx: usize) -> bool {
        self.mask.as_ref().is_none_or(|m| m[idx])
    }

    pub fn masked_count(&self) -> usize {
        self.mask.as_ref().map_or(0, |m| m.iter().filter(|&&k| !k).count())
    }

    fn apply_mask(&mut self) {
        if let Some(m) = &self.mask {
            for (w, &keep) in self.weights.iter_mut().zip(m) {
                if !keep {
                    *w = 0.0;
                }
            }
        }
    }

    fn affine(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.outputs {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            out.push(self.biases[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>());
        }
    }
}

fn activate(act: Activation, z: &mut [f64]) {
    match act {
        Activation::Linear => {}
        Activation::Relu => z.iter_mut().for_each(|v| *v = v.max(0.0)),
        Activation::Tanh => z.iter_mut().for_each(|v| *v = v.tanh()),
        Activation::Softmax => {
            let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut s = 0.0;
            for v in z.iter_mut() {
                *v = (*v - m).exp();
                s += *v;
            }
            z.iter_mut().for_each(|v| *v /= s);
        }
    }
}

/// Per-layer activations recorded by [`Network::forward_trace`]; entry 0 is
/// the input.
#[derive(Clone, Debug, Default)]
pub struct Trace {
    pub acts: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Gradient buffers shaped like a network's parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros(net: &Network) -> Self {
        Self {
            weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: net.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        }
    }

    pub fn scale(&mut self, k: f64) {
        self.weights.iter_mut().chain(self.biases.iter_mut()).flatten().for_each(|v| *v *= k);
    }

    pub fn add(&mut self, other: &Gradients) {
        for (a, b) in
            self.weights.iter_mut().chain(self.biases.iter_mut()).zip(other.weights.iter().chain(&other.biases))
        {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    /// Flattened in the same order as [`Network::params`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }
}

/// Feed-forward stack of dense layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    layers: Vec<Dense>,
}

impl Network {
    pub fn new(mut layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(invalid("network needs at least one layer"));
        }
        for w in layers.windows(2) {
            if w[0].outputs != w[1].inputs {
                return Err(Error::Shape { expected: w[0].outputs, got: w[1].inputs });
            }
        }
        let last = layers.len() - 1;
        if layers[..last].iter().any(|l| l.activation == Activation::Softmax) {
            return Err(invalid("softmax is only allowed on the output layer"));
        }
        for l in &mut layers {
            if let Some(m) = &l.mask {
                if m.len() != l.weights.len() {
                    return Err(Error::Shape { expected: l.weights.len(), got: m.len() });
                }
            }
            if l.weights.iter().chain(&l.biases).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("network parameters"));
            }
            l.apply_mask();
        }
        Ok(Self { layers })
    }

    /// Randomly initialised network with widths `sizes[0] -> ... -> sizes[n]`.
    pub fn random(sizes: &[usize], activations: &[Activation], seed: u64) -> Result<Self> {
        if sizes.len() != activations.len() + 1 {
            return Err(invalid("need one activation per layer"));
        }
        let mut rng = seed::rng(seed);
        let layers = sizes
            .windows(2)
            .zip(activations)
            .map(|(w, &a)| Dense::random(w[0], w[1], a, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        Self::new(layers)
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    /// Mutable access for callers that set weights directly; masks are
    /// re-applied by [`Network::enforce_masks`].
    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn enforce_masks(&mut self) {
        self.layers.iter_mut().for_each(Dense::apply_mask);
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn output_activation(&self) -> Activation {
        self.layers[self.layers.len() - 1].activation
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape { expected: self.input_dim(), got: x.len() });
        }
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        for l in &self.layers {
            l.affine(&cur, &mut next);
            activate(l.activation, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    pub fn forward_trace(&self, x: &[f64]) -> Result<Trace> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape { expected: self.input_dim(), got: x.len() });
        }
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        for l in &self.layers {
            let mut z = Vec::with_capacity(l.outputs);
            l.affine(acts.last().expect("non-empty"), &mut z);
            activate(l.activation, &mut z);
            acts.push(z);
        }
        Ok(Trace { acts })
    }

    /// Back-propagates `grad_out` (dL/d output) and returns dL/d input.
    /// Parameter gradients are accumulated into `grads` when given.
    pub fn backward(&self, trace: &Trace, grad_out: &[f64], grads: Option<&mut Gradients>) -> Vec<f64> {
        let last = self.layers.len() - 1;
        let y = &trace.acts[last + 1];
        let dz = activation_vjp(self.layers[last].activation, y, grad_out);
        self.backward_from(trace, dz, grads)
    }

    /// Like [`Network::backward`] but starting from dL/d (pre-activation of
    /// the output layer).
    pub fn backward_pre(&self, trace: &Trace, grad_pre: &[f64], grads: Option<&mut Gradients>) -> Vec<f64> {
        self.backward_from(trace, grad_pre.to_vec(), grads)
    }

    fn backward_from(&self, trace: &Trace, mut dz: Vec<f64>, mut grads: Option<&mut Gradients>) -> Vec<f64> {
        for li in (0..self.layers.len()).rev() {
            let l = &self.layers[li];
            let a_in = &trace.acts[li];
            if let Some(g) = grads.as_deref_mut() {
                let gw = &mut g.weights[li];
                for o in 0..l.outputs {
                    let d = dz[o];
                    if d == 0.0 {
                        continue;
                    }
                    let row = &mut gw[o * l.inputs..(o + 1) * l.inputs];
                    row.iter_mut().zip(a_in).for_each(|(w, a)| *w += d * a);
                }
                if let Some(m) = &l.mask {
                    gw.iter_mut().zip(m).for_each(|(w, &keep)| {
                        if !keep {
                            *w = 0.0
                        }
                    });
                }
                g.biases[li].iter_mut().zip(&dz).for_each(|(b, d)| *b += d);
            }
            let mut da = vec![0.0; l.inputs];
            for o in 0..l.outputs {
                let d = dz[o];
                if d == 0.0 {
                    continue;
                }
                let row = &l.weights[o * l.inputs..(o + 1) * l.inputs];
                da.iter_mut().zip(row).for_each(|(a, w)| *a += d * w);
            }
            if li == 0 {
                return da;
            }
            dz = activation_vjp(self.layers[li - 1].activation, &trace.acts[li], &da);
        }
        unreachable!("network has at least one layer")
    }

    /// Total number of weights and biases.
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// Weights then biases, layer by layer.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
        }
        out
    }

    /// Inverse of [`Network::params`]; masked weights stay zero.
    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.param_count() {
            return Err(Error::Shape { expected: self.param_count(), got: p.len() });
        }
        let mut k = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&p[k..k + nw]);
            k += nw;
            let nb = l.biases.len();
            l.biases.copy_from_slice(&p[k..k + nb]);
            k += nb;
            l.apply_mask();
        }
        Ok(())
    }

    pub fn weight_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len()).sum()
    }

    /// Fraction of weights pinned at zero by masks.
    pub fn sparsity(&self) -> f64 {
        self.layers.iter().map(Dense::masked_count).sum::<usize>() as f64 / self.weight_count() as f64
    }

    /// Multiplications per inference: unmasked weights whose source unit
    /// varies with the input and whose destination reaches the output.
    /// Hidden units left with no unmasked inputs are constants and fold into
    /// the next layer's biases; units with no unmasked outputs are dropped.
    pub fn multiply_count(&self) -> usize {
        let nl = self.layers.len();
        let mut live: Vec<Vec<bool>> = vec![vec![true; self.input_dim()]];
        for l in &self.layers {
            let src = live.last().expect("non-empty");
            let out = (0..l.outputs).map(|o| (0..l.inputs).any(|i| l.is_kept(o * l.inputs + i) && src[i])).collect();
            live.push(out);
        }
        let mut used: Vec<Vec<bool>> = vec![Vec::new(); nl + 1];
        used[nl] = vec![true; self.output_dim()];
        for li in (0..nl).rev() {
            let l = &self.layers[li];
            used[li] =
                (0..l.inputs).map(|i| (0..l.outputs).any(|o| l.is_kept(o * l.inputs + i) && used[li + 1][o])).collect();
        }
        let mut count = 0;
        for (li, l) in self.layers.iter().enumerate() {
            for o in 0..l.outputs {
                for i in 0..l.inputs {
                    if l.is_kept(o * l.inputs + i) && live[li][i] && used[li + 1][o] {
                        count += 1;
                    }
                }
            }
        }
        count
    }
}

/// Vector-Jacobian product of an activation given its output `y`.
fn activation_vjp(act: Activation, y: &[f64], g: &[f64]) -> Vec<f64> {
    match act {
        Activation::Linear => g.to_vec(),
        Activation::Relu => y.iter().zip(g).map(|(&a, &d)| if a > 0.0 { d } else { 0.0 }).collect(),
        Activation::Tanh => y.iter().zip(g).map(|(&a, &d)| d * (1.0 - a * a)).collect(),
        Activation::Softmax => {
            let dot: f64 = y.iter().zip(g).map(|(p, d)| p * d).sum();
            y.iter().zip(g).map(|(&p, &d)| p * (d - dot)).collect()
        }
    }
}

/// Training objective.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    /// Mean over output dimensions of the squared error.
    Mse,
    /// Categorical cross-entropy against a probability target; needs a
    /// softmax output.
    CrossEntropy,
}

/// Loss of one sample and dL/d(pre-activation of the output layer).
fn sample_loss(net: &Network, y: &[f64], t: &[f64], loss: Loss, want_grad: bool) -> (f64, Vec<f64>) {
    match loss {
        Loss::Mse => {
            let dim = y.len() as f64;
            let l = y.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / dim;
            if !want_grad {
                return (l, Vec::new());
            }
            let dy: Vec<f64> = y.iter().zip(t).map(|(a, b)| 2.0 * (a - b) / dim).collect();
            let last = net.layers.len() - 1;
            (l, activation_vjp(net.layers[last].activation, y, &dy))
        }
        Loss::CrossEntropy => {
            let l = -y.iter().zip(t).map(|(&p, &q)| if q > 0.0 { q * p.max(1e-300).ln() } else { 0.0 }).sum::<f64>();
            let dz = if want_grad {
                let tsum: f64 = t.iter().sum();
                y.iter().zip(t).map(|(&p, &q)| tsum * p - q).collect()
            } else {
                Vec::new()
            };
            (l, dz)
        }
    }
}

fn check_loss(net: &Network, loss: Loss) -> Result<()> {
    if loss == Loss::CrossEntropy && net.output_activation() != Activation::Softmax {
        return Err(invalid("cross-entropy loss requires a softmax output layer"));
    }
    Ok(())
}

/// Mean loss over a batch and its exact gradient.
pub fn gradients(net: &Network, inputs: &[Vec<f64>], targets: &[Vec<f64>], loss: Loss) -> Result<(f64, Gradients)> {
    check_loss(net, loss)?;
    if inputs.len() != targets.len() || inputs.is_empty() {
        return Err(Error::Shape { expected: inputs.len(), got: targets.len() });
    }
    let mut g = Gradients::zeros(net);
    let mut total = 0.0;
    for (x, t) in inputs.iter().zip(targets) {
        if t.len() != net.output_dim() {
            return Err(Error::Shape { expected: net.output_dim(), got: t.len() });
        }
        let trace = net.forward_trace(x)?;
        let (l, dz) = sample_loss(net, trace.output(), t, loss, true);
        total += l;
        net.backward_pre(&trace, &dz, Some(&mut g));
    }
    let b = inputs.len() as f64;
    g.scale(1.0 / b);
    Ok((total / b, g))
}

/// Mean loss over a batch without gradients.
pub fn batch_loss(net: &Network, inputs: &[Vec<f64>], targets: &[Vec<f64>], loss: Loss) -> Result<f64> {
    check_loss(net, loss)?;
    let mut total = 0.0;
    for (x, t) in inputs.iter().zip(targets) {
        let y = net.forward(x)?;
        total += sample_loss(net, &y, t, loss, false).0;
    }
    Ok(total / inputs.len().max(1) as f64)
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

pub fn one_hot(index: usize, n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[index] = 1.0;
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_layer() {
        let l = Dense::new(2, 2, vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 0.0], Activation::Linear).unwrap();
        let net = Network::new(vec![l]).unwrap();
        assert_eq!(net.forward(&[3.0, -2.0]).unwrap(), vec![3.0, -2.0]);
        assert!(net.forward(&[1.0]).is_err());
    }

    #[test]
    fn uniform_softmax() {
        let l = Dense::new(1, 4, vec![0.0; 4], vec![0.0; 4], Activation::Softmax).unwrap();
        let net = Network::new(vec![l]).unwrap();
        assert_eq!(net.forward(&[5.0]).unwrap(), vec![0.25; 4]);
    }

    #[test]
    fn hidden_softmax_rejected() {
        let a = Dense::new(1, 2, vec![0.0; 2], vec![0.0; 2], Activation::Softmax).unwrap();
        let b = Dense::new(2, 1, vec![0.0; 2], vec![0.0], Activation::Linear).unwrap();
        assert!(Network::new(vec![a, b]).is_err());
    }

    #[test]
    fn hand_evaluated_tanh_net() {
        let a = Dense::new(2, 2, vec![0.5, -1.0, 2.0, 0.25], vec![0.1, -0.2], Activation::Tanh).unwrap();
        let b = Dense::new(2, 1, vec![1.5, -0.5], vec![0.3], Activation::Linear).unwrap();
        let net = Network::new(vec![a, b]).unwrap();
        let x = [0.7, -0.4];
        let h0 = (0.5 * 0.7 + -1.0 * -0.4 + 0.1f64).tanh();
        let h1 = (2.0 * 0.7 + 0.25 * -0.4 - 0.2f64).tanh();
        let expect = 1.5 * h0 - 0.5 * h1 + 0.3;
        assert!((net.forward(&x).unwrap()[0] - expect).abs() < 1e-12);
    }

    #[test]
    fn mse_linear_closed_form() {
        let l = Dense::new(3, 2, vec![0.1, 0.2, -0.3, 0.4, -0.5, 0.6], vec![0.05, -0.1], Activation::Linear).unwrap();
        let net = Network::new(vec![l]).unwrap();
        let x = vec![1.0, -2.0, 0.5];
        let t = vec![0.3, -0.7];
        let (_, g) = gradients(&net, std::slice::from_ref(&x), std::slice::from_ref(&t), Loss::Mse).unwrap();
        let y = net.forward(&x).unwrap();
        for o in 0..2 {
            let r = 2.0 * (y[o] - t[o]) / 2.0;
            for i in 0..3 {
                assert!((g.weights[0][o * 3 + i] - r * x[i]).abs() < 1e-14);
            }
            assert!((g.biases[0][o] - r).abs() < 1e-14);
        }
    }

    #[test]
    fn cross_entropy_needs_softmax() {
        let net = Network::random(&[2, 2], &[Activation::Linear], 0).unwrap();
        assert!(gradients(&net, &[vec![0.0, 1.0]], &[vec![1.0, 0.0]], Loss::CrossEntropy).is_err());
    }

    #[test]
    fn argmax_tie_rule() {
        assert_eq!(argmax(&[0.1, 0.7, 0.1, 0.1]), 1);
        assert_eq!(argmax(&[0.25; 4]), 0);
    }

    #[test]
    fn dead_units_fold() {
        let mut net = Network::random(&[3, 2, 1], &[Activation::Relu, Activation::Linear], 1).unwrap();
        assert_eq!(net.multiply_count(), 8);
        // cut hidden unit 1 from the output: its three inputs no longer count
        net.layers_mut()[1].mask = Some(vec![true, false]);
        net.enforce_masks();
        assert_eq!(net.multiply_count(), 4);
    }
}
