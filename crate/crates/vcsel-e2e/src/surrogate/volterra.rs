use super::{StimulusConfig, Surrogate};
use crate::error::{invalid, Error, Result};
use crate::signal::Waveform;

/// Second-order Volterra model over lags `lag_start .. lag_start + M`.
///
/// Kernels act on the input with `input_offset` removed and produce output in
/// the reference's units: `y(n) = h0 + sum h1[i] u_i + sum h2[i][j] u_i u_j`,
/// `u_i = x(n - lag_start - i) - input_offset`.
#[derive(Clone, Debug, PartialEq)]
pub struct VolterraModel {
    pub h0: f64,
    pub h1: Vec<f64>,
    /// Symmetric, row-major `M x M`.
    pub h2: Vec<f64>,
    pub lag_start: usize,
    pub input_offset: f64,
    pub sample_rate: f64,
}

impl VolterraModel {
    pub fn new(
        h0: f64,
        h1: Vec<f64>,
        h2: Vec<f64>,
        lag_start: usize,
        input_offset: f64,
        sample_rate: f64,
    ) -> Result<Self> {
        let m = h1.len();
        if m == 0 {
            return Err(invalid("Volterra memory must be at least one sample"));
        }
        if h2.len() != m * m {
            return Err(Error::Shape { expected: m * m, got: h2.len() });
        }
        for i in 0..m {
            for j in 0..i {
                if h2[i * m + j] != h2[j * m + i] {
                    return Err(invalid("second-order kernel must be symmetric"));
                }
            }
        }
        Ok(Self { h0, h1, h2, lag_start, input_offset, sample_rate })
    }

    pub fn memory(&self) -> usize {
        self.h1.len()
    }

    fn window(&self, x: &[f64], n: usize, u: &mut [f64]) {
        for (i, ui) in u.iter_mut().enumerate() {
            let lag = self.lag_start + i;
            *ui = if n >= lag { x[n - lag] - self.input_offset } else { 0.0 };
        }
    }

    fn output(&self, u: &[f64]) -> f64 {
        let m = self.memory();
        let mut y = self.h0;
        for i in 0..m {
            let row = &self.h2[i * m..(i + 1) * m];
            let mut acc = self.h1[i] + row[i] * u[i];
            for j in i + 1..m {
                acc += 2.0 * row[j] * u[j];
            }
            y += acc * u[i];
        }
        y
    }

    /// dy/du for window `u`.
    fn gradient_u(&self, u: &[f64], out: &mut [f64]) {
        let m = self.memory();
        for i in 0..m {
            let row = &self.h2[i * m..(i + 1) * m];
            out[i] = self.h1[i] + 2.0 * row.iter().zip(u).map(|(h, v)| h * v).sum::<f64>();
        }
    }

    /// Rows of the second-order kernel, for CSV export.
    pub fn h2_rows(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        let m = self.memory();
        (0..m).map(move |i| self.h2[i * m..(i + 1) * m].to_vec())
    }
}

impl Surrogate for VolterraModel {
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; self.memory()];
        (0..x.len())
            .map(|n| {
                self.window(x, n, &mut u);
                self.output(&u)
            })
            .collect()
    }

    fn warmup(&self) -> usize {
        self.lag_start + self.memory() - 1
    }

    fn history_len(&self) -> usize {
        self.lag_start + self.memory()
    }

    fn window_gradient(&self, history: &[f64]) -> Vec<f64> {
        let m = self.memory();
        let a = self.lag_start;
        let u: Vec<f64> = (0..m).map(|i| history[a + i] - self.input_offset).collect();
        let mut g = vec![0.0; a + m];
        self.gradient_u(&u, &mut g[a..]);
        g
    }

    fn backprop(&self, x: &[f64], grad_y: &[f64]) -> Vec<f64> {
        let m = self.memory();
        let mut gx = vec![0.0; x.len()];
        let mut u = vec![0.0; m];
        let mut gu = vec![0.0; m];
        for n in 0..x.len() {
            let g = grad_y[n];
            if g == 0.0 {
                continue;
            }
            self.window(x, n, &mut u);
            self.gradient_u(&u, &mut gu);
            for i in 0..m {
                let lag = self.lag_start + i;
                if n >= lag {
                    gx[n - lag] += g * gu[i];
                }
            }
        }
        gx
    }

    fn sample_rate(&self) -> f64 {
        self.sample_rate
    }
}

/// Lee-Schetzen identification with a white Gaussian stimulus.
///
/// `reference` maps a drive waveform to the response to be modelled; `memory`
/// is the number of lags starting at `lag_start`.
pub fn fit_volterra(
    reference: impl Fn(&Waveform) -> Result<Waveform>,
    stim: &StimulusConfig,
    lag_start: usize,
    memory: usize,
) -> Result<VolterraModel> {
    if memory == 0 {
        return Err(invalid("Volterra memory must be at least one sample"));
    }
    let unknowns = 1 + memory + memory * (memory + 1) / 2;
    let start = lag_start + memory - 1;
    if stim.samples < start + 20 * unknowns {
        return Err(invalid(format!(
            "{} stimulus samples are too few for {unknowns} kernel coefficients (need at least {})",
            stim.samples,
            start + 20 * unknowns
        )));
    }
    if !(stim.std_ma > 0.0) {
        return Err(invalid("identification needs a non-zero stimulus std"));
    }
    let x = stim.generate()?;
    let y = reference(&x)?;
    if y.len() != x.len() {
        return Err(Error::Shape { expected: x.len(), got: y.len() });
    }
    let (x, y) = (x.samples(), y.samples());
    let mu = x.iter().sum::<f64>() / x.len() as f64;
    let xt: Vec<f64> = x.iter().map(|v| v - mu).collect();
    let sigma2 = xt.iter().map(|v| v * v).sum::<f64>() / xt.len() as f64;

    let count = (x.len() - start) as f64;
    let y_mean = y[start..].iter().sum::<f64>() / count;
    let m = memory;
    let mut c1 = vec![0.0; m];
    let mut c2 = vec![0.0; m * m];
    let mut u = vec![0.0; m];
    for n in start..x.len() {
        let yc = y[n] - y_mean;
        for (i, ui) in u.iter_mut().enumerate() {
            *ui = xt[n - lag_start - i];
        }
        for i in 0..m {
            let a = yc * u[i];
            c1[i] += a;
            let row = &mut c2[i * m..(i + 1) * m];
            for j in i..m {
                row[j] += a * u[j];
            }
        }
    }
    let yc_mean = y[start..].iter().map(|v| v - y_mean).sum::<f64>() / count;
    let h1: Vec<f64> = c1.iter().map(|c| c / count / sigma2).collect();
    let s4 = 2.0 * sigma2 * sigma2;
    let mut h2 = vec![0.0; m * m];
    for i in 0..m {
        for j in i..m {
            let mut v = c2[i * m + j] / count;
            if i == j {
                // diagonal uses E[y_c (u^2 - sigma^2)]
                v -= sigma2 * yc_mean;
            }
            h2[i * m + j] = v / s4;
            h2[j * m + i] = v / s4;
        }
    }
    let trace: f64 = (0..m).map(|i| h2[i * m + i]).sum();
    let h0 = y_mean - sigma2 * trace;
    VolterraModel::new(h0, h1, h2, lag_start, mu, stim.sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_kernel_is_identity() {
        let mut h1 = vec![0.0; 4];
        h1[0] = 1.0;
        let m = VolterraModel::new(0.0, h1, vec![0.0; 16], 0, 0.0, 1.0).unwrap();
        let x = [1.0, -2.0, 3.5, 0.25, 7.0];
        assert_eq!(m.eval(&x), x.to_vec());
    }

    #[test]
    fn constant_kernel() {
        let m = VolterraModel::new(2.5, vec![0.0; 3], vec![0.0; 9], 0, 0.0, 1.0).unwrap();
        assert_eq!(m.eval(&[1.0, 2.0, 3.0]), vec![2.5; 3]);
    }

    #[test]
    fn asymmetric_kernel_rejected() {
        assert!(VolterraModel::new(0.0, vec![0.0; 2], vec![0.0, 1.0, 0.0, 0.0], 0, 0.0, 1.0).is_err());
    }
}
