use serde::{Deserialize, Serialize};

use super::network::Network;
use crate::error::{invalid, Result};

/// Polynomial-decay sparsity schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PruneSchedule {
    pub s_initial: f64,
    pub s_final: f64,
    pub begin_step: usize,
    pub end_step: usize,
    #[serde(default = "default_exponent")]
    pub exponent: f64,
}

fn default_exponent() -> f64 {
    3.0
}

impl PruneSchedule {
    pub fn new(s_initial: f64, s_final: f64, begin_step: usize, end_step: usize) -> Result<Self> {
        let s = Self { s_initial, s_final, begin_step, end_step, exponent: 3.0 };
        let v = s.violations();
        if !v.is_empty() {
            return Err(invalid(v.join("; ")));
        }
        Ok(s)
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        for (name, x) in [("s_initial", self.s_initial), ("s_final", self.s_final)] {
            if !(0.0..1.0).contains(&x) {
                v.push(format!("{name} must lie in [0, 1) (got {x})"));
            }
        }
        if self.s_final < self.s_initial {
            v.push("s_final must not be below s_initial".into());
        }
        if self.end_step <= self.begin_step {
            v.push("end_step must exceed begin_step".into());
        }
        v
    }

    /// Target sparsity at `step`, held at the endpoints outside the ramp.
    pub fn target(&self, step: usize) -> f64 {
        if step <= self.begin_step {
            return self.s_initial;
        }
        if step >= self.end_step {
            return self.s_final;
        }
        let frac = (step - self.begin_step) as f64 / (self.end_step - self.begin_step) as f64;
        self.s_final + (self.s_initial - self.s_final) * (1.0 - frac).powf(self.exponent)
    }
}

/// Masks the smallest-magnitude weights of every layer until each layer has
/// `floor(sparsity * weights)` masked entries. Masks only grow.
pub fn prune_to(net: &mut Network, sparsity: f64) {
    for l in net.layers_mut() {
        let n = l.weights.len();
        let target = ((sparsity * n as f64) + 1e-9).floor() as usize;
        let mask = l.mask.get_or_insert_with(|| vec![true; n]);
        let already = mask.iter().filter(|&&k| !k).count();
        if target > already {
            let mut order: Vec<usize> = (0..n).filter(|&i| mask[i]).collect();
            order.sort_by(|&a, &b| l.weights[a].abs().total_cmp(&l.weights[b].abs()).then(a.cmp(&b)));
            for &i in order.iter().take(target - already) {
                mask[i] = false;
            }
        }
    }
    net.enforce_masks();
}

/// Applies the schedule's target for `step`.
pub fn prune_step(net: &mut Network, sched: &PruneSchedule, step: usize) {
    prune_to(net, sched.target(step));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_values() {
        let s = PruneSchedule::new(0.0, 0.6, 0, 500).unwrap();
        assert_eq!(s.target(0), 0.0);
        assert_eq!(s.target(500), 0.6);
        assert_eq!(s.target(900), 0.6);
        assert!((s.target(250) - 0.525).abs() < 1e-15);
        assert!(PruneSchedule::new(0.5, 0.2, 0, 10).is_err());
        assert!(PruneSchedule::new(0.0, 0.5, 10, 10).is_err());
    }
}
