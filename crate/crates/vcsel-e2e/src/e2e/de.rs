use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::seed;

/// DE/rand/1/bin settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeConfig {
    /// Population size; `None` for `min(10 * dim, 200)`.
    pub population: Option<usize>,
    /// Differential weight F.
    pub weight: f64,
    /// Crossover rate CR.
    pub crossover: f64,
    pub generations: usize,
    pub seed: u64,
}

impl Default for DeConfig {
    fn default() -> Self {
        Self { population: None, weight: 0.6, crossover: 0.9, generations: 500, seed: 0 }
    }
}

impl DeConfig {
    pub fn population_for(&self, dim: usize) -> usize {
        self.population.unwrap_or((10 * dim).min(200))
    }

    pub fn violations(&self, dim: usize) -> Vec<String> {
        let mut v = Vec::new();
        let np = self.population_for(dim);
        if np < 4 {
            v.push(format!("population must be at least 4 (got {np})"));
        }
        if !(self.weight > 0.0 && self.weight <= 2.0) {
            v.push(format!("weight F must lie in (0, 2] (got {})", self.weight));
        }
        if !(0.0..=1.0).contains(&self.crossover) {
            v.push(format!("crossover CR must lie in [0, 1] (got {})", self.crossover));
        }
        if dim == 0 {
            v.push("search space must have at least one dimension".into());
        }
        v
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeResult {
    pub best: Vec<f64>,
    pub best_fitness: f64,
    /// Population-best fitness after each generation.
    pub history: Vec<f64>,
}

/// Minimises `fitness` from a population drawn uniformly around `centre`
/// with half-width `spread`. Fitness evaluations run in parallel; the
/// result depends only on the seed.
pub fn differential_evolution(
    fitness: impl Fn(&[f64]) -> f64 + Sync,
    centre: &[f64],
    spread: f64,
    cfg: &DeConfig,
) -> Result<DeResult> {
    let dim = centre.len();
    let v = cfg.violations(dim);
    if !v.is_empty() {
        return Err(invalid(v.join("; ")));
    }
    let np = cfg.population_for(dim);
    let mut rng = seed::rng(cfg.seed);
    let mut pop: Vec<Vec<f64>> =
        (0..np).map(|_| centre.iter().map(|c| c + spread * rng.random_range(-1.0..=1.0)).collect()).collect();
    let mut fit: Vec<f64> = pop.par_iter().map(|x| fitness(x)).collect();
    let mut history = Vec::with_capacity(cfg.generations);
    for _ in 0..cfg.generations {
        let trials: Vec<Vec<f64>> = (0..np)
            .map(|i| {
                let mut pick = || loop {
                    let j = rng.random_range(0..np);
                    if j != i {
                        break j;
                    }
                };
                let a = pick();
                let b = loop {
                    let j = pick();
                    if j != a {
                        break j;
                    }
                };
                let c = loop {
                    let j = pick();
                    if j != a && j != b {
                        break j;
                    }
                };
                let forced = rng.random_range(0..dim);
                (0..dim)
                    .map(|d| {
                        if d == forced || rng.random::<f64>() < cfg.crossover {
                            pop[a][d] + cfg.weight * (pop[b][d] - pop[c][d])
                        } else {
                            pop[i][d]
                        }
                    })
                    .collect()
            })
            .collect();
        let trial_fit: Vec<f64> = trials.par_iter().map(|x| fitness(x)).collect();
        for (i, (t, f)) in trials.into_iter().zip(trial_fit).enumerate() {
            if f <= fit[i] {
                pop[i] = t;
                fit[i] = f;
            }
        }
        history.push(fit.iter().copied().fold(f64::INFINITY, f64::min));
    }
    let best = (0..np).min_by(|&a, &b| fit[a].total_cmp(&fit[b])).expect("population is non-empty");
    Ok(DeResult { best: pop[best].clone(), best_fitness: fit[best], history })
}
