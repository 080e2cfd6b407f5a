//! Action selection over continuous boxes: cross-entropy-method maximization
//! of a Q-function, epsilon-greedy wrapping and TD3 target smoothing.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::nn::Tensor;

/// Minimum per-dimension standard deviation after a refit.
pub const CEM_STD_FLOOR: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CemConfig {
    pub iterations: usize,
    pub num_samples: usize,
    pub top_k: usize,
    /// Sample the returned action from the final Gaussian instead of taking its mean.
    pub stochastic_final: bool,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
}

impl CemConfig {
    /// Default search settings over `[-1, 1]^act_dim`.
    pub fn unit_box(act_dim: usize) -> Self {
        CemConfig {
            iterations: 4,
            num_samples: 64,
            top_k: 6,
            stochastic_final: true,
            action_low: vec![-1.0; act_dim],
            action_high: vec![1.0; act_dim],
        }
    }

    pub fn act_dim(&self) -> usize {
        self.action_low.len()
    }

    pub fn deterministic(mut self) -> Self {
        self.stochastic_final = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(LabError::config("CEM needs at least one iteration"));
        }
        if self.top_k == 0 || self.top_k > self.num_samples {
            return Err(LabError::config(format!(
                "CEM top_k {} must be in 1..={}",
                self.top_k, self.num_samples
            )));
        }
        if self.action_low.len() != self.action_high.len() || self.action_low.is_empty() {
            return Err(LabError::config("CEM bounds must be non-empty and equally sized"));
        }
        let ok = self
            .action_low
            .iter()
            .zip(&self.action_high)
            .all(|(l, h)| l.is_finite() && h.is_finite() && l <= h);
        if !ok {
            return Err(LabError::config("CEM bounds must be finite with low <= high"));
        }
        Ok(())
    }

    fn clip(&self, d: usize, v: f64) -> f64 {
        v.clamp(self.action_low[d], self.action_high[d])
    }
}

/// Per-iteration record of one state's search.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CemTrace {
    /// Proposal mean and std after each refit.
    pub means: Vec<Vec<f64>>,
    pub stds: Vec<Vec<f64>>,
    /// Mean objective of the elite set at each iteration.
    pub elite_values: Vec<f64>,
    /// Samples of the last iteration (row-major, `num_samples x act_dim`).
    pub last_samples: Vec<f64>,
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// CEM for `n_states` independent searches sharing one evaluator call per
/// iteration. `eval` receives an `(n_states * num_samples) x act_dim` tensor,
/// state-major, and returns one objective value per row. Returns an
/// `n_states x act_dim` tensor of selected actions.
pub fn cem_batch<R, F>(n_states: usize, cfg: &CemConfig, rng: &mut R, eval: F) -> Result<Tensor>
where
    R: Rng + ?Sized,
    F: FnMut(&Tensor) -> Result<Vec<f64>>,
{
    cem_core(n_states, cfg, rng, eval, None)
}

fn cem_core<R, F>(
    n_states: usize,
    cfg: &CemConfig,
    rng: &mut R,
    mut eval: F,
    mut trace: Option<&mut CemTrace>,
) -> Result<Tensor>
where
    R: Rng + ?Sized,
    F: FnMut(&Tensor) -> Result<Vec<f64>>,
{
    cfg.validate()?;
    let dim = cfg.act_dim();
    let n = cfg.num_samples;
    let k = cfg.top_k;
    let mut mean = vec![0.0; n_states * dim];
    let mut std = vec![1.0; n_states * dim];
    let mut samples = Tensor::zeros(n_states * n, dim);
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for _ in 0..cfg.iterations {
        for s in 0..n_states {
            for j in 0..n {
                let row = samples.row_mut(s * n + j);
                for d in 0..dim {
                    let v = mean[s * dim + d] + std[s * dim + d] * gaussian(rng);
                    row[d] = cfg.clip(d, v);
                }
            }
        }
        let values = eval(&samples)?;
        if values.len() != n_states * n {
            return Err(LabError::shape(format!(
                "CEM evaluator returned {} values for {} samples",
                values.len(),
                n_states * n
            )));
        }
        for s in 0..n_states {
            let vals = &values[s * n..(s + 1) * n];
            order.clear();
            order.extend(0..n);
            // Descending by value; NaN sorts last; ties keep sample order.
            order.sort_by(|&a, &b| vals[b].partial_cmp(&vals[a]).unwrap_or_else(|| vals[a].is_nan().cmp(&vals[b].is_nan())));
            let elite = &order[..k];
            for d in 0..dim {
                let m = elite.iter().map(|&j| samples.get(s * n + j, d)).sum::<f64>() / k as f64;
                let var = if k > 1 {
                    elite
                        .iter()
                        .map(|&j| (samples.get(s * n + j, d) - m).powi(2))
                        .sum::<f64>()
                        / (k - 1) as f64
                } else {
                    0.0
                };
                mean[s * dim + d] = m;
                std[s * dim + d] = var.sqrt().max(CEM_STD_FLOOR);
            }
            if s == 0 {
                if let Some(t) = trace.as_deref_mut() {
                    t.means.push(mean[..dim].to_vec());
                    t.stds.push(std[..dim].to_vec());
                    t.elite_values.push(elite.iter().map(|&j| vals[j]).sum::<f64>() / k as f64);
                    t.last_samples = samples.data()[..n * dim].to_vec();
                }
            }
        }
    }
    let mut out = Tensor::zeros(n_states, dim);
    for s in 0..n_states {
        for d in 0..dim {
            let m = mean[s * dim + d];
            let v = if cfg.stochastic_final {
                m + std[s * dim + d] * gaussian(rng)
            } else {
                m
            };
            out.set(s, d, cfg.clip(d, v));
        }
    }
    Ok(out)
}

/// Maximizes `q_eval(state, candidate_actions)` for one state.
pub fn cem_select<R, F>(mut q_eval: F, state: &[f64], cfg: &CemConfig, rng: &mut R) -> Result<Vec<f64>>
where
    R: Rng + ?Sized,
    F: FnMut(&[f64], &Tensor) -> Result<Vec<f64>>,
{
    Ok(cem_batch(1, cfg, rng, |acts| q_eval(state, acts))?.into_vec())
}

/// Like [`cem_select`] but also returns the per-iteration trace.
pub fn cem_select_traced<R, F>(
    mut q_eval: F,
    state: &[f64],
    cfg: &CemConfig,
    rng: &mut R,
) -> Result<(Vec<f64>, CemTrace)>
where
    R: Rng + ?Sized,
    F: FnMut(&[f64], &Tensor) -> Result<Vec<f64>>,
{
    let mut trace = CemTrace::default();
    let a = cem_core(1, cfg, rng, |acts| q_eval(state, acts), Some(&mut trace))?;
    Ok((a.into_vec(), trace))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsGreedyConfig {
    pub epsilon: f64,
}

impl Default for EpsGreedyConfig {
    fn default() -> Self {
        EpsGreedyConfig { epsilon: 0.1 }
    }
}

/// Uniform sample from the box.
pub fn uniform_action<R: Rng + ?Sized>(low: &[f64], high: &[f64], rng: &mut R) -> Vec<f64> {
    low.iter()
        .zip(high)
        .map(|(&l, &h)| if l == h { l } else { rng.random_range(l..=h) })
        .collect()
}

/// With probability epsilon a uniform action from the box, otherwise `greedy()`.
pub fn eps_greedy<R, F>(
    greedy: F,
    cfg: EpsGreedyConfig,
    low: &[f64],
    high: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>>
where
    R: Rng + ?Sized,
    F: FnOnce(&mut R) -> Result<Vec<f64>>,
{
    if !(0.0..=1.0).contains(&cfg.epsilon) {
        return Err(LabError::config(format!("epsilon {} outside [0, 1]", cfg.epsilon)));
    }
    if cfg.epsilon > 0.0 && rng.random::<f64>() < cfg.epsilon {
        Ok(uniform_action(low, high, rng))
    } else {
        greedy(rng)
    }
}

/// Target-policy smoothing: clipped Gaussian noise, then clip to the box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetNoise {
    pub sigma: f64,
    pub clip: f64,
}

impl Default for TargetNoise {
    fn default() -> Self {
        TargetNoise {
            sigma: 0.2,
            clip: 0.5,
        }
    }
}

pub fn smoothed_target_action<R: Rng + ?Sized>(
    action: &[f64],
    noise: TargetNoise,
    low: &[f64],
    high: &[f64],
    rng: &mut R,
) -> Vec<f64> {
    action
        .iter()
        .enumerate()
        .map(|(d, &a)| {
            let eps = if noise.sigma > 0.0 {
                (noise.sigma * gaussian(rng)).clamp(-noise.clip, noise.clip)
            } else {
                0.0
            };
            (a + eps).clamp(low[d], high[d])
        })
        .collect()
}

/// Applies [`smoothed_target_action`] to every row in place.
pub fn smooth_rows<R: Rng + ?Sized>(
    actions: &mut Tensor,
    noise: TargetNoise,
    low: &[f64],
    high: &[f64],
    rng: &mut R,
) {
    for r in 0..actions.rows() {
        let s = smoothed_target_action(actions.row(r), noise, low, high, rng);
        actions.row_mut(r).copy_from_slice(&s);
    }
}
