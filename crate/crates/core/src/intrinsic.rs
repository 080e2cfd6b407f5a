//! Intrinsic rewards: TD-error of the exploitation Q-function (QXplore),
//! random network distillation error (RND), zero-prediction E-values (DORA)
//! and one-step reward-prediction error.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::nn::{InitKind, InitScheme, MlpNet, TargetNet, Tensor};
use crate::replay::Batch;

/// How per-twin TD-errors collapse into one exploration reward.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TwinReduction {
    /// Mean over twins of each twin's error against the shared target.
    MeanAbs,
    /// First twin only.
    FirstTwin,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TdErrorSpec {
    pub gamma: f64,
    /// Reward `-δ` (better-than-expected is positive) instead of `|δ|`.
    pub signed: bool,
    pub twin_reduction: TwinReduction,
}

impl Default for TdErrorSpec {
    fn default() -> Self {
        TdErrorSpec {
            gamma: 0.99,
            signed: false,
            twin_reduction: TwinReduction::MeanAbs,
        }
    }
}

impl TdErrorSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(LabError::config(format!("gamma {} outside (0, 1]", self.gamma)));
        }
        Ok(())
    }
}

/// Bootstrapped targets `r + γ · mask · q_next`.
pub fn td_targets(rewards: &[f64], q_next: &[f64], mask: &[f64], gamma: f64) -> Vec<f64> {
    rewards
        .iter()
        .zip(q_next)
        .zip(mask)
        .map(|((r, q), m)| r + gamma * m * q)
        .collect()
}

/// Exploration reward from per-twin predictions `q_sa[twin][row]` and shared targets.
/// `δ = Q(s,a) - target`; unsigned mode returns `|δ|`, signed mode `-δ`.
pub fn rx_from_predictions(q_sa: &[Vec<f64>], targets: &[f64], spec: &TdErrorSpec) -> Vec<f64> {
    let twins: &[Vec<f64>] = match spec.twin_reduction {
        TwinReduction::MeanAbs => q_sa,
        TwinReduction::FirstTwin => &q_sa[..1],
    };
    let k = twins.len() as f64;
    (0..targets.len())
        .map(|i| {
            let per = twins.iter().map(|q| q[i] - targets[i]);
            if spec.signed {
                -per.sum::<f64>() / k
            } else {
                per.map(f64::abs).sum::<f64>() / k
            }
        })
        .collect()
}

/// Column of the minimum over target twins at `[s' | a']`.
pub fn min_twin_values(targets: &[&MlpNet], next_sa: &Tensor) -> Result<Vec<f64>> {
    let mut out: Option<Vec<f64>> = None;
    for t in targets {
        let v = t.forward(next_sa)?.into_vec();
        out = Some(match out {
            None => v,
            Some(m) => m.iter().zip(&v).map(|(a, b)| a.min(*b)).collect(),
        });
    }
    out.ok_or_else(|| LabError::config("no target networks"))
}

/// QXplore's reward on `batch`: the TD-error of the exploitation twins against
/// `r + γ min_j Q'_j(s', a')`, with the bootstrap dropped at terminals.
/// `next_actions` are the exploitation policy's (smoothed) actions at `s'`.
pub fn compute_rx(
    online: &[&MlpNet],
    targets: &[&MlpNet],
    batch: &Batch,
    next_actions: &Tensor,
    spec: &TdErrorSpec,
) -> Result<Vec<f64>> {
    spec.validate()?;
    let sa = batch.state_actions();
    let next_sa = batch.next_states.hconcat(next_actions)?;
    let q_next = min_twin_values(targets, &next_sa)?;
    let y = td_targets(&batch.rewards, &q_next, &batch.bootstrap_mask(), spec.gamma);
    let q_sa = online
        .iter()
        .map(|q| q.forward(&sa).map(Tensor::into_vec))
        .collect::<Result<Vec<_>>>()?;
    Ok(rx_from_predictions(&q_sa, &y, spec))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RndSpec {
    pub embed_dim: usize,
    pub predictor_lr: f64,
    pub extrinsic_weight: f64,
    pub intrinsic_weight: f64,
    pub gamma_e: f64,
    pub gamma_i: f64,
}

impl Default for RndSpec {
    fn default() -> Self {
        RndSpec {
            embed_dim: 64,
            predictor_lr: 0.001,
            extrinsic_weight: 2.0,
            intrinsic_weight: 1.0,
            gamma_e: 0.99,
            gamma_i: 0.99,
        }
    }
}

impl RndSpec {
    pub fn validate(&self) -> Result<()> {
        if self.extrinsic_weight < 0.0 || self.intrinsic_weight < 0.0 {
            return Err(LabError::config("RND reward weights must be non-negative"));
        }
        if self.embed_dim == 0 {
            return Err(LabError::config("RND embedding must be non-empty"));
        }
        Ok(())
    }
}

pub fn rnd_combined_reward(r_e: f64, r_i: f64, spec: &RndSpec) -> f64 {
    spec.extrinsic_weight * r_e + spec.intrinsic_weight * r_i
}

/// Frozen random embedding and the predictor chasing it.
#[derive(Clone, Debug)]
pub struct Rnd {
    target: MlpNet,
    predictor: MlpNet,
    spec: RndSpec,
}

impl Rnd {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, hidden: &[usize], spec: RndSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let mut dims = vec![obs_dim];
        dims.extend_from_slice(hidden);
        dims.push(spec.embed_dim);
        let target = MlpNet::new(&dims, InitScheme::default(), 0.0, rng)?;
        let predictor = MlpNet::new(&dims, InitScheme::default(), spec.predictor_lr, rng)?;
        Ok(Rnd {
            target,
            predictor,
            spec,
        })
    }

    pub fn from_nets(target: MlpNet, mut predictor: MlpNet, spec: RndSpec) -> Result<Self> {
        if target.dims() != predictor.dims() {
            return Err(LabError::shape("RND target and predictor differ in shape"));
        }
        predictor.set_learning_rate(spec.predictor_lr);
        Ok(Rnd {
            target,
            predictor,
            spec,
        })
    }

    pub fn spec(&self) -> &RndSpec {
        &self.spec
    }

    pub fn target(&self) -> &MlpNet {
        &self.target
    }

    pub fn predictor(&self) -> &MlpNet {
        &self.predictor
    }

    /// `‖ĝ(s') - g(s')‖²` per row.
    pub fn intrinsic(&self, next_states: &Tensor) -> Result<Vec<f64>> {
        rnd_intrinsic(&self.target, &self.predictor, next_states)
    }

    /// One Adam step of the predictor on `next_states`; returns the pre-step loss.
    pub fn train(&mut self, next_states: &Tensor) -> Result<f64> {
        let goal = self.target.forward(next_states)?;
        let (loss, g) = self.predictor.mse_gradients(next_states, &goal)?;
        self.predictor.adam_step(&g)?;
        Ok(loss)
    }
}

pub fn rnd_intrinsic(target: &MlpNet, predictor: &MlpNet, next_states: &Tensor) -> Result<Vec<f64>> {
    let g = target.forward(next_states)?;
    let p = predictor.forward(next_states)?;
    Ok((0..g.rows())
        .map(|r| g.row(r).iter().zip(p.row(r)).map(|(a, b)| (a - b).powi(2)).sum())
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DoraSpec {
    pub epsilon: f64,
    pub beta: f64,
    pub gamma_e: f64,
    pub gamma_q: f64,
    /// Pick actions by CEM on `Q + bonus` instead of adding the bonus to the reward.
    pub summed_objective: bool,
}

impl Default for DoraSpec {
    fn default() -> Self {
        DoraSpec {
            epsilon: 0.1,
            beta: 0.05,
            gamma_e: 0.99,
            gamma_q: 0.99,
            summed_objective: false,
        }
    }
}

/// Largest E-value admitted to the logarithm.
pub const E_CLAMP: f64 = 1.0 - 1e-6;
/// Initial output logit of a fresh E-network: `σ(6) ≈ 0.9975`.
pub const E_INIT_LOGIT: f64 = 6.0;

/// `β / sqrt(-ln E)`, with E clamped below 1.
pub fn dora_bonus_from_e(e: f64, beta: f64) -> f64 {
    let e = e.min(E_CLAMP);
    if e <= 0.0 {
        return 0.0;
    }
    beta / (-e.ln()).sqrt()
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// E-values: a logistic-squashed network over `[s | a]` trained toward
/// `γ_E · E'(s', a')`, so they decay from ~1 on visited pairs.
#[derive(Clone, Debug)]
pub struct DoraE {
    net: MlpNet,
    target: TargetNet,
    spec: DoraSpec,
}

impl DoraE {
    pub fn new<R: Rng + ?Sized>(
        input_dim: usize,
        hidden: &[usize],
        lr: f64,
        tau: f64,
        spec: DoraSpec,
        rng: &mut R,
    ) -> Result<Self> {
        if spec.beta < 0.0 {
            return Err(LabError::config("DORA beta must be non-negative"));
        }
        let mut dims = vec![input_dim];
        dims.extend_from_slice(hidden);
        dims.push(1);
        let net = MlpNet::new(
            &dims,
            InitScheme::new(InitKind::KaimingUniform, E_INIT_LOGIT),
            lr,
            rng,
        )?;
        let target = TargetNet::new(&net, tau)?;
        Ok(DoraE { net, target, spec })
    }

    pub fn spec(&self) -> &DoraSpec {
        &self.spec
    }

    pub fn net(&self) -> &MlpNet {
        &self.net
    }

    pub fn e_values(&self, sa: &Tensor) -> Result<Vec<f64>> {
        Ok(self.net.forward(sa)?.data().iter().map(|&z| sigmoid(z)).collect())
    }

    pub fn bonus(&self, sa: &Tensor) -> Result<Vec<f64>> {
        dora_bonus(self, sa)
    }

    /// One step toward `γ_E · E'(s', a')` (0 at terminals) under a logistic
    /// cross-entropy loss. Returns mean squared gap between E and its target.
    pub fn train(&mut self, sa: &Tensor, next_sa: &Tensor, mask: &[f64]) -> Result<f64> {
        let e_next: Vec<f64> = self
            .target
            .net()
            .forward(next_sa)?
            .data()
            .iter()
            .map(|&z| sigmoid(z))
            .collect();
        let y: Vec<f64> = e_next
            .iter()
            .zip(mask)
            .map(|(e, m)| self.spec.gamma_e * m * e)
            .collect();
        let logits = self.net.forward_train(sa)?;
        let n = logits.rows().max(1) as f64;
        let mut gap = 0.0;
        let up: Vec<f64> = logits
            .data()
            .iter()
            .zip(&y)
            .map(|(&z, &t)| {
                let e = sigmoid(z);
                gap += (e - t).powi(2);
                (e - t) / n
            })
            .collect();
        let g = self.net.backward(&Tensor::from_vec(logits.rows(), 1, up)?)?;
        self.net.adam_step(&g)?;
        Ok(gap / n)
    }

    pub fn update_target(&mut self) -> Result<()> {
        self.target.update(&self.net)
    }
}

/// Exploration bonus `β / sqrt(-ln E(s, a))` per row of `sa`.
pub fn dora_bonus(e: &DoraE, sa: &Tensor) -> Result<Vec<f64>> {
    Ok(e.e_values(sa)?
        .into_iter()
        .map(|v| dora_bonus_from_e(v, e.spec.beta))
        .collect())
}

/// Predicts the immediate extrinsic reward of `(s, a)`.
#[derive(Clone, Debug)]
pub struct RewardPredictor {
    net: MlpNet,
}

impl RewardPredictor {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden: &[usize], lr: f64, rng: &mut R) -> Result<Self> {
        let mut dims = vec![input_dim];
        dims.extend_from_slice(hidden);
        dims.push(1);
        Ok(RewardPredictor {
            net: MlpNet::new(&dims, InitScheme::default(), lr, rng)?,
        })
    }

    pub fn from_net(net: MlpNet) -> Self {
        RewardPredictor { net }
    }

    pub fn net(&self) -> &MlpNet {
        &self.net
    }

    /// `|R̂(s, a) - r|` per row.
    pub fn error(&self, sa: &Tensor, rewards: &[f64]) -> Result<Vec<f64>> {
        one_step_pred_error(&self.net, sa, rewards)
    }

    /// One Adam step on squared error; returns the pre-step MSE.
    pub fn train(&mut self, sa: &Tensor, rewards: &[f64]) -> Result<f64> {
        let (loss, g) = self.net.mse_gradients(sa, &Tensor::column(rewards))?;
        self.net.adam_step(&g)?;
        Ok(loss)
    }
}

pub fn one_step_pred_error(reward_net: &MlpNet, sa: &Tensor, rewards: &[f64]) -> Result<Vec<f64>> {
    let p = reward_net.forward(sa)?;
    Ok(p.data().iter().zip(rewards).map(|(p, r)| (p - r).abs()).collect())
}
