use serde::{Deserialize, Serialize};

use crate::envs::DEFAULT_EPISODE_LEN;
use crate::error::{LabError, Result};
use crate::intrinsic::{DoraSpec, RndSpec, TwinReduction};
use crate::nn::InitKind;
use crate::policy::{CemConfig, TargetNoise};
use crate::replay::MixedBatchSpec;

/// Every agent hyperparameter. Defaults follow the benchmark table except
/// for the network shape, which is the desk profile (2 x 64).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub q_lr: f64,
    pub qx_lr: f64,
    pub batch_size: usize,
    pub gamma: f64,
    pub tau: f64,
    pub target_update_freq: usize,
    pub policy_noise: f64,
    pub noise_clip: f64,
    pub train_steps_per_env_step: usize,
    /// Fraction of Q's minibatch drawn from its own buffer.
    pub ratio_q: f64,
    /// Fraction of Q_x's minibatch drawn from its own buffer.
    pub ratio_qx: f64,
    /// Initial output bias of the exploitation Q-function.
    pub beta_q: f64,
    pub hidden: Vec<usize>,
    pub init: InitKind,
    /// Weight of extrinsic reward in the single-policy ablation.
    pub alpha: f64,
    /// Uniform-random steps collected before any training.
    pub warmup_steps: usize,
    pub buffer_capacity: usize,
    pub cem_iterations: usize,
    pub cem_samples: usize,
    pub cem_top_k: usize,
    /// CEM settings used to pick bootstrap actions at `s'`.
    pub target_cem_iterations: usize,
    pub target_cem_samples: usize,
    pub target_cem_top_k: usize,
    /// Exploration rate of the epsilon-greedy baseline.
    pub epsilon: f64,
    pub twin_reduction: TwinReduction,
    pub rnd: RndSpec,
    pub dora: DoraSpec,
    pub episode_len: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            q_lr: 0.001,
            qx_lr: 0.001,
            batch_size: 128,
            gamma: 0.99,
            tau: 0.005,
            target_update_freq: 2,
            policy_noise: 0.2,
            noise_clip: 0.5,
            train_steps_per_env_step: 1,
            ratio_q: 0.75,
            ratio_qx: 0.75,
            beta_q: 0.0,
            hidden: vec![64, 64],
            init: InitKind::KaimingUniform,
            alpha: 0.1,
            warmup_steps: 1000,
            buffer_capacity: 1_000_000,
            cem_iterations: 4,
            cem_samples: 64,
            cem_top_k: 6,
            target_cem_iterations: 2,
            target_cem_samples: 16,
            target_cem_top_k: 4,
            epsilon: 0.1,
            twin_reduction: TwinReduction::MeanAbs,
            rnd: RndSpec::default(),
            dora: DoraSpec::default(),
            episode_len: DEFAULT_EPISODE_LEN,
        }
    }
}

impl AgentConfig {
    /// Benchmark-sized networks: three hidden layers of 256.
    pub fn paper_scale() -> Self {
        AgentConfig {
            hidden: vec![256, 256, 256],
            ..AgentConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("q_lr", self.q_lr),
            ("qx_lr", self.qx_lr),
            ("tau", self.tau),
            ("gamma", self.gamma),
        ];
        for (name, v) in rates {
            if !(v.is_finite() && v > 0.0) {
                return Err(LabError::config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.tau > 1.0 || self.gamma > 1.0 {
            return Err(LabError::config("tau and gamma must not exceed 1"));
        }
        for (name, v) in [("ratio_q", self.ratio_q), ("ratio_qx", self.ratio_qx)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(LabError::config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(LabError::config(format!("epsilon {} outside [0, 1]", self.epsilon)));
        }
        if self.batch_size == 0 || self.target_update_freq == 0 || self.episode_len == 0 {
            return Err(LabError::config(
                "batch_size, target_update_freq and episode_len must be positive",
            ));
        }
        if self.hidden.contains(&0) {
            return Err(LabError::config("hidden layer widths must be positive"));
        }
        if self.buffer_capacity == 0 {
            return Err(LabError::config("buffer_capacity must be positive"));
        }
        if self.policy_noise < 0.0 || self.noise_clip < 0.0 {
            return Err(LabError::config("policy noise settings must be non-negative"));
        }
        self.rnd.validate()?;
        self.cem(1).validate()?;
        self.target_cem(1).validate()?;
        Ok(())
    }

    /// Behaviour-policy CEM (stochastic final sample).
    pub fn cem(&self, act_dim: usize) -> CemConfig {
        CemConfig {
            iterations: self.cem_iterations,
            num_samples: self.cem_samples,
            top_k: self.cem_top_k,
            ..CemConfig::unit_box(act_dim)
        }
    }

    /// Deterministic CEM used for bootstrap actions.
    pub fn target_cem(&self, act_dim: usize) -> CemConfig {
        CemConfig {
            iterations: self.target_cem_iterations,
            num_samples: self.target_cem_samples,
            top_k: self.target_cem_top_k,
            ..CemConfig::unit_box(act_dim)
        }
        .deterministic()
    }

    pub fn target_noise(&self) -> TargetNoise {
        TargetNoise {
            sigma: self.policy_noise,
            clip: self.noise_clip,
        }
    }

    pub fn q_mix(&self) -> Result<MixedBatchSpec> {
        MixedBatchSpec::new(self.batch_size, self.ratio_q)
    }

    pub fn qx_mix(&self) -> Result<MixedBatchSpec> {
        MixedBatchSpec::new(self.batch_size, self.ratio_qx)
    }
}

/// Registered training methods.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Qxplore,
    Rnd,
    Dora,
    #[serde(rename = "epsgreedy")]
    EpsGreedy,
    #[serde(rename = "qxplore-1step")]
    QxploreOneStep,
    QxploreValue,
    QxploreRnd,
    QxploreSigned,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Qxplore,
        Method::Rnd,
        Method::Dora,
        Method::EpsGreedy,
        Method::QxploreOneStep,
        Method::QxploreValue,
        Method::QxploreRnd,
        Method::QxploreSigned,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Method::Qxplore => "qxplore",
            Method::Rnd => "rnd",
            Method::Dora => "dora",
            Method::EpsGreedy => "epsgreedy",
            Method::QxploreOneStep => "qxplore-1step",
            Method::QxploreValue => "qxplore-value",
            Method::QxploreRnd => "qxplore-rnd",
            Method::QxploreSigned => "qxplore-signed",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Method::ALL.into_iter().find(|m| m.id() == s).ok_or_else(|| {
            let known: Vec<_> = Method::ALL.iter().map(|m| m.id()).collect();
            LabError::config(format!("unknown method `{s}` (known: {})", known.join(", ")))
        })
    }

    /// Two policies with two buffers and two environments.
    pub fn is_dual(self) -> bool {
        matches!(self, Method::Qxplore | Method::QxploreRnd | Method::QxploreSigned)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id())
    }
}
