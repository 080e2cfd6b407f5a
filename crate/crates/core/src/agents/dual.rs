use std::path::Path;

use super::{
    check_dims, checkpoint_file, mean_or_zero, stream, warmup_action, Agent, AgentConfig, Collector, Method,
    StepReport, TrainInfo, TwinQ,
};
use crate::envs::Env;
use crate::error::{LabError, Result};
use crate::intrinsic::{compute_rx, Rnd, TdErrorSpec};
use crate::replay::{sample_mixed, MixedBatchSpec, ReplayBuffer};
use crate::rng::{derive_seed, LabRng};

/// Reward maximized by the exploration Q-function.
#[derive(Clone, Debug)]
pub enum ExploreSignal {
    /// TD-error of the exploitation Q-function.
    TdError(TdErrorSpec),
    /// Random network distillation error at `s'`.
    Rnd(Rnd),
}

/// Reward vectors that entered the last pair of updates.
#[derive(Clone, Debug, PartialEq)]
pub struct LossInputs {
    /// Extrinsic rewards of Q's minibatch.
    pub q_batch_extrinsic: Vec<f64>,
    /// Rewards Q was regressed on.
    pub q_rewards: Vec<f64>,
    /// Extrinsic rewards of Q_x's minibatch.
    pub qx_batch_extrinsic: Vec<f64>,
    /// Rewards Q_x was regressed on.
    pub qx_rewards: Vec<f64>,
}

/// Exploitation twin Q (extrinsic reward) and exploration twin Q (intrinsic
/// reward), each with its own CEM policy, buffer and environment. Each
/// minibatch mixes both buffers.
pub struct QxploreAgent {
    method: Method,
    q: TwinQ,
    qx: TwinQ,
    buf_q: ReplayBuffer,
    buf_qx: ReplayBuffer,
    col_q: Collector,
    col_qx: Collector,
    signal: ExploreSignal,
    mix_q: MixedBatchSpec,
    mix_qx: MixedBatchSpec,
    warmup: u64,
    train_per_step: usize,
    env_steps: u64,
    last_inputs: Option<LossInputs>,
}

impl QxploreAgent {
    pub fn new(
        method: Method,
        cfg: &AgentConfig,
        env: Box<dyn Env>,
        seed: u64,
        init: &mut LabRng,
        aux: &mut LabRng,
    ) -> Result<Self> {
        check_dims(env.as_ref())?;
        let (od, ad) = (env.obs_dim(), env.act_dim());
        let q = TwinQ::new(od, ad, cfg.q_lr, cfg.beta_q, cfg, init)?;
        let qx = TwinQ::new(od, ad, cfg.qx_lr, 0.0, cfg, init)?;
        let td = TdErrorSpec {
            gamma: cfg.gamma,
            signed: false,
            twin_reduction: cfg.twin_reduction,
        };
        let signal = match method {
            Method::Qxplore => ExploreSignal::TdError(td),
            Method::QxploreSigned => ExploreSignal::TdError(TdErrorSpec { signed: true, ..td }),
            Method::QxploreRnd => ExploreSignal::Rnd(Rnd::new(od, &cfg.hidden, cfg.rnd, aux)?),
            m => return Err(LabError::config(format!("`{m}` is a single-policy method"))),
        };
        let env_qx = env.box_clone();
        Ok(QxploreAgent {
            method,
            q,
            qx,
            buf_q: ReplayBuffer::new(od, ad, cfg.buffer_capacity)?,
            buf_qx: ReplayBuffer::new(od, ad, cfg.buffer_capacity)?,
            col_q: Collector::new(env, derive_seed(seed, stream::ENV_Q)),
            col_qx: Collector::new(env_qx, derive_seed(seed, stream::ENV_QX)),
            signal,
            mix_q: cfg.q_mix()?,
            mix_qx: cfg.qx_mix()?,
            warmup: cfg.warmup_steps as u64,
            train_per_step: cfg.train_steps_per_env_step,
            env_steps: 0,
            last_inputs: None,
        })
    }

    pub fn exploit(&self) -> &TwinQ {
        &self.q
    }

    pub fn explore(&self) -> &TwinQ {
        &self.qx
    }

    pub fn buffers(&self) -> (&ReplayBuffer, &ReplayBuffer) {
        (&self.buf_q, &self.buf_qx)
    }

    pub fn signal(&self) -> &ExploreSignal {
        &self.signal
    }

    pub fn last_inputs(&self) -> Option<&LossInputs> {
        self.last_inputs.as_ref()
    }

    /// Action of the exploration policy (deterministic CEM mean).
    pub fn explore_action(&self, obs: &[f64], rng: &mut LabRng) -> Result<Vec<f64>> {
        self.qx.act(obs, false, rng)
    }

    fn train_once(&mut self, rng: &mut LabRng) -> Result<Option<TrainInfo>> {
        let Some(bq) = sample_mixed(&self.buf_q, &self.buf_qx, self.mix_q, rng) else {
            return Ok(None);
        };
        let Some(bx) = sample_mixed(&self.buf_qx, &self.buf_q, self.mix_qx, rng) else {
            return Ok(None);
        };

        // Intrinsic reward on Q_x's batch, from the exploitation Q as it
        // stands before this step's update.
        let rx = match &mut self.signal {
            ExploreSignal::TdError(spec) => {
                let a_next = self.q.target_actions(&bx.next_states, rng)?;
                compute_rx(&self.q.online(), &self.q.target_nets(), &bx, &a_next, spec)?
            }
            ExploreSignal::Rnd(rnd) => {
                let ri = rnd.intrinsic(&bx.next_states)?;
                rnd.train(&bx.next_states)?;
                ri
            }
        };

        let a_next_q = self.q.target_actions(&bq.next_states, rng)?;
        let yq = self
            .q
            .td_targets(&bq.rewards, &bq.next_states, &a_next_q, &bq.bootstrap_mask())?;
        let sq = self.q.train(&bq.state_actions(), &yq)?;

        let a_next_x = self.qx.target_actions(&bx.next_states, rng)?;
        let yx = self
            .qx
            .td_targets(&rx, &bx.next_states, &a_next_x, &bx.bootstrap_mask())?;
        self.qx.train(&bx.state_actions(), &yx)?;

        let rx_mean = mean_or_zero(&rx);
        let is_td = matches!(self.signal, ExploreSignal::TdError(_));
        self.last_inputs = Some(LossInputs {
            q_batch_extrinsic: bq.rewards.clone(),
            q_rewards: bq.rewards,
            qx_batch_extrinsic: bx.rewards,
            qx_rewards: rx,
        });
        Ok(Some(TrainInfo {
            td_abs_mean: sq.td_abs_mean,
            rx_mean: is_td.then_some(rx_mean),
            intrinsic_mean: Some(rx_mean),
        }))
    }
}

impl Agent for QxploreAgent {
    fn method(&self) -> Method {
        self.method
    }

    fn step(&mut self, rng: &mut LabRng) -> Result<StepReport> {
        let ad = self.q.act_dim();
        let (aq, ax) = if self.env_steps < self.warmup {
            (warmup_action(ad, rng), warmup_action(ad, rng))
        } else {
            let aq = self.q.act(self.col_q.obs(), true, rng)?;
            let ax = self.qx.act(self.col_qx.obs(), true, rng)?;
            (aq, ax)
        };
        let exploit_done = self.col_q.step(aq, &mut self.buf_q)?;
        let explore_done = self.col_qx.step(ax, &mut self.buf_qx)?;
        self.env_steps += 1;
        let mut train = None;
        if self.env_steps >= self.warmup {
            for _ in 0..self.train_per_step {
                train = self.train_once(rng)?.or(train);
            }
        }
        Ok(StepReport {
            exploit_done,
            explore_done,
            train,
        })
    }

    fn greedy_action(&self, obs: &[f64], rng: &mut LabRng) -> Result<Vec<f64>> {
        self.q.act(obs, false, rng)
    }

    fn env_steps(&self) -> u64 {
        self.env_steps
    }

    fn write_checkpoint(&self, dir: &Path) -> Result<()> {
        self.q.write_checkpoint(checkpoint_file(dir, "q.bin")?)?;
        self.qx.write_checkpoint(checkpoint_file(dir, "qx.bin")?)?;
        if let ExploreSignal::Rnd(r) = &self.signal {
            let mut w = checkpoint_file(dir, "rnd.bin")?;
            r.target().write_to(&mut w)?;
            r.predictor().write_to(&mut w)?;
        }
        Ok(())
    }
}
