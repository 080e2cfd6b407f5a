use std::path::Path;

use rand::Rng;

use super::{
    check_dims, checkpoint_file, mean_or_zero, stream, warmup_action, Agent, AgentConfig, Collector, Method,
    StepReport, TrainInfo, TwinQ,
};
use crate::envs::Env;
use crate::error::{LabError, Result};
use crate::intrinsic::{rnd_combined_reward, DoraE, RewardPredictor, Rnd};
use crate::nn::{InitScheme, MlpNet, TargetNet, Tensor};
use crate::policy::{eps_greedy, EpsGreedyConfig};
use crate::replay::{Batch, ReplayBuffer};
use crate::rng::{derive_seed, LabRng};

/// State-value function trained by bootstrap on extrinsic reward; its
/// TD-error drives the single-policy ablation.
#[derive(Clone, Debug)]
pub struct ValueFn {
    net: MlpNet,
    target: TargetNet,
    gamma: f64,
    update_freq: u64,
    steps: u64,
}

impl ValueFn {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, cfg: &AgentConfig, rng: &mut R) -> Result<Self> {
        let mut dims = vec![obs_dim];
        dims.extend_from_slice(&cfg.hidden);
        dims.push(1);
        let net = MlpNet::new(&dims, InitScheme::new(cfg.init, 0.0), cfg.q_lr, rng)?;
        Self::from_net(net, cfg.tau, cfg.gamma, cfg.target_update_freq)
    }

    pub fn from_net(net: MlpNet, tau: f64, gamma: f64, update_freq: usize) -> Result<Self> {
        let target = TargetNet::new(&net, tau)?;
        Ok(ValueFn {
            net,
            target,
            gamma,
            update_freq: update_freq.max(1) as u64,
            steps: 0,
        })
    }

    pub fn net(&self) -> &MlpNet {
        &self.net
    }

    /// Targets `r + γ · mask · V'(s')` and errors `δ = V(s) - target`.
    pub fn td(&self, states: &Tensor, rewards: &[f64], next_states: &Tensor, mask: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let v_next = self.target.net().forward(next_states)?.into_vec();
        let y = crate::intrinsic::td_targets(rewards, &v_next, mask, self.gamma);
        let v = self.net.forward(states)?.into_vec();
        let delta = v.iter().zip(&y).map(|(v, y)| v - y).collect();
        Ok((y, delta))
    }

    pub fn train(&mut self, states: &Tensor, targets: &[f64]) -> Result<f64> {
        let (loss, g) = self.net.mse_gradients(states, &Tensor::column(targets))?;
        self.net.adam_step(&g)?;
        self.steps += 1;
        if self.steps.is_multiple_of(self.update_freq) {
            self.target.update(&self.net)?;
        }
        Ok(loss)
    }
}

/// What the single Q-function is trained on on top of (or instead of) the
/// extrinsic reward.
#[derive(Clone, Debug)]
pub enum Shaping {
    Extrinsic,
    /// `w_E · r_E + w_I · ‖ĝ(s') - g(s')‖²`.
    Rnd(Rnd),
    /// `r_E + β / sqrt(-ln E(s, a))`, or the bonus added inside CEM only.
    Dora(DoraE),
    /// `r_E + |R̂(s, a) - r_E|`.
    OneStep(RewardPredictor),
    /// `|δ_V| + α · r_E`.
    Value { v: ValueFn, alpha: f64 },
}

impl Shaping {
    fn reward(&mut self, batch: &Batch, next_actions: &Tensor) -> Result<(Vec<f64>, Option<Vec<f64>>, Option<Vec<f64>>)> {
        let r = &batch.rewards;
        Ok(match self {
            Shaping::Extrinsic => (r.clone(), None, None),
            Shaping::Rnd(rnd) => {
                let ri = rnd.intrinsic(&batch.next_states)?;
                let spec = *rnd.spec();
                let total = r.iter().zip(&ri).map(|(&e, &i)| rnd_combined_reward(e, i, &spec)).collect();
                rnd.train(&batch.next_states)?;
                (total, Some(ri), None)
            }
            Shaping::Dora(e) => {
                let sa = batch.state_actions();
                let bonus = e.bonus(&sa)?;
                let total = if e.spec().summed_objective {
                    r.clone()
                } else {
                    r.iter().zip(&bonus).map(|(a, b)| a + b).collect()
                };
                let nsa = batch.next_states.hconcat(next_actions)?;
                e.train(&sa, &nsa, &batch.bootstrap_mask())?;
                e.update_target()?;
                (total, Some(bonus), None)
            }
            Shaping::OneStep(p) => {
                let sa = batch.state_actions();
                let err = p.error(&sa, r)?;
                let total = r.iter().zip(&err).map(|(a, b)| a + b).collect();
                p.train(&sa, r)?;
                (total, Some(err), None)
            }
            Shaping::Value { v, alpha } => {
                let (y, delta) = v.td(&batch.states, r, &batch.next_states, &batch.bootstrap_mask())?;
                let rx: Vec<f64> = delta.iter().map(|d| d.abs()).collect();
                let total = rx.iter().zip(r).map(|(x, e)| x + *alpha * e).collect();
                v.train(&batch.states, &y)?;
                (total, Some(rx.clone()), Some(rx))
            }
        })
    }
}

/// One twin-Q agent with one buffer and one environment: the RND, DORA and
/// epsilon-greedy baselines and the 1-step / value ablations.
pub struct SingleAgent {
    method: Method,
    q: TwinQ,
    buffer: ReplayBuffer,
    collector: Collector,
    shaping: Shaping,
    epsilon: f64,
    batch_size: usize,
    warmup: u64,
    train_per_step: usize,
    env_steps: u64,
    last_rewards: Option<Vec<f64>>,
}

impl SingleAgent {
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
        let lr = match method {
            Method::QxploreOneStep | Method::QxploreValue => cfg.qx_lr,
            _ => cfg.q_lr,
        };
        let q = TwinQ::new(od, ad, lr, 0.0, cfg, init)?;
        let shaping = match method {
            Method::EpsGreedy => Shaping::Extrinsic,
            Method::Rnd => Shaping::Rnd(Rnd::new(od, &cfg.hidden, cfg.rnd, aux)?),
            Method::Dora => Shaping::Dora(DoraE::new(od + ad, &cfg.hidden, cfg.q_lr, cfg.tau, cfg.dora, aux)?),
            Method::QxploreOneStep => Shaping::OneStep(RewardPredictor::new(od + ad, &cfg.hidden, cfg.q_lr, aux)?),
            Method::QxploreValue => Shaping::Value {
                v: ValueFn::new(od, cfg, aux)?,
                alpha: cfg.alpha,
            },
            m => return Err(LabError::config(format!("`{m}` is a two-policy method"))),
        };
        let epsilon = match method {
            Method::EpsGreedy => cfg.epsilon,
            Method::Dora => cfg.dora.epsilon,
            _ => 0.0,
        };
        Ok(SingleAgent {
            method,
            q,
            buffer: ReplayBuffer::new(od, ad, cfg.buffer_capacity)?,
            collector: Collector::new(env, derive_seed(seed, stream::ENV_Q)),
            shaping,
            epsilon,
            batch_size: cfg.batch_size,
            warmup: cfg.warmup_steps as u64,
            train_per_step: cfg.train_steps_per_env_step,
            env_steps: 0,
            last_rewards: None,
        })
    }

    pub fn q(&self) -> &TwinQ {
        &self.q
    }

    pub fn shaping(&self) -> &Shaping {
        &self.shaping
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    /// Rewards that entered the last Q update.
    pub fn last_rewards(&self) -> Option<&[f64]> {
        self.last_rewards.as_deref()
    }

    fn behaviour_action(&self, rng: &mut LabRng) -> Result<Vec<f64>> {
        let ad = self.q.act_dim();
        if self.env_steps < self.warmup {
            return Ok(warmup_action(ad, rng));
        }
        let obs = self.collector.obs();
        let (lo, hi) = (vec![-1.0; ad], vec![1.0; ad]);
        let cfg = EpsGreedyConfig { epsilon: self.epsilon };
        eps_greedy(|r| self.policy_action(obs, true, r), cfg, &lo, &hi, rng)
    }

    fn policy_action(&self, obs: &[f64], stochastic: bool, rng: &mut LabRng) -> Result<Vec<f64>> {
        match &self.shaping {
            Shaping::Dora(e) if e.spec().summed_objective => {
                self.q.act_with(obs, stochastic, rng, |sa| e.bonus(sa).map(Some))
            }
            _ => self.q.act(obs, stochastic, rng),
        }
    }

    fn train_once(&mut self, rng: &mut LabRng) -> Result<Option<TrainInfo>> {
        let Some(batch) = self.buffer.sample(self.batch_size, rng) else {
            return Ok(None);
        };
        let a_next = self.q.target_actions(&batch.next_states, rng)?;
        let (rewards, intrinsic, rx) = self.shaping.reward(&batch, &a_next)?;
        let y = self
            .q
            .td_targets(&rewards, &batch.next_states, &a_next, &batch.bootstrap_mask())?;
        let stats = self.q.train(&batch.state_actions(), &y)?;
        self.last_rewards = Some(rewards);
        Ok(Some(TrainInfo {
            td_abs_mean: stats.td_abs_mean,
            rx_mean: rx.as_deref().map(mean_or_zero),
            intrinsic_mean: intrinsic.as_deref().map(mean_or_zero),
        }))
    }
}

impl Agent for SingleAgent {
    fn method(&self) -> Method {
        self.method
    }

    fn step(&mut self, rng: &mut LabRng) -> Result<StepReport> {
        let a = self.behaviour_action(rng)?;
        let done = self.collector.step(a, &mut self.buffer)?;
        self.env_steps += 1;
        let mut train = None;
        if self.env_steps >= self.warmup {
            for _ in 0..self.train_per_step {
                train = self.train_once(rng)?.or(train);
            }
        }
        Ok(StepReport {
            exploit_done: done,
            explore_done: None,
            train,
        })
    }

    fn greedy_action(&self, obs: &[f64], rng: &mut LabRng) -> Result<Vec<f64>> {
        self.policy_action(obs, false, rng)
    }

    fn env_steps(&self) -> u64 {
        self.env_steps
    }

    fn write_checkpoint(&self, dir: &Path) -> Result<()> {
        self.q.write_checkpoint(checkpoint_file(dir, "q.bin")?)?;
        match &self.shaping {
            Shaping::Extrinsic => {}
            Shaping::Rnd(r) => {
                let mut w = checkpoint_file(dir, "rnd.bin")?;
                r.target().write_to(&mut w)?;
                r.predictor().write_to(&mut w)?;
            }
            Shaping::Dora(e) => e.net().write_to(checkpoint_file(dir, "dora_e.bin")?)?,
            Shaping::OneStep(p) => p.net().write_to(checkpoint_file(dir, "reward_model.bin")?)?,
            Shaping::Value { v, .. } => v.net().write_to(checkpoint_file(dir, "value.bin")?)?,
        }
        Ok(())
    }
}
