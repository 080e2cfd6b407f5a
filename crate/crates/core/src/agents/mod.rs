//! Training loops. QXplore runs two CEM policies side by side: one greedy on
//! extrinsic reward, one greedy on the first one's TD-error. The baselines
//! and ablations reuse the same twin-Q, CEM and replay code.

mod config;
mod dual;
mod single;
mod twin;

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

pub use config::{AgentConfig, Method};
pub use dual::{ExploreSignal, LossInputs, QxploreAgent};
pub use single::{Shaping, SingleAgent, ValueFn};
pub use twin::{tile_state_actions, TwinQ, TwinStats};

use crate::envs::{make_env, Env};
use crate::error::{LabError, Result};
use crate::policy::uniform_action;
use crate::replay::{ReplayBuffer, Transition};
use crate::rng::{derive_seed, LabRng};

/// RNG stream ids derived from a run seed.
pub(crate) mod stream {
    pub const AGENT: u64 = 0;
    pub const INIT: u64 = 1;
    pub const ENV_Q: u64 = 2;
    pub const ENV_QX: u64 = 3;
    pub const EVAL: u64 = 4;
    pub const AUX_INIT: u64 = 5;
}

/// Summary of one finished training episode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpisodeEnd {
    pub ret: f64,
    pub mean_position: f64,
    pub success: bool,
}

#[derive(Clone, Copy, Debug, Default)]
struct EpisodeAcc {
    ret: f64,
    position_sum: f64,
    steps: usize,
    success: bool,
}

impl EpisodeAcc {
    fn finish(self) -> EpisodeEnd {
        EpisodeEnd {
            ret: self.ret,
            mean_position: self.position_sum / self.steps.max(1) as f64,
            success: self.success,
        }
    }
}

/// An environment plus its reset stream and the running episode totals.
/// Finished episodes reset immediately.
pub struct Collector {
    env: Box<dyn Env>,
    reset_rng: LabRng,
    obs: Vec<f64>,
    acc: EpisodeAcc,
}

impl Collector {
    pub fn new(mut env: Box<dyn Env>, seed: u64) -> Self {
        let mut reset_rng = LabRng::seed_from_u64(seed);
        let obs = env.reset(&mut reset_rng);
        Collector {
            env,
            reset_rng,
            obs,
            acc: EpisodeAcc::default(),
        }
    }

    pub fn obs(&self) -> &[f64] {
        &self.obs
    }

    pub fn env(&self) -> &dyn Env {
        self.env.as_ref()
    }

    /// Acts, stores the transition and returns the episode summary if it ended.
    pub fn step(&mut self, action: Vec<f64>, buffer: &mut ReplayBuffer) -> Result<Option<EpisodeEnd>> {
        let r = self.env.step(&action);
        self.acc.ret += r.reward;
        self.acc.position_sum += r.info.position;
        self.acc.steps += 1;
        self.acc.success |= r.info.success;
        let s = std::mem::replace(&mut self.obs, r.obs);
        buffer.push(Transition {
            s,
            a: action,
            r: r.reward,
            s_next: self.obs.clone(),
            end: r.end,
        })?;
        if r.end.ends_episode() {
            let done = std::mem::take(&mut self.acc).finish();
            self.obs = self.env.reset(&mut self.reset_rng);
            return Ok(Some(done));
        }
        Ok(None)
    }
}

pub(crate) fn warmup_action(act_dim: usize, rng: &mut LabRng) -> Vec<f64> {
    uniform_action(&vec![-1.0; act_dim], &vec![1.0; act_dim], rng)
}

/// Training-side statistics of one update.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TrainInfo {
    /// Mean |TD-error| of the evaluated (exploitation) Q on its own batch.
    pub td_abs_mean: f64,
    /// Mean TD-error reward fed to Q_x (TD-based variants only).
    pub rx_mean: Option<f64>,
    /// Mean intrinsic term of whatever signal the method uses.
    pub intrinsic_mean: Option<f64>,
}

/// What one call to [`Agent::step`] produced.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepReport {
    /// Episode finished by the evaluated policy's collector.
    pub exploit_done: Option<EpisodeEnd>,
    /// Episode finished by the exploration collector (dual methods).
    pub explore_done: Option<EpisodeEnd>,
    pub train: Option<TrainInfo>,
}

pub trait Agent: Send {
    fn method(&self) -> Method;
    /// One environment step for every collector, then training if ready.
    fn step(&mut self, rng: &mut LabRng) -> Result<StepReport>;
    /// Deterministic action of the evaluated policy.
    fn greedy_action(&self, obs: &[f64], rng: &mut LabRng) -> Result<Vec<f64>>;
    /// Transitions collected per collector so far.
    fn env_steps(&self) -> u64;
    /// Writes every network to `dir` as flat binary files.
    fn write_checkpoint(&self, dir: &Path) -> Result<()>;
}

pub(crate) fn checkpoint_file(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    std::fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Builds the agent for `method` on `env_id`, with all randomness derived from `seed`.
pub fn build_agent(method: Method, cfg: &AgentConfig, env_id: &str, seed: u64) -> Result<Box<dyn Agent>> {
    cfg.validate()?;
    let env = make_env(env_id, cfg.episode_len)?;
    let mut init = LabRng::seed_from_u64(derive_seed(seed, stream::INIT));
    let mut aux = LabRng::seed_from_u64(derive_seed(seed, stream::AUX_INIT));
    Ok(if method.is_dual() {
        Box::new(QxploreAgent::new(method, cfg, env, seed, &mut init, &mut aux)?)
    } else {
        Box::new(SingleAgent::new(method, cfg, env, seed, &mut init, &mut aux)?)
    })
}

/// Per-episode returns, success flags and mean positions.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalResult {
    pub returns: Vec<f64>,
    pub successes: Vec<bool>,
    pub positions: Vec<f64>,
}

impl EvalResult {
    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }

    pub fn mean_return(&self) -> f64 {
        mean(&self.returns)
    }

    pub fn success_rate(&self) -> f64 {
        if self.successes.is_empty() {
            return 0.0;
        }
        self.successes.iter().filter(|&&s| s).count() as f64 / self.successes.len() as f64
    }

    pub fn mean_position(&self) -> f64 {
        mean(&self.positions)
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Runs `n_episodes` with `policy` and no learning.
pub fn evaluate<F>(env: &mut dyn Env, n_episodes: usize, rng: &mut LabRng, mut policy: F) -> Result<EvalResult>
where
    F: FnMut(&[f64], &mut LabRng) -> Result<Vec<f64>>,
{
    let mut out = EvalResult::default();
    for _ in 0..n_episodes {
        let mut obs = env.reset(rng);
        let mut acc = EpisodeAcc::default();
        loop {
            let a = policy(&obs, rng)?;
            let r = env.step(&a);
            acc.ret += r.reward;
            acc.position_sum += r.info.position;
            acc.steps += 1;
            acc.success |= r.info.success;
            obs = r.obs;
            if r.end.ends_episode() {
                break;
            }
        }
        let e = acc.finish();
        out.returns.push(e.ret);
        out.successes.push(e.success);
        out.positions.push(e.mean_position);
    }
    Ok(out)
}

/// Evaluates an agent's deterministic policy.
pub fn evaluate_agent(agent: &dyn Agent, env: &mut dyn Env, n_episodes: usize, rng: &mut LabRng) -> Result<EvalResult> {
    evaluate(env, n_episodes, rng, |obs, r| agent.greedy_action(obs, r))
}

/// One logged training episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub seed: u64,
    pub episode: usize,
    pub env_steps: u64,
    pub return_q: f64,
    pub return_qx: Option<f64>,
    pub success: bool,
    pub mean_position: f64,
    pub mean_position_qx: Option<f64>,
    pub mean_rx: Option<f64>,
    pub mean_td_abs: Option<f64>,
    pub intrinsic_mean: Option<f64>,
    pub eval_return: Option<f64>,
    pub eval_success: Option<f64>,
    pub eval_position: Option<f64>,
    /// Wall time of the episode; kept out of the CSV so reruns are byte-identical.
    #[serde(skip)]
    pub wall_ms: f64,
}

/// Episode budget and evaluation cadence of one run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub episodes: usize,
    /// Evaluate after every `eval_every`-th episode; 0 disables evaluation.
    pub eval_every: usize,
    pub eval_episodes: usize,
}

impl Default for RunSpec {
    fn default() -> Self {
        RunSpec {
            episodes: 1500,
            eval_every: 1,
            eval_episodes: 1,
        }
    }
}

#[derive(Default)]
struct TrainAcc {
    n: usize,
    td: f64,
    rx: Option<f64>,
    intrinsic: Option<f64>,
}

impl TrainAcc {
    fn add(&mut self, t: TrainInfo) {
        self.n += 1;
        self.td += t.td_abs_mean;
        if let Some(v) = t.rx_mean {
            *self.rx.get_or_insert(0.0) += v;
        }
        if let Some(v) = t.intrinsic_mean {
            *self.intrinsic.get_or_insert(0.0) += v;
        }
    }

    fn means(&self) -> (Option<f64>, Option<f64>, Option<f64>) {
        if self.n == 0 {
            return (None, None, None);
        }
        let n = self.n as f64;
        (Some(self.td / n), self.rx.map(|v| v / n), self.intrinsic.map(|v| v / n))
    }
}

/// Trains `agent` for `run.episodes` episodes of its evaluated collector and
/// logs one row per episode. `on_row` sees each row as it is produced.
pub fn run_agent(
    agent: &mut dyn Agent,
    eval_env: &mut dyn Env,
    run: &RunSpec,
    seed: u64,
    mut on_row: impl FnMut(&MetricsRow),
) -> Result<Vec<MetricsRow>> {
    let mut rng = LabRng::seed_from_u64(derive_seed(seed, stream::AGENT));
    let mut eval_rng = LabRng::seed_from_u64(derive_seed(seed, stream::EVAL));
    let mut rows = Vec::with_capacity(run.episodes);
    let mut acc = TrainAcc::default();
    let mut explore: Option<EpisodeEnd> = None;
    let mut clock = Instant::now();
    while rows.len() < run.episodes {
        let rep = agent.step(&mut rng)?;
        if let Some(t) = rep.train {
            acc.add(t);
        }
        if rep.explore_done.is_some() {
            explore = rep.explore_done;
        }
        let Some(done) = rep.exploit_done else {
            continue;
        };
        let episode = rows.len() + 1;
        let eval = if run.eval_every > 0 && episode % run.eval_every == 0 {
            Some(evaluate_agent(&*agent, eval_env, run.eval_episodes, &mut eval_rng)?)
        } else {
            None
        };
        let (td, rx, intrinsic) = acc.means();
        let row = MetricsRow {
            seed,
            episode,
            env_steps: agent.env_steps(),
            return_q: done.ret,
            return_qx: explore.map(|e| e.ret),
            success: done.success,
            mean_position: done.mean_position,
            mean_position_qx: explore.map(|e| e.mean_position),
            mean_rx: rx,
            mean_td_abs: td,
            intrinsic_mean: intrinsic,
            eval_return: eval.as_ref().map(EvalResult::mean_return),
            eval_success: eval.as_ref().map(EvalResult::success_rate),
            eval_position: eval.as_ref().map(EvalResult::mean_position),
            wall_ms: clock.elapsed().as_secs_f64() * 1e3,
        };
        clock = Instant::now();
        on_row(&row);
        rows.push(row);
        acc = TrainAcc::default();
        explore = None;
    }
    Ok(rows)
}

/// Builds and trains one agent.
pub fn run_training(
    method: Method,
    cfg: &AgentConfig,
    env_id: &str,
    run: &RunSpec,
    seed: u64,
) -> Result<Vec<MetricsRow>> {
    let mut agent = build_agent(method, cfg, env_id, seed)?;
    let mut eval_env = make_env(env_id, cfg.episode_len)?;
    run_agent(agent.as_mut(), eval_env.as_mut(), run, seed, |_| {})
}

pub(crate) fn mean_or_zero(v: &[f64]) -> f64 {
    mean(v)
}

pub(crate) fn check_dims(env: &dyn Env) -> Result<()> {
    if env.obs_dim() == 0 || env.act_dim() == 0 {
        return Err(LabError::config("environment has empty observation or action space"));
    }
    Ok(())
}

#[cfg(test)]
mod tests;
