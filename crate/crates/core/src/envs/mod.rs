//! Sparse-reward surrogate tasks.
//!
//! * `sparse-loco`: 1-D double integrator, reward 0 once at least 5 units
//!   forward, -1 otherwise (maze-like exploration).
//! * `local-max`: same body; 0 within one unit of the origin, -1 beyond it,
//!   100 per step at 5 units or more (local-optimum escape).
//! * `goal-push`: 2-D kinematic pusher moving a block onto a per-episode goal
//!   (goal-conditioned exploration).
//!
//! Wrappers are appended to an id with `+`: `+noisytv(k)` adds an observation
//! channel whose noise grows as the body moves backwards, `+shift(d)` adds `d`
//! to every reward.
//!
//! Every task uses the action box `[-1, 1]^act_dim` and ends episodes by
//! truncation only.

mod loco;
mod push;
mod wrappers;

use rand::RngCore;

pub use loco::{Loco, LocoReward, LOCO_GOAL_X, LOCO_MAX_SPEED};
pub use push::{GoalPush, CONTACT_RADIUS, GOAL_TOLERANCE, PUSH_STEP, WORKSPACE};
pub use wrappers::{NoisyTv, RewardShift};

use crate::error::{LabError, Result};
use crate::replay::EndKind;

pub const DEFAULT_EPISODE_LEN: usize = 200;

/// Per-step side information.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepInfo {
    /// Forward coordinate (body `x` for locomotion, block distance to goal
    /// negated for pushing so that larger is better).
    pub position: f64,
    /// Whether this step landed in the task's success region.
    pub success: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub obs: Vec<f64>,
    pub reward: f64,
    pub end: EndKind,
    pub info: StepInfo,
}

/// A resettable episodic task with actions in `[-1, 1]^act_dim`.
pub trait Env: Send {
    fn id(&self) -> String;
    fn obs_dim(&self) -> usize;
    fn act_dim(&self) -> usize;
    fn episode_len(&self) -> usize;
    /// Every value `step` can return as reward.
    fn reward_set(&self) -> Vec<f64>;
    /// Starts an episode; all episode randomness is drawn from `rng`.
    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64>;
    fn step(&mut self, action: &[f64]) -> StepResult;
    /// Current forward coordinate (see [`StepInfo::position`]).
    fn position(&self) -> f64;
    fn box_clone(&self) -> Box<dyn Env>;
}

impl Clone for Box<dyn Env> {
    fn clone(&self) -> Self {
        self.box_clone()
    }
}

/// Clips every component into `[-1, 1]`.
pub fn clip_action(a: &[f64]) -> Vec<f64> {
    a.iter().map(|v| v.clamp(-1.0, 1.0)).collect()
}

pub const BASE_ENV_IDS: [&str; 3] = ["sparse-loco", "local-max", "goal-push"];
pub const WRAPPER_SYNTAX: [&str; 2] = ["+noisytv(k)", "+shift(d)"];

fn parse_arg(part: &str, name: &str) -> Result<Option<f64>> {
    let Some(rest) = part.strip_prefix(name) else {
        return Ok(None);
    };
    let inner = rest
        .strip_prefix('(')
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| LabError::config(format!("expected `{name}(value)`, got `{part}`")))?;
    inner
        .trim()
        .parse::<f64>()
        .map(Some)
        .map_err(|_| LabError::config(format!("bad number in `{part}`")))
}

/// Builds an environment from its registered id, e.g. `sparse-loco+noisytv(1)+shift(1)`.
pub fn make_env(id: &str, episode_len: usize) -> Result<Box<dyn Env>> {
    if episode_len == 0 {
        return Err(LabError::config("episode length must be positive"));
    }
    let mut parts = id.split('+');
    let base = parts.next().unwrap_or_default().trim();
    let mut env: Box<dyn Env> = match base {
        "sparse-loco" => Box::new(Loco::new(LocoReward::Sparse, episode_len)),
        "local-max" => Box::new(Loco::new(LocoReward::LocalMax, episode_len)),
        "goal-push" => Box::new(GoalPush::new(episode_len)),
        other => {
            return Err(LabError::config(format!(
                "unknown environment `{other}` (known: {})",
                BASE_ENV_IDS.join(", ")
            )))
        }
    };
    for part in parts {
        let part = part.trim();
        if let Some(k) = parse_arg(part, "noisytv")? {
            env = Box::new(NoisyTv::new(env, k)?);
        } else if let Some(d) = parse_arg(part, "shift")? {
            env = Box::new(RewardShift::new(env, d));
        } else {
            return Err(LabError::config(format!(
                "unknown wrapper `{part}` (known: {})",
                WRAPPER_SYNTAX.join(", ")
            )));
        }
    }
    Ok(env)
}

/// Totals of one rollout.
#[derive(Clone, Debug, PartialEq)]
pub struct Rollout {
    pub rewards: Vec<f64>,
    pub positions: Vec<f64>,
    pub success: bool,
}

impl Rollout {
    pub fn ret(&self) -> f64 {
        self.rewards.iter().sum()
    }

    pub fn mean_position(&self) -> f64 {
        if self.positions.is_empty() {
            0.0
        } else {
            self.positions.iter().sum::<f64>() / self.positions.len() as f64
        }
    }
}

/// Runs one episode with `policy(obs) -> action`.
pub fn rollout(
    env: &mut dyn Env,
    rng: &mut dyn RngCore,
    mut policy: impl FnMut(&[f64]) -> Vec<f64>,
) -> Rollout {
    let mut obs = env.reset(rng);
    let mut out = Rollout {
        rewards: Vec::with_capacity(env.episode_len()),
        positions: Vec::with_capacity(env.episode_len()),
        success: false,
    };
    loop {
        let a = policy(&obs);
        let step = env.step(&a);
        out.rewards.push(step.reward);
        out.positions.push(step.info.position);
        out.success |= step.info.success;
        obs = step.obs;
        if step.end.ends_episode() {
            return out;
        }
    }
}
