use rand::RngCore;

use super::{Env, StepInfo, StepResult};
use crate::replay::EndKind;

/// Distance that must be covered before reward arrives (inclusive).
pub const LOCO_GOAL_X: f64 = 5.0;
pub const LOCO_MAX_SPEED: f64 = 0.3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LocoReward {
    /// 0 at `x >= 5`, else -1.
    Sparse,
    /// 100 at `x >= 5`, 0 for `|x| <= 1`, else -1.
    LocalMax,
}

impl LocoReward {
    pub fn reward(self, x: f64) -> f64 {
        match self {
            LocoReward::Sparse => {
                if x >= LOCO_GOAL_X {
                    0.0
                } else {
                    -1.0
                }
            }
            LocoReward::LocalMax => {
                if x >= LOCO_GOAL_X {
                    100.0
                } else if x.abs() <= 1.0 {
                    0.0
                } else {
                    -1.0
                }
            }
        }
    }
}

/// Point mass on a line: `v' = clamp(0.9 v + 0.1 a, ±0.3)`, `x' = x + v'`.
/// Observation is `(x / 5, v / 0.3)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Loco {
    reward: LocoReward,
    episode_len: usize,
    x: f64,
    v: f64,
    t: usize,
}

impl Loco {
    pub fn new(reward: LocoReward, episode_len: usize) -> Self {
        Loco {
            reward,
            episode_len,
            x: 0.0,
            v: 0.0,
            t: 0,
        }
    }

    /// Places the body at an arbitrary state (episode clock restarts).
    pub fn set_state(&mut self, x: f64, v: f64) {
        self.x = x;
        self.v = v.clamp(-LOCO_MAX_SPEED, LOCO_MAX_SPEED);
        self.t = 0;
    }

    pub fn state(&self) -> (f64, f64) {
        (self.x, self.v)
    }

    fn obs(&self) -> Vec<f64> {
        vec![self.x / LOCO_GOAL_X, self.v / LOCO_MAX_SPEED]
    }
}

impl Env for Loco {
    fn id(&self) -> String {
        match self.reward {
            LocoReward::Sparse => "sparse-loco".into(),
            LocoReward::LocalMax => "local-max".into(),
        }
    }

    fn obs_dim(&self) -> usize {
        2
    }

    fn act_dim(&self) -> usize {
        1
    }

    fn episode_len(&self) -> usize {
        self.episode_len
    }

    fn reward_set(&self) -> Vec<f64> {
        match self.reward {
            LocoReward::Sparse => vec![-1.0, 0.0],
            LocoReward::LocalMax => vec![-1.0, 0.0, 100.0],
        }
    }

    fn reset(&mut self, _rng: &mut dyn RngCore) -> Vec<f64> {
        self.set_state(0.0, 0.0);
        self.obs()
    }

    fn step(&mut self, action: &[f64]) -> StepResult {
        let a = action.first().copied().unwrap_or(0.0).clamp(-1.0, 1.0);
        self.v = (0.9 * self.v + 0.1 * a).clamp(-LOCO_MAX_SPEED, LOCO_MAX_SPEED);
        self.x += self.v;
        self.t += 1;
        let end = if self.t >= self.episode_len {
            EndKind::Truncated
        } else {
            EndKind::NotDone
        };
        StepResult {
            obs: self.obs(),
            reward: self.reward.reward(self.x),
            end,
            info: StepInfo {
                position: self.x,
                success: self.x >= LOCO_GOAL_X,
            },
        }
    }

    fn position(&self) -> f64 {
        self.x
    }

    fn box_clone(&self) -> Box<dyn Env> {
        Box::new(self.clone())
    }
}
