use std::f64::consts::PI;

use rand::{Rng, RngCore};

use super::{Env, StepInfo, StepResult};
use crate::replay::EndKind;

/// Square workspace `[lo, hi]^2` holding agent, block and goal.
pub const WORKSPACE: (f64, f64) = (0.0, 1.0);
/// Agent displacement per unit action.
pub const PUSH_STEP: f64 = 0.05;
pub const CONTACT_RADIUS: f64 = 0.08;
pub const GOAL_TOLERANCE: f64 = 0.05;
/// Margin keeping sampled goals away from the walls.
const GOAL_MARGIN: f64 = 0.1;
const AGENT_START: [f64; 2] = [0.5, 0.2];
const BLOCK_START: [f64; 2] = [0.5, 0.5];

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn clamp_ws(p: [f64; 2]) -> [f64; 2] {
    [p[0].clamp(WORKSPACE.0, WORKSPACE.1), p[1].clamp(WORKSPACE.0, WORKSPACE.1)]
}

/// Goal-conditioned block pushing. The agent is a disc that shoves the block
/// radially out to the contact radius whenever it gets closer than that.
/// Reward is 0 iff the block is within tolerance of the goal, else -1.
/// Observation: `(agent xy, block xy, goal xy)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GoalPush {
    episode_len: usize,
    agent: [f64; 2],
    block: [f64; 2],
    goal: [f64; 2],
    t: usize,
}

impl GoalPush {
    pub fn new(episode_len: usize) -> Self {
        GoalPush {
            episode_len,
            agent: AGENT_START,
            block: BLOCK_START,
            goal: BLOCK_START,
            t: 0,
        }
    }

    /// Places all three bodies (clock restarts).
    pub fn set_state(&mut self, agent: [f64; 2], block: [f64; 2], goal: [f64; 2]) -> Vec<f64> {
        self.agent = clamp_ws(agent);
        self.block = clamp_ws(block);
        self.goal = clamp_ws(goal);
        self.t = 0;
        self.obs()
    }

    pub fn agent(&self) -> [f64; 2] {
        self.agent
    }

    pub fn block(&self) -> [f64; 2] {
        self.block
    }

    pub fn goal(&self) -> [f64; 2] {
        self.goal
    }

    fn obs(&self) -> Vec<f64> {
        vec![
            self.agent[0],
            self.agent[1],
            self.block[0],
            self.block[1],
            self.goal[0],
            self.goal[1],
        ]
    }

    fn on_goal(&self) -> bool {
        dist(self.block, self.goal) <= GOAL_TOLERANCE
    }

    /// Reward for the current layout.
    pub fn reward(&self) -> f64 {
        if self.on_goal() {
            0.0
        } else {
            -1.0
        }
    }

    /// Hand-written controller: orbit the block at a safe radius until behind
    /// it (relative to the goal), then shove along the block-goal line.
    pub fn scripted_action(obs: &[f64]) -> Vec<f64> {
        const ORBIT: f64 = CONTACT_RADIUS + 0.03;
        let agent = [obs[0], obs[1]];
        let block = [obs[2], obs[3]];
        let goal = [obs[4], obs[5]];
        let d = dist(goal, block);
        if d <= GOAL_TOLERANCE * 0.5 {
            return vec![0.0, 0.0];
        }
        let u = [(goal[0] - block[0]) / d, (goal[1] - block[1]) / d];
        let rel = [agent[0] - block[0], agent[1] - block[1]];
        let r = (rel[0] * rel[0] + rel[1] * rel[1]).sqrt();
        let pa = rel[1].atan2(rel[0]);
        let pb = (-u[1]).atan2(-u[0]);
        let dphi = (pb - pa + PI).rem_euclid(2.0 * PI) - PI;
        let on_orbit = |angle: f64| [block[0] + ORBIT * angle.cos(), block[1] + ORBIT * angle.sin()];

        if dphi.abs() < 0.12 && r < ORBIT + 0.02 {
            // Shorten the last stroke so the block stops inside tolerance,
            // and pull back toward the push line.
            let behind = -(rel[0] * u[0] + rel[1] * u[1]);
            let mv = (d + behind - CONTACT_RADIUS - GOAL_TOLERANCE * 0.3).clamp(0.0, PUSH_STEP);
            let line = [block[0] - u[0] * (ORBIT - 0.01), block[1] - u[1] * (ORBIT - 0.01)];
            return vec![
                (u[0] * mv + 0.5 * (line[0] - agent[0])) / PUSH_STEP,
                (u[1] * mv + 0.5 * (line[1] - agent[1])) / PUSH_STEP,
            ];
        }
        let target = if dphi.abs() < 0.6 && r > ORBIT {
            let t = on_orbit(pb);
            if segment_distance(agent, t, block) < CONTACT_RADIUS + 0.005 {
                on_orbit(pa + 0.5f64.copysign(dphi))
            } else {
                t
            }
        } else {
            let sign = 1.0f64.copysign(dphi);
            let step = dphi.abs().min(0.5);
            let mut t = on_orbit(pa + sign * step);
            if !in_workspace(t) {
                t = on_orbit(pa - sign * step);
            }
            if r > ORBIT + 0.02 && segment_distance(agent, t, block) < CONTACT_RADIUS + 0.005 {
                [block[0] + rel[0] / r * ORBIT, block[1] + rel[1] / r * ORBIT]
            } else {
                t
            }
        };
        let mv = [target[0] - agent[0], target[1] - agent[1]];
        let m = (mv[0] * mv[0] + mv[1] * mv[1]).sqrt();
        if m < 1e-12 {
            return vec![0.0, 0.0];
        }
        let scale = (m / PUSH_STEP).min(1.0) / m;
        vec![mv[0] * scale, mv[1] * scale]
    }
}

fn in_workspace(p: [f64; 2]) -> bool {
    p.iter().all(|v| (WORKSPACE.0..=WORKSPACE.1).contains(v))
}

/// Distance from `c` to the segment `p`-`q`.
fn segment_distance(p: [f64; 2], q: [f64; 2], c: [f64; 2]) -> f64 {
    let v = [q[0] - p[0], q[1] - p[1]];
    let len2 = v[0] * v[0] + v[1] * v[1];
    let t = if len2 < 1e-18 {
        0.0
    } else {
        (((c[0] - p[0]) * v[0] + (c[1] - p[1]) * v[1]) / len2).clamp(0.0, 1.0)
    };
    dist([p[0] + t * v[0], p[1] + t * v[1]], c)
}

impl Env for GoalPush {
    fn id(&self) -> String {
        "goal-push".into()
    }

    fn obs_dim(&self) -> usize {
        6
    }

    fn act_dim(&self) -> usize {
        2
    }

    fn episode_len(&self) -> usize {
        self.episode_len
    }

    fn reward_set(&self) -> Vec<f64> {
        vec![-1.0, 0.0]
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        let lo = WORKSPACE.0 + GOAL_MARGIN;
        let hi = WORKSPACE.1 - GOAL_MARGIN;
        let goal = [rng.random_range(lo..=hi), rng.random_range(lo..=hi)];
        self.set_state(AGENT_START, BLOCK_START, goal)
    }

    fn step(&mut self, action: &[f64]) -> StepResult {
        let ax = action.first().copied().unwrap_or(0.0).clamp(-1.0, 1.0);
        let ay = action.get(1).copied().unwrap_or(0.0).clamp(-1.0, 1.0);
        self.agent = clamp_ws([
            self.agent[0] + PUSH_STEP * ax,
            self.agent[1] + PUSH_STEP * ay,
        ]);
        let d = dist(self.agent, self.block);
        if d < CONTACT_RADIUS {
            let dir = if d > 1e-12 {
                [(self.block[0] - self.agent[0]) / d, (self.block[1] - self.agent[1]) / d]
            } else {
                // Coincident: shove along the motion direction.
                let m = (ax * ax + ay * ay).sqrt().max(1e-12);
                [ax / m, ay / m]
            };
            self.block = clamp_ws([
                self.agent[0] + dir[0] * CONTACT_RADIUS,
                self.agent[1] + dir[1] * CONTACT_RADIUS,
            ]);
        }
        self.t += 1;
        let end = if self.t >= self.episode_len {
            EndKind::Truncated
        } else {
            EndKind::NotDone
        };
        StepResult {
            obs: self.obs(),
            reward: self.reward(),
            end,
            info: StepInfo {
                position: -dist(self.block, self.goal),
                success: self.on_goal(),
            },
        }
    }

    fn position(&self) -> f64 {
        -dist(self.block, self.goal)
    }

    fn box_clone(&self) -> Box<dyn Env> {
        Box::new(self.clone())
    }
}
