use rand::{RngCore, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

use super::{Env, StepResult};
use crate::error::{LabError, Result};
use crate::rng::LabRng;

/// Appends one observation channel drawn from `N(0, σ²)` with
/// `σ = k · max(0, -position)`: the further the body retreats, the louder the
/// static. Rewards and dynamics are untouched.
pub struct NoisyTv {
    inner: Box<dyn Env>,
    k: f64,
    noise: LabRng,
}

impl NoisyTv {
    pub fn new(inner: Box<dyn Env>, k: f64) -> Result<Self> {
        if !(k.is_finite() && k >= 0.0) {
            return Err(LabError::config(format!("noisy-tv scale must be >= 0, got {k}")));
        }
        Ok(NoisyTv {
            inner,
            k,
            noise: LabRng::seed_from_u64(0),
        })
    }

    pub fn sigma_at(&self, position: f64) -> f64 {
        self.k * (-position).max(0.0)
    }

    fn channel(&mut self) -> f64 {
        let sigma = self.sigma_at(self.inner.position());
        if sigma == 0.0 {
            return 0.0;
        }
        let z: f64 = StandardNormal.sample(&mut self.noise);
        sigma * z
    }
}

impl Env for NoisyTv {
    fn id(&self) -> String {
        format!("{}+noisytv({})", self.inner.id(), self.k)
    }

    fn obs_dim(&self) -> usize {
        self.inner.obs_dim() + 1
    }

    fn act_dim(&self) -> usize {
        self.inner.act_dim()
    }

    fn episode_len(&self) -> usize {
        self.inner.episode_len()
    }

    fn reward_set(&self) -> Vec<f64> {
        self.inner.reward_set()
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        let mut obs = self.inner.reset(rng);
        self.noise = LabRng::seed_from_u64(rng.next_u64());
        obs.push(self.channel());
        obs
    }

    fn step(&mut self, action: &[f64]) -> StepResult {
        let mut r = self.inner.step(action);
        r.obs.push(self.channel());
        r
    }

    fn position(&self) -> f64 {
        self.inner.position()
    }

    fn box_clone(&self) -> Box<dyn Env> {
        Box::new(NoisyTv {
            inner: self.inner.box_clone(),
            k: self.k,
            noise: self.noise.clone(),
        })
    }
}

/// Adds a constant to every reward.
pub struct RewardShift {
    inner: Box<dyn Env>,
    delta: f64,
}

impl RewardShift {
    pub fn new(inner: Box<dyn Env>, delta: f64) -> Self {
        RewardShift { inner, delta }
    }
}

impl Env for RewardShift {
    fn id(&self) -> String {
        format!("{}+shift({})", self.inner.id(), self.delta)
    }

    fn obs_dim(&self) -> usize {
        self.inner.obs_dim()
    }

    fn act_dim(&self) -> usize {
        self.inner.act_dim()
    }

    fn episode_len(&self) -> usize {
        self.inner.episode_len()
    }

    fn reward_set(&self) -> Vec<f64> {
        self.inner.reward_set().into_iter().map(|r| r + self.delta).collect()
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.inner.reset(rng)
    }

    fn step(&mut self, action: &[f64]) -> StepResult {
        let mut r = self.inner.step(action);
        r.reward += self.delta;
        r
    }

    fn position(&self) -> f64 {
        self.inner.position()
    }

    fn box_clone(&self) -> Box<dyn Env> {
        Box::new(RewardShift {
            inner: self.inner.box_clone(),
            delta: self.delta,
        })
    }
}
