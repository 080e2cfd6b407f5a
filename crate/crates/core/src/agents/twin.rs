use std::io::Write;

use rand::Rng;

use super::AgentConfig;
use crate::error::{LabError, Result};
use crate::intrinsic::min_twin_values;
use crate::nn::{InitScheme, MlpNet, TargetNet, Tensor};
use crate::policy::{cem_batch, smooth_rows, CemConfig, TargetNoise};

/// Stacks `[state_i | action_j]` for every state and its `per_state` candidate
/// actions, state-major.
pub fn tile_state_actions(states: &Tensor, actions: &Tensor, per_state: usize) -> Result<Tensor> {
    if actions.rows() != states.rows() * per_state {
        return Err(LabError::shape(format!(
            "{} actions for {} states x {per_state}",
            actions.rows(),
            states.rows()
        )));
    }
    let (sd, ad) = (states.cols(), actions.cols());
    let mut data = Vec::with_capacity(actions.rows() * (sd + ad));
    for s in 0..states.rows() {
        let srow = states.row(s);
        for j in 0..per_state {
            data.extend_from_slice(srow);
            data.extend_from_slice(actions.row(s * per_state + j));
        }
    }
    Tensor::from_vec(actions.rows(), sd + ad, data)
}

/// Losses and TD statistics of one twin update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwinStats {
    pub loss: f64,
    /// Mean `|Q_1(s,a) - y|` before the update.
    pub td_abs_mean: f64,
}

/// Two online Q-networks over `[s | a]`, their Polyak targets and the CEM
/// machinery that turns them into policies.
#[derive(Clone, Debug)]
pub struct TwinQ {
    online: [MlpNet; 2],
    targets: [TargetNet; 2],
    obs_dim: usize,
    act_dim: usize,
    gamma: f64,
    update_freq: usize,
    train_steps: u64,
    target_updates: u64,
    noise: TargetNoise,
    act_cem: CemConfig,
    target_cem: CemConfig,
}

impl TwinQ {
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        act_dim: usize,
        lr: f64,
        output_bias: f64,
        cfg: &AgentConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let mut dims = vec![obs_dim + act_dim];
        dims.extend_from_slice(&cfg.hidden);
        dims.push(1);
        let scheme = InitScheme::new(cfg.init, output_bias);
        let a = MlpNet::new(&dims, scheme, lr, rng)?;
        let b = MlpNet::new(&dims, scheme, lr, rng)?;
        let targets = [TargetNet::new(&a, cfg.tau)?, TargetNet::new(&b, cfg.tau)?];
        Ok(TwinQ {
            online: [a, b],
            targets,
            obs_dim,
            act_dim,
            gamma: cfg.gamma,
            update_freq: cfg.target_update_freq,
            train_steps: 0,
            target_updates: 0,
            noise: cfg.target_noise(),
            act_cem: cfg.cem(act_dim),
            target_cem: cfg.target_cem(act_dim),
        })
    }

    pub fn online(&self) -> [&MlpNet; 2] {
        [&self.online[0], &self.online[1]]
    }

    pub fn target_nets(&self) -> [&MlpNet; 2] {
        [self.targets[0].net(), self.targets[1].net()]
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn act_dim(&self) -> usize {
        self.act_dim
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    pub fn target_updates(&self) -> u64 {
        self.target_updates
    }

    pub fn act_cem(&self) -> &CemConfig {
        &self.act_cem
    }

    /// First online twin at `[s | a]`.
    pub fn q_values(&self, sa: &Tensor) -> Result<Vec<f64>> {
        Ok(self.online[0].forward(sa)?.into_vec())
    }

    /// CEM over the first online twin. `stochastic` draws the final action
    /// from the refit Gaussian; otherwise its mean is returned.
    pub fn act<R: Rng + ?Sized>(&self, obs: &[f64], stochastic: bool, rng: &mut R) -> Result<Vec<f64>> {
        self.act_with(obs, stochastic, rng, |_| Ok(None))
    }

    /// Like [`act`](Self::act) with an additive per-candidate bonus.
    pub fn act_with<R, B>(&self, obs: &[f64], stochastic: bool, rng: &mut R, mut bonus: B) -> Result<Vec<f64>>
    where
        R: Rng + ?Sized,
        B: FnMut(&Tensor) -> Result<Option<Vec<f64>>>,
    {
        let cfg = CemConfig {
            stochastic_final: stochastic,
            ..self.act_cem.clone()
        };
        let state = Tensor::from_vec(1, obs.len(), obs.to_vec())?;
        let n = cfg.num_samples;
        let out = cem_batch(1, &cfg, rng, |acts| {
            let sa = tile_state_actions(&state, acts, n)?;
            let mut q = self.q_values(&sa)?;
            if let Some(b) = bonus(&sa)? {
                for (qi, bi) in q.iter_mut().zip(b) {
                    *qi += bi;
                }
            }
            Ok(q)
        })?;
        Ok(out.into_vec())
    }

    /// Smoothed bootstrap actions at `next_states`: deterministic CEM on the
    /// first target twin, then clipped Gaussian noise.
    pub fn target_actions<R: Rng + ?Sized>(&self, next_states: &Tensor, rng: &mut R) -> Result<Tensor> {
        let n = self.target_cem.num_samples;
        let net = self.targets[0].net();
        let mut a = cem_batch(next_states.rows(), &self.target_cem, rng, |acts| {
            Ok(net.forward(&tile_state_actions(next_states, acts, n)?)?.into_vec())
        })?;
        smooth_rows(
            &mut a,
            self.noise,
            &self.target_cem.action_low,
            &self.target_cem.action_high,
            rng,
        );
        Ok(a)
    }

    /// `min_j Q'_j(s', a')`.
    pub fn bootstrap_values(&self, next_states: &Tensor, next_actions: &Tensor) -> Result<Vec<f64>> {
        let nsa = next_states.hconcat(next_actions)?;
        min_twin_values(&self.target_nets(), &nsa)
    }

    /// `r + γ · mask · min_j Q'_j(s', a')`.
    pub fn td_targets(
        &self,
        rewards: &[f64],
        next_states: &Tensor,
        next_actions: &Tensor,
        mask: &[f64],
    ) -> Result<Vec<f64>> {
        let q = self.bootstrap_values(next_states, next_actions)?;
        Ok(crate::intrinsic::td_targets(rewards, &q, mask, self.gamma))
    }

    /// One Adam step of both twins toward `targets`; every `update_freq`
    /// steps the targets move by Polyak averaging.
    pub fn train(&mut self, sa: &Tensor, targets: &[f64]) -> Result<TwinStats> {
        if targets.len() != sa.rows() {
            return Err(LabError::shape("one target per row required"));
        }
        let y = Tensor::column(targets);
        let mut loss = 0.0;
        let mut td_abs_mean = 0.0;
        for (i, net) in self.online.iter_mut().enumerate() {
            if i == 0 {
                let q = net.forward(sa)?;
                td_abs_mean = q.data().iter().zip(targets).map(|(q, y)| (q - y).abs()).sum::<f64>()
                    / targets.len().max(1) as f64;
            }
            let (l, g) = net.mse_gradients(sa, &y)?;
            net.adam_step(&g)?;
            loss += l / 2.0;
        }
        self.train_steps += 1;
        if self.train_steps.is_multiple_of(self.update_freq as u64) {
            for (t, o) in self.targets.iter_mut().zip(&self.online) {
                t.update(o)?;
            }
            self.target_updates += 1;
        }
        Ok(TwinStats { loss, td_abs_mean })
    }

    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> Result<()> {
        for n in &self.online {
            n.write_to(&mut w)?;
        }
        for t in &self.targets {
            t.net().write_to(&mut w)?;
        }
        Ok(())
    }
}
