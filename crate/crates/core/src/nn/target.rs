use super::mlp::MlpNet;
use crate::error::{LabError, Result};

/// Time-delayed copy of an online network, moved only by Polyak averaging.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetNet {
    net: MlpNet,
    tau: f64,
}

fn check_tau(tau: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(LabError::config(format!("tau must lie in [0, 1], got {tau}")));
    }
    Ok(())
}

impl TargetNet {
    pub fn new(online: &MlpNet, tau: f64) -> Result<Self> {
        check_tau(tau)?;
        let mut net = online.clone();
        net.set_learning_rate(0.0);
        Ok(TargetNet { net, tau })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn net(&self) -> &MlpNet {
        &self.net
    }

    pub fn params(&self) -> &[f64] {
        self.net.params()
    }

    /// `p' <- (1 - tau) p' + tau p` with the configured rate.
    pub fn update(&mut self, online: &MlpNet) -> Result<()> {
        polyak_update(self, online, self.tau)
    }
}

/// Soft update of every target parameter toward the online network.
/// `tau = 1` copies exactly; `tau = 0` leaves the target untouched.
pub fn polyak_update(target: &mut TargetNet, online: &MlpNet, tau: f64) -> Result<()> {
    check_tau(tau)?;
    if target.net.dims() != online.dims() {
        return Err(LabError::shape(format!(
            "target {:?} vs online {:?}",
            target.net.dims(),
            online.dims()
        )));
    }
    if tau == 1.0 {
        return target.net.copy_params_from(online);
    }
    if tau == 0.0 {
        return Ok(());
    }
    for (t, &p) in target.net.params_mut().iter_mut().zip(online.params()) {
        *t = (1.0 - tau) * *t + tau * p;
    }
    Ok(())
}
