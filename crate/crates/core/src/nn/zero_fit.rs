//! Extrapolation of networks trained to output zero.
//!
//! Independently initialized MLPs are fit to `f(x) = 0` on
//! `[-0.75, -0.25] ∪ [0.25, 0.75]` and then probed on a dense grid over
//! `[-3, 3]`. Inside the support the response is flat; away from it the
//! networks disagree wildly, which is the signal TD-error exploration feeds on.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Uniform};

use super::{InitScheme, MlpNet, Tensor};
use crate::error::{LabError, Result};
use crate::parallel::par_map;
use crate::rng::{derive_seed, lab_rng};

#[derive(Clone, Debug)]
pub struct ZeroFitConfig {
    pub hidden_dims: Vec<usize>,
    pub n_nets: usize,
    pub n_train: usize,
    pub learning_rate: f64,
    pub mse_threshold: f64,
    pub max_steps: usize,
    pub grid_points: usize,
    pub grid_limit: f64,
    /// `|x|` at or beyond which a grid point counts as far outside the support.
    pub outside_from: f64,
    pub scheme: InitScheme,
}

impl Default for ZeroFitConfig {
    fn default() -> Self {
        ZeroFitConfig {
            hidden_dims: vec![256, 256, 256],
            n_nets: 10,
            n_train: 256,
            learning_rate: 1e-3,
            mse_threshold: 1e-7,
            max_steps: 200_000,
            grid_points: 601,
            grid_limit: 3.0,
            outside_from: 2.0,
            scheme: InitScheme::default(),
        }
    }
}

pub const SUPPORT: [(f64, f64); 2] = [(-0.75, -0.25), (0.25, 0.75)];

pub fn in_support(x: f64) -> bool {
    SUPPORT.iter().any(|&(lo, hi)| x >= lo && x <= hi)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ZeroFitCurve {
    pub net_id: usize,
    pub steps: usize,
    pub final_mse: f64,
    pub xs: Vec<f64>,
    pub fs: Vec<f64>,
    pub inside_mean_abs: f64,
    pub outside_max_abs: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ZeroFitReport {
    pub curves: Vec<ZeroFitCurve>,
    /// Nets that did not reach the MSE threshold: `(net_id, final_mse)`.
    pub excluded: Vec<(usize, f64)>,
}

impl ZeroFitReport {
    pub fn mean_inside(&self) -> f64 {
        mean(self.curves.iter().map(|c| c.inside_mean_abs))
    }

    pub fn mean_outside_max(&self) -> f64 {
        mean(self.curves.iter().map(|c| c.outside_max_abs))
    }

    /// Mean far-field peak over mean in-support magnitude.
    pub fn extrapolation_ratio(&self) -> f64 {
        self.mean_outside_max() / self.mean_inside()
    }

    /// Writes `zero_fit.csv` and `zero_fit_summary.csv` into `dir`.
    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut curves = fs::File::create(dir.join("zero_fit.csv"))?;
        writeln!(curves, "net_id,x,f_x")?;
        for c in &self.curves {
            for (x, f) in c.xs.iter().zip(&c.fs) {
                writeln!(curves, "{},{x},{f}", c.net_id)?;
            }
        }
        let mut summary = fs::File::create(dir.join("zero_fit_summary.csv"))?;
        writeln!(summary, "net_id,inside_mean_abs,outside_max_abs")?;
        for c in &self.curves {
            writeln!(summary, "{},{},{}", c.net_id, c.inside_mean_abs, c.outside_max_abs)?;
        }
        Ok(())
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

fn training_inputs<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Tensor {
    let mag = Uniform::new_inclusive(0.25, 0.75).expect("valid interval");
    let xs: Vec<f64> = (0..n)
        .map(|_| {
            let m = mag.sample(rng);
            if rng.random::<bool>() {
                m
            } else {
                -m
            }
        })
        .collect();
    Tensor::column(&xs)
}

/// Trains one network to the threshold. Returns the net, steps taken and final MSE.
pub fn fit_zero(cfg: &ZeroFitConfig, seed: u64) -> Result<(MlpNet, usize, f64)> {
    let mut rng = lab_rng(seed);
    let mut dims = vec![1];
    dims.extend_from_slice(&cfg.hidden_dims);
    dims.push(1);
    let mut net = MlpNet::new(&dims, cfg.scheme, cfg.learning_rate, &mut rng)?;
    let x = training_inputs(cfg.n_train, &mut rng);
    let y = Tensor::zeros(cfg.n_train, 1);
    let mut mse = f64::INFINITY;
    for step in 0..cfg.max_steps {
        let (loss, g) = net.mse_gradients(&x, &y)?;
        mse = loss;
        if mse < cfg.mse_threshold {
            return Ok((net, step, mse));
        }
        net.adam_step(&g)?;
    }
    let final_mse = net.forward(&x)?.data().iter().map(|v| v * v).sum::<f64>() / cfg.n_train as f64;
    Ok((net, cfg.max_steps, final_mse.min(mse)))
}

fn probe(cfg: &ZeroFitConfig, net: &MlpNet) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = cfg.grid_points.max(2);
    let xs: Vec<f64> = (0..n)
        .map(|i| -cfg.grid_limit + 2.0 * cfg.grid_limit * i as f64 / (n - 1) as f64)
        .collect();
    let fs = net.forward(&Tensor::column(&xs))?.into_vec();
    Ok((xs, fs))
}

/// Runs the demo: `cfg.n_nets` nets, each on its own seed stream derived from `rng`.
pub fn zero_fit_demo<R: Rng + ?Sized>(cfg: &ZeroFitConfig, rng: &mut R) -> Result<ZeroFitReport> {
    if cfg.n_train == 0 {
        return Err(LabError::config("zero-fit needs training points"));
    }
    let base: u64 = rng.random();
    let results = par_map((0..cfg.n_nets).collect(), |id| -> Result<_> {
        let (net, steps, mse) = fit_zero(cfg, derive_seed(base, id as u64))?;
        let (xs, fs) = probe(cfg, &net)?;
        Ok((id, steps, mse, xs, fs))
    });
    let mut report = ZeroFitReport::default();
    for r in results {
        let (net_id, steps, final_mse, xs, fs) = r?;
        if final_mse >= cfg.mse_threshold {
            log::warn!("zero-fit net {net_id} stopped at MSE {final_mse:e} after {steps} steps; excluded");
            report.excluded.push((net_id, final_mse));
            continue;
        }
        let inside_mean_abs = mean(
            xs.iter()
                .zip(&fs)
                .filter(|(x, _)| in_support(**x))
                .map(|(_, f)| f.abs()),
        );
        let outside_max_abs = xs
            .iter()
            .zip(&fs)
            .filter(|(x, _)| x.abs() >= cfg.outside_from)
            .fold(0.0_f64, |m, (_, f)| m.max(f.abs()));
        report.curves.push(ZeroFitCurve {
            net_id,
            steps,
            final_mse,
            xs,
            fs,
            inside_mean_abs,
            outside_max_abs,
        });
    }
    Ok(report)
}
