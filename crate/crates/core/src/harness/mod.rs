//! Multi-seed experiments, sweeps, summaries and plots.
//!
//! An experiment directory holds `config.resolved.txt`, one `seed_<k>.csv`
//! per seed and an `aggregate.csv` of smoothed per-episode mean and stdev.

mod aggregate;
mod plot;
mod summary;
mod sweep;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use aggregate::{
    aggregate, gaussian_smooth, read_aggregate, read_metrics, write_aggregate, write_metrics, AggRow, Aggregate,
    METRICS,
};
pub use plot::{band_points, emit_plots, render_svg, BandPoint, Series};
pub use summary::{summarize, summarize_runs, SeedSummary, Summary, FINAL_WINDOW};
pub use sweep::{run_sweep, set_param, CellOutcome, SweepAxis, SweepCell, SweepGrid, SweepReport};

use crate::agents::{run_training, AgentConfig, Method, MetricsRow, RunSpec};
use crate::envs::make_env;
use crate::error::{LabError, Result};
use crate::parallel::par_map;

pub const RESOLVED_CONFIG: &str = "config.resolved.txt";
pub const AGGREGATE_CSV: &str = "aggregate.csv";

/// One experiment: a method on an environment over several seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub method: Method,
    pub env: String,
    pub n_seeds: usize,
    /// Seeds are `base_seed..base_seed + n_seeds`.
    pub base_seed: u64,
    pub episodes: usize,
    /// Evaluate every `eval_every` episodes; 0 disables evaluation.
    pub eval_every: usize,
    pub eval_episodes: usize,
    /// Width in episodes of the Gaussian filter applied to the aggregate.
    pub smoothing_sigma: f64,
    /// Return thresholds reported by `summarize`.
    pub milestones: Vec<f64>,
    pub out_dir: PathBuf,
    pub agent: AgentConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            method: Method::Qxplore,
            env: "sparse-loco".into(),
            n_seeds: 5,
            base_seed: 0,
            episodes: 1500,
            eval_every: 1,
            eval_episodes: 1,
            smoothing_sigma: 10.0,
            milestones: Vec::new(),
            out_dir: PathBuf::from("runs"),
            agent: AgentConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| LabError::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| LabError::config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.agent.validate()?;
        make_env(&self.env, self.agent.episode_len)?;
        if self.n_seeds == 0 {
            return Err(LabError::config("n_seeds must be at least 1"));
        }
        if self.episodes == 0 {
            return Err(LabError::config("episodes must be at least 1"));
        }
        if self.eval_every > 0 && self.eval_episodes == 0 {
            return Err(LabError::config("eval_episodes must be at least 1 when evaluating"));
        }
        if !(self.smoothing_sigma >= 0.0 && self.smoothing_sigma.is_finite()) {
            return Err(LabError::config("smoothing_sigma must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.n_seeds as u64).map(|i| self.base_seed + i).collect()
    }

    pub fn run_spec(&self) -> RunSpec {
        RunSpec {
            episodes: self.episodes,
            eval_every: self.eval_every,
            eval_episodes: self.eval_episodes,
        }
    }
}

pub fn seed_file_name(seed: u64) -> String {
    format!("seed_{seed}.csv")
}

/// Outcome of `run_experiment`.
#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub dir: PathBuf,
    pub seed_files: Vec<PathBuf>,
    pub aggregate: Option<PathBuf>,
    /// Seeds whose run failed, with the error text.
    pub failures: Vec<(u64, String)>,
    /// Rows of each successful seed, in seed order.
    pub runs: Vec<Vec<MetricsRow>>,
}

impl ExperimentReport {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Trains every seed (in parallel when enabled), writes the per-seed CSVs and
/// the smoothed aggregate. A failing seed is logged to `seed_<k>.failed.txt`
/// and does not stop the others.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let dir = cfg.out_dir.clone();
    fs::create_dir_all(&dir)?;
    fs::write(dir.join(RESOLVED_CONFIG), cfg.to_toml()?)?;

    let run = cfg.run_spec();
    let outcomes = par_map(cfg.seeds(), |seed| {
        let res = run_training(cfg.method, &cfg.agent, &cfg.env, &run, seed).and_then(|rows| {
            let path = dir.join(seed_file_name(seed));
            write_metrics(&path, &rows)?;
            Ok((path, rows))
        });
        (seed, res)
    });

    let mut report = ExperimentReport {
        dir: dir.clone(),
        seed_files: Vec::new(),
        aggregate: None,
        failures: Vec::new(),
        runs: Vec::new(),
    };
    for (seed, res) in outcomes {
        match res {
            Ok((path, rows)) => {
                report.seed_files.push(path);
                report.runs.push(rows);
            }
            Err(e) => {
                log::warn!("seed {seed} failed: {e}");
                fs::write(dir.join(format!("seed_{seed}.failed.txt")), e.to_string())?;
                report.failures.push((seed, e.to_string()));
            }
        }
    }
    if !report.runs.is_empty() {
        let agg = aggregate(&report.runs).smoothed(cfg.smoothing_sigma);
        let path = dir.join(AGGREGATE_CSV);
        write_aggregate(&path, &agg)?;
        report.aggregate = Some(path);
    }
    Ok(report)
}
