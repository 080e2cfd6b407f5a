use std::fs;
use std::path::PathBuf;

use super::{run_experiment, summarize_runs, ExperimentConfig};
use crate::agents::AgentConfig;
use crate::error::{LabError, Result};
use crate::parallel::par_map;

/// One grid dimension. Parameters listed together move in lock-step: entry
/// `values[i]` holds one value per parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepAxis {
    /// Dotted `AgentConfig` paths, e.g. `q_lr` or `rnd.predictor_lr`.
    pub params: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl SweepAxis {
    pub fn single(param: &str, values: &[f64]) -> Self {
        SweepAxis {
            params: vec![param.to_string()],
            values: values.iter().map(|&v| vec![v]).collect(),
        }
    }

    pub fn tied(params: &[&str], values: &[&[f64]]) -> Self {
        SweepAxis {
            params: params.iter().map(|s| s.to_string()).collect(),
            values: values.iter().map(|v| v.to_vec()).collect(),
        }
    }
}

/// Cross product of axes.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepGrid {
    pub name: String,
    pub axes: Vec<SweepAxis>,
}

/// One point of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepCell {
    pub grid: String,
    pub assignments: Vec<(String, f64)>,
}

impl SweepCell {
    /// Directory-safe name, e.g. `q_lr=0.01_qx_lr=0.001`.
    pub fn label(&self) -> String {
        let parts: Vec<String> = self.assignments.iter().map(|(p, v)| format!("{p}={v}")).collect();
        parts.join("_")
    }

    pub fn apply(&self, cfg: &AgentConfig) -> Result<AgentConfig> {
        let mut out = cfg.clone();
        for (p, v) in &self.assignments {
            out = set_param(&out, p, *v)?;
        }
        Ok(out)
    }
}

const LR_PAIRS: [[f64; 2]; 7] = [
    [0.01, 0.01],
    [0.01, 0.001],
    [0.001, 0.01],
    [0.001, 0.001],
    [0.001, 0.0001],
    [0.0001, 0.001],
    [0.0001, 0.0001],
];
const RATIO_PAIRS: [[f64; 2]; 4] = [[0.0, 1.0], [0.25, 0.75], [0.5, 0.5], [0.75, 0.25]];
const RND_LRS: [f64; 3] = [0.01, 0.001, 0.0001];
const RND_REWARD_WEIGHTS: [f64; 4] = [0.5, 1.0, 2.0, 4.0];

impl SweepGrid {
    pub fn new(name: &str, axes: Vec<SweepAxis>) -> Self {
        SweepGrid {
            name: name.to_string(),
            axes,
        }
    }

    /// Preloaded grids: `lr` (Q / Q_x learning-rate pairs), `ratio` (self-data
    /// fractions) and `rnd` (predictor lr and extrinsic weight, each varied
    /// alone around the baseline, so two grids).
    pub fn preset(name: &str) -> Result<Vec<SweepGrid>> {
        let pairs = |p: &[[f64; 2]]| p.iter().map(|v| v.to_vec()).collect::<Vec<_>>();
        match name {
            "lr" => Ok(vec![SweepGrid::new(
                "lr",
                vec![SweepAxis {
                    params: vec!["q_lr".into(), "qx_lr".into()],
                    values: pairs(&LR_PAIRS),
                }],
            )]),
            "ratio" => Ok(vec![SweepGrid::new(
                "ratio",
                vec![SweepAxis {
                    params: vec!["ratio_q".into(), "ratio_qx".into()],
                    values: pairs(&RATIO_PAIRS),
                }],
            )]),
            "rnd" => Ok(vec![
                SweepGrid::new("rnd-lr", vec![SweepAxis::single("rnd.predictor_lr", &RND_LRS)]),
                SweepGrid::new("rnd-rw", vec![SweepAxis::single("rnd.extrinsic_weight", &RND_REWARD_WEIGHTS)]),
            ]),
            other => Err(LabError::config(format!("unknown grid `{other}` (expected lr, ratio or rnd)"))),
        }
    }

    pub fn preset_names() -> [&'static str; 3] {
        ["lr", "ratio", "rnd"]
    }

    /// Number of cells: the product of axis lengths.
    pub fn size(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    /// Enumerates the cross product, last axis fastest.
    pub fn cells(&self) -> Result<Vec<SweepCell>> {
        if self.axes.is_empty() {
            return Err(LabError::config(format!("grid `{}` has no axes", self.name)));
        }
        for a in &self.axes {
            if a.params.is_empty() || a.values.is_empty() {
                return Err(LabError::config(format!("grid `{}` has an empty dimension", self.name)));
            }
            if a.values.iter().any(|v| v.len() != a.params.len()) {
                return Err(LabError::config(format!(
                    "grid `{}`: every entry of axis {:?} needs {} values",
                    self.name,
                    a.params,
                    a.params.len()
                )));
            }
        }
        let mut cells = vec![Vec::new()];
        for a in &self.axes {
            let mut next = Vec::with_capacity(cells.len() * a.values.len());
            for prefix in &cells {
                for vals in &a.values {
                    let mut c: Vec<(String, f64)> = prefix.clone();
                    c.extend(a.params.iter().cloned().zip(vals.iter().copied()));
                    next.push(c);
                }
            }
            cells = next;
        }
        Ok(cells
            .into_iter()
            .map(|assignments| SweepCell {
                grid: self.name.clone(),
                assignments,
            })
            .collect())
    }
}

/// Returns `cfg` with the numeric field at dotted `path` set to `value`.
/// Integer fields accept only integral values.
pub fn set_param(cfg: &AgentConfig, path: &str, value: f64) -> Result<AgentConfig> {
    let mut tree = toml::Value::try_from(cfg).map_err(|e| LabError::config(e.to_string()))?;
    let mut slot = &mut tree;
    for key in path.split('.') {
        slot = slot
            .get_mut(key)
            .ok_or_else(|| LabError::config(format!("unknown parameter `{path}`")))?;
    }
    *slot = match slot {
        toml::Value::Float(_) => toml::Value::Float(value),
        toml::Value::Integer(_) if value.fract() == 0.0 && value >= 0.0 => toml::Value::Integer(value as i64),
        toml::Value::Integer(_) => {
            return Err(LabError::config(format!("parameter `{path}` needs an integer, got {value}")))
        }
        _ => return Err(LabError::config(format!("parameter `{path}` is not numeric"))),
    };
    let out: AgentConfig = tree.try_into().map_err(|e: toml::de::Error| LabError::config(e.to_string()))?;
    out.validate()?;
    Ok(out)
}

/// Result of one sweep cell.
#[derive(Clone, Debug)]
pub struct CellOutcome {
    pub cell: SweepCell,
    pub dir: PathBuf,
    pub final_return: Option<f64>,
    pub final_success: Option<f64>,
    pub failed_seeds: usize,
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct SweepReport {
    pub cells: Vec<CellOutcome>,
    pub leaderboard: PathBuf,
}

/// Runs every cell of every grid as a full experiment under
/// `base.out_dir/<grid>/<cell>` and writes `leaderboard.csv` ranking cells by
/// final mean return.
pub fn run_sweep(base: &ExperimentConfig, grids: &[SweepGrid]) -> Result<SweepReport> {
    base.validate()?;
    let mut jobs = Vec::new();
    for g in grids {
        for cell in g.cells()? {
            let mut cfg = base.clone();
            cfg.agent = cell.apply(&base.agent)?;
            cfg.out_dir = base.out_dir.join(&g.name).join(cell.label());
            jobs.push((cell, cfg));
        }
    }
    fs::create_dir_all(&base.out_dir)?;

    let mut cells = par_map(jobs, |(cell, cfg)| match run_experiment(&cfg) {
        Ok(rep) => {
            let s = summarize_runs(&rep.runs, &cfg.milestones);
            let ok = !s.seeds.is_empty();
            CellOutcome {
                cell,
                dir: cfg.out_dir,
                final_return: ok.then(|| s.final_return().0),
                final_success: ok.then(|| s.final_success().0),
                failed_seeds: rep.failures.len(),
                error: None,
            }
        }
        Err(e) => CellOutcome {
            cell,
            dir: cfg.out_dir,
            final_return: None,
            final_success: None,
            failed_seeds: cfg.n_seeds,
            error: Some(e.to_string()),
        },
    });
    cells.sort_by(|a, b| {
        let key = |c: &CellOutcome| c.final_return.unwrap_or(f64::NEG_INFINITY);
        key(b).total_cmp(&key(a))
    });

    let leaderboard = base.out_dir.join("leaderboard.csv");
    let mut w = csv::Writer::from_path(&leaderboard)?;
    w.write_record(["rank", "grid", "cell", "final_mean_return", "final_success", "failed_seeds"])?;
    for (i, c) in cells.iter().enumerate() {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        w.write_record([
            (i + 1).to_string(),
            c.cell.grid.clone(),
            c.cell.label(),
            opt(c.final_return),
            opt(c.final_success),
            c.failed_seeds.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(SweepReport { cells, leaderboard })
}
