use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{read_metrics, seed_file_name, ExperimentConfig, RESOLVED_CONFIG};
use crate::agents::MetricsRow;
use crate::error::{LabError, Result};

/// Episodes over which the final success rate and return are averaged.
pub const FINAL_WINDOW: usize = 50;

fn row_return(r: &MetricsRow) -> f64 {
    r.eval_return.unwrap_or(r.return_q)
}

fn row_success(r: &MetricsRow) -> f64 {
    r.eval_success.unwrap_or(if r.success { 1.0 } else { 0.0 })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeedSummary {
    pub seed: u64,
    pub episodes: usize,
    /// First episode whose return reached each milestone.
    pub milestone_episode: Vec<Option<usize>>,
    /// Mean success over the last `FINAL_WINDOW` episodes.
    pub final_success: f64,
    pub final_return: f64,
}

impl SeedSummary {
    /// Uses evaluation columns when present, training columns otherwise.
    pub fn from_rows(rows: &[MetricsRow], milestones: &[f64]) -> Self {
        let tail = &rows[rows.len().saturating_sub(FINAL_WINDOW)..];
        let avg = |f: fn(&MetricsRow) -> f64| {
            if tail.is_empty() {
                0.0
            } else {
                tail.iter().map(f).sum::<f64>() / tail.len() as f64
            }
        };
        SeedSummary {
            seed: rows.first().map_or(0, |r| r.seed),
            episodes: rows.len(),
            milestone_episode: milestones
                .iter()
                .map(|&m| rows.iter().find(|r| row_return(r) >= m).map(|r| r.episode))
                .collect(),
            final_success: avg(row_success),
            final_return: avg(row_return),
        }
    }
}

/// Per-seed milestone episodes and final-window statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub milestones: Vec<f64>,
    pub seeds: Vec<SeedSummary>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mu = xs.iter().sum::<f64>() / n;
    (mu, (xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / n).sqrt())
}

impl Summary {
    /// Mean and stdev of the episode at which milestone `i` was reached,
    /// over the seeds that reached it, plus that seed count.
    pub fn milestone(&self, i: usize) -> (Option<(f64, f64)>, usize) {
        let eps: Vec<f64> = self
            .seeds
            .iter()
            .filter_map(|s| s.milestone_episode[i])
            .map(|e| e as f64)
            .collect();
        let n = eps.len();
        ((n > 0).then(|| mean_std(&eps)), n)
    }

    pub fn final_success(&self) -> (f64, f64) {
        mean_std(&self.seeds.iter().map(|s| s.final_success).collect::<Vec<_>>())
    }

    pub fn final_return(&self) -> (f64, f64) {
        mean_std(&self.seeds.iter().map(|s| s.final_return).collect::<Vec<_>>())
    }

    fn milestone_cell(&self, i: usize) -> String {
        match self.milestone(i).0 {
            Some((m, s)) => format!("{m:.1} ± {s:.1}"),
            None => "x".into(),
        }
    }

    /// Plain-text table; unreached milestones print as `x`.
    pub fn to_table(&self) -> String {
        let mut head = vec!["statistic".to_string()];
        let mut vals = vec!["mean ± std".to_string()];
        for (i, m) in self.milestones.iter().enumerate() {
            let (_, n) = self.milestone(i);
            head.push(format!("episodes to {m} ({n}/{})", self.seeds.len()));
            vals.push(self.milestone_cell(i));
        }
        let (fs, fss) = self.final_success();
        let (fr, frs) = self.final_return();
        head.push(format!("success (last {FINAL_WINDOW})"));
        vals.push(format!("{fs:.3} ± {fss:.3}"));
        head.push(format!("return (last {FINAL_WINDOW})"));
        vals.push(format!("{fr:.2} ± {frs:.2}"));

        let widths: Vec<usize> = head
            .iter()
            .zip(&vals)
            .map(|(h, v)| h.chars().count().max(v.chars().count()))
            .collect();
        let mut out = String::new();
        for line in [&head, &vals] {
            let cells: Vec<String> = line.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        }
        out.push('\n');
        let _ = writeln!(out, "seed  episodes  success  return");
        for s in &self.seeds {
            let _ = writeln!(
                out,
                "{:<4}  {:<8}  {:<7.3}  {:.2}",
                s.seed, s.episodes, s.final_success, s.final_return
            );
        }
        out
    }

    /// One row per seed plus `mean` and `std` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["seed".to_string(), "episodes".to_string()];
        header.extend(self.milestones.iter().map(|m| format!("episodes_to_{m}")));
        header.push("final_success".into());
        header.push("final_return".into());
        w.write_record(&header)?;
        for s in &self.seeds {
            let mut rec = vec![s.seed.to_string(), s.episodes.to_string()];
            rec.extend(
                s.milestone_episode
                    .iter()
                    .map(|e| e.map_or_else(|| "x".to_string(), |e| e.to_string())),
            );
            rec.push(s.final_success.to_string());
            rec.push(s.final_return.to_string());
            w.write_record(&rec)?;
        }
        let (fs, fss) = self.final_success();
        let (fr, frs) = self.final_return();
        for (label, pick) in [("mean", 0usize), ("std", 1)] {
            let mut rec = vec![label.to_string(), String::new()];
            for i in 0..self.milestones.len() {
                rec.push(match self.milestone(i).0 {
                    Some(ms) => [ms.0, ms.1][pick].to_string(),
                    None => "x".into(),
                });
            }
            rec.push([fs, fss][pick].to_string());
            rec.push([fr, frs][pick].to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn summarize_runs(runs: &[Vec<MetricsRow>], milestones: &[f64]) -> Summary {
    Summary {
        milestones: milestones.to_vec(),
        seeds: runs
            .iter()
            .filter(|r| !r.is_empty())
            .map(|r| SeedSummary::from_rows(r, milestones))
            .collect(),
    }
}

/// Reads an experiment directory, writes `summary.csv` and `summary.txt`
/// next to the inputs. Absent seed files are listed in the error.
pub fn summarize(dir: &Path) -> Result<Summary> {
    let cfg_path = dir.join(RESOLVED_CONFIG);
    if !cfg_path.exists() {
        return Err(LabError::Missing(vec![cfg_path.display().to_string()]));
    }
    let cfg: ExperimentConfig =
        toml::from_str(&fs::read_to_string(&cfg_path)?).map_err(|e| LabError::config(e.to_string()))?;
    let missing: Vec<String> = cfg
        .seeds()
        .into_iter()
        .map(|s| dir.join(seed_file_name(s)))
        .filter(|p| !p.exists())
        .map(|p| p.display().to_string())
        .collect();
    if !missing.is_empty() {
        return Err(LabError::Missing(missing));
    }
    let runs = cfg
        .seeds()
        .into_iter()
        .map(|s| read_metrics(&dir.join(seed_file_name(s))))
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize_runs(&runs, &cfg.milestones);
    summary.write_csv(&dir.join("summary.csv"))?;
    fs::write(dir.join("summary.txt"), summary.to_table())?;
    Ok(summary)
}
