use std::fs::File;
use std::path::Path;

use crate::agents::MetricsRow;
use crate::error::{LabError, Result};

/// Per-episode columns of `MetricsRow` that are averaged across seeds.
pub const METRICS: [&str; 11] = [
    "return_q",
    "return_qx",
    "success",
    "mean_position",
    "mean_position_qx",
    "mean_rx",
    "mean_td_abs",
    "intrinsic_mean",
    "eval_return",
    "eval_success",
    "eval_position",
];

fn metric_values(r: &MetricsRow) -> [Option<f64>; 11] {
    [
        Some(r.return_q),
        r.return_qx,
        Some(if r.success { 1.0 } else { 0.0 }),
        Some(r.mean_position),
        r.mean_position_qx,
        r.mean_rx,
        r.mean_td_abs,
        r.intrinsic_mean,
        r.eval_return,
        r.eval_success,
        r.eval_position,
    ]
}

/// Cross-seed statistics of one episode. `mean[m]` / `std[m]` follow the
/// order of `Aggregate::metrics`; `None` where no seed logged the metric.
#[derive(Clone, Debug, PartialEq)]
pub struct AggRow {
    pub episode: usize,
    /// Number of seeds that reached this episode.
    pub n: usize,
    pub mean: Vec<Option<f64>>,
    pub std: Vec<Option<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Aggregate {
    pub metrics: Vec<String>,
    pub rows: Vec<AggRow>,
}

impl Aggregate {
    pub fn metric_index(&self, name: &str) -> Option<usize> {
        self.metrics.iter().position(|m| m == name)
    }

    /// Mean and stdev series of one metric.
    pub fn series(&self, name: &str) -> Option<(Vec<Option<f64>>, Vec<Option<f64>>)> {
        let i = self.metric_index(name)?;
        Some((
            self.rows.iter().map(|r| r.mean[i]).collect(),
            self.rows.iter().map(|r| r.std[i]).collect(),
        ))
    }

    /// Applies `gaussian_smooth` to every mean and stdev column.
    pub fn smoothed(&self, sigma: f64) -> Aggregate {
        let mut out = self.clone();
        for m in 0..self.metrics.len() {
            let (mean, std) = self.series(&self.metrics[m]).unwrap_or_default();
            let (mean, std) = (gaussian_smooth(&mean, sigma), gaussian_smooth(&std, sigma));
            for (k, row) in out.rows.iter_mut().enumerate() {
                row.mean[m] = mean[k];
                row.std[m] = std[k];
            }
        }
        out
    }
}

/// Per-episode mean and population stdev across seeds, unsmoothed.
pub fn aggregate(runs: &[Vec<MetricsRow>]) -> Aggregate {
    let episodes = runs.iter().flat_map(|r| r.iter().map(|row| row.episode)).max().unwrap_or(0);
    let mut per_episode: Vec<Vec<[Option<f64>; 11]>> = vec![Vec::new(); episodes];
    for row in runs.iter().flatten() {
        if row.episode >= 1 {
            per_episode[row.episode - 1].push(metric_values(row));
        }
    }
    let rows = per_episode
        .into_iter()
        .enumerate()
        .filter(|(_, v)| !v.is_empty())
        .map(|(i, vals)| {
            let mut mean = Vec::with_capacity(METRICS.len());
            let mut std = Vec::with_capacity(METRICS.len());
            for m in 0..METRICS.len() {
                let xs: Vec<f64> = vals.iter().filter_map(|v| v[m]).collect();
                if xs.is_empty() {
                    mean.push(None);
                    std.push(None);
                } else {
                    let n = xs.len() as f64;
                    let mu = xs.iter().sum::<f64>() / n;
                    let var = xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / n;
                    mean.push(Some(mu));
                    std.push(Some(var.sqrt()));
                }
            }
            AggRow {
                episode: i + 1,
                n: vals.len(),
                mean,
                std,
            }
        })
        .collect();
    Aggregate {
        metrics: METRICS.iter().map(|s| s.to_string()).collect(),
        rows,
    }
}

fn reflect(mut j: isize, n: isize) -> usize {
    // Half-sample symmetric: d c b a | a b c d | d c b a
    loop {
        if j < 0 {
            j = -j - 1;
        } else if j >= n {
            j = 2 * n - j - 1;
        } else {
            return j as usize;
        }
    }
}

/// Gaussian filter of width `sigma` (in samples), truncated at 4 sigma, with
/// half-sample reflection at both ends. Missing samples are skipped and the
/// remaining weights renormalized; missing entries stay missing.
pub fn gaussian_smooth(xs: &[Option<f64>], sigma: f64) -> Vec<Option<f64>> {
    if sigma <= 0.0 || xs.is_empty() {
        return xs.to_vec();
    }
    let radius = (4.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let n = xs.len() as isize;
    (0..n)
        .map(|i| {
            xs[i as usize]?;
            let (mut num, mut den) = (0.0, 0.0);
            for (w, k) in kernel.iter().zip(-radius..=radius) {
                if let Some(x) = xs[reflect(i + k, n)] {
                    num += w * x;
                    den += w;
                }
            }
            Some(num / den)
        })
        .collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_aggregate(path: &Path, agg: &Aggregate) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["episode".to_string(), "n".to_string()];
    for m in &agg.metrics {
        header.push(format!("{m}_mean"));
        header.push(format!("{m}_std"));
    }
    w.write_record(&header)?;
    for row in &agg.rows {
        let mut rec = vec![row.episode.to_string(), row.n.to_string()];
        for (m, s) in row.mean.iter().zip(&row.std) {
            rec.push(fmt_opt(*m));
            rec.push(fmt_opt(*s));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn parse_err(path: &Path, line: u64, msg: impl Into<String>) -> LabError {
    LabError::Parse {
        path: path.to_path_buf(),
        line: line as usize,
        msg: msg.into(),
    }
}

fn csv_err(path: &Path, e: csv::Error) -> LabError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    parse_err(path, line, e.to_string())
}

/// Reads an aggregate CSV. An empty file yields an empty aggregate.
pub fn read_aggregate(path: &Path) -> Result<Aggregate> {
    let mut r = csv::Reader::from_reader(File::open(path)?);
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.is_empty() {
        return Ok(Aggregate::default());
    }
    let cols: Vec<&str> = header.iter().collect();
    if cols.len() < 2 || cols[0] != "episode" || cols[1] != "n" || !cols.len().is_multiple_of(2) {
        return Err(parse_err(path, 1, "expected header `episode,n,<metric>_mean,<metric>_std,...`"));
    }
    let mut metrics = Vec::new();
    for pair in cols[2..].chunks(2) {
        let name = pair[0]
            .strip_suffix("_mean")
            .filter(|n| pair[1].strip_suffix("_std") == Some(n))
            .ok_or_else(|| parse_err(path, 1, format!("unpaired columns `{}`, `{}`", pair[0], pair[1])))?;
        metrics.push(name.to_string());
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let int = |i: usize| -> Result<usize> {
            rec[i]
                .trim()
                .parse()
                .map_err(|_| parse_err(path, line, format!("bad integer `{}` in column `{}`", &rec[i], cols[i])))
        };
        let float = |i: usize| -> Result<Option<f64>> {
            let s = rec[i].trim();
            if s.is_empty() {
                return Ok(None);
            }
            s.parse()
                .map(Some)
                .map_err(|_| parse_err(path, line, format!("bad number `{s}` in column `{}`", cols[i])))
        };
        let mut row = AggRow {
            episode: int(0)?,
            n: int(1)?,
            mean: Vec::with_capacity(metrics.len()),
            std: Vec::with_capacity(metrics.len()),
        };
        for m in 0..metrics.len() {
            row.mean.push(float(2 + 2 * m)?);
            row.std.push(float(3 + 2 * m)?);
        }
        rows.push(row);
    }
    Ok(Aggregate { metrics, rows })
}

pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_reader(File::open(path)?);
    r.deserialize().map(|row| row.map_err(|e| csv_err(path, e))).collect()
}
