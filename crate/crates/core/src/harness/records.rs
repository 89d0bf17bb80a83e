use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::estimators::EstimatorKind;
use crate::proposals::ProposalKind;
use crate::Result;

/// One training step inside the reporting window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub seed: u64,
    pub step: usize,
    pub estimator: EstimatorKind,
    pub proposal: ProposalKind,
    pub b: usize,
    pub k: usize,
    pub n_clusters: usize,
    /// Proposal contribution `I_r`.
    pub i_r: f64,
    /// Critic contribution.
    pub l_f: f64,
    pub total: f64,
    pub true_mi: f64,
    /// Seconds since the start of this seed's training.
    pub wall_time: f64,
}

/// Bias, variance and MSE of one sweep cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub config_hash: String,
    pub task: String,
    pub estimator: EstimatorKind,
    pub proposal: ProposalKind,
    pub b: usize,
    pub k: usize,
    pub n_clusters: usize,
    /// Seeds joined by `;`.
    pub seeds: String,
    pub true_mi: f64,
    pub mean: f64,
    pub bias: f64,
    pub variance: f64,
    pub mse: f64,
    pub n: usize,
    /// `ok`, or the error that stopped the cell.
    pub status: String,
}

/// Cell identity shared by a summary row and its records.
#[derive(Clone, Debug, PartialEq)]
pub struct CellKey {
    pub config_hash: String,
    pub task: String,
    pub estimator: EstimatorKind,
    pub proposal: ProposalKind,
    pub b: usize,
    pub k: usize,
    pub n_clusters: usize,
    pub seeds: Vec<u64>,
    pub true_mi: f64,
}

pub fn join_seeds(seeds: &[u64]) -> String {
    seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(";")
}

impl SummaryRow {
    fn from_key(key: &CellKey) -> Self {
        Self {
            config_hash: key.config_hash.clone(),
            task: key.task.clone(),
            estimator: key.estimator,
            proposal: key.proposal,
            b: key.b,
            k: key.k,
            n_clusters: key.n_clusters,
            seeds: join_seeds(&key.seeds),
            true_mi: key.true_mi,
            mean: f64::NAN,
            bias: f64::NAN,
            variance: f64::NAN,
            mse: f64::NAN,
            n: 0,
            status: "ok".into(),
        }
    }

    /// Statistics of `records` in the order given: `bias = mean - true_mi`,
    /// population variance, `mse = bias^2 + variance`.
    pub fn from_records(key: &CellKey, records: &[RunRecord]) -> Self {
        let mut row = Self::from_key(key);
        row.n = records.len();
        if records.is_empty() {
            row.status = "no records".into();
            return row;
        }
        let n = records.len() as f64;
        let mean = records.iter().map(|r| r.total).sum::<f64>() / n;
        let variance = records.iter().map(|r| (r.total - mean) * (r.total - mean)).sum::<f64>() / n;
        row.mean = mean;
        row.bias = mean - key.true_mi;
        row.variance = variance;
        row.mse = row.bias * row.bias + variance;
        row
    }

    pub fn failed(key: &CellKey, reason: &str) -> Self {
        let mut row = Self::from_key(key);
        row.status = format!("error: {reason}");
        row
    }
}

pub fn write_csv<T: Serialize>(path: impl AsRef<Path>, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<T>, _>>()?;
    Ok(rows)
}

/// A fixed-width plain-text table of summary rows.
pub fn render_report(rows: &[SummaryRow]) -> String {
    let header = [
        "task", "estimator", "proposal", "B", "K", "clusters", "seeds", "true_mi", "mean", "bias", "variance", "mse",
        "n", "status",
    ];
    let f = |v: f64| format!("{v:.4}");
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.task.clone(),
                r.estimator.to_string(),
                r.proposal.to_string(),
                r.b.to_string(),
                r.k.to_string(),
                r.n_clusters.to_string(),
                r.seeds.clone(),
                f(r.true_mi),
                f(r.mean),
                f(r.bias),
                f(r.variance),
                f(r.mse),
                r.n.to_string(),
                r.status.clone(),
            ]
        })
        .collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|c| cells.iter().map(|row| row[c].len()).chain([header[c].len()]).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    let line = |out: &mut String, items: &[&str]| {
        let padded: Vec<String> = items.iter().zip(&widths).map(|(s, w)| format!("{s:<w$}")).collect();
        let _ = writeln!(out, "{}", padded.join("  ").trim_end());
    };
    line(&mut out, &header);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    line(&mut out, &rule.iter().map(String::as_str).collect::<Vec<_>>());
    for row in &cells {
        line(&mut out, &row.iter().map(String::as_str).collect::<Vec<_>>());
    }
    out
}
