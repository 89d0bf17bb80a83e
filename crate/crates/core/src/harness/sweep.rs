use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, QuantizerChoice};
use super::records::{render_report, write_csv, RunRecord, SummaryRow};
use super::run::{cell_key, prepare, run_jobs, run_seed, Prepared};
use crate::estimators::EstimatorKind;
use crate::proposals::ProposalKind;
use crate::Result;

/// Values of each swept setting; an empty list leaves the base value alone.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepAxes {
    pub batch_size: Vec<usize>,
    pub negatives: Vec<usize>,
    /// `0` means no proposal; any other value a PQ proposal with that many
    /// k-means codes.
    pub n_clusters: Vec<usize>,
    pub estimator: Vec<EstimatorKind>,
    pub proposal: Vec<ProposalKind>,
    /// Each listed seed becomes its own cell. Without this axis every cell
    /// runs all of `base.seeds`.
    pub seed: Vec<u64>,
}

impl SweepAxes {
    /// The figure grids: batch sizes, negative counts and cluster counts.
    pub fn figure_defaults() -> Self {
        Self {
            batch_size: vec![64, 128, 256, 512, 1024],
            negatives: vec![1, 4, 16, 64],
            n_clusters: vec![0, 2, 4, 8, 16, 32, 64],
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub base: ExperimentConfig,
    pub axes: SweepAxes,
}

fn expand<T: Clone>(cells: Vec<ExperimentConfig>, values: &[T], set: impl Fn(&mut ExperimentConfig, &T)) -> Vec<ExperimentConfig> {
    if values.is_empty() {
        return cells;
    }
    let mut out = Vec::with_capacity(cells.len() * values.len());
    for c in cells {
        for v in values {
            let mut c = c.clone();
            set(&mut c, v);
            out.push(c);
        }
    }
    out
}

impl SweepConfig {
    /// The cross product of all non-empty axes, in axis order.
    pub fn cells(&self) -> Vec<ExperimentConfig> {
        let a = &self.axes;
        let mut cells = vec![self.base.clone()];
        cells = expand(cells, &a.estimator, |c, v| c.estimator.kind = *v);
        cells = expand(cells, &a.proposal, |c, v| c.proposal.kind = *v);
        cells = expand(cells, &a.n_clusters, |c, &n| {
            if n == 0 {
                c.proposal.kind = ProposalKind::None;
            } else {
                c.proposal.kind = ProposalKind::Pq;
                c.quantizer.n_clusters = n;
                if c.quantizer.kind != QuantizerChoice::Kmeans {
                    c.quantizer.kind = QuantizerChoice::Kmeans;
                }
            }
        });
        cells = expand(cells, &a.batch_size, |c, v| c.batch_size = *v);
        cells = expand(cells, &a.negatives, |c, v| c.negatives = Some(*v));
        expand(cells, &a.seed, |c, v| c.seeds = vec![*v])
    }

    pub fn validate(&self) -> Result<()> {
        self.cells().iter().try_for_each(ExperimentConfig::validate)
    }
}

#[derive(Clone, Debug, Default)]
pub struct SweepOutput {
    pub records: Vec<RunRecord>,
    pub summary: Vec<SummaryRow>,
}

/// Runs every `(cell, seed)` pair on the worker pool. A failing cell is
/// reported in its summary row; the other cells still run.
pub fn run_sweep(sweep: &SweepConfig) -> Result<SweepOutput> {
    sweep.validate()?;
    let cells = sweep.cells();
    let prepared: Vec<std::result::Result<Prepared, String>> =
        run_jobs(&cells, |c| prepare(c).map_err(|e| e.to_string()));
    let jobs: Vec<(usize, u64)> = cells
        .iter()
        .enumerate()
        .filter(|(i, _)| prepared[*i].is_ok())
        .flat_map(|(i, c)| c.effective().seeds.into_iter().map(move |s| (i, s)))
        .collect();
    let results = run_jobs(&jobs, |&(i, seed)| {
        let p = prepared[i].as_ref().expect("filtered");
        run_seed(p, seed).map_err(|e| e.to_string())
    });

    let mut out = SweepOutput::default();
    for (i, cell) in cells.iter().enumerate() {
        let p = match &prepared[i] {
            Ok(p) => p,
            Err(e) => {
                let fallback = Prepared {
                    hash: cell.hash(),
                    config: cell.effective(),
                    oracle: super::data::Oracle {
                        mi: f64::NAN,
                        std_error: f64::NAN,
                        h_x: None,
                        h_y: None,
                        conditional_entropy: None,
                        per_unit: Vec::new(),
                    },
                    stored: None,
                };
                out.summary.push(SummaryRow::failed(&cell_key(&fallback, 0), e));
                continue;
            }
        };
        let mut records = Vec::new();
        let mut failure = None;
        for ((_, _), r) in jobs.iter().zip(&results).filter(|((j, _), _)| *j == i) {
            match r {
                Ok(run) => records.extend(run.records.iter().cloned()),
                Err(e) => failure = failure.or(Some(e.clone())),
            }
        }
        let clusters = records.first().map_or(0, |r| r.n_clusters);
        let key = cell_key(p, clusters);
        out.summary.push(match failure {
            Some(e) => SummaryRow::failed(&key, &e),
            None => SummaryRow::from_records(&key, &records),
        });
        out.records.extend(records);
    }
    Ok(out)
}

pub fn write_sweep(dir: impl AsRef<Path>, out: &SweepOutput) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    write_csv(dir.join("runs.csv"), &out.records)?;
    write_csv(dir.join("summary.csv"), &out.summary)?;
    fs::write(dir.join("report.txt"), render_report(&out.summary))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_a_cross_product() {
        let sweep = SweepConfig {
            axes: SweepAxes {
                batch_size: vec![64, 128],
                seed: vec![0, 1, 2],
                ..Default::default()
            },
            ..Default::default()
        };
        let cells = sweep.cells();
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[0].batch_size, 64);
        assert_eq!(cells[0].seeds, vec![0]);
        assert_eq!(cells[5].batch_size, 128);
        assert_eq!(cells[5].seeds, vec![2]);
        assert_eq!(SweepAxes::figure_defaults().n_clusters[0], 0);
    }

    #[test]
    fn zero_clusters_means_no_proposal() {
        let sweep = SweepConfig {
            axes: SweepAxes {
                n_clusters: vec![0, 8],
                ..Default::default()
            },
            ..Default::default()
        };
        let cells = sweep.cells();
        assert_eq!(cells[0].proposal.kind, ProposalKind::None);
        let none = ExperimentConfig::default();
        assert_eq!(cells[0].hash(), none.hash());
        assert_eq!(cells[1].proposal.kind, ProposalKind::Pq);
        assert_eq!(cells[1].quantizer.n_clusters, 8);
        assert_eq!(cells[1].resolved_quantizer(), QuantizerChoice::Kmeans);
    }
}
