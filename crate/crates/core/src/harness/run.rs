use std::fs;
use std::path::Path;
use std::time::Instant;

use super::config::{ExperimentConfig, QuantizerChoice, TaskConfig};
use super::data::{compute_oracle, generate_pairs, read_dataset, Oracle};
use super::records::{render_report, write_csv, CellKey, RunRecord, SummaryRow};
use crate::benchmarks::SampleBatch;
use crate::estimators::Critic;
use crate::hybrid::{write_curve, CurveRow, FitConfig, HybridEstimator, TrainingSet};
use crate::proposals::{
    CondGaussian, DiagonalGaussian, MarginalMode, MarginalReference, PqClassifier, Proposal, ProposalKind,
};
use crate::quantization::Quantizer;
use crate::rng::{derive_seed, stream};
use crate::{Error, Result};

/// Lower bound on the reporting window, so that large batches still average
/// over many evaluation batches.
pub const MIN_WINDOW: usize = 128;

const QUANTIZER_STREAM: u64 = 3;
const PROPOSAL_STREAM: u64 = 4;
const CRITIC_STREAM: u64 = 5;
const TRAIN_STREAM: u64 = 6;

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "MIBENCH_THREADS";

/// Workers for independent jobs: `MIBENCH_THREADS` if set, else the
/// available parallelism.
pub fn worker_count() -> usize {
    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    match std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        Some(n) if n > 0 => n,
        _ => available,
    }
}

/// Runs `f` over `jobs` on a pool of [`worker_count`] threads, keeping order.
pub fn run_jobs<J: Sync, T: Send>(jobs: &[J], f: impl Fn(&J) -> T + Sync) -> Vec<T> {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .expect("thread pool");
    pool.install(|| jobs.par_iter().map(&f).collect())
}

/// Steps whose estimates enter the summary: the last `epochs` epochs, at least
/// [`MIN_WINDOW`] steps, never more than the run.
pub fn window_length(config: &ExperimentConfig, n_rows: usize) -> usize {
    let epoch = (n_rows / config.batch_size).max(1);
    (config.task.window_epochs() * epoch).max(MIN_WINDOW).min(config.iterations)
}

/// Training data and ground truth shared by every seed of an experiment.
pub struct Prepared {
    pub config: ExperimentConfig,
    pub hash: String,
    pub oracle: Oracle,
    /// Loaded from `config.dataset`; otherwise each seed generates its own.
    pub stored: Option<SampleBatch>,
}

pub fn prepare(config: &ExperimentConfig) -> Result<Prepared> {
    config.validate()?;
    let effective = config.effective();
    let (oracle, stored) = match &effective.dataset {
        Some(dir) => {
            let (pairs, meta) = read_dataset(dir)?;
            if pairs.x_dim() != effective.x_dim() {
                return Err(Error::Config(format!(
                    "dataset x has {} columns, the task expects {}",
                    pairs.x_dim(),
                    effective.x_dim()
                )));
            }
            (meta.oracle, Some(pairs))
        }
        None => (compute_oracle(&effective.task, effective.oracle_samples, effective.oracle_seed)?, None),
    };
    Ok(Prepared {
        hash: config.hash(),
        config: effective,
        oracle,
        stored,
    })
}

/// Window records and training curve of one seed.
#[derive(Clone, Debug)]
pub struct SeedRun {
    pub seed: u64,
    pub records: Vec<RunRecord>,
    pub curve: Vec<CurveRow>,
    pub clamped_scores: usize,
    /// Largest contrastive readout over all steps.
    pub max_contrastive: f64,
}

pub fn build_proposal(config: &ExperimentConfig, data: &SampleBatch, oracle: &Oracle, seed: u64) -> Result<Proposal> {
    let (xd, yd) = (data.x_dim(), data.y_dim());
    Ok(match config.proposal.kind {
        ProposalKind::None => Proposal::MarginalProduct,
        ProposalKind::CondGaussian => {
            let reference = match config.proposal.marginal {
                MarginalMode::Ba => MarginalReference::Entropy(
                    oracle
                        .h_y
                        .ok_or_else(|| Error::Config("no analytic H(y) for this task; use doe".into()))?,
                ),
                MarginalMode::Doe => MarginalReference::Fitted(DiagonalGaussian::fit(data.y.view())),
            };
            Proposal::CondGaussian {
                model: CondGaussian::new(xd, yd, &config.proposal.hidden, derive_seed(seed, PROPOSAL_STREAM)),
                reference,
            }
        }
        ProposalKind::Pq => {
            let q = &config.quantizer;
            let mut rng = stream(seed, QUANTIZER_STREAM);
            let quantizer = match (config.resolved_quantizer(), &config.task) {
                (QuantizerChoice::Sign, _) => Quantizer::fit_sign(data.x.view()),
                (_, TaskConfig::Particles(_)) => {
                    Quantizer::fit_kmeans(data.x.view(), q.n_clusters, Some((q.tica_lag, q.tica_components)), &mut rng)?
                }
                (_, TaskConfig::GaussianMixture(_)) => Quantizer::fit_kmeans(data.x.view(), q.n_clusters, None, &mut rng)?,
            };
            let classifier = PqClassifier::new(yd, quantizer.n_codes(), derive_seed(seed, PROPOSAL_STREAM));
            Proposal::Pq { quantizer, classifier }
        }
    })
}

fn n_clusters(proposal: &Proposal) -> usize {
    match proposal {
        Proposal::Pq { quantizer, .. } => quantizer.n_codes(),
        _ => 0,
    }
}

/// Trains one seed and keeps the estimates of the reporting window.
pub fn run_seed(prepared: &Prepared, seed: u64) -> Result<SeedRun> {
    let config = &prepared.config;
    let generated;
    let data = match &prepared.stored {
        Some(d) => d,
        None => {
            generated = generate_pairs(&config.task, seed)?;
            &generated
        }
    };
    let proposal = build_proposal(config, data, &prepared.oracle, seed)?;
    let clusters = n_clusters(&proposal);
    let set = TrainingSet::new(data.clone(), &proposal)?;
    let critic = Critic::new(&config.critic, data.x_dim(), data.y_dim(), derive_seed(seed, CRITIC_STREAM));
    let mut est = HybridEstimator::new(
        proposal,
        critic,
        config.estimator.clone(),
        config.batch_size,
        config.negatives,
        config.learning_rate,
    );
    let fit = FitConfig {
        iterations: config.iterations,
        curve_every: config.curve_every,
    };
    let first_recorded = config.iterations - window_length(config, data.len()) + 1;
    let mut records = Vec::new();
    let mut max_contrastive = f64::NEG_INFINITY;
    let start = Instant::now();
    let (estimator, proposal_kind, k) = (est.estimator_kind(), est.proposal().kind(), est.negatives());
    let report = est.two_step_fit(&set, &fit, &mut stream(seed, TRAIN_STREAM), |step, outcome| {
        max_contrastive = max_contrastive.max(outcome.contrastive);
        if step >= first_recorded {
            let e = outcome.estimate;
            records.push(RunRecord {
                config_hash: prepared.hash.clone(),
                seed,
                step,
                estimator,
                proposal: proposal_kind,
                b: config.batch_size,
                k,
                n_clusters: clusters,
                i_r: e.generative_part,
                l_f: e.discriminative_part,
                total: e.total,
                true_mi: prepared.oracle.mi,
                wall_time: start.elapsed().as_secs_f64(),
            });
        }
    })?;
    Ok(SeedRun {
        seed,
        records,
        curve: report.curve,
        clamped_scores: report.clamped_scores,
        max_contrastive,
    })
}

pub fn cell_key(prepared: &Prepared, n_clusters: usize) -> CellKey {
    let c = &prepared.config;
    CellKey {
        config_hash: prepared.hash.clone(),
        task: c.task.name().to_owned(),
        estimator: c.estimator.kind,
        proposal: c.proposal.kind,
        b: c.batch_size,
        k: c.negatives.unwrap_or(c.batch_size - 1),
        n_clusters,
        seeds: c.seeds.clone(),
        true_mi: prepared.oracle.mi,
    }
}

/// Everything one `train` invocation produces.
#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub oracle: Oracle,
    pub runs: Vec<SeedRun>,
    pub summary: SummaryRow,
}

impl ExperimentOutput {
    pub fn records(&self) -> Vec<RunRecord> {
        self.runs.iter().flat_map(|r| r.records.iter().cloned()).collect()
    }
}

/// Trains every seed (in parallel up to [`worker_count`]) and summarizes the
/// reporting windows. The first failing seed aborts the experiment.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let prepared = prepare(config)?;
    let runs = run_jobs(&prepared.config.seeds, |&seed| run_seed(&prepared, seed))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let records: Vec<RunRecord> = runs.iter().flat_map(|r| r.records.iter().cloned()).collect();
    let clusters = records.first().map_or(0, |r| r.n_clusters);
    let summary = SummaryRow::from_records(&cell_key(&prepared, clusters), &records);
    Ok(ExperimentOutput {
        config: prepared.config,
        oracle: prepared.oracle,
        runs,
        summary,
    })
}

/// `runs.csv`, `summary.csv`, `report.txt`, `config.json` and one
/// `curve_seed<seed>.csv` per seed.
pub fn write_experiment(dir: impl AsRef<Path>, out: &ExperimentOutput) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    write_csv(dir.join("runs.csv"), &out.records())?;
    let summary = std::slice::from_ref(&out.summary);
    write_csv(dir.join("summary.csv"), summary)?;
    fs::write(dir.join("report.txt"), render_report(summary))?;
    crate::benchmarks::io::write_json(dir.join("config.json"), &out.config)?;
    for run in &out.runs {
        write_curve(fs::File::create(dir.join(format!("curve_seed{}.csv", run.seed)))?, &run.curve)?;
    }
    Ok(())
}
