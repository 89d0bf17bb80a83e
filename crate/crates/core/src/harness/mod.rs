//! Experiment configuration, runs, sweeps and their CSV/plain-text outputs.

pub mod config;
pub mod data;
pub mod records;
pub mod run;
pub mod sweep;

pub use config::{
    apply_override, parse_override_args, parse_with_overrides, ExperimentConfig, ProposalConfig, QuantizerChoice,
    QuantizerConfig, TaskConfig, FAST_SCALE,
};
pub use data::{compute_oracle, generate_pairs, read_dataset, write_dataset, DatasetMeta, Oracle};
pub use records::{read_csv, render_report, write_csv, CellKey, RunRecord, SummaryRow};
pub use run::{
    build_proposal, prepare, run_experiment, run_jobs, run_seed, window_length, worker_count, write_experiment,
    ExperimentOutput, Prepared, SeedRun, MIN_WINDOW, THREADS_ENV,
};
pub use sweep::{run_sweep, write_sweep, SweepAxes, SweepConfig, SweepOutput};
