use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mibench::harness::{
    compute_oracle, generate_pairs, parse_override_args, parse_with_overrides, read_csv, render_report, run_experiment,
    run_sweep, write_dataset, write_experiment, write_sweep, DatasetMeta, ExperimentConfig, SummaryRow, SweepConfig,
    TaskConfig,
};
use mibench::Error;

/// Hybrid mutual information estimation benchmarks.
///
/// Settings come from a JSON config; any field can be overridden with
/// `--key value` (dotted keys reach nested fields, e.g. `--estimator.kind mine`).
#[derive(Parser)]
#[command(name = "mibench", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset and store it with its ground truth.
    GenData {
        #[command(flatten)]
        common: Common,
        /// Target directory.
        #[arg(long)]
        out: PathBuf,
        /// Dataset seed; defaults to the first configured seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the ground-truth information of the configured task.
    Oracle {
        #[command(flatten)]
        common: Common,
    },
    /// Train and evaluate one configuration over its seeds.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Run a grid of configurations (config holds `base` and `axes`).
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Print the summary table of a finished run or sweep.
    Report {
        /// Directory holding summary.csv.
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// JSON config file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Desk-scale profile: 20 000 iterations and 20 000 rows.
    #[arg(long)]
    fast: bool,
    /// `--key value` overrides, collected before clap parsing.
    #[arg(skip)]
    overrides: Vec<(String, String)>,
}

const KNOWN_FLAGS: [&str; 7] = ["--config", "--fast", "--out", "--seed", "--input", "--help", "--version"];

/// Separates `--key value` overrides from the flags clap knows about.
fn split_overrides(args: Vec<String>) -> Result<(Vec<String>, Vec<(String, String)>), Error> {
    let mut kept = Vec::new();
    let mut extra = Vec::new();
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let name = a.split('=').next().unwrap_or("");
        if a.starts_with("--") && a.len() > 2 && !KNOWN_FLAGS.contains(&name) {
            extra.push(a);
            if let Some(v) = it.next() {
                extra.push(v);
            }
        } else {
            kept.push(a);
        }
    }
    Ok((kept, parse_override_args(&extra)?))
}

fn read_text(path: &Option<PathBuf>) -> Result<Option<String>, Error> {
    match path {
        Some(p) => fs::read_to_string(p)
            .map(Some)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", p.display()))),
        None => Ok(None),
    }
}

fn load_experiment(common: &Common) -> Result<ExperimentConfig, Error> {
    let text = read_text(&common.config)?;
    let mut config = ExperimentConfig::load(text.as_deref(), &common.overrides)?;
    config.fast |= common.fast;
    Ok(config)
}

fn load_sweep(common: &Common) -> Result<SweepConfig, Error> {
    let text = read_text(&common.config)?;
    let mut sweep: SweepConfig = parse_with_overrides(text.as_deref(), &common.overrides)?;
    sweep.base.fast |= common.fast;
    sweep.validate()?;
    Ok(sweep)
}

fn print_oracle(task: &TaskConfig, config: &ExperimentConfig) -> Result<(), Error> {
    let o = compute_oracle(task, config.oracle_samples, config.oracle_seed)?;
    println!("task: {}", task.name());
    println!("mutual information: {:.4} +- {:.4} nats", o.mi, o.std_error);
    let per: Vec<String> = o.per_unit.iter().map(|v| format!("{v:.4}")).collect();
    println!("per unit: {}", per.join(" "));
    let show = |label: &str, v: Option<f64>| match v {
        Some(v) => println!("{label}: {v:.4} nats"),
        None => println!("{label}: n/a"),
    };
    show("H(x)", o.h_x);
    show("H(y)", o.h_y);
    show("H(y|x)", o.conditional_entropy);
    Ok(())
}

fn gen_data(common: &Common, out: &Path, seed: Option<u64>) -> Result<(), Error> {
    let config = load_experiment(common)?.effective();
    let seed = seed.unwrap_or(config.seeds[0]);
    let pairs = generate_pairs(&config.task, seed)?;
    let meta = DatasetMeta {
        task: config.task.clone(),
        seed,
        rows: pairs.len(),
        x_dim: pairs.x_dim(),
        y_dim: pairs.y_dim(),
        oracle: compute_oracle(&config.task, config.oracle_samples, config.oracle_seed)?,
    };
    write_dataset(out, &pairs, &meta)?;
    println!(
        "wrote {} rows ({} + {} columns) to {}; oracle {:.4} nats",
        meta.rows,
        meta.x_dim,
        meta.y_dim,
        out.display(),
        meta.oracle.mi
    );
    Ok(())
}

fn report(input: &Path) -> Result<(), Error> {
    let rows: Vec<SummaryRow> = read_csv(input.join("summary.csv"))?;
    print!("{}", render_report(&rows));
    Ok(())
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::GenData { common, out, seed } => gen_data(&common, &out, seed),
        Command::Oracle { common } => {
            let config = load_experiment(&common)?.effective();
            print_oracle(&config.task, &config)
        }
        Command::Train { common } => {
            let config = load_experiment(&common)?;
            let out = run_experiment(&config)?;
            write_experiment(&config.output, &out)?;
            print!("{}", render_report(std::slice::from_ref(&out.summary)));
            Ok(())
        }
        Command::Sweep { common } => {
            let sweep = load_sweep(&common)?;
            let out = run_sweep(&sweep)?;
            write_sweep(&sweep.base.output, &out)?;
            print!("{}", render_report(&out.summary));
            Ok(())
        }
        Command::Report { input } => report(&input),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Divergence { .. }
        | Error::Quadrature { .. }
        | Error::RankDeficient { .. }
        | Error::NoSampleableCode
        | Error::NonFinite { .. } => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    let (kept, overrides) = match split_overrides(args) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let mut cli = Cli::parse_from(kept);
    match &mut cli.command {
        Command::GenData { common, .. }
        | Command::Oracle { common }
        | Command::Train { common }
        | Command::Sweep { common } => common.overrides = overrides,
        Command::Report { .. } if !overrides.is_empty() => {
            let e = Error::Config("report takes no overrides".into());
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
        Command::Report { .. } => {}
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
