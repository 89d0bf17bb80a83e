use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::benchmarks::{GaussianMixtureTask, ParticleTask};
use crate::estimators::{CriticConfig, EstimatorConfig};
use crate::nn::{DEFAULT_HIDDEN, DEFAULT_LEARNING_RATE};
use crate::proposals::{MarginalMode, ProposalKind};
use crate::quantization::MAX_SIGN_DIMS;
use crate::{Error, Result};

/// Iterations and dataset rows under `--fast`.
pub const FAST_SCALE: usize = 20_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TaskConfig {
    GaussianMixture(GaussianMixtureTask),
    Particles(ParticleTask),
}

impl Default for TaskConfig {
    fn default() -> Self {
        TaskConfig::GaussianMixture(GaussianMixtureTask::default())
    }
}

impl TaskConfig {
    pub fn name(&self) -> &'static str {
        match self {
            TaskConfig::GaussianMixture(_) => "gaussian-mixture",
            TaskConfig::Particles(_) => "particles",
        }
    }

    /// Number of `(x, y)` rows the task generates.
    pub fn n_rows(&self) -> usize {
        match self {
            TaskConfig::GaussianMixture(t) => t.dataset_size,
            TaskConfig::Particles(t) => t.trajectory_length - 1,
        }
    }

    /// Training epochs covered by the reporting window.
    pub fn window_epochs(&self) -> usize {
        match self {
            TaskConfig::GaussianMixture(_) => 1,
            TaskConfig::Particles(_) => 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProposalConfig {
    pub kind: ProposalKind,
    /// Reference for `H(y)` under the conditional Gaussian.
    pub marginal: MarginalMode,
    /// Hidden widths of the conditional Gaussian.
    pub hidden: Vec<usize>,
}

impl Default for ProposalConfig {
    fn default() -> Self {
        Self {
            kind: ProposalKind::None,
            marginal: MarginalMode::Ba,
            hidden: DEFAULT_HIDDEN.to_vec(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuantizerChoice {
    /// Sign codes for the mixture, k-means over TICA for particles.
    Auto,
    Sign,
    Kmeans,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuantizerConfig {
    pub kind: QuantizerChoice,
    pub n_clusters: usize,
    pub tica_components: usize,
    pub tica_lag: usize,
}

impl Default for QuantizerConfig {
    fn default() -> Self {
        Self {
            kind: QuantizerChoice::Auto,
            n_clusters: 16,
            tica_components: 10,
            tica_lag: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub task: TaskConfig,
    pub estimator: EstimatorConfig,
    pub proposal: ProposalConfig,
    pub quantizer: QuantizerConfig,
    pub critic: CriticConfig,
    pub batch_size: usize,
    /// Proposal samples per row; `null` pairs each row with the rest of its batch.
    pub negatives: Option<usize>,
    pub iterations: usize,
    pub learning_rate: f64,
    pub seeds: Vec<u64>,
    pub output: PathBuf,
    /// Directory written by `gen-data`; generated from the seed when absent.
    pub dataset: Option<PathBuf>,
    pub fast: bool,
    pub oracle_samples: usize,
    pub oracle_seed: u64,
    pub curve_every: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            task: TaskConfig::default(),
            estimator: EstimatorConfig::default(),
            proposal: ProposalConfig::default(),
            quantizer: QuantizerConfig::default(),
            critic: CriticConfig::default(),
            batch_size: 64,
            negatives: None,
            iterations: 100_000,
            learning_rate: DEFAULT_LEARNING_RATE,
            seeds: vec![0],
            output: PathBuf::from("runs"),
            dataset: None,
            fast: false,
            oracle_samples: 1_000_000,
            oracle_seed: 0,
            curve_every: 100,
        }
    }
}

impl ExperimentConfig {
    /// The configuration actually run: `fast` folded into iterations and
    /// dataset size.
    pub fn effective(&self) -> ExperimentConfig {
        let mut c = self.clone();
        if c.fast {
            c.fast = false;
            c.iterations = c.iterations.min(FAST_SCALE);
            match &mut c.task {
                TaskConfig::GaussianMixture(t) => t.dataset_size = t.dataset_size.min(FAST_SCALE),
                TaskConfig::Particles(t) => t.trajectory_length = t.trajectory_length.min(FAST_SCALE),
            }
        }
        c
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        self.estimator.validate().map_err(Error::Config)?;
        if self.batch_size < 2 {
            return bad(format!("batch_size must be at least 2, got {}", self.batch_size));
        }
        if self.negatives == Some(0) {
            return bad("negatives must be positive".into());
        }
        if self.iterations == 0 {
            return bad("iterations must be positive".into());
        }
        if !(self.learning_rate > 0.0) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.seeds.is_empty() {
            return bad("seeds must list at least one seed".into());
        }
        if self.critic.hidden.contains(&0) || self.critic.embedding_dim == 0 {
            return bad("critic widths must be positive".into());
        }
        if self.proposal.hidden.contains(&0) {
            return bad("proposal.hidden widths must be positive".into());
        }
        if self.oracle_samples < 10_000 {
            return bad("oracle_samples must be at least 10000".into());
        }
        match &self.task {
            TaskConfig::GaussianMixture(t) => {
                if t.n_stacks == 0 || t.dataset_size < 2 {
                    return bad("task needs at least one stack and two rows".into());
                }
                if !(t.correlation.abs() < 1.0) {
                    return bad(format!("task.correlation must lie in (-1, 1), got {}", t.correlation));
                }
            }
            TaskConfig::Particles(t) => {
                if t.n_particles == 0 || t.trajectory_length < 3 || t.burn_in == 0 {
                    return bad("task needs particles, a trajectory of at least 3 steps and a burn-in".into());
                }
                if !(t.eps_lang > 0.0 && t.beta > 0.0) {
                    return bad("task.eps_lang and task.beta must be positive".into());
                }
                if self.proposal.kind == ProposalKind::CondGaussian && self.proposal.marginal == MarginalMode::Ba {
                    return bad("proposal.marginal = ba needs an analytic H(y); use doe for particles".into());
                }
            }
        }
        if self.proposal.kind == ProposalKind::Pq {
            let q = &self.quantizer;
            match self.resolved_quantizer() {
                QuantizerChoice::Sign if self.x_dim() > MAX_SIGN_DIMS => {
                    return bad(format!(
                        "sign quantizer supports at most {MAX_SIGN_DIMS} dimensions, x has {}",
                        self.x_dim()
                    ));
                }
                QuantizerChoice::Kmeans if q.n_clusters == 0 => {
                    return bad("quantizer.n_clusters must be positive".into());
                }
                QuantizerChoice::Kmeans if q.tica_components == 0 || q.tica_lag == 0 => {
                    return bad("quantizer.tica_components and tica_lag must be positive".into());
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn resolved_quantizer(&self) -> QuantizerChoice {
        match (self.quantizer.kind, &self.task) {
            (QuantizerChoice::Auto, TaskConfig::GaussianMixture(_)) => QuantizerChoice::Sign,
            (QuantizerChoice::Auto, TaskConfig::Particles(_)) => QuantizerChoice::Kmeans,
            (k, _) => k,
        }
    }

    pub fn x_dim(&self) -> usize {
        match &self.task {
            TaskConfig::GaussianMixture(t) => t.n_stacks,
            TaskConfig::Particles(t) => t.augmented_dim(),
        }
    }

    /// First 16 hex digits of the SHA-256 of the effective configuration,
    /// excluding seeds and output location.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self.effective()).expect("config serializes");
        if let Value::Object(map) = &mut v {
            map.remove("seeds");
            map.remove("output");
            map.remove("dataset");
        }
        let digest = Sha256::digest(v.to_string().as_bytes());
        hex::encode(digest)[..16].to_owned()
    }

    /// Reads a JSON config and applies `--key value` overrides.
    pub fn load(text: Option<&str>, overrides: &[(String, String)]) -> Result<Self> {
        let config: Self = parse_with_overrides(text, overrides)?;
        config.validate()?;
        Ok(config)
    }
}

/// Objects whose `kind` selects a variant with its own fields.
const TAGGED: [&str; 2] = ["task", "landscape"];

/// Overlays `patch` onto `base`. Objects merge key by key, except that a
/// tagged object changing its `kind` is replaced outright.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                let replace = TAGGED.contains(&k.as_str())
                    && matches!((b.get(&k), &v), (Some(old), Value::Object(new)) if old.get("kind") != new.get("kind"));
                match b.get_mut(&k) {
                    Some(slot) if !replace => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Splits `--key value` pairs.
pub fn parse_override_args(args: &[String]) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(flag) = it.next() {
        let key = flag
            .strip_prefix("--")
            .ok_or_else(|| Error::Config(format!("expected --key, got {flag:?}")))?;
        let value = it
            .next()
            .ok_or_else(|| Error::Config(format!("override --{key} has no value")))?;
        out.push((key.to_owned(), value.clone()));
    }
    Ok(out)
}

/// Sets a dotted path in a JSON object. Hyphens in keys read as underscores;
/// values are parsed as JSON and fall back to plain strings.
pub fn apply_override(root: &mut Value, key: &str, raw: &str) -> Result<()> {
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()));
    let path: Vec<String> = key.split('.').map(|p| p.replace('-', "_")).collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("malformed override key {key:?}")));
    }
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut node = root;
    for p in parents {
        let map = node
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("{key}: {p} is not an object")))?;
        node = map.entry(p.clone()).or_insert_with(|| Value::Object(Default::default()));
    }
    let map = node
        .as_object_mut()
        .ok_or_else(|| Error::Config(format!("{key}: parent is not an object")))?;
    if last == "kind" && parents.last().is_some_and(|p| TAGGED.contains(&p.as_str())) {
        // a different variant starts from that variant's defaults
        if map.get("kind") != Some(&value) {
            map.clear();
        }
    }
    map.insert(last.clone(), value);
    Ok(())
}

/// Deserializes `text` layered over the defaults, then applies overrides.
pub fn parse_with_overrides<T: DeserializeOwned + Serialize + Default>(
    text: Option<&str>,
    overrides: &[(String, String)],
) -> Result<T> {
    let mut root = serde_json::to_value(T::default()).expect("defaults serialize");
    if let Some(t) = text {
        let user: Value =
            serde_json::from_str(t).map_err(|e| Error::Config(format!("config is not valid JSON: {e}")))?;
        if !user.is_object() {
            return Err(Error::Config("config must be a JSON object".into()));
        }
        merge(&mut root, user);
    }
    for (k, v) in overrides {
        apply_override(&mut root, k, v)?;
    }
    serde_json::from_value(root).map_err(|e| Error::Config(e.to_string()))
}
