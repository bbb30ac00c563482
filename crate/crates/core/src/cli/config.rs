//! TOML configuration files of the subcommands. Every table rejects unknown
//! keys; omitted keys take the values printed by `weakpairs defaults`.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::Failure;
use crate::data::{load_csv, load_pairs_csv, NoiseConfig, TaskSpec};
use crate::estimators::{EstimatorKind, EstimatorSpec};
use crate::loss::LossKind;
use crate::pairs::ClassPrior;
use crate::trainer::{Annotator, DataSource, GeneratorSource, SweepAxis, TrainConfig};
use crate::verify::VerifyConfig;

fn default_task() -> TaskSpec {
    TaskSpec::canonical(0.2)
}

fn default_n_test() -> usize {
    1000
}

/// Label noise applied to the training pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    /// The learner is given `epsilon * pi_plus`.
    pub epsilon: f64,
    pub sigma_noise: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self { epsilon: 1.0, sigma_noise: 0.0 }
    }
}

impl NoiseSection {
    /// The noise seed is derived per run from the master seed.
    pub fn to_noise(self) -> NoiseConfig {
        NoiseConfig { epsilon: self.epsilon, sigma_noise: self.sigma_noise, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_task")]
    pub task: TaskSpec,
    pub n_pairs: usize,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    #[serde(default)]
    pub annotator: Annotator,
    #[serde(default)]
    pub noise: NoiseSection,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self { seed: 0, task: default_task(), n_pairs: 1000, n_test: default_n_test(), annotator: Annotator::Exact, noise: NoiseSection::default() }
    }
}

/// Optimizer and architecture settings shared by `train` and `sweep`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub epochs: usize,
    pub batch_pairs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub eval_every: usize,
    pub tail_epochs: usize,
    pub hidden: Vec<usize>,
    pub loss: LossKind,
}

impl Default for ModelSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            epochs: t.epochs,
            batch_pairs: t.batch_pairs,
            lr: t.lr,
            weight_decay: t.weight_decay,
            eval_every: t.eval_every,
            tail_epochs: t.tail_epochs,
            hidden: t.hidden,
            loss: t.loss,
        }
    }
}

impl ModelSection {
    pub fn train_config(&self, estimator: EstimatorSpec, seed: u64) -> TrainConfig {
        TrainConfig {
            estimator,
            epochs: self.epochs,
            batch_pairs: self.batch_pairs,
            lr: self.lr,
            weight_decay: self.weight_decay,
            seed,
            eval_every: self.eval_every,
            tail_epochs: self.tail_epochs,
            hidden: self.hidden.clone(),
            loss: self.loss,
        }
    }
}

/// Either a synthetic task sampled afresh for every seed, or fixed CSV files
/// (when `pairs` is set; `test` and `prior` are then required).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub task: TaskSpec,
    pub n_pairs: usize,
    pub n_test: usize,
    pub annotator: Annotator,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairs: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior: Option<f64>,
}

impl Default for DataSection {
    fn default() -> Self {
        Self { task: default_task(), n_pairs: 1000, n_test: default_n_test(), annotator: Annotator::Exact, pairs: None, test: None, prior: None }
    }
}

impl DataSection {
    /// Prior of the clean training data.
    pub fn prior(&self) -> Result<f64, Failure> {
        match (&self.pairs, self.prior) {
            (Some(_), Some(p)) => Ok(p),
            (Some(_), None) => Err(Failure::config("data.prior: required when data.pairs is set")),
            (None, _) => Ok(self.task.pi_plus),
        }
    }

    fn validate(&self) -> Result<(), Failure> {
        match &self.pairs {
            Some(_) => {
                if self.test.is_none() {
                    return Err(Failure::config("data.test: required when data.pairs is set"));
                }
                ClassPrior::new(self.prior()?).map_err(|e| Failure::config(format!("data.prior: {e}")))?;
            }
            None => {
                if self.test.is_some() || self.prior.is_some() {
                    return Err(Failure::config("data.test and data.prior are only used with data.pairs"));
                }
                self.task.validate().map_err(|e| Failure::config(format!("data.task: {e}")))?;
                if self.n_pairs == 0 || self.n_test == 0 {
                    return Err(Failure::config("data.n_pairs and data.n_test must be positive"));
                }
                if let Annotator::Learned { probe_size: 0 } = self.annotator {
                    return Err(Failure::config("data.annotator.probe_size: must be positive"));
                }
            }
        }
        Ok(())
    }

    /// Relative file paths are resolved against `base` (the config file's
    /// directory).
    pub fn source(&self, base: &Path) -> Result<DataSource, Failure> {
        match (&self.pairs, &self.test) {
            (Some(p), Some(t)) => {
                let train = load_pairs_csv(base.join(p)).map_err(Failure::Runtime)?;
                let test = load_csv(base.join(t)).map_err(Failure::Runtime)?;
                let prior = ClassPrior::new(self.prior()?).map_err(|e| Failure::config(format!("data.prior: {e}")))?;
                Ok(DataSource::Fixed { train: Arc::new(train), prior, test: Arc::new(test) })
            }
            _ => Ok(DataSource::Generator(GeneratorSource {
                task: self.task.clone(),
                n_pairs: self.n_pairs,
                n_test: self.n_test,
                annotator: self.annotator,
            })),
        }
    }
}

/// Estimator names as accepted by `EstimatorSpec::from_str`
/// (`sconf`, `confdiff`, `convex`, `scd`, `scd-lambda`, `supervised`, with
/// `-relu`, `-abs` or `-unbiased` suffixes), plus overrides of the mixing
/// weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorSection {
    pub names: Vec<String>,
    /// Sconf weight of every convex kind.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Forward weight of every `scd-lambda`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

impl Default for EstimatorSection {
    fn default() -> Self {
        Self { names: vec!["scd-abs".into()], gamma: None, lambda: None }
    }
}

impl EstimatorSection {
    pub fn specs(&self) -> Result<Vec<EstimatorSpec>, Failure> {
        if self.names.is_empty() {
            return Err(Failure::config("estimators.names: at least one estimator is required"));
        }
        self.names
            .iter()
            .map(|n| {
                let mut s: EstimatorSpec = n.parse().map_err(|e| Failure::config(format!("estimators.names: {e}")))?;
                if matches!(s.kind, EstimatorKind::Convex | EstimatorKind::CorrectedConvex) {
                    if let Some(g) = self.gamma {
                        s.gamma = g;
                    }
                }
                if s.kind == EstimatorKind::ScdLambda {
                    if let Some(l) = self.lambda {
                        s.lambda = l;
                    }
                }
                s.validate().map_err(|e| Failure::config(format!("estimators: {e}")))?;
                Ok(s)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainFileConfig {
    pub seed: u64,
    pub n_seeds: usize,
    /// Leading fraction of each seed's training pairs that is used.
    pub fraction: f64,
    pub checkpoints: bool,
    pub estimators: EstimatorSection,
    pub train: ModelSection,
    pub data: DataSection,
    pub noise: NoiseSection,
}

impl Default for TrainFileConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_seeds: 5,
            fraction: 1.0,
            checkpoints: true,
            estimators: EstimatorSection::default(),
            train: ModelSection::default(),
            data: DataSection::default(),
            noise: NoiseSection::default(),
        }
    }
}

impl TrainFileConfig {
    /// Checks everything that can be checked before any data is touched,
    /// including each estimator against the prior the learner will see.
    pub fn validate(&self) -> Result<Vec<EstimatorSpec>, Failure> {
        let specs = self.estimators.specs()?;
        validate_common(&self.train, &self.data, &self.noise, self.n_seeds, self.fraction, &specs)?;
        let prior = ClassPrior::new(self.noise.epsilon * self.data.prior()?)
            .map_err(|e| Failure::config(format!("noise.epsilon: learner prior: {e}")))?;
        for s in &specs {
            s.validate_for(&prior).map_err(|e| Failure::config(format!("estimators: {}: {e}", s.label())))?;
        }
        Ok(specs)
    }
}

fn validate_common(
    model: &ModelSection,
    data: &DataSection,
    noise: &NoiseSection,
    n_seeds: usize,
    fraction: f64,
    specs: &[EstimatorSpec],
) -> Result<(), Failure> {
    if n_seeds < 2 {
        return Err(Failure::config("n_seeds: must be at least 2"));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Failure::config(format!("fraction: {fraction} is outside (0, 1]")));
    }
    for s in specs {
        model.train_config(*s, 0).validate().map_err(|e| Failure::config(format!("train: {e}")))?;
    }
    data.validate()?;
    noise.to_noise().validate().map_err(|e| Failure::config(format!("noise: {e}")))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFileConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_n_seeds")]
    pub n_seeds: usize,
    #[serde(default = "default_fraction")]
    pub fraction: f64,
    #[serde(default)]
    pub estimators: EstimatorSection,
    #[serde(default)]
    pub train: ModelSection,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub noise: NoiseSection,
    pub sweep: SweepAxis,
}

fn default_n_seeds() -> usize {
    5
}

fn default_fraction() -> f64 {
    1.0
}

impl Default for SweepFileConfig {
    fn default() -> Self {
        let t = TrainFileConfig::default();
        Self {
            seed: t.seed,
            n_seeds: t.n_seeds,
            fraction: t.fraction,
            estimators: t.estimators,
            train: t.train,
            data: t.data,
            noise: t.noise,
            sweep: SweepAxis::Fraction { values: vec![0.25, 0.5, 0.75, 1.0] },
        }
    }
}

impl SweepFileConfig {
    /// Prior validity is checked per cell, where failures become rows.
    pub fn validate(&self) -> Result<Vec<EstimatorSpec>, Failure> {
        let specs = self.estimators.specs()?;
        validate_common(&self.train, &self.data, &self.noise, self.n_seeds, self.fraction, &specs)?;
        self.sweep.validate(&specs).map_err(|e| Failure::config(format!("sweep: {e}")))?;
        Ok(specs)
    }
}

/// Parses `text` as a config of type `T`; an absent file parses as empty.
pub fn parse<T: for<'de> Deserialize<'de>>(path: Option<&Path>) -> Result<T, Failure> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|e| Failure::config(format!("{}: {e}", p.display())))?,
        None => String::new(),
    };
    toml::from_str(&text).map_err(|e| {
        let origin = path.map(|p| p.display().to_string()).unwrap_or_else(|| "<defaults>".into());
        Failure::config(format!("{origin}: {}", e.to_string().trim().replace('\n', " ")))
    })
}

/// Default configuration of every subcommand as one commented TOML document.
pub fn defaults_toml(command: Option<&str>) -> Result<String, Failure> {
    let section = |name: &str, body: Result<String, toml::ser::Error>| -> Result<String, Failure> {
        let body = body.map_err(|e| Failure::config(e.to_string()))?;
        Ok(format!("# ---- weakpairs {name} --config FILE ----\n{body}"))
    };
    let all = ["generate", "train", "sweep", "verify"];
    let chosen: Vec<&str> = match command {
        None => all.to_vec(),
        Some(c) if all.contains(&c) => vec![c],
        Some(c) => return Err(Failure::config(format!("unknown command `{c}`; valid: {}", all.join(", ")))),
    };
    let mut out = Vec::new();
    for c in chosen {
        out.push(match c {
            "generate" => section(c, toml::to_string(&GenerateConfig::default()))?,
            "train" => section(c, toml::to_string(&TrainFileConfig::default()))?,
            "sweep" => section(c, toml::to_string(&SweepFileConfig::default()))?,
            _ => section(c, toml::to_string(&VerifyConfig::default()))?,
        });
    }
    Ok(out.join("\n"))
}
