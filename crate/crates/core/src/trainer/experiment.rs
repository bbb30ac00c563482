use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{train, RunResult, TrainConfig};
use crate::data::{corrupt, NoiseConfig, TaskGenerator, TaskSpec};
use crate::error::{Error, Result};
use crate::pairs::{ClassPrior, LabeledDataset, PairDataset};
use crate::seeding::{derive_seed, stream};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Annotator {
    #[default]
    Exact,
    Learned { probe_size: usize },
}

/// Fresh synthetic data for every seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSource {
    pub task: TaskSpec,
    pub n_pairs: usize,
    pub n_test: usize,
    pub annotator: Annotator,
}

/// Where the training pairs and the test set of each seed come from.
#[derive(Debug, Clone)]
pub enum DataSource {
    Generator(GeneratorSource),
    /// The same datasets for every seed; only initialization and batch order
    /// vary.
    Fixed { train: Arc<PairDataset<f64>>, prior: ClassPrior<f64>, test: Arc<LabeledDataset<f64>> },
}

/// Data of one seed after subsetting and corruption.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: PairDataset<f64>,
    /// The prior the learner is given.
    pub prior: ClassPrior<f64>,
    pub test: LabeledDataset<f64>,
}

impl DataSource {
    pub fn with_prior(&self, pi_plus: f64) -> Result<Self> {
        match self {
            DataSource::Generator(g) => {
                let mut g = g.clone();
                g.task.pi_plus = pi_plus;
                g.task.validate()?;
                Ok(DataSource::Generator(g))
            }
            DataSource::Fixed { .. } => Err(Error::param("axis", "a prior sweep needs a generator data source")),
        }
    }

    /// Seed `index` under `master`: training pairs from stream
    /// `TRAIN_DATA`, test set from `TEST_DATA`, label noise from `NOISE`.
    /// The first `round(fraction * n)` pairs are kept, then corrupted.
    pub fn prepare(&self, master: u64, index: u64, fraction: f64, noise: &NoiseConfig) -> Result<PreparedData> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::param("fraction", format!("{fraction} is outside (0, 1]")));
        }
        let (train, prior, test) = match self {
            DataSource::Generator(g) => {
                let mut gen = TaskGenerator::new(g.task.clone(), derive_seed(master, stream::TRAIN_DATA, index))?;
                let train = match g.annotator {
                    Annotator::Exact => gen.annotate_pairs_exact(g.n_pairs)?,
                    Annotator::Learned { probe_size } => gen.annotate_pairs_learned(g.n_pairs, probe_size)?,
                };
                let test = TaskGenerator::new(g.task.clone(), derive_seed(master, stream::TEST_DATA, index))?.sample_labeled(g.n_test)?;
                (train, gen.prior(), test)
            }
            DataSource::Fixed { train, prior, test } => ((**train).clone(), *prior, (**test).clone()),
        };
        let keep = ((fraction * train.len() as f64).round() as usize).max(1);
        let train = if keep < train.len() { train.prefix(keep)? } else { train };
        let noise = NoiseConfig { seed: derive_seed(master, stream::NOISE, index), ..*noise };
        let (train, prior) = corrupt(&train, &prior, &noise)?;
        Ok(PreparedData { train, prior, test })
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub mean: f64,
    /// Population standard deviation (divides by the number of seeds).
    pub std: f64,
    /// Training seed of each run.
    pub seeds: Vec<u64>,
    pub runs: Vec<RunResult>,
}

impl ExperimentResult {
    pub fn accuracies(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.final_accuracy).collect()
    }
}

pub fn population_std(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt()
}

/// Runs `n_seeds` independent sample-and-train repetitions in parallel.
/// `config.seed` is the master seed; run `i` trains with
/// `derive_seed(master, INIT, i)`.
pub fn run_experiment(
    config: &TrainConfig,
    source: &DataSource,
    n_seeds: usize,
    fraction: f64,
    noise: &NoiseConfig,
) -> Result<ExperimentResult> {
    if n_seeds < 2 {
        return Err(Error::param("n_seeds", "at least 2 seeds are needed for a spread"));
    }
    config.validate()?;
    let master = config.seed;
    let outcomes: Vec<Result<(u64, RunResult)>> = (0..n_seeds as u64)
        .into_par_iter()
        .map(|i| {
            let wrap = |e: Error| Error::Seed { seed_index: i as usize, source: Box::new(e) };
            let data = source.prepare(master, i, fraction, noise).map_err(wrap)?;
            let seed = derive_seed(master, stream::INIT, i);
            let cfg = TrainConfig { seed, ..config.clone() };
            let run = train(&cfg, &data.train, &data.prior, &data.test).map_err(wrap)?;
            Ok((seed, run))
        })
        .collect();
    let mut seeds = Vec::with_capacity(n_seeds);
    let mut runs = Vec::with_capacity(n_seeds);
    for o in outcomes {
        let (s, r) = o?;
        seeds.push(s);
        runs.push(r);
    }
    let acc: Vec<f64> = runs.iter().map(|r| r.final_accuracy).collect();
    let mean = acc.iter().sum::<f64>() / acc.len() as f64;
    Ok(ExperimentResult { mean, std: population_std(&acc), seeds, runs })
}
