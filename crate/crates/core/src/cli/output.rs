use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

use super::Failure;
use crate::error::{Error, Result};
use crate::trainer::{ExperimentResult, SweepRow};

/// Record of one command invocation, written last as `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub command: String,
    /// Fully resolved configuration (also written as `config.toml`).
    pub config: Value,
    pub seed: u64,
    pub version: String,
    /// Paths relative to the output directory.
    pub outputs: Vec<String>,
    pub duration_seconds: f64,
    pub summary: Value,
}

/// The only directory a command writes to.
pub struct OutputDir {
    dir: PathBuf,
    outputs: Vec<String>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self { dir: dir.to_path_buf(), outputs: Vec::new() })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn write_with(&mut self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        f(&mut w)?;
        w.flush().map_err(|e| Error::io(&path, e))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        self.write_with(name, |w| w.write_all(bytes).map_err(|e| Error::io(path, e)))
    }

    pub fn write_toml<T: Serialize>(&mut self, name: &str, value: &T) -> std::result::Result<(), Failure> {
        let text = toml::to_string(value).map_err(|e| Failure::config(e.to_string()))?;
        Ok(self.write_bytes(name, text.as_bytes())?)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value).expect("report serializes");
        self.write_bytes(name, format!("{text}\n").as_bytes())
    }

    fn csv<F>(&mut self, name: &str, header: &[&str], rows: F) -> Result<()>
    where
        F: FnOnce(&mut csv::Writer<&mut BufWriter<File>>) -> Result<()>,
    {
        self.write_with(name, |w| {
            let mut c = csv::Writer::from_writer(w);
            c.write_record(header)?;
            rows(&mut c)?;
            c.flush().map_err(|e| Error::Csv(e.into()))?;
            Ok(())
        })
    }

    pub fn finish<C: Serialize>(mut self, command: &str, config: &C, seed: u64, summary: Value, start: Instant) -> std::result::Result<(), Failure> {
        let manifest = Manifest {
            command: command.to_string(),
            config: serde_json::to_value(config).expect("config serializes"),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: self.outputs.clone(),
            duration_seconds: start.elapsed().as_secs_f64(),
            summary,
        };
        self.write_json("manifest.json", &manifest)?;
        Ok(())
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Lowercase file-name form of an estimator label.
pub fn slug(label: &str) -> String {
    let mut s = String::new();
    for ch in label.chars().flat_map(char::to_lowercase) {
        if ch.is_ascii_alphanumeric() || ch == '.' {
            s.push(ch);
        } else if !s.ends_with('-') {
            s.push('-');
        }
    }
    s.trim_matches('-').to_string()
}

/// `results.csv` (one row per seed), `aggregate.csv` (one row per
/// estimator), `curves.csv` (one row per epoch) and, optionally, one
/// checkpoint per seed.
pub fn write_train_results(out: &mut OutputDir, results: &[(String, ExperimentResult)], checkpoints: bool) -> Result<()> {
    out.csv("results.csv", &["estimator", "seed_index", "seed", "final_accuracy", "first_negative_epoch", "min_train_risk"], |c| {
        for (label, r) in results {
            for (i, run) in r.runs.iter().enumerate() {
                let min_risk = run.train_risk.iter().copied().fold(f64::INFINITY, f64::min);
                let neg = run.first_negative_epoch.map(|e| e.to_string()).unwrap_or_default();
                c.write_record([label.clone(), i.to_string(), r.seeds[i].to_string(), num(run.final_accuracy), neg, num(min_risk)])?;
            }
        }
        Ok(())
    })?;
    out.csv("aggregate.csv", &["estimator", "mean", "std", "n_seeds"], |c| {
        for (label, r) in results {
            c.write_record([label.clone(), num(r.mean), num(r.std), r.runs.len().to_string()])?;
        }
        Ok(())
    })?;
    out.csv("curves.csv", &["estimator", "seed_index", "epoch", "train_risk", "min_batch_risk", "test_accuracy"], |c| {
        for (label, r) in results {
            for (i, run) in r.runs.iter().enumerate() {
                for e in 0..run.train_risk.len() {
                    c.write_record([
                        label.clone(),
                        i.to_string(),
                        (e + 1).to_string(),
                        num(run.train_risk[e]),
                        num(run.min_batch_risk[e]),
                        opt(run.test_accuracy[e]),
                    ])?;
                }
            }
        }
        Ok(())
    })?;
    if checkpoints {
        for (label, r) in results {
            for (i, run) in r.runs.iter().enumerate() {
                out.write_bytes(&format!("checkpoints/{}/seed{i}.wpm", slug(label)), &run.model.to_checkpoint_bytes())?;
            }
        }
    }
    Ok(())
}

/// Long-format `sweep.csv`: one row per (cell, estimator).
pub fn write_sweep_rows(out: &mut OutputDir, rows: &[SweepRow]) -> Result<()> {
    out.csv("sweep.csv", &["axis", "value", "epsilon", "sigma", "estimator", "mean", "std", "n_seeds", "accuracies", "error"], |c| {
        for r in rows {
            let accs = r.accuracies.iter().map(|&a| num(a)).collect::<Vec<_>>().join(";");
            c.write_record([
                r.cell.axis.to_string(),
                num(r.cell.value),
                opt(r.cell.epsilon),
                opt(r.cell.sigma),
                r.estimator.clone(),
                opt(r.mean),
                opt(r.std),
                r.accuracies.len().to_string(),
                accs,
                r.error.clone().unwrap_or_default(),
            ])?;
        }
        Ok(())
    })
}
