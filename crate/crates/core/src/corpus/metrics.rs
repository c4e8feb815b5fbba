use serde::{Deserialize, Serialize};

use super::labels::Emotion;
use crate::error::{Error, Result};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Square count matrix, rows = gold, columns = predicted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: Vec<String>) -> Self {
        let k = classes.len();
        ConfusionMatrix {
            classes,
            counts: vec![vec![0; k]; k],
        }
    }

    pub fn four_class() -> Self {
        Self::new(Emotion::ALL.iter().map(|e| e.to_string()).collect())
    }

    pub fn from_counts(classes: Vec<String>, counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = classes.len();
        if counts.len() != k || counts.iter().any(|r| r.len() != k) {
            return Err(Error::shape(format!("confusion matrix must be {k}x{k}")));
        }
        Ok(ConfusionMatrix { classes, counts })
    }

    pub fn size(&self) -> usize {
        self.classes.len()
    }

    pub fn add(&mut self, gold: usize, predicted: usize) -> Result<()> {
        let k = self.size();
        if gold >= k || predicted >= k {
            return Err(Error::LabelOutOfRange {
                label: gold.max(predicted),
                classes: k,
            });
        }
        self.counts[gold][predicted] += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.classes != self.classes {
            return Err(Error::shape("confusion matrices have different classes"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        Ok(())
    }

    pub fn support(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn recall(&self, class: usize) -> Option<f64> {
        let s = self.support(class);
        (s > 0).then(|| self.counts[class][class] as f64 / s as f64)
    }

    /// Mean per-class recall. Every class needs support.
    pub fn uar(&self) -> Result<f64> {
        let mut sum = 0.0;
        for c in 0..self.size() {
            sum += self.recall(c).ok_or_else(|| Error::ZeroSupport(self.classes[c].clone()))?;
        }
        if self.size() == 0 {
            return Err(Error::Empty("confusion matrix has no classes".into()));
        }
        Ok(sum / self.size() as f64)
    }

    /// Mean recall over the classes that do have support; for single-speaker
    /// test folds where a class can be absent.
    pub fn uar_present(&self) -> Result<f64> {
        let r: Vec<f64> = (0..self.size()).filter_map(|c| self.recall(c)).collect();
        if r.is_empty() {
            return Err(Error::Empty("no class has support".into()));
        }
        Ok(r.iter().sum::<f64>() / r.len() as f64)
    }

    pub fn accuracy(&self) -> Option<f64> {
        let t = self.total();
        (t > 0).then(|| (0..self.size()).map(|c| self.counts[c][c]).sum::<u64>() as f64 / t as f64)
    }
}

/// UARs over repeats with mean and sample standard deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub uars: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub config_digest: String,
    pub seeds: Vec<u64>,
}

pub fn mean_and_sample_std(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Empty("no values to aggregate".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Ok((mean, 0.0));
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    Ok((mean, (ss / (n - 1.0)).sqrt()))
}

pub fn aggregate_runs(uars: &[f64], config_digest: &str, seeds: &[u64]) -> Result<RunReport> {
    let (mean, std) = mean_and_sample_std(uars)?;
    Ok(RunReport {
        schema_version: REPORT_SCHEMA_VERSION,
        uars: uars.to_vec(),
        mean,
        std,
        config_digest: config_digest.to_string(),
        seeds: seeds.to_vec(),
    })
}

/// Hex SHA-256 of a value's JSON serialization.
pub fn config_digest<T: Serialize>(config: &T) -> String {
    use sha2::{Digest, Sha256};
    let json = serde_json::to_vec(config).expect("config serializes");
    hex::encode(Sha256::digest(json))
}
