use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serann::annotate::{BackendConfig, ContextVariant, Shots};
use serann::classifier::ClassifierConfig;
use serann::vqvae::VqVaeConfig;

/// Annotation settings that are not part of the backend connection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotateSettings {
    pub variant: ContextVariant,
    pub shots: Shots,
    /// Draw exemplars round-robin over classes instead of uniformly.
    pub balanced: bool,
    pub failure_budget: usize,
    pub concurrency: usize,
}

impl Default for AnnotateSettings {
    fn default() -> Self {
        AnnotateSettings {
            variant: ContextVariant::TextOnly,
            shots: Shots::Zero,
            balanced: false,
            failure_budget: 0,
            concurrency: 1,
        }
    }
}

/// Everything a pipeline command reads besides its file arguments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub repeats: usize,
    /// Validation share of the evaluation corpus in cross-corpus runs.
    pub val_fraction: f64,
    pub vqvae: VqVaeConfig,
    pub classifier: ClassifierConfig,
    pub annotate: AnnotateSettings,
    pub backend: BackendConfig,
}

impl PipelineConfig {
    pub fn defaults(desk_scale: bool) -> Self {
        PipelineConfig {
            seed: 0,
            repeats: 10,
            val_fraction: 0.3,
            vqvae: if desk_scale { VqVaeConfig::desk() } else { VqVaeConfig::paper() },
            classifier: if desk_scale {
                ClassifierConfig::desk()
            } else {
                ClassifierConfig::paper()
            },
            annotate: AnnotateSettings::default(),
            backend: BackendConfig::default(),
        }
    }

    /// Built-in defaults with `path`'s TOML tables laid over them key by key.
    pub fn load(path: Option<&Path>, desk_scale: bool) -> Result<Self> {
        let base = Self::defaults(desk_scale);
        let Some(path) = path else { return Ok(base) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let overlay: toml::Table = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let mut merged = toml::Table::try_from(&base).context("serializing default config")?;
        merge(&mut merged, overlay);
        let cfg: PipelineConfig = toml::Value::Table(merged)
            .try_into()
            .with_context(|| format!("invalid config {}", path.display()))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            bail!("repeats must be at least 1");
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            bail!("val_fraction must be in [0, 1)");
        }
        self.vqvae.validate()?;
        self.classifier.validate()?;
        self.backend.validate()?;
        Ok(())
    }

    /// Seeds of the `repeats` runs: consecutive from the base seed.
    pub fn repeat_seeds(&self) -> Vec<u64> {
        (0..self.repeats as u64).map(|i| self.seed.wrapping_add(i)).collect()
    }
}

fn merge(base: &mut toml::Table, overlay: toml::Table) {
    for (k, v) in overlay {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}
