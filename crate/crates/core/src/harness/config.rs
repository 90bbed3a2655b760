use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::ensemble::{LinearHyperparams, LossKind, Transformation, TransformationKind};
use crate::postprocess::Source;
use crate::providers::ProviderConfig;
use crate::stats::TTestKind;

fn default_sizes() -> Vec<usize> {
    vec![300, 500, 1000]
}
fn default_batch() -> usize {
    10
}
fn default_out() -> PathBuf {
    PathBuf::from("runs/default")
}
fn default_replications() -> usize {
    5
}
fn default_folds() -> usize {
    5
}
fn default_threshold() -> f64 {
    0.5
}
fn default_channels() -> Vec<Source> {
    vec![Source::Channel1, Source::Channel2, Source::Channel3, Source::Bart]
}
fn default_c() -> f64 {
    1.0
}
fn default_epochs() -> usize {
    50
}
fn default_transformation() -> TransformationKind {
    TransformationKind::ClassifierChains
}

/// Meta-classifier settings used when no grid search is requested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetaConfig {
    #[serde(default = "default_loss")]
    pub loss: LossKind,
    #[serde(default = "default_transformation")]
    pub transformation: TransformationKind,
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    /// Chain order for classifier chains; taxonomy order when absent.
    #[serde(default)]
    pub chain_order: Option<Vec<usize>>,
}

fn default_loss() -> LossKind {
    LossKind::Hinge
}

impl Default for MetaConfig {
    fn default() -> Self {
        Self {
            loss: default_loss(),
            transformation: default_transformation(),
            c: default_c(),
            epochs: default_epochs(),
            chain_order: None,
        }
    }
}

impl MetaConfig {
    pub fn hyperparams(&self, loss: LossKind, seed: u64) -> LinearHyperparams {
        LinearHyperparams {
            c: self.c,
            epochs: self.epochs,
            seed,
            loss,
        }
    }

    pub fn transformation(&self, kind: TransformationKind, n_labels: usize) -> Transformation {
        match (kind, &self.chain_order) {
            (TransformationKind::ClassifierChains, Some(order)) => Transformation::ClassifierChains { order: order.clone() },
            _ => kind.with_labels(n_labels),
        }
    }
}

/// Everything a run needs, read from a TOML file.
///
/// Relative paths are resolved against the directory holding the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: PathBuf,
    /// Topic definitions; the bundled hallmark taxonomy when absent.
    #[serde(default)]
    pub taxonomy: Option<PathBuf>,
    #[serde(default = "default_sizes")]
    pub sample_sizes: Vec<usize>,
    /// Which sample is classified and evaluated; the largest when absent.
    #[serde(default)]
    pub evaluation_size: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_channels")]
    pub channels: Vec<Source>,
    /// Labelled documents used as few-shot exemplars (first k are taken).
    #[serde(default)]
    pub exemplar_pool: Option<PathBuf>,
    /// Directory overriding the bundled prompt templates.
    #[serde(default)]
    pub templates_dir: Option<PathBuf>,
    #[serde(default)]
    pub t_test: TTestKind,
    #[serde(default)]
    pub chat: Option<ProviderConfig>,
    #[serde(default)]
    pub sidecar: Option<ProviderConfig>,
    #[serde(default)]
    pub meta: MetaConfig,
}

impl RunConfig {
    /// A configuration with defaults for everything but the corpus path.
    pub fn new(corpus: impl Into<PathBuf>) -> Self {
        Self {
            corpus: corpus.into(),
            taxonomy: None,
            sample_sizes: default_sizes(),
            evaluation_size: None,
            seed: 0,
            batch_size: default_batch(),
            output_dir: default_out(),
            replications: default_replications(),
            folds: default_folds(),
            threshold: default_threshold(),
            channels: default_channels(),
            exemplar_pool: None,
            templates_dir: None,
            t_test: TTestKind::default(),
            chat: None,
            sidecar: None,
            meta: MetaConfig::default(),
        }
    }

    pub fn from_toml_str(source: &str, base: &Path) -> Result<Self, HarnessError> {
        let mut config: RunConfig = toml::from_str(source).map_err(|e| HarnessError::Config(e.to_string()))?;
        config.resolve_paths(base);
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let source = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_toml_str(&source, base)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut self.corpus);
        resolve(&mut self.output_dir);
        for p in [&mut self.taxonomy, &mut self.exemplar_pool, &mut self.templates_dir]
            .into_iter()
            .flatten()
        {
            resolve(p);
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |m: String| Err(HarnessError::Config(m));
        if self.sample_sizes.is_empty() || self.sample_sizes.contains(&0) {
            return fail("sample sizes must be positive".into());
        }
        if let Some(e) = self.evaluation_size {
            if !self.sample_sizes.contains(&e) {
                return fail(format!("evaluation size {e} is not among the sample sizes"));
            }
        }
        if self.replications == 0 {
            return fail("replication count must be at least 1".into());
        }
        if self.batch_size == 0 {
            return fail("batch size must be at least 1".into());
        }
        if self.folds < 2 {
            return fail("at least two folds are needed".into());
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return fail(format!("threshold must lie in (0, 1), got {}", self.threshold));
        }
        for c in &self.channels {
            if !super::is_classifiable(*c) {
                return fail(format!("{c} is not a classification channel"));
            }
        }
        for p in [&self.chat, &self.sidecar].into_iter().flatten() {
            p.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        self.meta
            .hyperparams(self.meta.loss, 0)
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Size of the sample that gets classified.
    pub fn evaluation_size(&self) -> usize {
        self.evaluation_size
            .unwrap_or_else(|| *self.sample_sizes.iter().max().expect("validated non-empty"))
    }
}
