//! Experiment orchestration: every pipeline stage reads its inputs from, and
//! records its outputs in, the run manifest of one output directory.

mod config;
mod manifest;
mod pipeline;
mod reports;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use config::{MetaConfig, RunConfig};
pub use manifest::{sha256_file, ArtifactRecord, RunManifest, MANIFEST_FILE};
pub use pipeline::{
    run_chat_channel, run_probability_channel, BatchOutcome, BatchRecord, ChannelContext, ChannelLog, ChannelRun,
    PreparationFailure, PARSE_ATTEMPTS,
};
pub use reports::{AblationReport, AblationRow, DistributionReport, EvaluationReport, LabelCounts};

use crate::corpus::{
    label_distribution, load_corpus, stratified_kfold_indices, stratified_sample, Corpus, CorpusError, Document, Fold,
    LabelVector, Taxonomy,
};
use crate::ensemble::{
    cross_val_predict, grid_select, hard_vote, predict_meta, tfidf_cross_val_predict, train_meta, EnsembleError,
    GridReport, LinearHyperparams, LossKind, MetaModel, SparseMatrix, TransformationKind,
};
use crate::metrics::{example_based_f1, MetricsError, MetricsReport};
use crate::postprocess::{
    assemble_features, threshold_probabilities, ChannelOutput, FeatureMatrix, PostprocessError, ProbabilityTable,
    Source,
};
use crate::prompts::{PromptError, PromptTemplates};
use crate::providers::{
    ChatProvider, HttpChatClient, HttpSidecarClient, MockChat, MockSidecar, ProviderError, SidecarProvider,
};
use crate::stats::{ReplicationSet, StatsError, StatsReport};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("missing dependency {artifact:?}: {reason}")]
    MissingDependency { artifact: String, reason: String },
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("inferential statistics unavailable: {0}")]
    Inferential(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Postprocess(#[from] PostprocessError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

impl HarnessError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Sources produced by the `classify` stage.
pub fn is_classifiable(source: Source) -> bool {
    matches!(
        source,
        Source::Channel1
            | Source::Channel2
            | Source::Channel3
            | Source::FewShot1
            | Source::FewShot3
            | Source::FewShot5
            | Source::Bart
    )
}

/// Independent seed for one named use of the root seed.
pub fn derive_seed(root: u64, purpose: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(root.to_le_bytes());
    h.update(purpose.as_bytes());
    u64::from_le_bytes(h.finalize()[..8].try_into().expect("8 bytes"))
}

/// Command-line overrides applied on top of the configuration file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub mock: bool,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

const STACKED_REFERENCE: &str = "stacked";
const PROBABILITIES: &str = "probabilities";
const FEATURES: &str = "features";
const FEATURE_IDS: &str = "feature_ids";
const META_MODEL: &str = "meta_model";
const CV_PREDICTIONS: &str = "cv_predictions";
const REPLICATION_SCORES: &str = "replication_scores";

fn side_name(name: &str) -> String {
    format!("{name}_side")
}

/// A run rooted at one output directory.
pub struct Harness {
    config: RunConfig,
    out: PathBuf,
    taxonomy: Arc<Taxonomy>,
    templates: PromptTemplates,
    chat: Option<Arc<dyn ChatProvider>>,
    sidecar: Option<Arc<dyn SidecarProvider>>,
    manifest: RunManifest,
}

impl Harness {
    /// Opens (or resumes) the run described by `config` and `options`.
    ///
    /// Mock mode uses the offline providers; otherwise HTTP clients are built
    /// from the `chat` and `sidecar` sections when present.
    pub fn open(config: RunConfig, options: RunOptions) -> Result<Self, HarnessError> {
        let (chat, sidecar): (Option<Arc<dyn ChatProvider>>, Option<Arc<dyn SidecarProvider>>) = if options.mock {
            (None, Some(Arc::new(MockSidecar::new())))
        } else {
            let chat = match &config.chat {
                Some(c) => Some(Arc::new(HttpChatClient::new(c.clone())?) as Arc<dyn ChatProvider>),
                None => None,
            };
            let sidecar = match &config.sidecar {
                Some(c) => Some(Arc::new(HttpSidecarClient::new(c.clone())?) as Arc<dyn SidecarProvider>),
                None => None,
            };
            (chat, sidecar)
        };
        let mut harness = Self::with_providers(config, options, chat, sidecar)?;
        if harness.manifest.mock && harness.chat.is_none() {
            harness.chat = Some(Arc::new(MockChat::new(harness.taxonomy.clone())));
        }
        Ok(harness)
    }

    /// Opens a run with explicitly supplied providers.
    pub fn with_providers(
        mut config: RunConfig,
        options: RunOptions,
        chat: Option<Arc<dyn ChatProvider>>,
        sidecar: Option<Arc<dyn SidecarProvider>>,
    ) -> Result<Self, HarnessError> {
        if let Some(seed) = options.seed {
            config.seed = seed;
        }
        if let Some(out) = options.out {
            config.output_dir = out;
        }
        config.validate()?;
        let taxonomy = Arc::new(match &config.taxonomy {
            Some(path) => Taxonomy::load(path)?,
            None => Taxonomy::hallmarks(),
        });
        let templates = match &config.templates_dir {
            Some(dir) => PromptTemplates::from_dir(dir)?,
            None => PromptTemplates::default(),
        };
        let out = config.output_dir.clone();
        std::fs::create_dir_all(&out).map_err(|e| HarnessError::io(&out, e))?;
        let manifest = match RunManifest::load(&out)? {
            Some(existing) => {
                if existing.root_seed != config.seed || existing.mock != options.mock || existing.config != config {
                    return Err(HarnessError::Config(format!(
                        "{} holds a run with a different configuration, seed or mode; use a fresh output directory",
                        out.display()
                    )));
                }
                existing
            }
            None => RunManifest::new(config.clone(), config.seed, options.mock),
        };
        Ok(Self {
            config,
            out,
            taxonomy,
            templates,
            chat,
            sidecar,
            manifest,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn out_dir(&self) -> &Path {
        &self.out
    }

    pub fn manifest(&self) -> &RunManifest {
        &self.manifest
    }

    pub fn taxonomy(&self) -> &Arc<Taxonomy> {
        &self.taxonomy
    }

    fn seed(&self, purpose: &str) -> u64 {
        derive_seed(self.config.seed, purpose)
    }

    fn require(&self, name: &str) -> Result<PathBuf, HarnessError> {
        self.manifest.require(&self.out, name)
    }

    fn prepare(&self, relative: &str) -> Result<PathBuf, HarnessError> {
        let path = self.out.join(relative);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| HarnessError::io(parent, e))?;
        }
        Ok(path)
    }

    fn record(&mut self, name: &str, relative: impl AsRef<Path>, stage: &str) -> Result<(), HarnessError> {
        self.manifest.record(&self.out, name, relative.as_ref(), stage)
    }

    fn write_text(&mut self, name: &str, relative: &str, stage: &str, body: &str) -> Result<(), HarnessError> {
        let path = self.prepare(relative)?;
        std::fs::write(&path, body).map_err(|e| HarnessError::io(&path, e))?;
        self.record(name, relative, stage)
    }

    fn write_json<T: Serialize>(&mut self, name: &str, relative: &str, stage: &str, value: &T) -> Result<(), HarnessError> {
        let body = serde_json::to_string_pretty(value).expect("serializable") + "\n";
        self.write_text(name, relative, stage, &body)
    }

    fn read_json<T: DeserializeOwned>(&self, name: &str) -> Result<T, HarnessError> {
        let path = self.require(name)?;
        let body = std::fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
        serde_json::from_str(&body).map_err(|e| HarnessError::Manifest(format!("{}: {e}", path.display())))
    }

    fn write_channel(&mut self, name: &str, relative: &str, stage: &str, output: &ChannelOutput) -> Result<(), HarnessError> {
        let path = self.prepare(relative)?;
        output.write(&path)?;
        self.record(name, relative, stage)?;
        let side = ChannelOutput::side_report_path(Path::new(relative));
        self.record(&side_name(name), side, stage)
    }

    fn read_channel(&self, name: &str, source: Source) -> Result<ChannelOutput, HarnessError> {
        let path = self.require(name)?;
        self.require(&side_name(name))?;
        Ok(ChannelOutput::read(&path, source, self.taxonomy.len())?)
    }

    fn load_source(&self, source: Source) -> Result<ChannelOutput, HarnessError> {
        self.read_channel(source.name(), source)
    }

    fn finish(&mut self, stage: &str, started: Instant) -> Result<(), HarnessError> {
        self.manifest
            .timings
            .insert(stage.to_string(), started.elapsed().as_secs_f64());
        self.manifest.save(&self.out)
    }

    fn sample_name(size: usize) -> String {
        format!("sample_{size}")
    }

    /// The stratified sample that the classification stages work on.
    pub fn evaluation_corpus(&self) -> Result<Corpus, HarnessError> {
        let path = self.require(&Self::sample_name(self.config.evaluation_size()))?;
        Ok(load_corpus(path, self.taxonomy.clone())?)
    }

    /// Writes one stratified sample per configured size plus a distribution report.
    pub fn sample(&mut self) -> Result<Vec<Corpus>, HarnessError> {
        let started = Instant::now();
        let parent = load_corpus(&self.config.corpus, self.taxonomy.clone())?;
        let mut sizes = self.config.sample_sizes.clone();
        sizes.sort_unstable();
        sizes.dedup();
        if let Some(&largest) = sizes.last() {
            if largest > parent.len() {
                return Err(CorpusError::SizeTooLarge {
                    requested: largest,
                    available: parent.len(),
                }
                .into());
            }
        }
        let counts = |name: String, c: &Corpus| -> Result<LabelCounts, HarnessError> {
            Ok(LabelCounts {
                name,
                documents: c.len(),
                counts: label_distribution(c)?,
            })
        };
        let mut report = DistributionReport {
            parent: counts("corpus".into(), &parent)?,
            samples: Vec::new(),
        };
        let mut samples = Vec::new();
        for size in sizes {
            let sample = stratified_sample(&parent, size, self.seed(&format!("sample-{size}")))?;
            let name = Self::sample_name(size);
            let relative = format!("samples/{name}.jsonl");
            sample.write_jsonl(self.prepare(&relative)?)?;
            self.record(&name, &relative, "sample")?;
            report.samples.push(counts(name, &sample)?);
            samples.push(sample);
        }
        self.write_json("distribution", "samples/distribution.json", "sample", &report)?;
        self.write_text("distribution_md", "samples/distribution.md", "sample", &report.to_markdown())?;
        self.finish("sample", started)?;
        Ok(samples)
    }

    fn chat(&self) -> Result<&dyn ChatProvider, HarnessError> {
        self.chat
            .as_deref()
            .ok_or_else(|| HarnessError::Config("no chat provider configured; add a [chat] section or use --mock".into()))
    }

    fn sidecar(&self) -> Result<&dyn SidecarProvider, HarnessError> {
        self.sidecar.as_deref().ok_or_else(|| {
            HarnessError::Config("no sidecar provider configured; add a [sidecar] section or use --mock".into())
        })
    }

    fn exemplars(&self, source: Source) -> Result<Vec<Document>, HarnessError> {
        if !matches!(source, Source::FewShot1 | Source::FewShot3 | Source::FewShot5) {
            return Ok(Vec::new());
        }
        let path = self
            .config
            .exemplar_pool
            .as_ref()
            .ok_or_else(|| HarnessError::Config(format!("{source} needs an exemplar_pool")))?;
        Ok(load_corpus(path, self.taxonomy.clone())?.documents().to_vec())
    }

    /// Classifies the evaluation sample with one source and records its output.
    pub fn classify(&mut self, source: Source) -> Result<ChannelOutput, HarnessError> {
        if !is_classifiable(source) {
            return Err(HarnessError::Config(format!("{source} is not a classification channel")));
        }
        let started = Instant::now();
        let corpus = self.evaluation_corpus()?;
        let stage = "classify";
        let output = if source == Source::Bart {
            let table = run_probability_channel(corpus.documents(), &self.taxonomy, self.sidecar()?)?;
            let relative = "channels/probabilities.jsonl";
            table.write(&self.prepare(relative)?)?;
            self.record(PROBABILITIES, relative, stage)?;
            threshold_probabilities(&table, self.config.threshold)?
        } else {
            let exemplars = self.exemplars(source)?;
            let needs_sidecar = matches!(source, Source::Channel2 | Source::Channel3);
            let ctx = ChannelContext {
                taxonomy: &self.taxonomy,
                templates: &self.templates,
                chat: self.chat()?,
                sidecar: if needs_sidecar { Some(self.sidecar()?) } else { None },
                exemplars: &exemplars,
                batch_size: self.config.batch_size,
            };
            let run = run_chat_channel(source, corpus.documents(), &ctx)?;
            self.write_json(&format!("{source}_log"), &format!("channels/{source}.log.json"), stage, &run.log)?;
            run.output
        };
        self.write_channel(source.name(), &format!("channels/{source}.jsonl"), stage, &output)?;
        self.finish(&format!("classify:{source}"), started)?;
        Ok(output)
    }

    /// Joins channels 1–3 and the probabilities into the feature matrix; also writes the hard vote.
    pub fn features(&mut self) -> Result<FeatureMatrix, HarnessError> {
        let started = Instant::now();
        let channels = [
            self.load_source(Source::Channel1)?,
            self.load_source(Source::Channel2)?,
            self.load_source(Source::Channel3)?,
        ];
        let probs = ProbabilityTable::read(&self.require(PROBABILITIES)?, self.taxonomy.len())?;
        let matrix = assemble_features(&channels[0], &channels[1], &channels[2], &probs)?;
        let relative = "features/features.csv";
        matrix.write(&self.prepare(relative)?)?;
        self.record(FEATURES, relative, "features")?;
        self.record(FEATURE_IDS, FeatureMatrix::ids_path(Path::new(relative)), "features")?;
        self.write_json("exclusions", "features/exclusions.json", "features", &matrix.excluded)?;
        let vote = hard_vote(&channels[0], &channels[1], &channels[2])?;
        self.write_channel(Source::HardVote.name(), "channels/hard-vote.jsonl", "features", &vote)?;
        self.finish("features", started)?;
        Ok(matrix)
    }

    fn load_features(&self) -> Result<FeatureMatrix, HarnessError> {
        let path = self.require(FEATURES)?;
        self.require(FEATURE_IDS)?;
        Ok(FeatureMatrix::read(&path)?)
    }

    fn gold_for(corpus: &Corpus, ids: &[String]) -> Result<Vec<LabelVector>, HarnessError> {
        ids.iter()
            .map(|id| {
                corpus
                    .get(id)
                    .and_then(|d| d.gold.clone())
                    .ok_or_else(|| CorpusError::Unannotated(id.clone()).into())
            })
            .collect()
    }

    fn folds(&self, root: u64, y: &[LabelVector], ids: &[String]) -> Result<Vec<Fold>, HarnessError> {
        let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        Ok(stratified_kfold_indices(
            y,
            &refs,
            self.config.folds,
            derive_seed(root, "folds"),
        )?)
    }

    /// Trains the stacking meta-classifier, optionally choosing the cell by grid search.
    ///
    /// Out-of-fold predictions from the same folds are kept for evaluation.
    pub fn train_meta(&mut self, grid: bool) -> Result<MetaModel, HarnessError> {
        let started = Instant::now();
        let features = self.load_features()?;
        let corpus = self.evaluation_corpus()?;
        let y = Self::gold_for(&corpus, &features.ids)?;
        let x = SparseMatrix::from_dense(features.values.view());
        let folds = self.folds(self.config.seed, &y, &features.ids)?;
        let meta = self.config.meta.clone();
        let hp = meta.hyperparams(meta.loss, self.seed("meta"));
        let (loss, kind) = if grid {
            let report: GridReport = grid_select(
                &x,
                &y,
                &[LossKind::Hinge, LossKind::Logistic],
                &TransformationKind::ALL,
                &folds,
                &hp,
            )?;
            for w in &report.warnings {
                log::warn!("{w}");
            }
            self.write_json("grid", "meta/grid.json", "train-meta", &report)?;
            self.write_text("grid_md", "meta/grid.md", "train-meta", &report.to_markdown())?;
            (report.best().loss, report.best().transformation)
        } else {
            (meta.loss, meta.transformation)
        };
        let hp = LinearHyperparams { loss, ..hp };
        let transformation = meta.transformation(kind, self.taxonomy.len());
        let oof = cross_val_predict(&x, &y, &folds, &transformation, &hp)?;
        let cv_scores = folds
            .iter()
            .map(|f| {
                let p: Vec<LabelVector> = f.validation.iter().map(|&i| oof[i].clone()).collect();
                let g: Vec<LabelVector> = f.validation.iter().map(|&i| y[i].clone()).collect();
                example_based_f1(&p, &g)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut model = train_meta(&x, &y, &transformation, &hp)?;
        model.cv_scores = cv_scores;
        let relative = "meta/model.json";
        model.save(&self.prepare(relative)?)?;
        self.record(META_MODEL, relative, "train-meta")?;
        let unclassified = features.excluded.iter().map(|e| e.id.clone()).collect();
        let oof_output = ChannelOutput::new(Source::Stacked, features.ids.iter().cloned().zip(oof).collect(), unclassified);
        self.write_channel(CV_PREDICTIONS, "meta/cv_predictions.jsonl", "train-meta", &oof_output)?;
        self.finish("train-meta", started)?;
        Ok(model)
    }

    /// Applies the trained meta-classifier to a feature matrix, by default the run's own.
    pub fn predict(&mut self, features: Option<&Path>) -> Result<ChannelOutput, HarnessError> {
        let started = Instant::now();
        let model = MetaModel::load(&self.require(META_MODEL)?)?;
        let matrix = match features {
            Some(path) => FeatureMatrix::read(path)?,
            None => self.load_features()?,
        };
        let preds = predict_meta(&model, &SparseMatrix::from_dense(matrix.values.view()))?;
        let unclassified = matrix.excluded.iter().map(|e| e.id.clone()).collect();
        let output = ChannelOutput::new(Source::Stacked, matrix.ids.iter().cloned().zip(preds).collect(), unclassified);
        self.write_channel("predictions", "predictions/stacked.jsonl", "predict", &output)?;
        self.finish("predict", started)?;
        Ok(output)
    }

    /// Scores every classified source on its own documents, the stacked model on
    /// its out-of-fold predictions, and the TF-IDF baseline on the feature rows.
    pub fn evaluate(&mut self) -> Result<EvaluationReport, HarnessError> {
        let started = Instant::now();
        let corpus = self.evaluation_corpus()?;
        let stacked = self.read_channel(CV_PREDICTIONS, Source::Stacked)?;
        let tfidf = self.tfidf_baseline(&corpus, self.config.seed)?;
        self.write_channel(Source::TfidfLinSvm.name(), "predictions/tfidf-linsvm.jsonl", "evaluate", &tfidf)?;

        let mut sources = std::collections::BTreeMap::new();
        let probabilities = if self.manifest.has(PROBABILITIES) {
            Some(ProbabilityTable::read(&self.require(PROBABILITIES)?, self.taxonomy.len())?)
        } else {
            None
        };
        for source in Source::ALL {
            let output = match source {
                Source::Stacked => stacked.clone(),
                Source::TfidfLinSvm => tfidf.clone(),
                s if self.manifest.has(s.name()) => self.load_source(s)?,
                _ => continue,
            };
            let ids: Vec<String> = output.labels.iter().map(|(id, _)| id.clone()).collect();
            let pred: Vec<LabelVector> = output.labels.iter().map(|(_, l)| l.clone()).collect();
            let gold = Self::gold_for(&corpus, &ids)?;
            let scores = match (&probabilities, source) {
                (Some(table), Source::Bart) => {
                    let map: HashMap<&str, Vec<f64>> =
                        table.rows.iter().map(|(id, p)| (id.as_str(), p.values().to_vec())).collect();
                    Some(ids.iter().map(|id| map[id.as_str()].clone()).collect::<Vec<_>>())
                }
                _ => None,
            };
            let report = MetricsReport::compute(&self.taxonomy, &pred, &gold, scores.as_deref())?;
            sources.insert(source.name().to_string(), report);
        }
        let report = EvaluationReport { sources };
        self.write_json("evaluation", "reports/evaluation.json", "evaluate", &report)?;
        self.write_text("evaluation_md", "reports/evaluation.md", "evaluate", &report.to_markdown())?;
        self.finish("evaluate", started)?;
        Ok(report)
    }

    /// Out-of-fold TF-IDF + Lin-SVM predictions over the feature-row documents.
    fn tfidf_baseline(&self, corpus: &Corpus, root: u64) -> Result<ChannelOutput, HarnessError> {
        let features = self.load_features()?;
        let y = Self::gold_for(corpus, &features.ids)?;
        let texts: Vec<&str> = features
            .ids
            .iter()
            .map(|id| corpus.get(id).map(|d| d.text.as_str()).expect("gold lookup succeeded"))
            .collect();
        let folds = self.folds(root, &y, &features.ids)?;
        let hp = LinearHyperparams {
            loss: LossKind::Hinge,
            ..self.config.meta.hyperparams(LossKind::Hinge, derive_seed(root, "meta"))
        };
        let preds = tfidf_cross_val_predict(&texts, &y, &folds, &hp)?;
        let unclassified = features.excluded.iter().map(|e| e.id.clone()).collect();
        Ok(ChannelOutput::new(
            Source::TfidfLinSvm,
            features.ids.iter().cloned().zip(preds).collect(),
            unclassified,
        ))
    }

    fn on_rows(output: &ChannelOutput, ids: &[String]) -> Result<Vec<LabelVector>, HarnessError> {
        let map = output.lookup();
        ids.iter()
            .map(|id| {
                map.get(id.as_str())
                    .map(|l| (*l).clone())
                    .ok_or_else(|| HarnessError::Manifest(format!("{} has no prediction for {id}", output.source)))
            })
            .collect()
    }

    /// Channels 1–3, hard voting and the stacked model on the same documents.
    pub fn ablate(&mut self) -> Result<AblationReport, HarnessError> {
        let started = Instant::now();
        let corpus = self.evaluation_corpus()?;
        let stacked = self.read_channel(CV_PREDICTIONS, Source::Stacked)?;
        let ids: Vec<String> = stacked.labels.iter().map(|(id, _)| id.clone()).collect();
        let gold = Self::gold_for(&corpus, &ids)?;
        let mut approaches = Vec::new();
        for source in [Source::Channel1, Source::Channel2, Source::Channel3, Source::HardVote] {
            approaches.push((source.display_name(), Self::on_rows(&self.load_source(source)?, &ids)?));
        }
        approaches.push((Source::Stacked.display_name(), Self::on_rows(&stacked, &ids)?));
        let report = AblationReport::build(&self.taxonomy, &approaches, &gold)?;
        self.write_json("ablation", "reports/ablation.json", "ablate", &report)?;
        self.write_text("ablation_md", "reports/ablation.md", "ablate", &report.to_markdown())?;
        self.finish("ablate", started)?;
        Ok(report)
    }

    /// Repeats the learned parts of the pipeline `n` times with replication
    /// seeds `root + r`, holding the channel outputs and features fixed.
    ///
    /// Each replication redraws the cross-validation folds and the learner
    /// shuffling seed for the stacked model and the TF-IDF baseline; the
    /// channel, BART and hard-vote scores are recomputed on the same rows.
    pub fn replicate(&mut self, n: usize) -> Result<Vec<ReplicationSet>, HarnessError> {
        if n == 0 {
            return Err(HarnessError::Config("replication count must be at least 1".into()));
        }
        let started = Instant::now();
        let corpus = self.evaluation_corpus()?;
        let features = self.load_features()?;
        let model = MetaModel::load(&self.require(META_MODEL)?)?;
        let y = Self::gold_for(&corpus, &features.ids)?;
        let x = SparseMatrix::from_dense(features.values.view());

        let probs = ProbabilityTable::read(&self.require(PROBABILITIES)?, self.taxonomy.len())?;
        let bart = threshold_probabilities(&probs, self.config.threshold)?;
        let mut fixed = Vec::new();
        for source in [Source::Channel1, Source::Channel2, Source::Channel3] {
            fixed.push((source, Self::on_rows(&self.load_source(source)?, &features.ids)?));
        }
        fixed.push((Source::Bart, Self::on_rows(&bart, &features.ids)?));
        fixed.push((Source::HardVote, Self::on_rows(&self.load_source(Source::HardVote)?, &features.ids)?));

        let mut stacked = Vec::with_capacity(n);
        let mut tfidf = Vec::with_capacity(n);
        for r in 0..n {
            let root = self.config.seed.wrapping_add(r as u64);
            let folds = self.folds(root, &y, &features.ids)?;
            let hp = LinearHyperparams {
                seed: derive_seed(root, "meta"),
                ..model.hyperparams
            };
            let oof = cross_val_predict(&x, &y, &folds, &model.transformation, &hp)?;
            stacked.push(example_based_f1(&oof, &y)?);
            let baseline = self.tfidf_baseline(&corpus, root)?;
            tfidf.push(example_based_f1(&Self::on_rows(&baseline, &features.ids)?, &y)?);
        }
        let mut sets = fixed
            .into_iter()
            .map(|(source, pred)| Ok(ReplicationSet::new(source.name(), vec![example_based_f1(&pred, &y)?; n])))
            .collect::<Result<Vec<_>, HarnessError>>()?;
        sets.push(ReplicationSet::new(Source::TfidfLinSvm.name(), tfidf));
        sets.push(ReplicationSet::new(Source::Stacked.name(), stacked));

        self.write_json(REPLICATION_SCORES, "replications/scores.json", "replicate", &sets)?;
        self.manifest.notes.insert(
            "replication".into(),
            format!(
                "{n} replications with seeds {}..{}; varied: cross-validation folds and learner shuffling seed \
                 (stacked, tfidf-linsvm); fixed: samples, channel outputs, probabilities, features",
                self.config.seed,
                self.config.seed.wrapping_add(n as u64 - 1)
            ),
        );
        self.finish("replicate", started)?;
        Ok(sets)
    }

    /// Descriptives, t-tests against the stacked model and ANOVA over the replication scores.
    ///
    /// The report is always written; an error is returned afterwards when any
    /// inferential test could not be computed (e.g. a single replication).
    pub fn stats(&mut self) -> Result<StatsReport, HarnessError> {
        let started = Instant::now();
        let sets: Vec<ReplicationSet> = self.read_json(REPLICATION_SCORES)?;
        let report = StatsReport::build(&sets, STACKED_REFERENCE, self.config.t_test)?;
        self.write_json("stats", "reports/stats.json", "stats", &report)?;
        self.write_text("stats_md", "reports/stats.md", "stats", &report.to_markdown())?;
        self.finish("stats", started)?;
        if report.has_inferential_errors() {
            let mut reasons: Vec<String> = report
                .pairwise
                .iter()
                .filter_map(|p| p.outcome.as_ref().err().map(|e| format!("{}: {e}", p.approach)))
                .collect();
            if let Err(e) = &report.anova {
                reasons.push(format!("ANOVA: {e}"));
            }
            return Err(HarnessError::Inferential(reasons.join("; ")));
        }
        Ok(report)
    }
}
