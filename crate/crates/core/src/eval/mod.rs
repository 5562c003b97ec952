//! Evaluation driver: class embeddings, per-split Top-1/Top-5 and the
//! ablation grids.

pub mod ablate;
pub mod config;
pub mod manifest;
pub mod report;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use chrono::Utc;

use crate::classifier::{self, ClassEmbedding, ClassifierError, EmbeddingVector, Prediction};
use crate::descriptor::{generate_all, CacheError, ChatTransport, DescriptorCache, DescriptorSet};
use crate::embedding::{load_encoder, EmbeddingError, Encoder};
use crate::label::{LabelError, LabelSpace};
use crate::par::{self, Execution};
use crate::prompt::{assemble, assemble_label_only, PromptBatch};
use crate::video::{load_sample_with, VideoError};

pub use config::{ConfigError, RunConfig};
pub use manifest::{DatasetManifest, ManifestError, Sample, Split};
pub use report::{Accuracy, EvalReport, ExcludedSample, SampleResult, SplitReport};

/// Largest `k` reported; capped by the number of classes.
pub const TOP_K: usize = 5;

/// Largest tolerated fraction of samples per split that fail to decode or
/// encode before the evaluation aborts.
pub const MAX_FAILURE_RATE: f64 = 0.01;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Labels(#[from] LabelError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Video(#[from] VideoError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error(
        "descriptor cache has no {model_id} entries for {} class(es): {}; run gen-descriptors first or make the LLM reachable",
        classes.len(),
        classes.join(", ")
    )]
    MissingDescriptors { model_id: String, classes: Vec<String> },
    #[error("descriptor generation failed for {} class(es): {}", failures.len(), failures.join("; "))]
    DescriptorGeneration { failures: Vec<String> },
    #[error("split {split}: {failed} of {total} samples failed (limit is 1%); first failure: {first}")]
    TooManyFailures {
        split: String,
        failed: usize,
        total: usize,
        first: String,
    },
    #[error("{0}")]
    Ablation(String),
}

impl EvalError {
    /// Short machine-readable error class.
    pub fn class(&self) -> &'static str {
        match self {
            EvalError::Config(ConfigError::MissingFile(_)) => "missing_file",
            EvalError::Config(ConfigError::Encoder(EmbeddingError::MissingFile(_)))
            | EvalError::Embedding(EmbeddingError::MissingFile(_)) => "missing_model",
            EvalError::Config(_) => "config",
            EvalError::Manifest(_) => "manifest",
            EvalError::Labels(_) => "labels",
            EvalError::Embedding(_) => "embedding",
            EvalError::Video(_) => "decode",
            EvalError::Classifier(_) => "classifier",
            EvalError::Cache(_) => "cache",
            EvalError::MissingDescriptors { .. } => "missing_descriptors",
            EvalError::DescriptorGeneration { .. } => "descriptor_generation",
            EvalError::TooManyFailures { .. } => "too_many_failures",
            EvalError::Ablation(_) => "ablation",
        }
    }

    /// Whether the error comes from the environment (missing files or
    /// models) rather than from the run itself.
    pub fn is_environment(&self) -> bool {
        matches!(
            self,
            EvalError::Config(ConfigError::MissingFile(_))
                | EvalError::Config(ConfigError::Encoder(EmbeddingError::MissingFile(_)))
                | EvalError::Embedding(EmbeddingError::MissingFile(_))
                | EvalError::Embedding(EmbeddingError::BackendUnavailable(_))
        )
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct VideoKey {
    encoder: String,
    frames: usize,
    sampling: crate::video::SamplingAnchor,
    normalize: bool,
    path: PathBuf,
}

/// Runs evaluations, sharing loaded encoders and video embeddings across
/// calls.
///
/// With a transport, missing descriptors are generated (and cached);
/// without one, a cold cache is an error naming the missing classes.
pub struct Runner<'a> {
    transport: Option<&'a dyn ChatTransport>,
    encoders: Mutex<HashMap<String, Arc<dyn Encoder>>>,
    videos: Mutex<HashMap<VideoKey, Result<EmbeddingVector, String>>>,
}

impl Default for Runner<'_> {
    fn default() -> Self {
        Self::offline()
    }
}

impl<'a> Runner<'a> {
    pub fn offline() -> Self {
        Self {
            transport: None,
            encoders: Mutex::new(HashMap::new()),
            videos: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_transport(transport: &'a dyn ChatTransport) -> Self {
        Self {
            transport: Some(transport),
            ..Self::offline()
        }
    }

    fn encoder_key(cfg: &RunConfig) -> Result<String, EvalError> {
        Ok(serde_json::to_string(cfg.encoder_spec()?).expect("spec serializes"))
    }

    pub fn encoder(&self, cfg: &RunConfig) -> Result<Arc<dyn Encoder>, EvalError> {
        let key = Self::encoder_key(cfg)?;
        let mut encoders = self.encoders.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(e) = encoders.get(&key) {
            return Ok(Arc::clone(e));
        }
        let encoder: Arc<dyn Encoder> = Arc::from(load_encoder(cfg.encoder_spec()?)?);
        encoders.insert(key, Arc::clone(&encoder));
        Ok(encoder)
    }

    /// Descriptor sets for every class, in label order.
    pub fn descriptor_sets(&self, cfg: &RunConfig, labels: &LabelSpace) -> Result<Vec<DescriptorSet>, EvalError> {
        let path = cfg.cache.as_ref().ok_or(ConfigError::NoCache)?;
        let mut cache = DescriptorCache::open(path)?;
        let model_id = &cfg.llm.model_id;
        let Some(transport) = self.transport else {
            let mut sets = Vec::with_capacity(labels.len());
            let mut missing = Vec::new();
            for action in labels.classes() {
                match cache.get(action, model_id) {
                    Some(ds) => sets.push(ds),
                    None => missing.push(action.raw_id().to_string()),
                }
            }
            if !missing.is_empty() {
                return Err(EvalError::MissingDescriptors {
                    model_id: model_id.clone(),
                    classes: missing,
                });
            }
            return Ok(sets);
        };
        let outcome = generate_all(labels, &cfg.llm, transport, &mut cache, Execution::from_workers(cfg.workers))?;
        if !outcome.is_complete() {
            return Err(EvalError::DescriptorGeneration {
                failures: outcome
                    .failures
                    .iter()
                    .map(|f| format!("{}: {}", f.action.raw_id(), f.error))
                    .collect(),
            });
        }
        Ok(outcome.sets.into_iter().map(|(_, ds)| ds).collect())
    }

    /// The text batch of every class under the configured descriptor kinds.
    pub fn prompt_batches(&self, cfg: &RunConfig, labels: &LabelSpace) -> Result<Vec<PromptBatch>, EvalError> {
        let dcfg = cfg.descriptor_config()?;
        if !dcfg.needs_descriptors() {
            return Ok(labels.classes().iter().map(|a| assemble_label_only(a, &dcfg)).collect());
        }
        let sets = self.descriptor_sets(cfg, labels)?;
        Ok(sets.iter().map(|ds| assemble(ds, &dcfg)).collect())
    }

    /// Mean text embedding of every class, computed once per call.
    pub fn class_embeddings(&self, cfg: &RunConfig, labels: &LabelSpace) -> Result<Vec<ClassEmbedding>, EvalError> {
        let batches = self.prompt_batches(cfg, labels)?;
        let encoder = self.encoder(cfg)?;
        let exec = Execution::from_workers(cfg.workers);
        par::map_ordered(exec, &batches, |index, batch| -> Result<ClassEmbedding, EvalError> {
            let rows = encoder.encode_texts(&batch.texts)?;
            let z = classifier::mean_embedding(&rows, cfg.normalize_before_average)?;
            Ok(ClassEmbedding {
                index,
                action: batch.action.clone(),
                z,
                texts: batch.texts.len(),
            })
        })
        .into_iter()
        .collect()
    }

    fn compute_video_embedding(cfg: &RunConfig, encoder: &dyn Encoder, path: &Path) -> Result<EmbeddingVector, EvalError> {
        let sample = load_sample_with(path, cfg.frames, cfg.sampling)?;
        let rows = encoder.encode_frames(&sample.frames)?;
        Ok(classifier::mean_embedding(&rows, cfg.normalize_before_average)?)
    }

    /// Mean frame embedding of one video; memoized per encoder and sampling
    /// settings, failures included.
    pub fn video_embedding(&self, cfg: &RunConfig, path: &Path) -> Result<Result<EmbeddingVector, String>, EvalError> {
        let key = VideoKey {
            encoder: Self::encoder_key(cfg)?,
            frames: cfg.frames,
            sampling: cfg.sampling,
            normalize: cfg.normalize_before_average,
            path: path.to_path_buf(),
        };
        if let Some(hit) = self.videos.lock().unwrap_or_else(|p| p.into_inner()).get(&key) {
            return Ok(hit.clone());
        }
        let encoder = self.encoder(cfg)?;
        let result = Self::compute_video_embedding(cfg, encoder.as_ref(), path).map_err(|e| e.to_string());
        self.videos
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .insert(key, result.clone());
        Ok(result)
    }

    pub fn classify(&self, cfg: &RunConfig, classes: &[ClassEmbedding], video: &Path) -> Result<Prediction, EvalError> {
        let encoder = self.encoder(cfg)?;
        let vbar = Self::compute_video_embedding(cfg, encoder.as_ref(), video)?;
        Ok(classifier::predict(&vbar, classes)?)
    }

    /// Loads the dataset named in `cfg.dataset` and evaluates it.
    pub fn evaluate(&self, cfg: &RunConfig) -> Result<EvalReport, EvalError> {
        let classes = cfg.dataset.classes.as_deref().ok_or(ConfigError::NoClasses)?;
        let manifest =
            DatasetManifest::load(&cfg.dataset.name, classes, &cfg.dataset.splits, cfg.dataset.root.as_deref())?;
        self.evaluate_manifest(cfg, &manifest)
    }

    pub fn evaluate_manifest(&self, cfg: &RunConfig, manifest: &DatasetManifest) -> Result<EvalReport, EvalError> {
        let started_at = Utc::now();
        let clock = Instant::now();
        cfg.validate()?;
        let snapshot = cfg.snapshot()?;
        let classes = self.class_embeddings(cfg, &manifest.classes)?;
        let top_k = TOP_K.min(classes.len());
        let exec = Execution::from_workers(cfg.workers);

        let mut per_split = Vec::with_capacity(manifest.splits.len());
        for split in &manifest.splits {
            let outcomes = par::map_ordered(exec, &split.samples, |_, sample| -> Result<_, EvalError> {
                let vbar = match self.video_embedding(cfg, &sample.path)? {
                    Ok(v) => v,
                    Err(error) => return Ok(Err(error)),
                };
                let prediction = match classifier::predict(&vbar, &classes) {
                    Ok(p) => p,
                    Err(e) => return Ok(Err(e.to_string())),
                };
                let top: Vec<usize> = prediction.top(top_k).iter().map(|r| r.index).collect();
                Ok(Ok(SampleResult {
                    path: sample.path.clone(),
                    truth: sample.class_index,
                    predicted: prediction.predicted().index,
                    score: prediction.predicted().score,
                    top,
                }))
            });
            per_split.push(score_split(split, outcomes.into_iter().collect::<Result<Vec<_>, _>>()?)?);
        }

        let accuracies: Vec<Accuracy> = per_split.iter().map(|s| Accuracy { top1: s.top1, top5: s.top5 }).collect();
        Ok(EvalReport {
            dataset: manifest.name.clone(),
            classes: manifest.classes.len(),
            top_k,
            aggregate: report::aggregate(&accuracies),
            per_split,
            started_at,
            wall_time_secs: clock.elapsed().as_secs_f64(),
            config: snapshot,
        })
    }
}

fn score_split(split: &Split, outcomes: Vec<Result<SampleResult, String>>) -> Result<SplitReport, EvalError> {
    let total = outcomes.len();
    let mut samples = Vec::with_capacity(total);
    let mut excluded = Vec::new();
    for (sample, outcome) in split.samples.iter().zip(outcomes) {
        match outcome {
            Ok(r) => samples.push(r),
            Err(error) => excluded.push(ExcludedSample {
                path: sample.path.clone(),
                error,
            }),
        }
    }
    if excluded.len() as f64 > MAX_FAILURE_RATE * total as f64 {
        return Err(EvalError::TooManyFailures {
            split: split.name.clone(),
            failed: excluded.len(),
            total,
            first: excluded[0].error.clone(),
        });
    }
    if !excluded.is_empty() {
        log::warn!(
            "split {}: {} of {} samples excluded (first: {})",
            split.name,
            excluded.len(),
            total,
            excluded[0].error
        );
    }
    let scored = samples.len();
    let top1_hits = samples.iter().filter(|s| s.predicted == s.truth).count();
    let top5_hits = samples.iter().filter(|s| s.top.contains(&s.truth)).count();
    Ok(SplitReport {
        name: split.name.clone(),
        top1: top1_hits as f64 / scored as f64,
        top5: top5_hits as f64 / scored as f64,
        scored,
        excluded,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn split(n: usize) -> Split {
        Split {
            name: "s".into(),
            samples: (0..n).map(|i| Sample { path: format!("v{i}").into(), class_index: 0 }).collect(),
        }
    }

    fn ok(truth: usize, top: &[usize]) -> Result<SampleResult, String> {
        Ok(SampleResult {
            path: "v".into(),
            truth,
            predicted: top[0],
            top: top.to_vec(),
            score: 0.5,
        })
    }

    #[test]
    fn accuracy_counts_scored_samples_only() {
        let mut outcomes: Vec<_> = (0..199).map(|i| ok(0, if i % 2 == 0 { &[0, 1] } else { &[1, 0] })).collect();
        outcomes.push(Err("corrupt".into()));
        let r = score_split(&split(200), outcomes).unwrap();
        assert_eq!(r.scored, 199);
        assert_eq!(r.excluded.len(), 1);
        assert_eq!(r.top1, 100.0 / 199.0);
        assert_eq!(r.top5, 1.0);
    }

    #[test]
    fn more_than_one_percent_failures_abort() {
        let mut outcomes: Vec<_> = (0..98).map(|_| ok(0, &[0])).collect();
        outcomes.extend([Err("a".into()), Err("b".into())]);
        assert!(matches!(
            score_split(&split(100), outcomes),
            Err(EvalError::TooManyFailures { failed: 2, total: 100, .. })
        ));
    }
}
