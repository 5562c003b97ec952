//! Run configuration, read from TOML (or JSON, e.g. the snapshot stored in
//! a report).
//!
//! ```toml
//! backbone = "ViT-B/16"
//! backend = "onnx"
//! frames = 16
//! cache = "descriptors.json"
//!
//! [descriptors]
//! kinds = ["combination"]
//! prepend_class = true
//! use_templates = true
//! templates_file = "templates.txt"   # or `templates = [...]`
//!
//! [llm]
//! model_id = "gpt-3.5-turbo"
//!
//! [dataset]
//! name = "hmdb51"
//! classes = "classes.txt"
//! splits = ["testlist01.txt"]
//!
//! [[encoders]]
//! backend = "onnx"
//! model_tag = "ViT-B/16"
//! embed_dim = 512
//! text_model = "vitb16/text.onnx"
//! image_model = "vitb16/image.onnx"
//! ```
//!
//! The active encoder is the `[[encoders]]` entry matching `backbone` and
//! `backend`. Relative paths are resolved against the config file's
//! directory when it is loaded.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::descriptor::llm::{LlmConfig, LlmConfigError};
use crate::embedding::{BackendKind, EmbeddingError, EncoderSpec, ModelTag};
use crate::prompt::{load_templates, DescriptorConfig, DescriptorKind, PromptError};
use crate::video::SamplingAnchor;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("invalid config {}: {message}", path.display())]
    Syntax { path: PathBuf, message: String },
    #[error("frames must be at least 1")]
    NoFrames,
    #[error("no [[encoders]] entry for backbone {backbone} with the {backend} backend")]
    NoEncoder { backbone: ModelTag, backend: BackendKind },
    #[error("several [[encoders]] entries match backbone {backbone} with the {backend} backend")]
    AmbiguousEncoder { backbone: ModelTag, backend: BackendKind },
    #[error("no classes file configured (set dataset.classes or pass --classes)")]
    NoClasses,
    #[error("no descriptor cache configured (set cache or pass --cache)")]
    NoCache,
    #[error("{} does not exist", .0.display())]
    MissingFile(PathBuf),
    #[error("descriptors.templates and descriptors.templates_file are mutually exclusive")]
    TemplateConflict,
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Llm(#[from] LlmConfigError),
    #[error(transparent)]
    Encoder(#[from] EmbeddingError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DescriptorSection {
    #[serde(default = "default_kinds")]
    pub kinds: Vec<DescriptorKind>,
    #[serde(default = "yes")]
    pub prepend_class: bool,
    #[serde(default = "yes")]
    pub use_templates: bool,
    /// Inline templates; when both this and `templates_file` are absent the
    /// built-in list is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub templates: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub templates_file: Option<PathBuf>,
}

fn default_kinds() -> Vec<DescriptorKind> {
    vec![DescriptorKind::Combination]
}

fn yes() -> bool {
    true
}

impl Default for DescriptorSection {
    fn default() -> Self {
        Self {
            kinds: default_kinds(),
            prepend_class: true,
            use_templates: true,
            templates: None,
            templates_file: None,
        }
    }
}

impl DescriptorSection {
    /// Reads `templates_file` into `templates`, so the section no longer
    /// depends on any file.
    pub fn inline_templates(&mut self) -> Result<(), ConfigError> {
        match (self.templates.is_some(), self.templates_file.take()) {
            (true, Some(_)) => return Err(ConfigError::TemplateConflict),
            (false, Some(path)) => self.templates = Some(load_templates(&path)?),
            (false, None) => self.templates = Some(crate::prompt::default_templates()),
            (true, None) => {}
        }
        Ok(())
    }

    pub fn to_descriptor_config(&self) -> Result<DescriptorConfig, ConfigError> {
        let templates = match (&self.templates, &self.templates_file) {
            (Some(_), Some(_)) => return Err(ConfigError::TemplateConflict),
            (Some(t), None) => t.clone(),
            (None, Some(path)) => load_templates(path)?,
            (None, None) => crate::prompt::default_templates(),
        };
        let cfg = DescriptorConfig {
            kinds: self.kinds.clone(),
            prepend_class: self.prepend_class,
            use_templates: self.use_templates,
            templates,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub splits: Vec<PathBuf>,
    /// Base directory for relative video paths in split files.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub backbone: ModelTag,
    pub backend: BackendKind,
    /// Frames sampled per video.
    #[serde(default = "default_frames")]
    pub frames: usize,
    #[serde(default)]
    pub sampling: SamplingAnchor,
    /// Average unit-normalized embeddings instead of raw encoder outputs.
    #[serde(default)]
    pub normalize_before_average: bool,
    /// Recorded for provenance; the pipeline itself draws no random numbers.
    #[serde(default)]
    pub seed: u64,
    /// Parallel workers; 0 uses every core, 1 runs sequentially.
    #[serde(default)]
    pub workers: usize,
    /// Descriptor cache file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache: Option<PathBuf>,
    #[serde(default)]
    pub descriptors: DescriptorSection,
    #[serde(default)]
    pub llm: LlmConfig,
    #[serde(default)]
    pub dataset: DatasetSection,
    pub encoders: Vec<EncoderSpec>,
}

fn default_frames() -> usize {
    16
}

impl RunConfig {
    /// Parses TOML, or JSON when the file ends in `.json`. A JSON report is
    /// accepted too, in which case its embedded config is used.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let syntax = |message: String| ConfigError::Syntax {
            path: path.to_path_buf(),
            message,
        };
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let mut cfg: RunConfig = if is_json {
            let mut value: serde_json::Value = serde_json::from_str(&text).map_err(|e| syntax(e.to_string()))?;
            if let Some(inner) = value.get_mut("config").filter(|_| value_is_report(&text)) {
                value = inner.take();
            }
            serde_json::from_value(value).map_err(|e| syntax(e.to_string()))?
        } else {
            toml::from_str(&text).map_err(|e| syntax(e.to_string()))?
        };
        let base = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let base = std::path::absolute(base).unwrap_or_else(|_| base.to_path_buf());
        cfg.resolve_paths(&base);
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Syntax {
            path: PathBuf::from("<inline>"),
            message: e.to_string(),
        })
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.cache.as_mut().map(fix);
        self.descriptors.templates_file.as_mut().map(fix);
        self.dataset.classes.as_mut().map(fix);
        self.dataset.root.as_mut().map(fix);
        self.dataset.splits.iter_mut().for_each(fix);
        for e in &mut self.encoders {
            e.resolve_paths(base);
        }
    }

    pub fn encoder_spec(&self) -> Result<&EncoderSpec, ConfigError> {
        let mut matches = self
            .encoders
            .iter()
            .filter(|e| e.model_tag == self.backbone && e.backend == self.backend);
        let first = matches.next().ok_or(ConfigError::NoEncoder {
            backbone: self.backbone.clone(),
            backend: self.backend,
        })?;
        if matches.next().is_some() {
            return Err(ConfigError::AmbiguousEncoder {
                backbone: self.backbone.clone(),
                backend: self.backend,
            });
        }
        Ok(first)
    }

    pub fn descriptor_config(&self) -> Result<DescriptorConfig, ConfigError> {
        self.descriptors.to_descriptor_config()
    }

    /// Checks internal consistency without touching the filesystem.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.frames == 0 {
            return Err(ConfigError::NoFrames);
        }
        self.llm.validate()?;
        self.encoder_spec()?;
        if self.descriptors.templates.is_some() && self.descriptors.templates_file.is_some() {
            return Err(ConfigError::TemplateConflict);
        }
        if self.descriptors.templates.is_some() {
            self.descriptor_config()?;
        }
        Ok(())
    }

    /// Checks that the encoder files, template file, classes file and split
    /// files exist.
    pub fn check_files(&self) -> Result<(), ConfigError> {
        self.validate()?;
        self.encoder_spec()?.check_files()?;
        self.descriptor_config()?;
        for p in self.dataset.classes.iter().chain(&self.dataset.splits) {
            if !p.exists() {
                return Err(ConfigError::MissingFile(p.clone()));
            }
        }
        Ok(())
    }

    /// A self-contained copy: templates inlined, paths as resolved.
    pub fn snapshot(&self) -> Result<Self, ConfigError> {
        let mut snap = self.clone();
        snap.descriptors.inline_templates()?;
        Ok(snap)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is representable as TOML")
    }
}

fn value_is_report(text: &str) -> bool {
    serde_json::from_str::<serde_json::Value>(text)
        .ok()
        .is_some_and(|v| v.get("per_split").is_some())
}
