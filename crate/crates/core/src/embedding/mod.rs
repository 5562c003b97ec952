//! Frozen text and image encoders behind one interface.
//!
//! Two backends exist: [`onnx`] runs exported CLIP towers, [`file`] looks
//! vectors up in a precomputed [`table`]. Both return raw encoder outputs;
//! normalization and averaging happen in the classifier.

pub mod file;
#[cfg(feature = "onnx")]
pub mod onnx;
pub mod table;
pub mod tokenize;

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use table::EmbeddingTable;

/// Side length of the square frames the image encoder accepts.
pub const FRAME_SIZE: usize = 224;
pub const FRAME_CHANNELS: usize = 3;

#[derive(Debug, thiserror::Error)]
pub enum EmbeddingError {
    #[error("model file {0} does not exist")]
    MissingFile(PathBuf),
    #[error("encoder spec for {0} backend is missing the {1} path")]
    MissingPath(BackendKind, &'static str),
    #[error("embedding table {path}: {reason}")]
    Table { path: String, reason: String },
    #[error("embedding dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },
    #[error("no embedding stored for key {0:?}")]
    MissingKey(String),
    #[error("frame {index} has shape {width}x{height}x{channels}, expected 224x224x3")]
    Shape {
        index: usize,
        width: usize,
        height: usize,
        channels: usize,
    },
    #[error("cannot tokenize {text:?}: {reason}")]
    Tokenization { text: String, reason: String },
    #[error("encoder inference failed: {0}")]
    Backend(String),
    #[error("the {0} backend is not compiled into this build")]
    BackendUnavailable(BackendKind),
    #[error("encoder produced a non-finite value")]
    NonFinite,
    #[error("nothing to encode")]
    EmptyInput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Onnx,
    File,
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendKind::Onnx => "onnx",
            BackendKind::File => "file",
        })
    }
}

impl std::str::FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "onnx" => Ok(BackendKind::Onnx),
            "file" => Ok(BackendKind::File),
            other => Err(format!("unknown backend {other:?} (expected onnx or file)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelTag {
    #[serde(rename = "ViT-B/32")]
    VitB32,
    #[serde(rename = "ViT-B/16")]
    VitB16,
    #[serde(rename = "custom")]
    Custom,
}

impl fmt::Display for ModelTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelTag::VitB32 => "ViT-B/32",
            ModelTag::VitB16 => "ViT-B/16",
            ModelTag::Custom => "custom",
        })
    }
}

impl std::str::FromStr for ModelTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '/', '_'], "").as_str() {
            "vitb32" => Ok(ModelTag::VitB32),
            "vitb16" => Ok(ModelTag::VitB16),
            "custom" => Ok(ModelTag::Custom),
            _ => Err(format!("unknown backbone {s:?} (expected ViT-B/32, ViT-B/16 or custom)")),
        }
    }
}

/// Which encoder to load and from where.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderSpec {
    pub backend: BackendKind,
    pub model_tag: ModelTag,
    pub embed_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text_model: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_model: Option<PathBuf>,
    /// BPE merges file; the bundled CLIP vocabulary is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vocab: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding_table: Option<PathBuf>,
}

impl EncoderSpec {
    /// Resolves relative paths against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        for p in [&mut self.text_model, &mut self.image_model, &mut self.vocab, &mut self.embedding_table]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    /// Checks that every file the backend needs is present.
    pub fn check_files(&self) -> Result<(), EmbeddingError> {
        let required: Vec<(&Option<PathBuf>, &'static str)> = match self.backend {
            BackendKind::File => vec![(&self.embedding_table, "embedding_table")],
            BackendKind::Onnx => vec![(&self.text_model, "text_model"), (&self.image_model, "image_model")],
        };
        for (path, name) in required {
            let path = path.as_ref().ok_or(EmbeddingError::MissingPath(self.backend, name))?;
            if !path.exists() {
                return Err(EmbeddingError::MissingFile(path.clone()));
            }
        }
        if let Some(vocab) = &self.vocab {
            if !vocab.exists() {
                return Err(EmbeddingError::MissingFile(vocab.clone()));
            }
        }
        Ok(())
    }
}

/// A preprocessed image in channel-major (CHW) layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Frame {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Option<Self> {
        (data.len() == width * height * channels).then_some(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn has_encoder_shape(&self) -> bool {
        self.width == FRAME_SIZE && self.height == FRAME_SIZE && self.channels == FRAME_CHANNELS
    }

    /// `sha256:<hex>` over the little-endian tensor bytes; the lookup key
    /// for frames in an embedding table.
    pub fn content_key(&self) -> String {
        let mut hasher = Sha256::new();
        for v in &self.data {
            hasher.update(v.to_le_bytes());
        }
        let digest = hasher.finalize();
        let mut key = String::with_capacity(7 + 64);
        key.push_str("sha256:");
        for b in digest.iter() {
            key.push_str(&format!("{b:02x}"));
        }
        key
    }
}

pub(crate) fn check_frame_shapes(frames: &[Frame]) -> Result<(), EmbeddingError> {
    match frames.iter().position(|f| !f.has_encoder_shape()) {
        Some(index) => {
            let f = &frames[index];
            Err(EmbeddingError::Shape {
                index,
                width: f.width,
                height: f.height,
                channels: f.channels,
            })
        }
        None => Ok(()),
    }
}

/// Dense row-major `rows x dim` matrix of raw encoder outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    data: Vec<f32>,
}

impl EmbeddingMatrix {
    pub fn new(dim: usize, data: Vec<f32>) -> Option<Self> {
        (dim > 0 && data.len() % dim == 0).then_some(Self { dim, data })
    }

    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Option<Self> {
        let dim = rows.first()?.as_ref().len();
        if dim == 0 || rows.iter().any(|r| r.as_ref().len() != dim) {
            return None;
        }
        let data = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Some(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }
}

/// Frozen text encoder and image encoder pair.
pub trait Encoder: Send + Sync {
    fn embed_dim(&self) -> usize;

    /// Row `i` is the embedding of `texts[i]`.
    fn encode_texts(&self, texts: &[String]) -> Result<EmbeddingMatrix, EmbeddingError>;

    /// Row `i` is the embedding of `frames[i]`; every frame must be
    /// 224x224x3.
    fn encode_frames(&self, frames: &[Frame]) -> Result<EmbeddingMatrix, EmbeddingError>;
}

/// Loads the encoder described by `spec` and runs its load-time self-check.
pub fn load_encoder(spec: &EncoderSpec) -> Result<Box<dyn Encoder>, EmbeddingError> {
    spec.check_files()?;
    let encoder: Box<dyn Encoder> = match spec.backend {
        BackendKind::File => Box::new(file::FileEncoder::open(
            spec.embedding_table.as_deref().expect("checked by check_files"),
            spec.embed_dim,
        )?),
        #[cfg(feature = "onnx")]
        BackendKind::Onnx => Box::new(onnx::OnnxEncoder::load(spec)?),
        #[cfg(not(feature = "onnx"))]
        BackendKind::Onnx => return Err(EmbeddingError::BackendUnavailable(BackendKind::Onnx)),
    };
    if encoder.embed_dim() != spec.embed_dim {
        return Err(EmbeddingError::DimMismatch {
            expected: spec.embed_dim,
            actual: encoder.embed_dim(),
        });
    }
    Ok(encoder)
}

#[cfg(feature = "onnx")]
pub(crate) fn ensure_finite(m: &EmbeddingMatrix) -> Result<(), EmbeddingError> {
    if m.as_slice().iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(EmbeddingError::NonFinite)
    }
}
