//! Encoder backed by a precomputed embedding table.
//!
//! Texts are looked up by their exact string, frames by
//! [`Frame::content_key`]. Used for offline, fully deterministic runs and
//! for replaying vectors dumped from the ONNX backend.

use std::path::Path;

use super::{check_frame_shapes, EmbeddingError, EmbeddingMatrix, EmbeddingTable, Encoder, Frame};

pub struct FileEncoder {
    table: EmbeddingTable,
}

impl FileEncoder {
    pub fn new(table: EmbeddingTable) -> Self {
        Self { table }
    }

    pub fn open(path: &Path, expected_dim: usize) -> Result<Self, EmbeddingError> {
        let table = EmbeddingTable::read(path)?;
        if table.dim() != expected_dim {
            return Err(EmbeddingError::DimMismatch {
                expected: expected_dim,
                actual: table.dim(),
            });
        }
        Ok(Self { table })
    }

    pub fn table(&self) -> &EmbeddingTable {
        &self.table
    }

    fn lookup<'a>(&self, keys: impl Iterator<Item = std::borrow::Cow<'a, str>>) -> Result<EmbeddingMatrix, EmbeddingError> {
        let mut data = Vec::new();
        for key in keys {
            let v = self
                .table
                .get(&key)
                .ok_or_else(|| EmbeddingError::MissingKey(key.into_owned()))?;
            data.extend_from_slice(v);
        }
        if data.is_empty() {
            return Err(EmbeddingError::EmptyInput);
        }
        Ok(EmbeddingMatrix::new(self.table.dim(), data).expect("rows have table dim"))
    }
}

impl Encoder for FileEncoder {
    fn embed_dim(&self) -> usize {
        self.table.dim()
    }

    fn encode_texts(&self, texts: &[String]) -> Result<EmbeddingMatrix, EmbeddingError> {
        self.lookup(texts.iter().map(|t| std::borrow::Cow::Borrowed(t.as_str())))
    }

    fn encode_frames(&self, frames: &[Frame]) -> Result<EmbeddingMatrix, EmbeddingError> {
        check_frame_shapes(frames)?;
        self.lookup(frames.iter().map(|f| std::borrow::Cow::Owned(f.content_key())))
    }
}
