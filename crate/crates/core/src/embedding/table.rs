//! Binary embedding table.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! header:  magic "ZSEM" | version u32 (=1) | dim u32 | count u64
//! record:  key_hash u64 | key_len u32 | key bytes (UTF-8) | dim x f32
//! ```
//!
//! `key_hash` is the first 8 bytes of SHA-256(key), read as a little-endian
//! u64. Readers verify it.

use std::collections::HashMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::EmbeddingError;

pub const MAGIC: [u8; 4] = *b"ZSEM";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 20;

pub fn key_hash(key: &str) -> u64 {
    let digest = Sha256::digest(key.as_bytes());
    let mut first = [0u8; 8];
    first.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(first)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    keys: Vec<String>,
    values: Vec<f32>,
    index: HashMap<String, usize>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self {
            dim,
            keys: Vec::new(),
            values: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.keys.iter().map(String::as_str)
    }

    pub fn get(&self, key: &str) -> Option<&[f32]> {
        self.index
            .get(key)
            .map(|&i| &self.values[i * self.dim..(i + 1) * self.dim])
    }

    /// Inserts or replaces the vector stored under `key`.
    pub fn insert(&mut self, key: impl Into<String>, vector: &[f32]) -> Result<(), EmbeddingError> {
        if vector.len() != self.dim {
            return Err(EmbeddingError::DimMismatch {
                expected: self.dim,
                actual: vector.len(),
            });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite);
        }
        let key = key.into();
        match self.index.get(&key) {
            Some(&i) => self.values[i * self.dim..(i + 1) * self.dim].copy_from_slice(vector),
            None => {
                self.index.insert(key.clone(), self.keys.len());
                self.keys.push(key);
                self.values.extend_from_slice(vector);
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.len() * (16 + 4 * self.dim));
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        for (i, key) in self.keys.iter().enumerate() {
            out.extend_from_slice(&key_hash(key).to_le_bytes());
            out.extend_from_slice(&(key.len() as u32).to_le_bytes());
            out.extend_from_slice(key.as_bytes());
            for v in &self.values[i * self.dim..(i + 1) * self.dim] {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, String> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err("bad magic".into());
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(format!("unsupported version {version}"));
        }
        let dim = r.u32()? as usize;
        if dim == 0 {
            return Err("dimension is zero".into());
        }
        let count = r.u64()?;
        let mut table = EmbeddingTable::new(dim);
        let mut vector = vec![0f32; dim];
        for n in 0..count {
            let hash = r.u64()?;
            let key_len = r.u32()? as usize;
            let key = std::str::from_utf8(r.take(key_len)?)
                .map_err(|_| format!("record {n}: key is not UTF-8"))?
                .to_string();
            if key_hash(&key) != hash {
                return Err(format!("record {n}: key hash mismatch for {key:?}"));
            }
            for v in vector.iter_mut() {
                *v = f32::from_le_bytes(r.take(4)?.try_into().unwrap());
            }
            if table.index.contains_key(&key) {
                return Err(format!("record {n}: duplicate key {key:?}"));
            }
            table
                .insert(key, &vector)
                .map_err(|e| format!("record {n}: {e}"))?;
        }
        if r.pos != bytes.len() {
            return Err(format!("{} trailing bytes after {count} records", bytes.len() - r.pos));
        }
        Ok(table)
    }

    pub fn read(path: &Path) -> Result<Self, EmbeddingError> {
        let err = |reason: String| EmbeddingError::Table {
            path: path.display().to_string(),
            reason,
        };
        let bytes = std::fs::read(path).map_err(|e| err(e.to_string()))?;
        Self::from_bytes(&bytes).map_err(err)
    }

    pub fn write(&self, path: &Path) -> Result<(), EmbeddingError> {
        std::fs::write(path, self.to_bytes()).map_err(|e| EmbeddingError::Table {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
