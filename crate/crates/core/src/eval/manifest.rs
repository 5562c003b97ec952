//! Dataset manifests: a classes file (one raw class id per line, in index
//! order) plus one split file per test split, each line
//! `<path>\t<class-id>`.
//!
//! The class id is matched against raw ids, then display names, then read
//! as a 0-based index. Relative paths resolve against the dataset root, or
//! the split file's directory when no root is given. Whether a path exists is
//! checked only when the sample is decoded.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::label::{LabelError, LabelSpace};

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("cannot read {}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("{}:{line}: {reason}", path.display())]
    Line { path: PathBuf, line: usize, reason: String },
    #[error("split file {} lists no samples", .0.display())]
    EmptySplit(PathBuf),
    #[error("no split files given")]
    NoSplits,
    #[error(transparent)]
    Labels(#[from] LabelError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    pub path: PathBuf,
    pub class_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Split {
    pub name: String,
    pub samples: Vec<Sample>,
}

#[derive(Debug, Clone)]
pub struct DatasetManifest {
    pub name: String,
    pub classes: LabelSpace,
    pub splits: Vec<Split>,
}

impl DatasetManifest {
    pub fn load(
        name: &str,
        classes_path: &Path,
        split_paths: &[PathBuf],
        root: Option<&Path>,
    ) -> Result<Self, ManifestError> {
        let classes = LabelSpace::load(classes_path)?;
        if split_paths.is_empty() {
            return Err(ManifestError::NoSplits);
        }
        let splits = split_paths
            .iter()
            .map(|p| load_split(p, &classes, root))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            name: name.to_string(),
            classes,
            splits,
        })
    }

    pub fn sample_count(&self) -> usize {
        self.splits.iter().map(|s| s.samples.len()).sum()
    }
}

/// Resolves a class id written in a split file.
pub fn resolve_class(classes: &LabelSpace, id: &str) -> Option<usize> {
    classes
        .index_of(id)
        .or_else(|| id.parse::<usize>().ok().filter(|&i| i < classes.len()))
}

pub fn load_split(path: &Path, classes: &LabelSpace, root: Option<&Path>) -> Result<Split, ManifestError> {
    let text = std::fs::read_to_string(path).map_err(|e| ManifestError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let base = match root {
        Some(r) => r.to_path_buf(),
        None => path.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    let mut samples = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let err = |reason: String| ManifestError::Line {
            path: path.to_path_buf(),
            line: n + 1,
            reason,
        };
        let (video, id) = line
            .rsplit_once('\t')
            .ok_or_else(|| err("expected `<path>\\t<class-id>`".into()))?;
        let (video, id) = (video.trim(), id.trim());
        if video.is_empty() || id.is_empty() {
            return Err(err("empty path or class id".into()));
        }
        let class_index = resolve_class(classes, id)
            .ok_or_else(|| err(format!("class id {id:?} is not in the classes file")))?;
        let video = Path::new(video);
        let path = if video.is_absolute() { video.to_path_buf() } else { base.join(video) };
        samples.push(Sample { path, class_index });
    }
    if samples.is_empty() {
        return Err(ManifestError::EmptySplit(path.to_path_buf()));
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    Ok(Split { name, samples })
}
