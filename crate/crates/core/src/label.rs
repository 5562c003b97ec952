//! Action class labels.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum LabelError {
    #[error("label {0:?} normalizes to an empty string")]
    Empty(String),
    #[error("duplicate class {0:?} in label space")]
    Duplicate(String),
    #[error("label space is empty")]
    NoClasses,
    #[error("failed to read classes file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A dataset-native class id together with its normalized display form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActionClass {
    raw_id: String,
    display: String,
}

impl ActionClass {
    pub fn new(raw_id: impl Into<String>) -> Result<Self, LabelError> {
        let raw_id = raw_id.into();
        let display = normalize_label(&raw_id);
        if display.is_empty() {
            return Err(LabelError::Empty(raw_id));
        }
        Ok(Self { raw_id, display })
    }

    pub fn raw_id(&self) -> &str {
        &self.raw_id
    }

    /// Lowercase, space-separated natural phrase, e.g. `"apply eye makeup"`.
    pub fn display(&self) -> &str {
        &self.display
    }
}

impl fmt::Display for ActionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display)
    }
}

/// Turns ids like `ApplyEyeMakeup` or `brush_hair` into `apply eye makeup` /
/// `brush hair`.
///
/// Camel-case boundaries (lower or digit followed by upper, and the last
/// capital of an acronym run followed by a lowercase letter) and underscores
/// become single spaces; whitespace runs collapse; the result is lowercased
/// and trimmed. The function is idempotent.
pub fn normalize_label(raw_id: &str) -> String {
    let chars: Vec<char> = raw_id.chars().collect();
    let mut spaced = String::with_capacity(raw_id.len() + 8);
    for (i, &c) in chars.iter().enumerate() {
        if c == '_' {
            spaced.push(' ');
            continue;
        }
        if c.is_uppercase() && i > 0 {
            let prev = chars[i - 1];
            let next_is_lower = chars.get(i + 1).is_some_and(|n| n.is_lowercase());
            if prev.is_lowercase() || prev.is_ascii_digit() || (prev.is_uppercase() && next_is_lower) {
                spaced.push(' ');
            }
        }
        spaced.push(c);
    }
    spaced
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Ordered set of action classes; the position of a class is its index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSpace {
    classes: Vec<ActionClass>,
}

impl LabelSpace {
    pub fn new(classes: Vec<ActionClass>) -> Result<Self, LabelError> {
        if classes.is_empty() {
            return Err(LabelError::NoClasses);
        }
        let mut seen = std::collections::HashSet::new();
        for c in &classes {
            if !seen.insert(c.display()) {
                return Err(LabelError::Duplicate(c.raw_id().to_string()));
            }
        }
        Ok(Self { classes })
    }

    pub fn from_raw_ids<I, S>(ids: I) -> Result<Self, LabelError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let classes = ids
            .into_iter()
            .map(ActionClass::new)
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(classes)
    }

    /// Reads a classes file: one raw id per line in index order. Blank lines
    /// and `#` comments are skipped.
    pub fn load(path: &Path) -> Result<Self, LabelError> {
        let text = std::fs::read_to_string(path).map_err(|source| LabelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_raw_ids(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn classes(&self) -> &[ActionClass] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&ActionClass> {
        self.classes.get(index)
    }

    /// Looks a class up by raw id, falling back to its display form.
    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.classes
            .iter()
            .position(|c| c.raw_id() == id)
            .or_else(|| {
                let display = normalize_label(id);
                self.classes.iter().position(|c| c.display() == display)
            })
    }
}
