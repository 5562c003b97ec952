//! Builds the per-class list of texts that gets encoded and averaged.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::descriptor::DescriptorSet;
use crate::label::ActionClass;

const DEFAULT_TEMPLATES: &str = include_str!("../data/templates.txt");
const PLACEHOLDER: &str = "{}";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("descriptor config selects no kinds")]
    NoKinds,
    #[error("templates are enabled but the template list is empty")]
    NoTemplates,
    #[error("template {0:?} must contain exactly one \"{{}}\" placeholder")]
    Placeholder(String),
    #[error("unknown descriptor kind {0:?}")]
    UnknownKind(String),
    #[error("failed to read template file {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DescriptorKind {
    Class,
    Decomposition,
    Description,
    Context,
    /// Class, decomposition, description and context together.
    Combination,
}

impl DescriptorKind {
    pub const ALL: [DescriptorKind; 5] = [
        DescriptorKind::Class,
        DescriptorKind::Decomposition,
        DescriptorKind::Description,
        DescriptorKind::Context,
        DescriptorKind::Combination,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DescriptorKind::Class => "class",
            DescriptorKind::Decomposition => "decomposition",
            DescriptorKind::Description => "description",
            DescriptorKind::Context => "context",
            DescriptorKind::Combination => "combination",
        }
    }

    /// Whether this kind needs LLM-generated text.
    pub fn needs_descriptors(self) -> bool {
        self != DescriptorKind::Class
    }
}

impl fmt::Display for DescriptorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DescriptorKind {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        DescriptorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or(PromptError::UnknownKind(s))
    }
}

/// Parses a comma-separated kind list such as `"decomposition,context"`.
pub fn parse_kinds(s: &str) -> Result<Vec<DescriptorKind>, PromptError> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(str::parse).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptorConfig {
    pub kinds: Vec<DescriptorKind>,
    pub prepend_class: bool,
    pub use_templates: bool,
    pub templates: Vec<String>,
}

impl Default for DescriptorConfig {
    fn default() -> Self {
        Self {
            kinds: vec![DescriptorKind::Combination],
            prepend_class: true,
            use_templates: true,
            templates: default_templates(),
        }
    }
}

impl DescriptorConfig {
    pub fn validate(&self) -> Result<(), PromptError> {
        if self.kinds.is_empty() {
            return Err(PromptError::NoKinds);
        }
        if self.use_templates {
            if self.templates.is_empty() {
                return Err(PromptError::NoTemplates);
            }
            for t in &self.templates {
                if t.matches(PLACEHOLDER).count() != 1 {
                    return Err(PromptError::Placeholder(t.clone()));
                }
            }
        }
        Ok(())
    }

    pub fn needs_descriptors(&self) -> bool {
        self.kinds.iter().any(|k| k.needs_descriptors())
    }

    /// Number of texts `assemble` emits per base text.
    pub fn expansion(&self) -> usize {
        if self.use_templates {
            self.templates.len().max(1)
        } else {
            1
        }
    }
}

pub fn default_templates() -> Vec<String> {
    parse_templates(DEFAULT_TEMPLATES)
}

/// One template per line; blank lines and `#` comments are skipped.
pub fn parse_templates(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

pub fn load_templates(path: &Path) -> Result<Vec<String>, PromptError> {
    let text = std::fs::read_to_string(path).map_err(|e| PromptError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let templates = parse_templates(&text);
    for t in &templates {
        if t.matches(PLACEHOLDER).count() != 1 {
            return Err(PromptError::Placeholder(t.clone()));
        }
    }
    Ok(templates)
}

/// The texts of one class, ready for the text encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptBatch {
    pub action: ActionClass,
    pub texts: Vec<String>,
}

/// Collapses `kinds` to the set of primitive kinds, with combination
/// expanded.
fn primitive_kinds(kinds: &[DescriptorKind]) -> BTreeSet<DescriptorKind> {
    let mut set = BTreeSet::new();
    for &k in kinds {
        if k == DescriptorKind::Combination {
            set.extend([
                DescriptorKind::Class,
                DescriptorKind::Decomposition,
                DescriptorKind::Description,
                DescriptorKind::Context,
            ]);
        } else {
            set.insert(k);
        }
    }
    set
}

/// Unwrapped descriptor texts in fixed order: class, the three steps,
/// description, context, then each object.
pub fn base_texts(ds: &DescriptorSet, kinds: &[DescriptorKind]) -> Vec<String> {
    let mut out = Vec::new();
    for kind in primitive_kinds(kinds) {
        match kind {
            DescriptorKind::Class => out.push(ds.action.display().to_string()),
            DescriptorKind::Decomposition => out.extend(ds.decomposition.iter().cloned()),
            DescriptorKind::Description => out.push(ds.description.clone()),
            DescriptorKind::Context => {
                out.push(ds.context.clone());
                out.extend(ds.objects.iter().cloned());
            }
            DescriptorKind::Combination => unreachable!("expanded by primitive_kinds"),
        }
    }
    out
}

fn expand(action: &ActionClass, base: Vec<String>, cfg: &DescriptorConfig) -> PromptBatch {
    let display = action.display();
    let base = base.into_iter().map(|t| {
        if cfg.prepend_class && t != display {
            format!("{display}. {t}")
        } else {
            t
        }
    });
    let texts = if cfg.use_templates {
        base.flat_map(|t| {
            cfg.templates
                .iter()
                .map(move |tpl| tpl.replacen(PLACEHOLDER, &t, 1))
                .collect::<Vec<_>>()
        })
        .collect()
    } else {
        base.collect()
    };
    PromptBatch {
        action: action.clone(),
        texts,
    }
}

/// Applies class prepending and template wrapping to the base texts.
///
/// `M = |base_texts| * (use_templates ? |templates| : 1)`.
pub fn assemble(ds: &DescriptorSet, cfg: &DescriptorConfig) -> PromptBatch {
    expand(&ds.action, base_texts(ds, &cfg.kinds), cfg)
}

/// Assembly for configs that only use the class label, which need no
/// descriptor set.
pub fn assemble_label_only(action: &ActionClass, cfg: &DescriptorConfig) -> PromptBatch {
    debug_assert!(!cfg.needs_descriptors());
    expand(action, vec![action.display().to_string()], cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set() -> DescriptorSet {
        DescriptorSet {
            action: ActionClass::new("Skiing").unwrap(),
            decomposition: vec!["s1".into(), "s2".into(), "s3".into()],
            description: "desc".into(),
            context: "ctx".into(),
            objects: vec!["o1".into(), "o2".into()],
            llm_model_id: "m".into(),
            generated_at: chrono::Utc::now(),
        }
    }

    fn plain(kinds: Vec<DescriptorKind>) -> DescriptorConfig {
        DescriptorConfig { kinds, prepend_class: false, use_templates: false, templates: vec![] }
    }

    #[test]
    fn default_template_set_has_28_entries() {
        let t = default_templates();
        assert_eq!(t.len(), 28);
        assert!(t.iter().all(|t| t.matches("{}").count() == 1));
        assert!(t.contains(&"a video of a person {}.".to_string()));
    }

    #[test]
    fn base_order_is_canonical_regardless_of_input_order() {
        let ds = set();
        let a = base_texts(&ds, &[DescriptorKind::Context, DescriptorKind::Class]);
        let b = base_texts(&ds, &[DescriptorKind::Class, DescriptorKind::Context]);
        assert_eq!(a, b);
        assert_eq!(a, ["skiing", "ctx", "o1", "o2"]);
        let combo = base_texts(&ds, &[DescriptorKind::Combination, DescriptorKind::Class]);
        assert_eq!(combo.len(), 1 + 3 + 1 + 1 + 2);
    }

    #[test]
    fn class_only_is_the_plain_label() {
        let batch = assemble(&set(), &plain(vec![DescriptorKind::Class]));
        assert_eq!(batch.texts, ["skiing"]);
        let cfg = DescriptorConfig { prepend_class: true, ..plain(vec![DescriptorKind::Class]) };
        assert_eq!(assemble(&set(), &cfg).texts, ["skiing"]);
        assert_eq!(assemble_label_only(&set().action, &cfg).texts, ["skiing"]);
    }

    #[test]
    fn config_validation() {
        assert_eq!(plain(vec![]).validate(), Err(PromptError::NoKinds));
        let cfg = DescriptorConfig { use_templates: true, ..plain(vec![DescriptorKind::Class]) };
        assert_eq!(cfg.validate(), Err(PromptError::NoTemplates));
        let cfg = DescriptorConfig {
            use_templates: true,
            templates: vec!["{} and {}".into()],
            ..plain(vec![DescriptorKind::Class])
        };
        assert!(matches!(cfg.validate(), Err(PromptError::Placeholder(_))));
        assert!(DescriptorConfig::default().validate().is_ok());
    }

    #[test]
    fn kinds_parse() {
        assert_eq!(
            parse_kinds("Decomposition, context").unwrap(),
            [DescriptorKind::Decomposition, DescriptorKind::Context]
        );
        assert!(matches!(parse_kinds("verbs"), Err(PromptError::UnknownKind(_))));
    }

    #[test]
    fn template_file_parsing() {
        let t = parse_templates("# header\n\na photo of {}.\n  a video of {}.  \n");
        assert_eq!(t, ["a photo of {}.", "a video of {}."]);
    }
}
