//! Ablation grids. Each grid is a list of derived configs; every cell of the
//! resulting table is the aggregate of one ordinary [`Runner::evaluate`]
//! call on that config.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::report::{pct, render_table};
use super::{Accuracy, EvalError, RunConfig, Runner};
use crate::embedding::ModelTag;
use crate::prompt::DescriptorKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AblationKind {
    /// One row per descriptor kind.
    Descriptors,
    /// Templates x class prepending, per backbone.
    Prompts,
    /// Backbone x frames per video.
    BackboneFrames,
    /// Descriptor kinds per LLM, each LLM with its own cache.
    Llm,
}

impl AblationKind {
    pub const ALL: [AblationKind; 4] = [
        AblationKind::Descriptors,
        AblationKind::Prompts,
        AblationKind::BackboneFrames,
        AblationKind::Llm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AblationKind::Descriptors => "descriptors",
            AblationKind::Prompts => "prompts",
            AblationKind::BackboneFrames => "backbone-frames",
            AblationKind::Llm => "llm",
        }
    }
}

impl std::str::FromStr for AblationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown ablation {s:?} (expected descriptors, prompts, backbone-frames or llm)"))
    }
}

pub const DEFAULT_BACKBONES: [ModelTag; 2] = [ModelTag::VitB32, ModelTag::VitB16];
pub const DEFAULT_FRAMES: [usize; 2] = [16, 32];

/// Single-kind rows for the descriptor ablation.
pub const DESCRIPTOR_ROWS: [DescriptorKind; 5] = [
    DescriptorKind::Class,
    DescriptorKind::Description,
    DescriptorKind::Decomposition,
    DescriptorKind::Context,
    DescriptorKind::Combination,
];

/// Kinds evaluated per LLM; the class label alone does not depend on it.
pub const LLM_ROWS: [DescriptorKind; 4] = [
    DescriptorKind::Description,
    DescriptorKind::Decomposition,
    DescriptorKind::Context,
    DescriptorKind::Combination,
];

#[derive(Debug, Clone)]
pub struct Grid {
    pub kind: AblationKind,
    pub columns: Vec<String>,
    pub cells: Vec<(Vec<String>, RunConfig)>,
}

fn columns(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn yes_no(b: bool) -> String {
    if b { "yes" } else { "no" }.to_string()
}

pub fn descriptor_grid(base: &RunConfig, kinds: &[DescriptorKind]) -> Grid {
    let cells = kinds
        .iter()
        .map(|&k| {
            let mut cfg = base.clone();
            cfg.descriptors.kinds = vec![k];
            (vec![k.to_string()], cfg)
        })
        .collect();
    Grid {
        kind: AblationKind::Descriptors,
        columns: columns(&["kinds"]),
        cells,
    }
}

pub fn prompt_grid(base: &RunConfig, backbones: &[ModelTag]) -> Grid {
    let mut cells = Vec::new();
    for backbone in backbones {
        for use_templates in [false, true] {
            for prepend_class in [false, true] {
                let mut cfg = base.clone();
                cfg.backbone = backbone.clone();
                cfg.descriptors.use_templates = use_templates;
                cfg.descriptors.prepend_class = prepend_class;
                cells.push((vec![backbone.to_string(), yes_no(use_templates), yes_no(prepend_class)], cfg));
            }
        }
    }
    Grid {
        kind: AblationKind::Prompts,
        columns: columns(&["backbone", "templates", "prepend_class"]),
        cells,
    }
}

pub fn backbone_frames_grid(base: &RunConfig, backbones: &[ModelTag], frames: &[usize]) -> Grid {
    let mut cells = Vec::new();
    for backbone in backbones {
        for &n in frames {
            let mut cfg = base.clone();
            cfg.backbone = backbone.clone();
            cfg.frames = n;
            cells.push((vec![backbone.to_string(), n.to_string()], cfg));
        }
    }
    Grid {
        kind: AblationKind::BackboneFrames,
        columns: columns(&["backbone", "frames"]),
        cells,
    }
}

/// Filesystem-safe form of a model id.
pub fn model_slug(model_id: &str) -> String {
    let slug: String = model_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '_' { c } else { '-' })
        .collect();
    slug.trim_matches('-').to_string()
}

/// `dir/stem.json` becomes `dir/stem.<model>.json`, one cache per model.
pub fn per_model_cache(cache: &Path, model_id: &str) -> PathBuf {
    let stem = cache.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = cache.extension().map(|e| e.to_string_lossy().into_owned()).unwrap_or_else(|| "json".into());
    cache.with_file_name(format!("{stem}.{}.{ext}", model_slug(model_id)))
}

pub fn llm_grid(base: &RunConfig, llm_ids: &[String], kinds: &[DescriptorKind]) -> Result<Grid, EvalError> {
    let cache = base
        .cache
        .as_ref()
        .ok_or_else(|| EvalError::Ablation("the llm ablation needs a descriptor cache path".into()))?;
    let mut cells = Vec::new();
    for id in llm_ids {
        for &k in kinds {
            let mut cfg = base.clone();
            cfg.llm.model_id = id.clone();
            cfg.cache = Some(per_model_cache(cache, id));
            cfg.descriptors.kinds = vec![k];
            cells.push((vec![id.clone(), k.to_string()], cfg));
        }
    }
    Ok(Grid {
        kind: AblationKind::Llm,
        columns: columns(&["llm", "kinds"]),
        cells,
    })
}

/// The grid of `kind` with its default axes.
pub fn default_grid(kind: AblationKind, base: &RunConfig, llm_ids: &[String]) -> Result<Grid, EvalError> {
    Ok(match kind {
        AblationKind::Descriptors => descriptor_grid(base, &DESCRIPTOR_ROWS),
        AblationKind::Prompts => prompt_grid(base, &DEFAULT_BACKBONES),
        AblationKind::BackboneFrames => backbone_frames_grid(base, &DEFAULT_BACKBONES, &DEFAULT_FRAMES),
        AblationKind::Llm => {
            if llm_ids.is_empty() {
                return Err(EvalError::Ablation("the llm ablation needs at least one --llm model id".into()));
            }
            llm_grid(base, llm_ids, &LLM_ROWS)?
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub keys: Vec<String>,
    pub top1: f64,
    pub top5: f64,
    pub per_split: Vec<Accuracy>,
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub ablation: AblationKind,
    /// Names of the key columns; `top1` and `top5` follow them.
    pub columns: Vec<String>,
    pub rows: Vec<AblationRow>,
}

impl Grid {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        for (_, cfg) in &self.cells {
            cfg.validate()?;
        }
        Ok(())
    }

    pub fn run(&self, runner: &Runner<'_>) -> Result<AblationTable, EvalError> {
        let mut rows = Vec::with_capacity(self.cells.len());
        for (keys, cfg) in &self.cells {
            log::info!("ablation {}: {}", self.kind.name(), keys.join(" / "));
            let report = runner.evaluate(cfg)?;
            rows.push(AblationRow {
                keys: keys.clone(),
                top1: report.aggregate.top1,
                top5: report.aggregate.top5,
                per_split: report.per_split.iter().map(|s| Accuracy { top1: s.top1, top5: s.top5 }).collect(),
                excluded: report.excluded_count(),
            });
        }
        Ok(AblationTable {
            ablation: self.kind,
            columns: self.columns.clone(),
            rows,
        })
    }
}

impl AblationTable {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes") + "\n"
    }

    /// Key columns, then `top1` and `top5` in percent.
    pub fn to_table(&self) -> String {
        let mut headers: Vec<&str> = self.columns.iter().map(String::as_str).collect();
        headers.extend(["top1", "top5"]);
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let mut cells = r.keys.clone();
                cells.extend([pct(r.top1), pct(r.top5)]);
                cells
            })
            .collect();
        render_table(&headers, &rows, self.columns.len())
    }
}
