use std::path::{Path, PathBuf};

use serde_json::json;
use zsar_core::classifier::{self, ClassEmbedding, EmbeddingVector};
use zsar_core::descriptor::{generate_all, ChatTransport, DescriptorCache, HttpChatTransport, LlmConfig, TransportError};
use zsar_core::embedding::EmbeddingTable;
use zsar_core::eval::ablate::{default_grid, AblationKind};
use zsar_core::eval::{ConfigError, DatasetManifest, EvalError, RunConfig, Runner};
use zsar_core::label::LabelSpace;
use zsar_core::par::Execution;
use zsar_core::prompt::parse_kinds;

use crate::args::{AblateArgs, ClassifyArgs, EmbedArgs, EvaluateArgs, Format, GenArgs, RunOverrides};
use crate::CliError;

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        Self {
            class: e.class(),
            message: e.to_string(),
            code: if e.is_environment() { 3 } else { 1 },
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        EvalError::from(e).into()
    }
}

fn usage(message: impl Into<String>) -> CliError {
    CliError {
        class: "usage",
        message: message.into(),
        code: 2,
    }
}

fn require_exists(path: &Path, what: &str) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::environment("missing_file", format!("{what} {} does not exist", path.display())))
    }
}

fn absolute(path: &Path) -> PathBuf {
    std::path::absolute(path).unwrap_or_else(|_| path.to_path_buf())
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliError::runtime("write", format!("cannot create {}: {e}", parent.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::runtime("write", format!("cannot write {}: {e}", path.display())))
}

/// Loads the run config and applies command-line overrides; flags win.
fn load_config(o: &RunOverrides, manifests: &[PathBuf]) -> Result<RunConfig, CliError> {
    require_exists(&o.config, "config")?;
    let mut cfg = RunConfig::load(&o.config)?;
    if let Some(p) = &o.classes {
        require_exists(p, "classes file")?;
        cfg.dataset.classes = Some(absolute(p));
    }
    if !manifests.is_empty() {
        for m in manifests {
            require_exists(m, "manifest")?;
        }
        cfg.dataset.splits = manifests.iter().map(|p| absolute(p)).collect();
    }
    if let Some(p) = &o.cache {
        cfg.cache = Some(absolute(p));
    }
    if let Some(b) = o.backend {
        cfg.backend = b;
    }
    if let Some(b) = &o.backbone {
        cfg.backbone = b.clone();
    }
    if let Some(n) = o.frames {
        cfg.frames = n;
    }
    if let Some(k) = &o.kinds {
        cfg.descriptors.kinds = parse_kinds(k).map_err(|e| usage(format!("--kinds: {e}")))?;
    }
    if let Some(p) = &o.templates {
        require_exists(p, "template file")?;
        cfg.descriptors.templates = None;
        cfg.descriptors.templates_file = Some(absolute(p));
    }
    if let Some(b) = o.prepend_class {
        cfg.descriptors.prepend_class = b;
    }
    if let Some(b) = o.use_templates {
        cfg.descriptors.use_templates = b;
    }
    if let Some(w) = o.workers {
        cfg.workers = w;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_labels(cfg: &RunConfig) -> Result<LabelSpace, CliError> {
    let path = cfg.dataset.classes.as_deref().ok_or_else(|| usage("no classes file: pass --classes or set dataset.classes"))?;
    require_exists(path, "classes file")?;
    LabelSpace::load(path).map_err(|e| CliError::runtime("labels", e.to_string()))
}

/// An HTTP transport when an API key is available; `None` otherwise, in
/// which case a cold descriptor cache fails with the missing classes.
fn optional_transport(cfg: &RunConfig, offline: bool) -> Option<HttpChatTransport> {
    if offline || !cfg.descriptor_config().map(|d| d.needs_descriptors()).unwrap_or(false) {
        return None;
    }
    match HttpChatTransport::new(&cfg.llm) {
        Ok(t) => Some(t),
        Err(e) => {
            log::info!("descriptor generation disabled: {e}");
            None
        }
    }
}

fn runner(transport: &Option<HttpChatTransport>) -> Runner<'_> {
    match transport {
        Some(t) => Runner::with_transport(t as &dyn ChatTransport),
        None => Runner::offline(),
    }
}

fn print_dry_run(what: &str, details: serde_json::Value, format: Format) {
    match format {
        Format::Json => println!("{}", json!({ "dry_run": true, "command": what, "details": details })),
        Format::Table => {
            println!("dry run: {what} configuration is valid");
            if let Some(map) = details.as_object() {
                for (k, v) in map {
                    println!("  {k}: {v}");
                }
            }
        }
    }
}

pub fn gen_descriptors(a: &GenArgs) -> Result<(), CliError> {
    let run = match &a.config {
        Some(p) => {
            require_exists(p, "config")?;
            Some(RunConfig::load(p)?)
        }
        None => None,
    };
    let mut llm: LlmConfig = run.as_ref().map(|r| r.llm.clone()).unwrap_or_default();
    if let Some(id) = &a.llm {
        llm.model_id = id.clone();
    }
    llm.validate().map_err(|e| usage(e.to_string()))?;
    let classes = a
        .classes
        .clone()
        .or_else(|| run.as_ref().and_then(|r| r.dataset.classes.clone()))
        .ok_or_else(|| usage("no classes file: pass --classes or set dataset.classes in --config"))?;
    let cache_path = a
        .cache
        .clone()
        .or_else(|| run.as_ref().and_then(|r| r.cache.clone()))
        .ok_or_else(|| usage("no descriptor cache: pass --cache or set cache in --config"))?;
    require_exists(&classes, "classes file")?;
    let labels = LabelSpace::load(&classes).map_err(|e| CliError::runtime("labels", e.to_string()))?;
    let mut cache = DescriptorCache::open(&cache_path).map_err(|e| CliError::runtime("cache", e.to_string()))?;
    let cold: Vec<&str> = labels
        .classes()
        .iter()
        .filter(|c| cache.get(c, &llm.model_id).is_none())
        .map(|c| c.raw_id())
        .collect();

    if a.dry_run {
        print_dry_run(
            "gen-descriptors",
            json!({ "classes": labels.len(), "cached": labels.len() - cold.len(), "to_generate": cold.len(), "llm": llm.model_id }),
            a.format,
        );
        return Ok(());
    }

    let workers = a.workers.or(run.as_ref().map(|r| r.workers)).unwrap_or(0);
    let outcome = if cold.is_empty() {
        // Warm cache: no transport, so no API key is needed.
        generate_all(&labels, &llm, &NoNetwork, &mut cache, Execution::from_workers(workers))
    } else {
        let transport = HttpChatTransport::new(&llm).map_err(|e| match e {
            TransportError::MissingApiKey(_) => CliError::environment("missing_api_key", e.to_string()),
            other => CliError::runtime("transport", other.to_string()),
        })?;
        generate_all(&labels, &llm, &transport, &mut cache, Execution::from_workers(workers))
    }
    .map_err(|e| CliError::runtime("cache", e.to_string()))?;

    let generated = outcome.sets.len() - outcome.cache_hits;
    match a.format {
        Format::Json => println!(
            "{}",
            json!({
                "classes": labels.len(),
                "cache_hits": outcome.cache_hits,
                "generated": generated,
                "failed": outcome.failures.len(),
                "llm_calls": outcome.llm_calls,
                "cache": cache_path,
            })
        ),
        Format::Table => println!(
            "{} classes: {} cached, {} generated, {} failed, {} LLM calls -> {}",
            labels.len(),
            outcome.cache_hits,
            generated,
            outcome.failures.len(),
            outcome.llm_calls,
            cache_path.display()
        ),
    }
    if !outcome.is_complete() {
        let failures: Vec<String> = outcome
            .failures
            .iter()
            .map(|f| format!("{}: {}", f.action.raw_id(), f.error))
            .collect();
        return Err(EvalError::DescriptorGeneration { failures }.into());
    }
    Ok(())
}

/// Transport for a fully warm cache; never called.
struct NoNetwork;

impl ChatTransport for NoNetwork {
    fn complete(&self, _: &zsar_core::descriptor::ChatRequest) -> Result<String, TransportError> {
        Err(TransportError::Network {
            url: String::new(),
            message: "network disabled".into(),
        })
    }
}

pub fn embed_classes(a: &EmbedArgs) -> Result<(), CliError> {
    let cfg = load_config(&a.run, &[])?;
    let labels = load_labels(&cfg)?;
    if a.run.dry_run {
        cfg.check_files()?;
        print_dry_run(
            "embed-classes",
            json!({ "classes": labels.len(), "backbone": cfg.backbone.to_string(), "output": a.output }),
            a.run.format,
        );
        return Ok(());
    }
    let transport = optional_transport(&cfg, a.run.offline);
    let classes = runner(&transport).class_embeddings(&cfg, &labels)?;
    let table = classifier::class_table(&classes).map_err(|e| CliError::runtime("embedding", e.to_string()))?;
    write_file(&a.output, &table.to_bytes())?;
    match a.run.format {
        Format::Json => println!(
            "{}",
            json!({
                "classes": classes.len(),
                "dim": table.dim(),
                "texts_per_class": classes.iter().map(|c| c.texts).collect::<Vec<_>>(),
                "output": a.output,
            })
        ),
        Format::Table => println!(
            "{} class embeddings (dim {}) -> {}",
            classes.len(),
            table.dim(),
            a.output.display()
        ),
    }
    Ok(())
}

fn classes_from_table(path: &Path, labels: &LabelSpace) -> Result<Vec<ClassEmbedding>, CliError> {
    require_exists(path, "class embedding table")?;
    let table = EmbeddingTable::read(path).map_err(|e| CliError::runtime("embedding", e.to_string()))?;
    labels
        .classes()
        .iter()
        .enumerate()
        .map(|(index, action)| {
            let values = table.get(action.raw_id()).ok_or_else(|| {
                CliError::runtime("embedding", format!("{} has no embedding for class {:?}", path.display(), action.raw_id()))
            })?;
            Ok(ClassEmbedding {
                index,
                action: action.clone(),
                z: EmbeddingVector::from_f32(values)
                    .ok_or_else(|| CliError::runtime("embedding", "empty class embedding"))?,
                texts: 0,
            })
        })
        .collect()
}

pub fn classify(a: &ClassifyArgs) -> Result<(), CliError> {
    if a.top == 0 {
        return Err(usage("--top must be at least 1"));
    }
    let cfg = load_config(&a.run, &[])?;
    require_exists(&a.video, "video")?;
    let labels = load_labels(&cfg)?;
    if a.run.dry_run {
        cfg.check_files()?;
        print_dry_run("classify", json!({ "classes": labels.len(), "video": a.video }), a.run.format);
        return Ok(());
    }
    let transport = optional_transport(&cfg, a.run.offline);
    let runner = runner(&transport);
    let classes = match &a.class_embeddings {
        Some(p) => classes_from_table(p, &labels)?,
        None => runner.class_embeddings(&cfg, &labels)?,
    };
    let prediction = runner.classify(&cfg, &classes, &a.video)?;
    let top = prediction.top(a.top);
    match a.run.format {
        Format::Json => {
            let ranking: Vec<_> = top
                .iter()
                .enumerate()
                .map(|(rank, r)| json!({ "rank": rank + 1, "class": r.action.raw_id(), "index": r.index, "score": r.score }))
                .collect();
            println!("{}", json!({ "video": a.video, "predicted": prediction.predicted().action.raw_id(), "ranking": ranking }));
        }
        Format::Table => {
            let width = top.iter().map(|r| r.action.raw_id().len()).max().unwrap_or(0);
            for r in top {
                println!("{:<width$}  {:.6}", r.action.raw_id(), r.score);
            }
        }
    }
    Ok(())
}

fn sibling_txt(path: &Path) -> PathBuf {
    path.with_extension("txt")
}

pub fn evaluate(a: &EvaluateArgs) -> Result<(), CliError> {
    let cfg = load_config(&a.run, &a.manifest)?;
    if a.run.dry_run {
        cfg.check_files()?;
        let manifest = load_manifest(&cfg)?;
        print_dry_run(
            "evaluate",
            json!({
                "classes": manifest.classes.len(),
                "splits": manifest.splits.iter().map(|s| json!({ "name": s.name, "samples": s.samples.len() })).collect::<Vec<_>>(),
                "output": a.output,
            }),
            a.run.format,
        );
        return Ok(());
    }
    let transport = optional_transport(&cfg, a.run.offline);
    let report = runner(&transport).evaluate(&cfg)?;
    write_file(&a.output, report.to_json().as_bytes())?;
    write_file(&sibling_txt(&a.output), report.to_table().as_bytes())?;
    match a.run.format {
        Format::Json => print!("{}", report.to_json()),
        Format::Table => print!("{}", report.to_table()),
    }
    if report.excluded_count() > 0 {
        eprintln!("warning: {} sample(s) excluded; see {}", report.excluded_count(), a.output.display());
    }
    Ok(())
}

fn load_manifest(cfg: &RunConfig) -> Result<DatasetManifest, CliError> {
    let classes = cfg.dataset.classes.as_deref().ok_or_else(|| usage("no classes file: pass --classes or set dataset.classes"))?;
    DatasetManifest::load(&cfg.dataset.name, classes, &cfg.dataset.splits, cfg.dataset.root.as_deref())
        .map_err(|e| EvalError::from(e).into())
}

pub fn ablate(a: &AblateArgs) -> Result<(), CliError> {
    let cfg = load_config(&a.run, &a.manifest)?;
    let grid = default_grid(a.ablation, &cfg, &a.llm).map_err(|e| match e {
        EvalError::Ablation(m) => usage(m),
        other => other.into(),
    })?;
    let output = a
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("ablation-{}.json", a.ablation.name())));
    if a.run.dry_run {
        grid.validate()?;
        if a.ablation != AblationKind::Llm {
            for (_, cell) in &grid.cells {
                cell.check_files()?;
            }
        }
        load_manifest(&cfg)?;
        print_dry_run(
            "ablate",
            json!({ "ablation": a.ablation.name(), "cells": grid.len(), "output": output }),
            a.run.format,
        );
        return Ok(());
    }
    let transport = optional_transport(&cfg, a.run.offline);
    let table = grid.run(&runner(&transport))?;
    write_file(&output, table.to_json().as_bytes())?;
    write_file(&sibling_txt(&output), table.to_table().as_bytes())?;
    match a.run.format {
        Format::Json => print!("{}", table.to_json()),
        Format::Table => print!("{}", table.to_table()),
    }
    Ok(())
}
