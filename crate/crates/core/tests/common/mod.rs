//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use chrono::{TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zsar_core::descriptor::{prompts, ChatRequest, ChatTransport, DescriptorCache, DescriptorSet, TransportError};
use zsar_core::embedding::{EmbeddingTable, Frame};
use zsar_core::label::{ActionClass, LabelSpace};
use zsar_core::prompt::{assemble, DescriptorConfig, DescriptorKind};
use zsar_core::video::load_sample;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_rows(rng: &mut ChaCha8Rng, rows: usize, dim: usize) -> Vec<Vec<f32>> {
    (0..rows)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect())
        .collect()
}

// ---------------------------------------------------------------------------
// Brute-force oracle: a direct, loop-based restatement of the method.

/// Column-by-column mean of `rows`, summed in index order.
pub fn oracle_mean(rows: &[Vec<f32>]) -> Vec<f64> {
    let dim = rows[0].len();
    let mut out = Vec::with_capacity(dim);
    for c in 0..dim {
        let mut total = 0.0f64;
        for r in rows {
            total += r[c] as f64;
        }
        out.push(total / rows.len() as f64);
    }
    out
}

pub fn oracle_cosine(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for i in 0..a.len() {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    dot / (na.sqrt() * nb.sqrt())
}

/// Predicted class (first maximum) and per-class scores, in class order.
pub fn oracle_classify(frames: &[Vec<f32>], class_texts: &[Vec<Vec<f32>>]) -> (usize, Vec<f64>) {
    let v = oracle_mean(frames);
    let scores: Vec<f64> = class_texts.iter().map(|t| oracle_cosine(&oracle_mean(t), &v)).collect();
    let mut best = 0;
    for j in 1..scores.len() {
        if scores[j] > scores[best] {
            best = j;
        }
    }
    (best, scores)
}

// ---------------------------------------------------------------------------
// Descriptor fixtures.

pub fn fixed_time() -> chrono::DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 6, 11, 12, 0, 0).unwrap()
}

/// The generated descriptors for "snowboarding" as published with the method.
pub fn snowboarding() -> DescriptorSet {
    DescriptorSet {
        action: ActionClass::new("snowboarding").unwrap(),
        decomposition: vec![
            "Strap your feet securely onto the snowboard bindings".into(),
            "Lean forward to initiate movement down the slope".into(),
            "Use heel-to-toe shifts in weight to steer and balance as you descend".into(),
        ],
        description: "A person sliding down a snow-covered slope on a single board attached to their feet, making turns and jumps while maintaining balance.".into(),
        context: "snow-covered mountain slope or snow park".into(),
        objects: vec!["snowboard".into(), "snow boots".into(), "helmet".into()],
        llm_model_id: "gpt-3.5-turbo".into(),
        generated_at: fixed_time(),
    }
}

/// Synthetic but well-formed descriptors; `salt` varies the wording.
pub fn synthetic_set(raw_id: &str, model_id: &str, salt: &str) -> DescriptorSet {
    let action = ActionClass::new(raw_id).unwrap();
    let d = action.display().to_string();
    DescriptorSet {
        decomposition: vec![
            format!("{salt}get ready for {d}"),
            format!("{salt}perform {d}"),
            format!("{salt}finish {d}"),
        ],
        description: format!("{salt}a person doing {d} in plain view."),
        context: format!("{salt}a place suited to {d}"),
        objects: vec![format!("{salt}{d} gear"), format!("{salt}person")],
        llm_model_id: model_id.into(),
        generated_at: fixed_time(),
        action,
    }
}

// ---------------------------------------------------------------------------
// Mock LLM.

/// Answers every query with a well-formed response derived from the label
/// and counts calls per (label, query).
#[derive(Default)]
pub struct MockLlm {
    pub calls: AtomicUsize,
    pub per_label: Mutex<HashMap<String, usize>>,
    /// Labels whose decomposition answer has only two steps.
    pub broken: Vec<String>,
}

impl MockLlm {
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn calls_for(&self, label: &str) -> usize {
        self.per_label.lock().unwrap().get(label).copied().unwrap_or(0)
    }
}

impl ChatTransport for MockLlm {
    fn complete(&self, req: &ChatRequest) -> Result<String, TransportError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        *self.per_label.lock().unwrap().entry(req.user.clone()).or_default() += 1;
        let l = &req.user;
        Ok(if req.system == prompts::DECOMPOSITION {
            if self.broken.contains(l) {
                format!("['prepare for {l}', 'do {l}']")
            } else {
                format!("['prepare for {l}', 'do {l}', 'stop {l}']")
            }
        } else if req.system == prompts::DESCRIPTION {
            format!("\"A person doing {l}.\"")
        } else if req.system == prompts::CONTEXT {
            format!("{{'context': 'a place for {l}', 'objects': ['{l} gear', 'person']}}")
        } else {
            return Err(TransportError::Malformed { body: "unknown system prompt".into() });
        })
    }
}

// ---------------------------------------------------------------------------
// Videos on disk.

/// Writes solid-color PNG frames `frame_000000.png`, ... into `dir`.
pub fn write_frame_dir(dir: &Path, colors: &[[u8; 3]], width: u32, height: u32) {
    std::fs::create_dir_all(dir).unwrap();
    for (i, c) in colors.iter().enumerate() {
        let img = image::RgbImage::from_pixel(width, height, image::Rgb(*c));
        img.save(dir.join(format!("frame_{i:06}.png"))).unwrap();
    }
}

/// Writes a 4:4:4 Y4M file whose frame `i` has constant luma `lumas[i]`.
pub fn write_y4m(path: &Path, width: usize, height: usize, lumas: &[u8]) {
    let mut bytes = format!("YUV4MPEG2 W{width} H{height} F25:1 Ip A1:1 C444\n").into_bytes();
    for &y in lumas {
        bytes.extend_from_slice(b"FRAME\n");
        bytes.extend(std::iter::repeat_n(y, width * height));
        bytes.extend(std::iter::repeat_n(128u8, 2 * width * height));
    }
    std::fs::write(path, bytes).unwrap();
}

pub fn frames_of(path: &Path) -> Vec<Frame> {
    load_sample(path, 16).unwrap().frames
}

// ---------------------------------------------------------------------------
// Evaluation fixture: 5 classes, 4 videos, file-backend embeddings.

pub const DIM: usize = 8;
pub const CLASSES: [&str; 5] = ["Snowboarding", "Skiing", "Surfing", "Skateboarding", "Swimming"];
pub const TEMPLATES: [&str; 2] = ["a video of a person {}.", "a photo of {}."];
pub const BASE_LLM: &str = "fixture-llm";
pub const ABLATION_LLMS: [&str; 2] = ["llm-a", "llm-b"];

fn basis(i: usize) -> Vec<f32> {
    let mut v = vec![0.0; DIM];
    v[i] = 1.0;
    v
}

fn fnv1a(text: &str) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in text.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Text vectors: a bare class name maps exactly to its basis vector; every
/// other text of class `j` is `e_j` plus bounded text-dependent noise.
pub fn text_vector(text: &str, class: usize, salt: u64) -> Vec<f32> {
    let mut v = basis(class);
    if CLASSES.iter().any(|c| ActionClass::new(*c).unwrap().display() == text) {
        return v;
    }
    let mut r = rng(fnv1a(text) ^ salt);
    for x in &mut v {
        *x += r.random_range(-0.3f32..0.3);
    }
    v
}

/// Per-video frame vectors and ground truth. Videos 0-2 are nearest to
/// their own class; video 3 (truth 3) is nearest to class 2 with its true
/// class ranked second.
pub fn video_design() -> Vec<(usize, [[u8; 3]; 2], [Vec<f32>; 2])> {
    let mix = |pairs: &[(usize, f32)]| {
        let mut v = vec![0.0f32; DIM];
        for &(i, x) in pairs {
            v[i] += x;
        }
        v
    };
    vec![
        (0, [[250, 10, 10], [240, 20, 10]], [mix(&[(0, 1.0), (1, 0.2)]), mix(&[(0, 1.0), (2, 0.2)])]),
        (1, [[10, 250, 10], [20, 240, 10]], [mix(&[(1, 1.0), (5, 0.3)]), mix(&[(1, 1.0), (0, -0.1)])]),
        (4, [[10, 10, 250], [10, 20, 240]], [mix(&[(4, 1.0), (3, 0.2)]), mix(&[(4, 1.0)])]),
        (3, [[120, 120, 10], [130, 110, 10]], [mix(&[(2, 0.9), (3, 0.4)]), mix(&[(2, 0.9), (3, 0.6)])]),
    ]
}

pub struct EvalFixture {
    pub dir: tempfile::TempDir,
    pub config: PathBuf,
    pub classes: PathBuf,
    pub split: PathBuf,
    pub cache: PathBuf,
}

impl EvalFixture {
    pub fn root(&self) -> &Path {
        self.dir.path()
    }

    pub fn build() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        let classes = root.join("classes.txt");
        std::fs::write(&classes, CLASSES.join("\n") + "\n").unwrap();
        let labels = LabelSpace::from_raw_ids(CLASSES).unwrap();

        let mut split = String::new();
        let mut tables = [EmbeddingTable::new(DIM), EmbeddingTable::new(DIM)];
        for (i, (truth, colors, vectors)) in video_design().into_iter().enumerate() {
            let video = root.join(format!("videos/v{i}"));
            write_frame_dir(&video, &colors, 32, 24);
            split.push_str(&format!("videos/v{i}\t{}\n", CLASSES[truth]));
            let frames = load_sample(&video, 2).unwrap().frames;
            for t in &mut tables {
                for (f, v) in frames.iter().zip(&vectors) {
                    t.insert(f.content_key(), v).unwrap();
                }
            }
        }
        let split_path = root.join("test1.txt");
        std::fs::write(&split_path, split).unwrap();

        // Descriptor caches: the base model plus one per ablation model.
        let cache = root.join("descriptors.json");
        let mut models = vec![(BASE_LLM.to_string(), cache.clone(), String::new())];
        for (k, id) in ABLATION_LLMS.iter().enumerate() {
            let p = zsar_core::eval::ablate::per_model_cache(&cache, id);
            models.push((id.to_string(), p, format!("[{id}#{k}] ")));
        }
        let mut all_sets = Vec::new();
        for (id, path, salt) in &models {
            let mut c = DescriptorCache::open(path).unwrap();
            for raw in CLASSES {
                let ds = synthetic_set(raw, id, salt);
                c.insert(&ds);
                all_sets.push(ds);
            }
            c.save().unwrap();
        }

        // Every text any grid cell can produce gets a vector.
        for ds in &all_sets {
            let class = labels.index_of(ds.action.raw_id()).unwrap();
            for kind in DescriptorKind::ALL {
                for use_templates in [false, true] {
                    for prepend_class in [false, true] {
                        let cfg = DescriptorConfig {
                            kinds: vec![kind],
                            prepend_class,
                            use_templates,
                            templates: TEMPLATES.iter().map(|s| s.to_string()).collect(),
                        };
                        for text in assemble(ds, &cfg).texts {
                            for (salt, t) in tables.iter_mut().enumerate() {
                                t.insert(text.clone(), &text_vector(&text, class, salt as u64 * 7919)).unwrap();
                            }
                        }
                    }
                }
            }
        }
        tables[0].write(&root.join("vitb32.emb")).unwrap();
        tables[1].write(&root.join("vitb16.emb")).unwrap();

        let config = root.join("run.toml");
        std::fs::write(&config, FIXTURE_CONFIG).unwrap();
        Self {
            dir,
            config,
            classes,
            split: split_path,
            cache,
        }
    }

    pub fn run_config(&self) -> zsar_core::eval::RunConfig {
        zsar_core::eval::RunConfig::load(&self.config).unwrap()
    }
}

pub const FIXTURE_CONFIG: &str = r#"backbone = "ViT-B/32"
backend = "file"
frames = 16
workers = 1
cache = "descriptors.json"

[descriptors]
kinds = ["combination"]
prepend_class = true
use_templates = true
templates = ["a video of a person {}.", "a photo of {}."]

[llm]
model_id = "fixture-llm"

[dataset]
name = "fixture"
classes = "classes.txt"
splits = ["test1.txt"]

[[encoders]]
backend = "file"
model_tag = "ViT-B/32"
embed_dim = 8
embedding_table = "vitb32.emb"

[[encoders]]
backend = "file"
model_tag = "ViT-B/16"
embed_dim = 8
embedding_table = "vitb16.emb"
"#;

// ---------------------------------------------------------------------------
// Tiny ONNX towers and their reference implementation.

pub fn tiny_clip_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/tiny_clip")
}

pub fn tiny_clip_spec() -> zsar_core::embedding::EncoderSpec {
    let dir = tiny_clip_dir();
    zsar_core::embedding::EncoderSpec {
        backend: zsar_core::embedding::BackendKind::Onnx,
        model_tag: zsar_core::embedding::ModelTag::Custom,
        embed_dim: 8,
        text_model: Some(dir.join("text.onnx")),
        image_model: Some(dir.join("image.onnx")),
        vocab: None,
        embedding_table: None,
    }
}

#[derive(serde::Deserialize)]
pub struct TinyClipWeights {
    pub dim: usize,
    pub table_rows: usize,
    pub table: Vec<f32>,
    pub text_proj: Vec<f32>,
    pub conv_w: Vec<f32>,
    pub conv_b: Vec<f32>,
    pub image_proj: Vec<f32>,
}

impl TinyClipWeights {
    pub fn load() -> Self {
        let text = std::fs::read_to_string(tiny_clip_dir().join("weights.json")).unwrap();
        serde_json::from_str(&text).unwrap()
    }

    fn project(&self, pooled: &[f64], proj: &[f32]) -> Vec<f32> {
        (0..self.dim)
            .map(|j| (0..self.dim).map(|i| pooled[i] * proj[i * self.dim + j] as f64).sum::<f64>() as f32)
            .collect()
    }

    /// Mean of table rows over all 77 positions, then the projection.
    pub fn text(&self, ids: &[i64; 77]) -> Vec<f32> {
        let mut pooled = vec![0f64; self.dim];
        for &id in ids {
            let row = (id as usize) % self.table_rows;
            for (p, &t) in pooled.iter_mut().zip(&self.table[row * self.dim..(row + 1) * self.dim]) {
                *p += t as f64;
            }
        }
        pooled.iter_mut().for_each(|p| *p /= 77.0);
        self.project(&pooled, &self.text_proj)
    }

    /// 32x32 stride-32 convolution, mean over the 7x7 patches, projection.
    pub fn image(&self, frame: &Frame) -> Vec<f32> {
        let data = frame.data();
        let plane = 224 * 224;
        let mut pooled = vec![0f64; self.dim];
        for (o, p) in pooled.iter_mut().enumerate() {
            let mut total = 0.0f64;
            for py in 0..7 {
                for px in 0..7 {
                    let mut acc = self.conv_b[o] as f64;
                    for c in 0..3 {
                        for ky in 0..32 {
                            for kx in 0..32 {
                                let w = self.conv_w[((o * 3 + c) * 32 + ky) * 32 + kx] as f64;
                                let x = data[c * plane + (py * 32 + ky) * 224 + px * 32 + kx] as f64;
                                acc += w * x;
                            }
                        }
                    }
                    total += acc;
                }
            }
            *p = total / 49.0;
        }
        self.project(&pooled, &self.image_proj)
    }
}

pub const GOLDEN_SENTENCES: [&str; 3] = [
    "a video of a person snowboarding.",
    "A person sliding down a snow-covered slope on a single board attached to their feet.",
    // Longer than the 77-token context.
    "snowboarding on a snow-covered mountain slope with a helmet and snow boots while friends watch from the lift and the sun sets behind the peaks and the wind carries powder across the trail as the rider carves long turns, jumps over a small ridge, lands cleanly, brakes with the heel edge and finally stops next to the lodge where more people are waiting before everyone heads home for hot chocolate by the fireplace after a long and tiring day",
];

/// Three golden images: a constant-color frame, a gradient and a checker.
pub fn golden_images() -> Vec<image::RgbImage> {
    vec![
        image::RgbImage::from_pixel(224, 224, image::Rgb([128, 64, 200])),
        image::RgbImage::from_fn(320, 240, |x, y| image::Rgb([(x % 256) as u8, (y % 256) as u8, ((x + y) % 256) as u8])),
        image::RgbImage::from_fn(240, 300, |x, y| {
            if (x / 20 + y / 20) % 2 == 0 {
                image::Rgb([250, 250, 250])
            } else {
                image::Rgb([5, 30, 60])
            }
        }),
    ]
}
