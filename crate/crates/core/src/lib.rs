//! Training-free zero-shot video action recognition.
//!
//! Each action class is expanded into a set of textual descriptors generated
//! by a chat LLM (sub-action decomposition, visual description, scene context
//! and objects). Descriptors and uniformly sampled video frames are embedded
//! with a frozen vision-language encoder pair; a video is assigned to the
//! class whose mean descriptor embedding has the highest cosine similarity
//! with the mean frame embedding.
//!
//! Module map:
//!
//! - [`label`]: action class ids and their natural-language display form.
//! - [`descriptor`]: LLM queries, response parsing and the descriptor cache.
//! - [`prompt`]: turning descriptors into the final per-class text batch.
//! - [`embedding`]: text/image encoders (ONNX and precomputed table backends).
//! - [`video`]: decoding, uniform frame sampling and preprocessing.
//! - [`classifier`]: mean embeddings, cosine ranking and top-k hits.
//! - [`eval`]: dataset manifests, run configs, reports and ablation grids.
//! - [`par`]: data-parallel execution with a sequential fallback.

pub mod classifier;
pub mod descriptor;
pub mod embedding;
pub mod eval;
pub mod label;
pub mod par;
pub mod prompt;
pub mod video;

pub use classifier::{ClassEmbedding, Prediction};
pub use descriptor::DescriptorSet;
pub use label::{ActionClass, LabelSpace};
