//! Decoding videos, sampling N frames uniformly over the whole clip, and
//! preprocessing them for the image encoder.

pub mod decode;
pub mod indices;
pub mod preprocess;

use std::path::{Path, PathBuf};

use crate::embedding::Frame;

pub use decode::FrameSource;
pub use indices::{sample_indices, uniform_indices, SamplingAnchor};
pub use preprocess::preprocess;

#[derive(Debug, thiserror::Error)]
pub enum VideoError {
    #[error("cannot sample {n} frames from a video of {total} frames")]
    Domain { total: usize, n: usize },
    #[error("cannot decode {}: {reason}", path.display())]
    Decode { path: PathBuf, reason: String },
    #[error("{} contains no frames", .0.display())]
    EmptyVideo(PathBuf),
}

impl VideoError {
    pub fn path(&self) -> Option<&Path> {
        match self {
            VideoError::Decode { path, .. } | VideoError::EmptyVideo(path) => Some(path),
            VideoError::Domain { .. } => None,
        }
    }
}

/// N preprocessed frames taken from one video.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoSample {
    pub path: PathBuf,
    pub total_frames: usize,
    pub sampled_indices: Vec<usize>,
    pub frames: Vec<Frame>,
}

pub fn load_sample(path: &Path, n: usize) -> Result<VideoSample, VideoError> {
    load_sample_with(path, n, SamplingAnchor::Start)
}

pub fn load_sample_with(path: &Path, n: usize, anchor: SamplingAnchor) -> Result<VideoSample, VideoError> {
    if n == 0 {
        return Err(VideoError::Domain { total: 0, n });
    }
    let source = FrameSource::open(path)?;
    let total = source.frame_count(path)?;
    if total == 0 {
        return Err(VideoError::EmptyVideo(path.to_path_buf()));
    }
    let sampled_indices = sample_indices(total, n, anchor)?;
    let images = source.read(&sampled_indices)?;
    let frames = images.iter().map(preprocess).collect();
    Ok(VideoSample {
        path: path.to_path_buf(),
        total_frames: total,
        sampled_indices,
        frames,
    })
}
