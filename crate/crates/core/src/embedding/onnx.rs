//! Exported CLIP towers executed with tract.
//!
//! The text model takes `input_ids: int64[1,77]` (and optionally an
//! `attention_mask` of the same shape as its second input); the image model
//! takes `pixel_values: float32[1,3,224,224]`. Each returns one embedding row
//! as its first output.

use std::sync::Arc;

use tract_onnx::prelude::*;

use super::tokenize::{ClipTokenizer, CONTEXT_LENGTH};
use super::{
    check_frame_shapes, ensure_finite, EmbeddingError, EmbeddingMatrix, Encoder, EncoderSpec, Frame, FRAME_CHANNELS,
    FRAME_SIZE,
};

type Plan = Arc<TypedRunnableModel>;

pub struct OnnxEncoder {
    text: Plan,
    text_takes_mask: bool,
    image: Plan,
    tokenizer: ClipTokenizer,
    dim: usize,
}

fn backend_err(context: &str) -> impl FnOnce(TractError) -> EmbeddingError + '_ {
    move |e| EmbeddingError::Backend(format!("{context}: {e:#}"))
}

fn load_plan(path: &std::path::Path, facts: &[InferenceFact]) -> Result<(Plan, usize), EmbeddingError> {
    let ctx = path.display().to_string();
    let mut model = tract_onnx::onnx().model_for_path(path).map_err(backend_err(&ctx))?;
    let inputs = model.input_outlets().map_err(backend_err(&ctx))?.len();
    if inputs == 0 || inputs > facts.len() {
        return Err(EmbeddingError::Backend(format!(
            "{ctx}: model has {inputs} inputs, expected 1..={}",
            facts.len()
        )));
    }
    for (i, fact) in facts.iter().take(inputs).enumerate() {
        model = model.with_input_fact(i, fact.clone()).map_err(backend_err(&ctx))?;
    }
    let plan = model
        .into_optimized()
        .and_then(|m| m.into_runnable())
        .map_err(backend_err(&ctx))?;
    Ok((plan, inputs))
}

fn first_output_row(outputs: TVec<TValue>, what: &str) -> Result<Vec<f32>, EmbeddingError> {
    let out = outputs
        .into_iter()
        .next()
        .ok_or_else(|| EmbeddingError::Backend(format!("{what} model produced no outputs")))?;
    let view = out
        .to_plain_array_view::<f32>()
        .map_err(|e| EmbeddingError::Backend(format!("{what} output is not float32: {e}")))?;
    Ok(view.iter().copied().collect())
}

impl OnnxEncoder {
    pub fn load(spec: &EncoderSpec) -> Result<Self, EmbeddingError> {
        let text_path = spec.text_model.as_deref().ok_or(EmbeddingError::MissingPath(spec.backend, "text_model"))?;
        let image_path = spec.image_model.as_deref().ok_or(EmbeddingError::MissingPath(spec.backend, "image_model"))?;
        for p in [text_path, image_path] {
            if !p.exists() {
                return Err(EmbeddingError::MissingFile(p.to_path_buf()));
            }
        }
        let tokenizer = match &spec.vocab {
            Some(path) => ClipTokenizer::from_vocab_file(path)?,
            None => ClipTokenizer::bundled(),
        };
        let ids_fact = InferenceFact::dt_shape(i64::datum_type(), tvec!(1, CONTEXT_LENGTH));
        let (text, text_inputs) = load_plan(text_path, &[ids_fact.clone(), ids_fact])?;
        let pixel_fact = InferenceFact::dt_shape(f32::datum_type(), tvec!(1, FRAME_CHANNELS, FRAME_SIZE, FRAME_SIZE));
        let (image, _) = load_plan(image_path, &[pixel_fact])?;
        let encoder = Self {
            text,
            text_takes_mask: text_inputs == 2,
            image,
            tokenizer,
            dim: spec.embed_dim,
        };
        encoder.self_check()?;
        Ok(encoder)
    }

    /// Runs one text and one blank frame through both towers so that shape
    /// or dimension problems surface at load time rather than mid-run.
    fn self_check(&self) -> Result<(), EmbeddingError> {
        let t = self.encode_texts(&["a photo of a person.".to_string()])?;
        let blank = Frame::new(FRAME_SIZE, FRAME_SIZE, FRAME_CHANNELS, vec![0.0; FRAME_SIZE * FRAME_SIZE * FRAME_CHANNELS])
            .expect("blank frame has the right size");
        let v = self.encode_frames(&[blank])?;
        log::debug!("onnx self-check passed: text dim {}, image dim {}", t.dim(), v.dim());
        Ok(())
    }

    fn encode_text(&self, text: &str) -> Result<Vec<f32>, EmbeddingError> {
        let (ids, len) = self.tokenizer.tokenize(text)?;
        let ids = Tensor::from_shape(&[1, CONTEXT_LENGTH], &ids).map_err(|e| EmbeddingError::Backend(e.to_string()))?;
        let mut inputs: TVec<TValue> = tvec!(ids.into_tvalue());
        if self.text_takes_mask {
            let mut mask = [0i64; CONTEXT_LENGTH];
            mask[..len].fill(1);
            let mask =
                Tensor::from_shape(&[1, CONTEXT_LENGTH], &mask).map_err(|e| EmbeddingError::Backend(e.to_string()))?;
            inputs.push(mask.into_tvalue());
        }
        let out = self.text.run(inputs).map_err(backend_err("text model"))?;
        self.checked_row(first_output_row(out, "text")?)
    }

    fn encode_frame(&self, frame: &Frame) -> Result<Vec<f32>, EmbeddingError> {
        let pixels = Tensor::from_shape(&[1, FRAME_CHANNELS, FRAME_SIZE, FRAME_SIZE], frame.data())
            .map_err(|e| EmbeddingError::Backend(e.to_string()))?;
        let out = self.image.run(tvec!(pixels.into_tvalue())).map_err(backend_err("image model"))?;
        self.checked_row(first_output_row(out, "image")?)
    }

    fn checked_row(&self, row: Vec<f32>) -> Result<Vec<f32>, EmbeddingError> {
        if row.len() != self.dim {
            return Err(EmbeddingError::DimMismatch {
                expected: self.dim,
                actual: row.len(),
            });
        }
        Ok(row)
    }
}

impl Encoder for OnnxEncoder {
    fn embed_dim(&self) -> usize {
        self.dim
    }

    fn encode_texts(&self, texts: &[String]) -> Result<EmbeddingMatrix, EmbeddingError> {
        if texts.is_empty() {
            return Err(EmbeddingError::EmptyInput);
        }
        let mut data = Vec::with_capacity(texts.len() * self.dim);
        for t in texts {
            data.extend(self.encode_text(t)?);
        }
        let m = EmbeddingMatrix::new(self.dim, data).expect("rows checked against dim");
        ensure_finite(&m)?;
        Ok(m)
    }

    fn encode_frames(&self, frames: &[Frame]) -> Result<EmbeddingMatrix, EmbeddingError> {
        if frames.is_empty() {
            return Err(EmbeddingError::EmptyInput);
        }
        check_frame_shapes(frames)?;
        let mut data = Vec::with_capacity(frames.len() * self.dim);
        for f in frames {
            data.extend(self.encode_frame(f)?);
        }
        let m = EmbeddingMatrix::new(self.dim, data).expect("rows checked against dim");
        ensure_finite(&m)?;
        Ok(m)
    }
}
