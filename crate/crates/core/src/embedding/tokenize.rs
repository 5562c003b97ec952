//! CLIP byte-pair tokenization with a fixed 77-token context.

use std::io::BufReader;
use std::path::Path;

use instant_clip_tokenizer::{Token, Tokenizer};

use super::EmbeddingError;

pub const CONTEXT_LENGTH: usize = 77;
const VOCAB_SIZE: u16 = 49408;

pub struct ClipTokenizer {
    inner: Tokenizer,
}

impl ClipTokenizer {
    /// The published CLIP vocabulary bundled with the tokenizer crate.
    pub fn bundled() -> Self {
        Self { inner: Tokenizer::new() }
    }

    pub fn from_vocab_file(path: &Path) -> Result<Self, EmbeddingError> {
        let file = std::fs::File::open(path).map_err(|_| EmbeddingError::MissingFile(path.to_path_buf()))?;
        let inner = Tokenizer::with_vocabulary(BufReader::new(file), VOCAB_SIZE).map_err(|e| {
            EmbeddingError::Tokenization {
                text: String::new(),
                reason: format!("bad vocabulary file {}: {e}", path.display()),
            }
        })?;
        Ok(Self { inner })
    }

    /// `[SOT, tokens.., EOT, 0..]` padded to 77 ids, plus the number of
    /// non-padding positions. Over-long texts are truncated with a warning,
    /// always keeping the end-of-text token.
    pub fn tokenize(&self, text: &str) -> Result<([i64; CONTEXT_LENGTH], usize), EmbeddingError> {
        if text.trim().is_empty() {
            return Err(EmbeddingError::Tokenization {
                text: text.to_string(),
                reason: "text is empty".into(),
            });
        }
        let mut tokens: Vec<Token> = vec![self.inner.start_of_text()];
        self.inner.encode(text, &mut tokens);
        if tokens.len() > CONTEXT_LENGTH - 1 {
            log::warn!(
                "text of {} tokens truncated to the {CONTEXT_LENGTH}-token context: {:?}",
                tokens.len() - 1,
                text
            );
            tokens.truncate(CONTEXT_LENGTH - 1);
        }
        tokens.push(self.inner.end_of_text());
        let mut ids = [0i64; CONTEXT_LENGTH];
        for (slot, t) in ids.iter_mut().zip(&tokens) {
            *slot = i64::from(t.to_u16());
        }
        Ok((ids, tokens.len()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_reference_ids() {
        let t = ClipTokenizer::bundled();
        let (ids, len) = t.tokenize("Hi there").unwrap();
        assert_eq!(&ids[..4], [49406, 1883, 997, 49407]);
        assert_eq!(len, 4);
        assert!(ids[4..].iter().all(|&i| i == 0));
    }

    #[test]
    fn long_text_is_truncated_not_rejected() {
        let t = ClipTokenizer::bundled();
        let long = "snowboarding ".repeat(200);
        let (ids, len) = t.tokenize(&long).unwrap();
        assert_eq!(len, CONTEXT_LENGTH);
        assert_eq!(ids[0], 49406);
        assert_eq!(ids[CONTEXT_LENGTH - 1], 49407);
    }

    #[test]
    fn empty_text_is_an_error() {
        assert!(matches!(
            ClipTokenizer::bundled().tokenize("  "),
            Err(EmbeddingError::Tokenization { .. })
        ));
    }
}
