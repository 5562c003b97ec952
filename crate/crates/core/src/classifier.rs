//! Mean embeddings, cosine ranking and top-k hits.
//!
//! A video embedding is the mean of its frame embeddings; a class embedding
//! is the mean of its descriptor-text embeddings. Classes are ranked by
//! cosine similarity to the video embedding. All arithmetic is f64.

use crate::embedding::{EmbeddingError, EmbeddingMatrix, EmbeddingTable};
use crate::label::ActionClass;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ClassifierError {
    #[error("cannot average an empty embedding matrix")]
    Empty,
    #[error("embedding dimension mismatch: {expected} vs {actual}")]
    DimMismatch { expected: usize, actual: usize },
    #[error("{0} has zero norm; this points to an upstream encoding problem")]
    Degenerate(String),
    #[error("no classes to rank")]
    NoClasses,
    #[error("top-k with k={k} is out of range for {len} ranked classes")]
    TopK { k: usize, len: usize },
    #[error("class index {0} is not in the ranking")]
    UnknownClass(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Option<Self> {
        (!values.is_empty() && values.iter().all(|v| v.is_finite())).then_some(Self { values })
    }

    pub fn from_f32(values: &[f32]) -> Option<Self> {
        Self::new(values.iter().map(|&v| f64::from(v)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum()
    }

    pub fn to_f32(&self) -> Vec<f32> {
        self.values.iter().map(|&v| v as f32).collect()
    }
}

/// Componentwise mean of the rows. With `normalize_rows`, each row is first
/// scaled to unit length (a zero row is then an error).
pub fn mean_embedding(rows: &EmbeddingMatrix, normalize_rows: bool) -> Result<EmbeddingVector, ClassifierError> {
    if rows.is_empty() {
        return Err(ClassifierError::Empty);
    }
    let mut sum = vec![0f64; rows.dim()];
    for (i, row) in rows.iter_rows().enumerate() {
        let scale = if normalize_rows {
            let n = row.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt();
            if n == 0.0 {
                return Err(ClassifierError::Degenerate(format!("row {i}")));
            }
            1.0 / n
        } else {
            1.0
        };
        for (s, &v) in sum.iter_mut().zip(row) {
            *s += f64::from(v) * scale;
        }
    }
    let n = rows.rows() as f64;
    Ok(EmbeddingVector {
        values: sum.into_iter().map(|s| s / n).collect(),
    })
}

pub fn video_embedding(frame_embs: &EmbeddingMatrix) -> Result<EmbeddingVector, ClassifierError> {
    mean_embedding(frame_embs, false)
}

pub fn class_embedding(text_embs: &EmbeddingMatrix) -> Result<EmbeddingVector, ClassifierError> {
    mean_embedding(text_embs, false)
}

/// A class's mean descriptor embedding, tagged with its index in the label
/// space (the tie-breaker) and the number of texts averaged.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassEmbedding {
    pub index: usize,
    pub action: ActionClass,
    pub z: EmbeddingVector,
    pub texts: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedClass {
    pub index: usize,
    pub action: ActionClass,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    ranking: Vec<RankedClass>,
}

impl Prediction {
    /// Sorted by score descending, ties by ascending class index.
    pub fn ranking(&self) -> &[RankedClass] {
        &self.ranking
    }

    pub fn predicted(&self) -> &RankedClass {
        &self.ranking[0]
    }

    pub fn top(&self, k: usize) -> &[RankedClass] {
        &self.ranking[..k.min(self.ranking.len())]
    }

    /// Position of a class in the ranking.
    pub fn rank_of(&self, class_index: usize) -> Option<usize> {
        self.ranking.iter().position(|r| r.index == class_index)
    }
}

pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> f64 {
    a.dot(b) / (a.norm() * b.norm())
}

pub fn predict(vbar: &EmbeddingVector, classes: &[ClassEmbedding]) -> Result<Prediction, ClassifierError> {
    if classes.is_empty() {
        return Err(ClassifierError::NoClasses);
    }
    let vnorm = vbar.norm();
    if vnorm == 0.0 {
        return Err(ClassifierError::Degenerate("video embedding".into()));
    }
    let mut ranking = Vec::with_capacity(classes.len());
    for c in classes {
        if c.z.dim() != vbar.dim() {
            return Err(ClassifierError::DimMismatch {
                expected: vbar.dim(),
                actual: c.z.dim(),
            });
        }
        let znorm = c.z.norm();
        if znorm == 0.0 {
            return Err(ClassifierError::Degenerate(format!("class embedding of {:?}", c.action.raw_id())));
        }
        ranking.push(RankedClass {
            index: c.index,
            action: c.action.clone(),
            score: c.z.dot(vbar) / (znorm * vnorm),
        });
    }
    ranking.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.index.cmp(&b.index)));
    Ok(Prediction { ranking })
}

/// Whether class `truth` is among the first `k` ranked classes.
pub fn topk_hit(prediction: &Prediction, truth: usize, k: usize) -> Result<bool, ClassifierError> {
    let len = prediction.ranking.len();
    if k == 0 || k > len {
        return Err(ClassifierError::TopK { k, len });
    }
    let rank = prediction.rank_of(truth).ok_or(ClassifierError::UnknownClass(truth))?;
    Ok(rank < k)
}

/// Stores class embeddings keyed by raw class id, as f32.
pub fn class_table(classes: &[ClassEmbedding]) -> Result<EmbeddingTable, EmbeddingError> {
    let dim = classes.first().map(|c| c.z.dim()).ok_or(EmbeddingError::EmptyInput)?;
    let mut table = EmbeddingTable::new(dim);
    for c in classes {
        table.insert(c.action.raw_id(), &c.z.to_f32())?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn class(index: usize, z: &[f64]) -> ClassEmbedding {
        ClassEmbedding {
            index,
            action: ActionClass::new(format!("class_{index}")).unwrap(),
            z: EmbeddingVector::new(z.to_vec()).unwrap(),
            texts: 1,
        }
    }

    #[test]
    fn means() {
        let m = EmbeddingMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(video_embedding(&m).unwrap().values(), [0.5, 0.5]);
        let m = EmbeddingMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 2.0]]).unwrap();
        assert_eq!(class_embedding(&m).unwrap().values(), [1.0, 1.0]);
        let m = EmbeddingMatrix::from_rows(&[vec![0.3f32, -7.0]]).unwrap();
        assert_eq!(video_embedding(&m).unwrap().values(), [f64::from(0.3f32), -7.0]);
    }

    #[test]
    fn normalized_mean() {
        let m = EmbeddingMatrix::from_rows(&[vec![3.0, 0.0], vec![0.0, 0.5]]).unwrap();
        assert_eq!(mean_embedding(&m, true).unwrap().values(), [0.5, 0.5]);
        let z = EmbeddingMatrix::from_rows(&[vec![0.0, 0.0]]).unwrap();
        assert!(matches!(mean_embedding(&z, true), Err(ClassifierError::Degenerate(_))));
    }

    #[test]
    fn two_class_geometry() {
        let v = EmbeddingVector::new(vec![0.9, 0.1]).unwrap();
        let p = predict(&v, &[class(0, &[1.0, 0.0]), class(1, &[0.0, 1.0])]).unwrap();
        assert_eq!(p.predicted().index, 0);
        let n = 0.82f64.sqrt();
        assert!((p.ranking()[0].score - 0.9 / n).abs() < 1e-12);
        assert!((p.ranking()[1].score - 0.1 / n).abs() < 1e-12);
        assert!((p.ranking()[0].score - 0.994).abs() < 1e-3);
        assert!((p.ranking()[1].score - 0.110).abs() < 1e-3);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let v = EmbeddingVector::new(vec![1.0, 1.0]).unwrap();
        let classes = [class(3, &[1.0, 0.0]), class(1, &[0.0, 1.0]), class(2, &[0.0, 2.0])];
        let p = predict(&v, &classes).unwrap();
        let order: Vec<_> = p.ranking().iter().map(|r| r.index).collect();
        assert_eq!(order, [1, 2, 3]);
    }

    #[test]
    fn zero_norm_is_an_error() {
        let v = EmbeddingVector::new(vec![0.0, 0.0]).unwrap();
        assert!(matches!(predict(&v, &[class(0, &[1.0, 0.0])]), Err(ClassifierError::Degenerate(_))));
        let v = EmbeddingVector::new(vec![1.0, 0.0]).unwrap();
        assert!(matches!(predict(&v, &[class(0, &[0.0, 0.0])]), Err(ClassifierError::Degenerate(_))));
        assert_eq!(predict(&v, &[]), Err(ClassifierError::NoClasses));
    }

    #[test]
    fn topk_boundaries() {
        let v = EmbeddingVector::new(vec![1.0, 0.0]).unwrap();
        let classes: Vec<_> = (0..6)
            .map(|i| class(i, &[1.0, i as f64]))
            .collect();
        let p = predict(&v, &classes).unwrap();
        let fifth = p.ranking()[4].index;
        assert!(topk_hit(&p, p.predicted().index, 1).unwrap());
        assert!(topk_hit(&p, fifth, 5).unwrap());
        assert!(!topk_hit(&p, fifth, 4).unwrap());
        assert!(topk_hit(&p, fifth, 0).is_err());
        assert!(topk_hit(&p, fifth, 7).is_err());
    }

    #[test]
    fn table_dump_uses_raw_ids() {
        let t = class_table(&[class(0, &[1.0, 2.0])]).unwrap();
        assert_eq!(t.get("class_0").unwrap(), [1.0, 2.0]);
    }
}
