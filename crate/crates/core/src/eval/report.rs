use std::fmt::Write as _;
use std::path::PathBuf;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::config::RunConfig;

/// Outcome for one scored video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleResult {
    pub path: PathBuf,
    pub truth: usize,
    pub predicted: usize,
    /// Class indices of the top-k ranking.
    pub top: Vec<usize>,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedSample {
    pub path: PathBuf,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub name: String,
    pub top1: f64,
    pub top5: f64,
    /// Samples that were scored; the accuracy denominator.
    pub scored: usize,
    pub excluded: Vec<ExcludedSample>,
    pub samples: Vec<SampleResult>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub top1: f64,
    pub top5: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub classes: usize,
    /// `k` used for the "top5" column: five, or fewer with fewer classes.
    pub top_k: usize,
    pub per_split: Vec<SplitReport>,
    pub aggregate: Accuracy,
    pub started_at: DateTime<Utc>,
    pub wall_time_secs: f64,
    pub config: RunConfig,
}

/// Unweighted mean of per-split accuracies.
pub fn aggregate(splits: &[Accuracy]) -> Accuracy {
    let n = splits.len() as f64;
    Accuracy {
        top1: splits.iter().map(|s| s.top1).sum::<f64>() / n,
        top5: splits.iter().map(|s| s.top5).sum::<f64>() / n,
    }
}

impl EvalReport {
    pub fn excluded_count(&self) -> usize {
        self.per_split.iter().map(|s| s.excluded.len()).sum()
    }

    /// Copy with the timing fields cleared, for comparing runs.
    pub fn without_timing(&self) -> Self {
        Self {
            started_at: DateTime::<Utc>::UNIX_EPOCH,
            wall_time_secs: 0.0,
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Aligned text table with accuracies in percent.
    pub fn to_table(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .per_split
            .iter()
            .map(|s| {
                vec![
                    s.name.clone(),
                    s.scored.to_string(),
                    s.excluded.len().to_string(),
                    pct(s.top1),
                    pct(s.top5),
                ]
            })
            .chain(std::iter::once(vec![
                "mean".to_string(),
                String::new(),
                String::new(),
                pct(self.aggregate.top1),
                pct(self.aggregate.top5),
            ]))
            .collect();
        let top = format!("top{}", self.top_k);
        render_table(&["split", "scored", "excluded", "top1", &top], &rows, 1)
    }
}

pub(crate) fn pct(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

/// Renders rows under headers; the first `left` columns are left-aligned,
/// the rest right-aligned.
pub(crate) fn render_table(headers: &[&str], rows: &[Vec<String>], left: usize) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &mut dyn Iterator<Item = &str>| {
        let mut parts = Vec::new();
        for (i, (cell, w)) in cells.zip(&widths).enumerate() {
            parts.push(if i < left { format!("{cell:<w$}") } else { format!("{cell:>w$}") });
        }
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&mut headers.iter().copied());
    for row in rows {
        line(&mut row.iter().map(String::as_str));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregate_is_unweighted_mean() {
        let a = aggregate(&[
            Accuracy { top1: 0.5, top5: 0.9 },
            Accuracy { top1: 0.6, top5: 0.9 },
            Accuracy { top1: 0.7, top5: 0.9 },
        ]);
        assert_eq!(a.top1, 0.6);
    }

    #[test]
    fn table_alignment() {
        let t = render_table(&["name", "x"], &[vec!["a".into(), "10.00".into()], vec!["long".into(), "5".into()]], 1);
        assert_eq!(t, "name      x\na     10.00\nlong      5\n");
    }
}
