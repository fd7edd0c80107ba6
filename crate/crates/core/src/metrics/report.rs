//! Text outputs: the per-round JSON-lines stream, the summary table and
//! confusion-matrix grids.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::codec::{read_file, write_atomic};
use crate::error::{Error, Result};
use crate::metrics::{ConfusionMatrix, RoundLog, RunSummary};

/// One line of the round stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub run_id: String,
    pub algorithm: String,
    pub seed: u64,
    pub round: usize,
    pub accuracy: f64,
    pub recall: Vec<f64>,
    pub classes: usize,
    /// Row-major confusion counts.
    pub confusion: Vec<u64>,
}

impl RoundRecord {
    pub fn new(run_id: &str, algorithm: &str, seed: u64, log: &RoundLog) -> Self {
        Self {
            run_id: run_id.to_string(),
            algorithm: algorithm.to_string(),
            seed,
            round: log.round,
            accuracy: log.top1_accuracy,
            recall: log.per_class_recall.clone(),
            classes: log.confusion.classes(),
            confusion: log.confusion.flat().to_vec(),
        }
    }

    /// Rebuilds the log from the confusion counts and checks the stored
    /// accuracy and recall agree with them.
    pub fn to_log(&self) -> Result<RoundLog> {
        let m = ConfusionMatrix::from_flat(self.classes, self.confusion.clone())?;
        let log = RoundLog::from_confusion(self.round, m)?;
        if log.top1_accuracy != self.accuracy || log.per_class_recall != self.recall {
            return Err(Error::Numeric(format!(
                "record {} round {} disagrees with its confusion matrix",
                self.run_id, self.round
            )));
        }
        Ok(log)
    }
}

pub fn write_round_stream(path: &Path, records: &[RoundRecord]) -> Result<()> {
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r).expect("record serializes"));
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}

pub fn read_round_stream(path: &Path) -> Result<Vec<RoundRecord>> {
    let bytes = read_file(path)?;
    let text = String::from_utf8(bytes).map_err(|_| Error::format(path, "not utf-8"))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::format(path, format!("line {}: {e}", i + 1)))
        })
        .collect()
}

/// One approach's row of the summary table.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub approach: String,
    pub augmentation: bool,
    /// Share cap in percent of a client's classes (0 without augmentation).
    pub shared_percent: f64,
    pub classes_per_client: Option<usize>,
    pub summary: RunSummary,
}

/// Tab-separated table: approach, augmentation flag, share percentage,
/// classes per client, accuracy mean ± std in percent, then per-class mean
/// recall in percent.
pub fn summary_table(rows: &[SummaryRow]) -> String {
    let k = rows
        .first()
        .map_or(0, |r| r.summary.per_class_mean_recall.len());
    let mut out = String::from(
        "approach\taugmentation\tshared_pct\tclasses_per_client\taccuracy_mean_pct\taccuracy_std_pct\taccuracy",
    );
    for c in 0..k {
        let _ = write!(out, "\trecall_{c}_pct");
    }
    out.push('\n');
    for r in rows {
        let s = &r.summary;
        let _ = write!(
            out,
            "{}\t{}\t{:.0}\t{}\t{:.2}\t{:.2}\t{:.2}±{:.2}%",
            r.approach,
            if r.augmentation { "yes" } else { "no" },
            r.shared_percent,
            r.classes_per_client
                .map_or_else(|| "all".to_string(), |c| c.to_string()),
            100.0 * s.mean,
            100.0 * s.std,
            100.0 * s.mean,
            100.0 * s.std,
        );
        for v in &s.per_class_mean_recall {
            let _ = write!(out, "\t{:.2}", 100.0 * v);
        }
        out.push('\n');
    }
    out
}

/// Comma-separated grid with a header row of predicted classes and one row
/// per true class.
pub fn confusion_grid(m: &ConfusionMatrix) -> String {
    let k = m.classes();
    let mut out = String::from("true\\pred");
    for c in 0..k {
        let _ = write!(out, ",{c}");
    }
    out.push('\n');
    for t in 0..k {
        let _ = write!(out, "{t}");
        for p in 0..k {
            let _ = write!(out, ",{}", m.get(t, p));
        }
        out.push('\n');
    }
    out
}

/// Element-wise sum of several matrices of equal size.
pub fn sum_confusions<'a>(
    items: impl IntoIterator<Item = &'a ConfusionMatrix>,
) -> Result<ConfusionMatrix> {
    let mut iter = items.into_iter();
    let first = iter
        .next()
        .ok_or_else(|| Error::Domain("no confusion matrices to sum".into()))?;
    let mut counts = first.flat().to_vec();
    for m in iter {
        if m.classes() != first.classes() {
            return Err(Error::Dimension("confusion matrices differ in size".into()));
        }
        counts.iter_mut().zip(m.flat()).for_each(|(a, b)| *a += b);
    }
    ConfusionMatrix::from_flat(first.classes(), counts)
}
