//! Global-model evaluation: confusion matrices, top-1 accuracy, per-class
//! recall, and mean ± standard deviation across seeds.

pub mod report;

use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::nn::{forward, ModelParams};

/// `K × K` counts; rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn from_predictions(classes: usize, truth: &[usize], predicted: &[usize]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::Dimension(format!(
                "{} labels vs {} predictions",
                truth.len(),
                predicted.len()
            )));
        }
        let mut m = Self::new(classes);
        for (&t, &p) in truth.iter().zip(predicted) {
            m.record(t, p)?;
        }
        Ok(m)
    }

    pub fn from_flat(classes: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != classes * classes {
            return Err(Error::Dimension(format!(
                "{} counts for a {classes}x{classes} matrix",
                counts.len()
            )));
        }
        Ok(Self { classes, counts })
    }

    pub fn record(&mut self, truth: usize, predicted: usize) -> Result<()> {
        if truth >= self.classes || predicted >= self.classes {
            return Err(Error::Index(format!(
                "({truth}, {predicted}) outside a {}-class matrix",
                self.classes
            )));
        }
        self.counts[truth * self.classes + predicted] += 1;
        Ok(())
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn row_sum(&self, truth: usize) -> u64 {
        self.counts[truth * self.classes..(truth + 1) * self.classes]
            .iter()
            .sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|c| self.get(c, c)).sum()
    }

    pub fn flat(&self) -> &[u64] {
        &self.counts
    }
}

/// Metrics of the global model after one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub round: usize,
    pub top1_accuracy: f64,
    /// `confusion[c][c] / rowsum(c)`, or 0 for classes absent from the test set.
    pub per_class_recall: Vec<f64>,
    /// Classes with no test examples; their recall is reported as 0.
    pub absent_classes: Vec<usize>,
    pub confusion: ConfusionMatrix,
}

impl RoundLog {
    pub fn from_confusion(round: usize, confusion: ConfusionMatrix) -> Result<Self> {
        let total = confusion.total();
        if total == 0 {
            return Err(Error::Domain("cannot score an empty test set".into()));
        }
        let k = confusion.classes();
        let mut absent_classes = Vec::new();
        let per_class_recall = (0..k)
            .map(|c| match confusion.row_sum(c) {
                0 => {
                    absent_classes.push(c);
                    0.0
                }
                n => confusion.get(c, c) as f64 / n as f64,
            })
            .collect();
        let log = Self {
            round,
            top1_accuracy: confusion.trace() as f64 / total as f64,
            per_class_recall,
            absent_classes,
            confusion,
        };
        log.check_identities()?;
        Ok(log)
    }

    /// Accuracy equals trace/total and each recall equals diagonal/rowsum.
    pub fn check_identities(&self) -> Result<()> {
        let m = &self.confusion;
        let acc = m.trace() as f64 / m.total() as f64;
        if self.top1_accuracy != acc {
            return Err(Error::Numeric(format!(
                "accuracy {} != trace/total {acc}",
                self.top1_accuracy
            )));
        }
        for c in 0..m.classes() {
            let expected = match m.row_sum(c) {
                0 => 0.0,
                n => m.get(c, c) as f64 / n as f64,
            };
            if self.per_class_recall[c] != expected {
                return Err(Error::Numeric(format!(
                    "recall[{c}] {} != diagonal/rowsum {expected}",
                    self.per_class_recall[c]
                )));
            }
        }
        Ok(())
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(row: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

const EVAL_BATCH: usize = 256;

/// Predicted class for every example, evaluated in fixed-size shards.
pub fn predict(model: &ModelParams, data: &LabeledDataset) -> Result<Vec<usize>> {
    let k = model.architecture().num_classes();
    let mut out = Vec::with_capacity(data.len());
    let indices: Vec<usize> = (0..data.len()).collect();
    for shard in indices.chunks(EVAL_BATCH) {
        let (batch, _) = data.batch(shard)?;
        let lp = forward(model, &batch)?;
        out.extend(lp.data().chunks_exact(k).map(argmax));
    }
    Ok(out)
}

/// Scores `model` on `test`; the returned log has round 0.
pub fn evaluate(model: &ModelParams, test: &LabeledDataset) -> Result<RoundLog> {
    if test.is_empty() {
        return Err(Error::Domain("test set is empty".into()));
    }
    let k = model.architecture().num_classes();
    if test.num_classes() != k {
        return Err(Error::Dimension(format!(
            "model predicts {k} classes, test set has {}",
            test.num_classes()
        )));
    }
    let predicted = predict(model, test)?;
    let truth: Vec<usize> = test.examples().iter().map(|e| e.label).collect();
    RoundLog::from_confusion(0, ConfusionMatrix::from_predictions(k, &truth, &predicted)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub final_accuracies: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (n − 1); 0 for a single run.
    pub std: f64,
    pub per_class_mean_recall: Vec<f64>,
}

/// Order-independent mean: values are summed in sorted order.
fn sorted_mean(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn summarize(runs: &[RoundLog]) -> Result<RunSummary> {
    let first = runs
        .first()
        .ok_or_else(|| Error::Domain("summary needs at least one run".into()))?;
    let final_accuracies: Vec<f64> = runs.iter().map(|r| r.top1_accuracy).collect();
    let n = runs.len();
    let mean = sorted_mean(&final_accuracies);
    let std = if n < 2 {
        0.0
    } else {
        let sq: Vec<f64> = final_accuracies
            .iter()
            .map(|a| (a - mean).powi(2))
            .collect();
        (sorted_mean(&sq) * n as f64 / (n - 1) as f64).sqrt()
    };
    let k = first.per_class_recall.len();
    let per_class_mean_recall = (0..k)
        .map(|c| {
            let v: Vec<f64> = runs.iter().map(|r| r.per_class_recall[c]).collect();
            sorted_mean(&v)
        })
        .collect();
    Ok(RunSummary {
        final_accuracies,
        mean,
        std,
        per_class_mean_recall,
    })
}
