use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Provenance {
    Real,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    /// Stable identity of the example within its source (index for real data).
    pub id: u64,
    pub features: Tensor,
    pub label: usize,
    pub provenance: Provenance,
}

/// Ordered examples over `num_classes` classes with a cached class histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    examples: Vec<LabeledExample>,
    num_classes: usize,
    class_counts: Vec<usize>,
}

impl LabeledDataset {
    pub fn new(examples: Vec<LabeledExample>, num_classes: usize) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::Domain("dataset needs at least one class".into()));
        }
        let mut class_counts = vec![0; num_classes];
        if let Some(first) = examples.first() {
            let shape = first.features.shape();
            for (i, ex) in examples.iter().enumerate() {
                if ex.label >= num_classes {
                    return Err(Error::Index(format!(
                        "example {i} has label {} outside [0, {num_classes})",
                        ex.label
                    )));
                }
                if ex.features.shape() != shape {
                    return Err(Error::Dimension(format!(
                        "example {i} has shape {:?}, dataset uses {shape:?}",
                        ex.features.shape()
                    )));
                }
                class_counts[ex.label] += 1;
            }
        }
        Ok(Self {
            examples,
            num_classes,
            class_counts,
        })
    }

    pub fn empty(num_classes: usize) -> Self {
        Self {
            examples: Vec::new(),
            num_classes,
            class_counts: vec![0; num_classes],
        }
    }

    pub fn examples(&self) -> &[LabeledExample] {
        &self.examples
    }

    pub fn into_examples(self) -> Vec<LabeledExample> {
        self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn class_counts(&self) -> &[usize] {
        &self.class_counts
    }

    /// Classes with at least one example, ascending.
    pub fn held_classes(&self) -> Vec<usize> {
        (0..self.num_classes)
            .filter(|&c| self.class_counts[c] > 0)
            .collect()
    }

    pub fn feature_shape(&self) -> Option<&[usize]> {
        self.examples.first().map(|e| e.features.shape())
    }

    /// `Synthetic` when every example is synthetic, `Real` otherwise.
    pub fn provenance(&self) -> Provenance {
        if !self.examples.is_empty()
            && self
                .examples
                .iter()
                .all(|e| e.provenance == Provenance::Synthetic)
        {
            Provenance::Synthetic
        } else {
            Provenance::Real
        }
    }

    pub fn of_class(&self, class: usize) -> impl Iterator<Item = &LabeledExample> {
        self.examples.iter().filter(move |e| e.label == class)
    }

    /// Stacks the selected examples into a `[n, ...]` batch plus their labels.
    pub fn batch(&self, indices: &[usize]) -> Result<(Tensor, Vec<usize>)> {
        let feats: Vec<&Tensor> = indices
            .iter()
            .map(|&i| &self.examples[i].features)
            .collect();
        let labels = indices.iter().map(|&i| self.examples[i].label).collect();
        Ok((Tensor::stack(&feats)?, labels))
    }

    /// Appends examples, re-validating shape and labels.
    pub fn extend(&mut self, more: impl IntoIterator<Item = LabeledExample>) -> Result<()> {
        let mut examples = std::mem::take(&mut self.examples);
        examples.extend(more);
        *self = Self::new(examples, self.num_classes)?;
        Ok(())
    }

    /// Selects examples by index, preserving the given order.
    pub fn select(&self, indices: &[usize]) -> LabeledDataset {
        let examples: Vec<_> = indices.iter().map(|&i| self.examples[i].clone()).collect();
        let mut class_counts = vec![0; self.num_classes];
        for e in &examples {
            class_counts[e.label] += 1;
        }
        LabeledDataset {
            examples,
            num_classes: self.num_classes,
            class_counts,
        }
    }

    /// Indices of each class's examples in dataset order.
    pub fn class_indices(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_classes];
        for (i, e) in self.examples.iter().enumerate() {
            out[e.label].push(i);
        }
        out
    }
}
