use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::LabeledDataset;
use crate::dp::budget::PrivacyBudget;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Number of private points whose nearest candidate (L2 on flattened
/// features) is each candidate; ties go to the lowest candidate index.
pub fn nearest_neighbor_counts<'a>(
    private: impl IntoIterator<Item = &'a Tensor>,
    candidates: &[Tensor],
) -> Vec<u64> {
    let mut counts = vec![0u64; candidates.len()];
    for p in private {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (j, c) in candidates.iter().enumerate() {
            let d = p.squared_distance(c);
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        counts[best] += 1;
    }
    counts
}

/// Nearest-neighbour vote histogram with independent `N(0, σ²)` noise per
/// bin, σ taken from `budget`. Consumes one release from the budget before
/// touching the private data.
pub fn dp_nn_histogram<R: Rng + ?Sized>(
    private: &LabeledDataset,
    candidates: &[Tensor],
    budget: &mut PrivacyBudget,
    rng: &mut R,
) -> Result<Vec<f64>> {
    noisy_histogram(
        private.examples().iter().map(|e| &e.features),
        private.len(),
        candidates,
        budget,
        rng,
    )
}

pub(crate) fn noisy_histogram<'a, R: Rng + ?Sized>(
    private: impl IntoIterator<Item = &'a Tensor>,
    private_len: usize,
    candidates: &[Tensor],
    budget: &mut PrivacyBudget,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if candidates.is_empty() {
        return Err(Error::Domain("no candidates to vote on".into()));
    }
    if private_len == 0 {
        return Err(Error::Domain("private set is empty".into()));
    }
    budget.spend()?;
    let sigma = budget.sigma();
    Ok(nearest_neighbor_counts(private, candidates)
        .into_iter()
        .map(|c| {
            let z: f64 = StandardNormal.sample(rng);
            c as f64 + sigma * z
        })
        .collect())
}
