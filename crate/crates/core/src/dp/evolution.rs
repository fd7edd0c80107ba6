//! Evolution-style private synthetic data generation.
//!
//! Each iteration proposes candidates, asks a DP nearest-neighbour histogram
//! how many private points each candidate represents, keeps the best-voted
//! candidates, resamples them in proportion to their (clipped) votes and
//! perturbs the copies. Private data enters only through the histograms, so
//! everything after each release is post-processing.

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::data::{LabeledDataset, LabeledExample, Provenance};
use crate::dp::budget::PrivacyBudget;
use crate::dp::histogram::noisy_histogram;
use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    PrivateEvolutionLite,
    HeldOutOracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub kind: GeneratorKind,
    /// Histogram releases per generated class.
    pub iterations: usize,
    pub population: usize,
    pub survivors: usize,
    /// Standard deviation of the additive perturbation.
    pub variation_scale: f64,
    /// Total budget per generating client.
    pub epsilon: f64,
    pub delta: f64,
    /// Initial candidates are drawn uniformly from this box and every
    /// variation is clamped to it.
    pub feature_range: (f32, f32),
    /// Held-out oracle only: sample with replacement.
    pub oracle_with_replacement: bool,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            kind: GeneratorKind::HeldOutOracle,
            iterations: 5,
            population: 200,
            survivors: 50,
            variation_scale: 0.1,
            epsilon: 10.0,
            delta: 1e-5,
            feature_range: (0.0, 1.0),
            oracle_with_replacement: true,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Domain(
                "generator needs at least one iteration".into(),
            ));
        }
        if self.population == 0 || self.survivors == 0 || self.survivors > self.population {
            return Err(Error::Domain(format!(
                "need 1 <= survivors ({}) <= population ({})",
                self.survivors, self.population
            )));
        }
        if !(self.variation_scale >= 0.0 && self.variation_scale.is_finite()) {
            return Err(Error::Domain(
                "variation_scale must be finite and >= 0".into(),
            ));
        }
        let (lo, hi) = self.feature_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Domain(format!("bad feature range ({lo}, {hi})")));
        }
        Ok(())
    }

    /// Budget for a client that will generate `classes` classes.
    pub fn client_budget(&self, classes: usize) -> Result<PrivacyBudget> {
        PrivacyBudget::new(
            self.epsilon,
            self.delta,
            (self.iterations * classes.max(1)) as u64,
        )
    }
}

/// Something that answers "how many private points does each candidate
/// represent" with a (possibly noisy) histogram.
pub trait HistogramSource {
    fn release(&mut self, candidates: &[Tensor]) -> Result<Vec<f64>>;
}

/// DP histograms over one class of a private dataset.
pub struct DpHistogram<'a, R: Rng> {
    private: Vec<&'a Tensor>,
    budget: &'a mut PrivacyBudget,
    rng: R,
}

impl<'a, R: Rng> DpHistogram<'a, R> {
    pub fn new(private: Vec<&'a Tensor>, budget: &'a mut PrivacyBudget, rng: R) -> Self {
        Self {
            private,
            budget,
            rng,
        }
    }
}

impl<R: Rng> HistogramSource for DpHistogram<'_, R> {
    fn release(&mut self, candidates: &[Tensor]) -> Result<Vec<f64>> {
        noisy_histogram(
            self.private.iter().copied(),
            self.private.len(),
            candidates,
            self.budget,
            &mut self.rng,
        )
    }
}

/// Output of [`evolve`]: final samples plus the mean of each voted candidate set.
pub struct Evolution {
    pub samples: Vec<Tensor>,
    pub population_means: Vec<Vec<f64>>,
}

fn mean_of(items: &[Tensor]) -> Vec<f64> {
    let mut mean = vec![0.0; items.first().map_or(0, Tensor::len)];
    for t in items {
        for (m, &v) in mean.iter_mut().zip(t.data()) {
            *m += v as f64;
        }
    }
    let n = items.len().max(1) as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}

/// Indices of the `keep` largest votes; ties resolve to the lower index.
fn top_indices(votes: &[f64], keep: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..votes.len()).collect();
    order.sort_by(|&a, &b| votes[b].total_cmp(&votes[a]).then(a.cmp(&b)));
    order.truncate(keep);
    order
}

fn vary(
    base: &Tensor,
    noise: Option<&Normal<f32>>,
    (lo, hi): (f32, f32),
    rng: &mut impl Rng,
) -> Tensor {
    let data = base
        .data()
        .iter()
        .map(|&v| {
            let moved = noise.map_or(v, |n| v + n.sample(&mut *rng));
            moved.clamp(lo, hi)
        })
        .collect();
    Tensor::from_parts_unchecked(base.shape().to_vec(), data)
}

/// Inverse-CDF pick from non-negative weights given `u` in `[0, 1)`; uniform
/// when every weight is zero. Consumes exactly one draw regardless of the
/// weights, so the random stream never depends on the votes' values.
fn weighted_pick(weights: &[f64], u: f64) -> usize {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return ((u * weights.len() as f64) as usize).min(weights.len() - 1);
    }
    let target = u * total;
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if target < acc {
            return i;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Runs the propose / vote / select / vary loop for `config.iterations`
/// releases and returns `count` samples.
pub fn evolve(
    source: &mut impl HistogramSource,
    shape: &[usize],
    count: usize,
    config: &GeneratorConfig,
    rng: &mut impl Rng,
) -> Result<Evolution> {
    config.validate()?;
    let (lo, hi) = config.feature_range;
    let uniform = Uniform::new_inclusive(lo, hi).map_err(|e| Error::Domain(e.to_string()))?;
    let noise = (config.variation_scale > 0.0)
        .then(|| Normal::new(0.0f32, config.variation_scale as f32))
        .transpose()
        .map_err(|e| Error::Domain(e.to_string()))?;
    let per: usize = shape.iter().product();

    let mut candidates: Vec<Tensor> = (0..config.population)
        .map(|_| {
            let data = (0..per).map(|_| uniform.sample(&mut *rng)).collect();
            Tensor::from_parts_unchecked(shape.to_vec(), data)
        })
        .collect();
    let mut population_means = Vec::with_capacity(config.iterations);

    for t in 0..config.iterations {
        population_means.push(mean_of(&candidates));
        let votes = source.release(&candidates)?;
        if votes.len() != candidates.len() {
            return Err(Error::Protocol(format!(
                "histogram has {} bins for {} candidates",
                votes.len(),
                candidates.len()
            )));
        }
        let survivors = top_indices(&votes, config.survivors);
        let target = if t + 1 == config.iterations {
            count
        } else {
            config.population
        };
        let weights: Vec<f64> = survivors.iter().map(|&s| votes[s].max(0.0)).collect();
        let picks: Vec<usize> = (0..target)
            .map(|_| survivors[weighted_pick(&weights, rng.random::<f64>())])
            .collect();
        candidates = picks
            .into_iter()
            .map(|s| vary(&candidates[s], noise.as_ref(), (lo, hi), rng))
            .collect();
    }
    Ok(Evolution {
        samples: candidates,
        population_means,
    })
}

/// Id namespace for generated examples, disjoint from real example ids.
pub const SYNTHETIC_ID_BASE: u64 = 1 << 63;

pub(crate) fn synthetic_examples(samples: Vec<Tensor>, class: usize) -> Vec<LabeledExample> {
    samples
        .into_iter()
        .enumerate()
        .map(|(i, features)| LabeledExample {
            id: SYNTHETIC_ID_BASE | ((class as u64) << 32) | i as u64,
            features,
            label: class,
            provenance: Provenance::Synthetic,
        })
        .collect()
}

/// Generates `count` synthetic examples of `class` from the private examples
/// of that class, spending exactly `config.iterations` releases of `budget`.
pub fn pe_generate(
    private: &LabeledDataset,
    class: usize,
    count: usize,
    config: &GeneratorConfig,
    budget: &mut PrivacyBudget,
    rng: &mut impl Rng,
) -> Result<LabeledDataset> {
    config.validate()?;
    if class >= private.num_classes() {
        return Err(Error::Index(format!(
            "class {class} outside [0, {})",
            private.num_classes()
        )));
    }
    let members: Vec<&Tensor> = private.of_class(class).map(|e| &e.features).collect();
    let Some(first) = members.first() else {
        return Err(Error::Domain(format!(
            "no private examples of class {class}"
        )));
    };
    let shape = first.shape().to_vec();
    if budget.remaining() < config.iterations as u64 {
        return Err(Error::Privacy(format!(
            "generation needs {} releases, budget has {} left",
            config.iterations,
            budget.remaining()
        )));
    }
    let noise_rng = StreamRng::seed_from_u64(rng.random());
    let mut evo_rng = StreamRng::seed_from_u64(rng.random());
    let mut source = DpHistogram::new(members, budget, noise_rng);
    let evolution = evolve(&mut source, &shape, count, config, &mut evo_rng)?;
    LabeledDataset::new(
        synthetic_examples(evolution.samples, class),
        private.num_classes(),
    )
}
