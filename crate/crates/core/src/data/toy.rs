use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::dataset::{LabeledDataset, LabeledExample, Provenance};
use crate::error::{Error, Result};
use crate::rng::{self, Purpose};
use crate::tensor::Tensor;

/// Parameters of the Gaussian-cluster toy dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToySpec {
    pub num_classes: usize,
    pub per_class: usize,
    pub feature_dim: usize,
    pub separation: f64,
    /// Clusters per class.
    pub modes: usize,
    pub seed: u64,
}

impl ToySpec {
    /// Unit-variance Gaussian clusters.
    ///
    /// With one mode per class and `feature_dim >= num_classes`, class `c`
    /// is centred on `s · e_c`, so every pair of means is `s·√2` apart; with
    /// fewer dimensions the centres sit evenly on a circle of radius `s` in
    /// the first two coordinates (on a line with spacing `s` when F = 1).
    /// With several modes every cluster centre is drawn from `N(0, s²I)`.
    ///
    /// Example `i` has class `i mod K` and mode `(i / K) mod modes`.
    pub fn generate(&self) -> Result<LabeledDataset> {
        let (k, f) = (self.num_classes, self.feature_dim);
        if k < 2 || self.per_class == 0 || f == 0 || self.modes == 0 {
            return Err(Error::Domain(format!(
                "toy dataset needs K>=2, n>=1, F>=1, modes>=1; got K={k} n={} F={f} modes={}",
                self.per_class, self.modes
            )));
        }
        let mut rng = rng::stream(self.seed, Purpose::Toy, &[]);
        let centres = if self.modes == 1 {
            single_mode_centres(k, f, self.separation)
        } else {
            (0..k * self.modes)
                .map(|_| {
                    (0..f)
                        .map(|_| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            self.separation * z
                        })
                        .collect()
                })
                .collect::<Vec<Vec<f64>>>()
        };
        let examples = (0..k * self.per_class)
            .map(|i| {
                let label = i % k;
                let mode = (i / k) % self.modes;
                let data = centres[label * self.modes + mode]
                    .iter()
                    .map(|&m| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        (m + z) as f32
                    })
                    .collect();
                LabeledExample {
                    id: i as u64,
                    features: Tensor::from_parts_unchecked(vec![f], data),
                    label,
                    provenance: Provenance::Real,
                }
            })
            .collect();
        LabeledDataset::new(examples, k)
    }
}

/// Single-mode toy dataset; see [`ToySpec::generate`].
pub fn make_toy_dataset(
    num_classes: usize,
    per_class: usize,
    feature_dim: usize,
    separation: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    ToySpec {
        num_classes,
        per_class,
        feature_dim,
        separation,
        modes: 1,
        seed,
    }
    .generate()
}

fn single_mode_centres(k: usize, f: usize, s: f64) -> Vec<Vec<f64>> {
    if f >= k {
        return (0..k)
            .map(|c| (0..f).map(|j| if j == c { s } else { 0.0 }).collect())
            .collect();
    }
    let step = std::f64::consts::TAU / k as f64;
    (0..k)
        .map(|c| {
            let mut centre = vec![0.0; f];
            if f == 1 {
                centre[0] = s * c as f64;
            } else {
                centre[0] = s * (step * c as f64).cos();
                centre[1] = s * (step * c as f64).sin();
            }
            centre
        })
        .collect()
}
