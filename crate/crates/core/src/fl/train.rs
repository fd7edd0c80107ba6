use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::nn::{loss_and_gradient, sgd_step, Layer, LossConfig, ModelParams};
use crate::tensor::Tensor;

/// Client-side optimiser settings for one round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalTraining {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// FedProx coefficient; `None` trains on the plain NLL loss.
    pub proximal_mu: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalUpdate {
    pub weights: ModelParams,
    /// Mean mini-batch loss of each epoch, measured before each step.
    pub epoch_losses: Vec<f64>,
}

/// Mini-batch SGD from `start` over `data`, reshuffled every epoch.
pub fn local_train(
    start: &ModelParams,
    data: &LabeledDataset,
    config: &LocalTraining,
    rng: &mut impl Rng,
) -> Result<LocalUpdate> {
    if data.is_empty() {
        return Err(Error::Protocol("local training on an empty dataset".into()));
    }
    if config.batch_size == 0 {
        return Err(Error::Config("batch_size must be positive".into()));
    }
    let loss = match config.proximal_mu {
        Some(mu) => LossConfig::proximal(mu, start)?,
        None => LossConfig::nll(),
    };
    let lr = config.learning_rate as f32;
    let mut weights = start.clone();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        for (step, chunk) in order.chunks(config.batch_size).enumerate() {
            let (batch, labels) = data.batch(chunk)?;
            let (value, grads) = loss_and_gradient(&weights, &batch, &labels, &loss)
                .map_err(|e| e.context(format!("epoch {epoch}, step {step}")))?;
            total += value * chunk.len() as f64;
            weights = sgd_step(&weights, &grads, lr)?;
        }
        weights
            .ensure_finite()
            .map_err(|e| e.context(format!("after epoch {epoch}")))?;
        epoch_losses.push(total / data.len() as f64);
    }
    Ok(LocalUpdate {
        weights,
        epoch_losses,
    })
}

/// Unweighted element-wise mean of client models.
///
/// Each element is summed in f64 over the client values sorted ascending,
/// so the result does not depend on the order of `models`.
pub fn aggregate(models: &[ModelParams]) -> Result<ModelParams> {
    combine(models, None)
}

/// Mean weighted by each client's example count.
pub fn aggregate_weighted(models: &[ModelParams], weights: &[usize]) -> Result<ModelParams> {
    if weights.len() != models.len() {
        return Err(Error::Protocol(format!(
            "{} models but {} weights",
            models.len(),
            weights.len()
        )));
    }
    if weights.iter().all(|&w| w == 0) {
        return Err(Error::Protocol("aggregation weights sum to zero".into()));
    }
    combine(models, Some(weights))
}

fn combine(models: &[ModelParams], weights: Option<&[usize]>) -> Result<ModelParams> {
    let Some(first) = models.first() else {
        return Err(Error::Protocol("nothing to aggregate".into()));
    };
    for (i, m) in models.iter().enumerate().skip(1) {
        first
            .ensure_same_architecture(m)
            .map_err(|e| Error::Protocol(format!("client model {i}: {e}")))?;
    }
    let denom = match weights {
        Some(w) => w.iter().sum::<usize>() as f64,
        None => models.len() as f64,
    };
    let mut terms = vec![0.0f64; models.len()];
    let layers = first
        .layers()
        .iter()
        .enumerate()
        .map(|(li, layer)| {
            let data = (0..layer.tensor.len())
                .map(|j| {
                    for (k, m) in models.iter().enumerate() {
                        let v = m.layer(li)[j] as f64;
                        terms[k] = match weights {
                            Some(w) => v * w[k] as f64,
                            None => v,
                        };
                    }
                    terms.sort_unstable_by(f64::total_cmp);
                    (terms.iter().sum::<f64>() / denom) as f32
                })
                .collect();
            Ok(Layer {
                name: layer.name.clone(),
                tensor: Tensor::new(layer.tensor.shape().to_vec(), data)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ModelParams::new(first.architecture(), layers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::make_toy_dataset;
    use crate::nn::{init_params, Architecture};
    use crate::rng::{self, Purpose};

    const MLP: Architecture = Architecture::ToyMlp {
        inputs: 4,
        hidden: 8,
        classes: 3,
    };

    fn training(epochs: usize, mu: Option<f64>) -> LocalTraining {
        LocalTraining {
            epochs,
            learning_rate: 0.1,
            batch_size: 32,
            proximal_mu: mu,
        }
    }

    #[test]
    fn zero_epochs_is_identity() {
        let w = init_params(MLP, 1).unwrap();
        let d = make_toy_dataset(3, 10, 4, 2.0, 0).unwrap();
        let out = local_train(
            &w,
            &d,
            &training(0, None),
            &mut rng::stream(0, Purpose::LocalTrain, &[]),
        )
        .unwrap();
        assert_eq!(out.weights, w);
    }

    #[test]
    fn fedprox_mu_zero_matches_fedavg() {
        let w = init_params(MLP, 1).unwrap();
        let d = make_toy_dataset(3, 30, 4, 2.0, 0).unwrap();
        let a = local_train(
            &w,
            &d,
            &training(2, None),
            &mut rng::stream(5, Purpose::LocalTrain, &[]),
        )
        .unwrap();
        let b = local_train(
            &w,
            &d,
            &training(2, Some(0.0)),
            &mut rng::stream(5, Purpose::LocalTrain, &[]),
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn proximal_pull_shrinks_drift() {
        let w = init_params(MLP, 1).unwrap();
        let d = make_toy_dataset(3, 30, 4, 2.0, 0).unwrap();
        let free = local_train(
            &w,
            &d,
            &training(2, None),
            &mut rng::stream(5, Purpose::LocalTrain, &[]),
        )
        .unwrap();
        let held = local_train(
            &w,
            &d,
            &training(2, Some(5.0)),
            &mut rng::stream(5, Purpose::LocalTrain, &[]),
        )
        .unwrap();
        assert!(
            held.weights.squared_distance(&w).unwrap() < free.weights.squared_distance(&w).unwrap()
        );
    }

    fn constant(values: &[f32]) -> ModelParams {
        let arch = Architecture::ToyMlp {
            inputs: 1,
            hidden: 1,
            classes: 2,
        };
        let mut m = ModelParams::zeros(arch).unwrap();
        let layer = m.layer_mut(3);
        layer.copy_from_slice(values);
        m
    }

    #[test]
    fn two_client_mean() {
        let out = aggregate(&[constant(&[1.0, 2.0]), constant(&[3.0, 4.0])]).unwrap();
        assert_eq!(out.layer(3), &[2.0, 3.0]);
    }

    #[test]
    fn copies_are_fixed_points() {
        let w = init_params(MLP, 9).unwrap();
        for k in 1..8 {
            assert_eq!(aggregate(&vec![w.clone(); k]).unwrap(), w);
        }
    }

    #[test]
    fn weighted_mean() {
        let out =
            aggregate_weighted(&[constant(&[1.0, 2.0]), constant(&[3.0, 4.0])], &[3, 1]).unwrap();
        assert_eq!(out.layer(3), &[1.5, 2.5]);
    }

    #[test]
    fn mismatch_is_protocol_error() {
        let other = init_params(MLP, 0).unwrap();
        assert!(matches!(
            aggregate(&[constant(&[0.0, 0.0]), other]),
            Err(Error::Protocol(_))
        ));
        assert!(matches!(aggregate(&[]), Err(Error::Protocol(_))));
    }
}
