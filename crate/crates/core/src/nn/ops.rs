use crate::error::{Error, Result};
use crate::nn::loss::{check_labels, log_softmax, proximal_term, LossConfig};
use crate::nn::params::{Architecture, Layer, ModelParams};
use crate::nn::{cnn, mlp};
use crate::tensor::Tensor;

enum Cache {
    Mlp(mlp::MlpCache),
    Cnn(Vec<cnn::ExampleCache>),
}

struct Pass {
    rows: usize,
    logprobs: Vec<f64>,
    cache: Cache,
}

fn batch_rows(model: &ModelParams, batch: &Tensor) -> Result<usize> {
    let arch = model.architecture();
    let expected = arch.input_shape();
    let shape = batch.shape();
    if shape.len() != expected.len() + 1 || shape[1..] != expected[..] || shape[0] == 0 {
        return Err(Error::Dimension(format!(
            "{arch:?} expects batch [B>0, {expected:?}], got {shape:?}"
        )));
    }
    Ok(shape[0])
}

fn run_forward(model: &ModelParams, batch: &Tensor) -> Result<Pass> {
    let rows = batch_rows(model, batch)?;
    let (logits, cache) = match model.architecture() {
        Architecture::ToyMlp { .. } => {
            let (z, c) = mlp::forward(model, batch.data(), rows);
            (z, Cache::Mlp(c))
        }
        Architecture::PaperCnn => {
            let (z, c) = cnn::forward(model, batch.data(), rows);
            (z, Cache::Cnn(c))
        }
    };
    if let Some(i) = logits.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!(
            "non-finite logit at row {}",
            i / model.architecture().num_classes()
        )));
    }
    let logprobs = log_softmax(&logits, model.architecture().num_classes());
    Ok(Pass {
        rows,
        logprobs,
        cache,
    })
}

/// Log-probabilities `[batch, classes]`.
pub fn forward(model: &ModelParams, batch: &Tensor) -> Result<Tensor> {
    let pass = run_forward(model, batch)?;
    let classes = model.architecture().num_classes();
    let data = pass.logprobs.iter().map(|&v| v as f32).collect();
    Tensor::new(vec![pass.rows, classes], data)
}

/// Gradient of the configured loss with respect to every parameter.
pub fn backward(
    model: &ModelParams,
    batch: &Tensor,
    labels: &[usize],
    config: &LossConfig<'_>,
) -> Result<ModelParams> {
    loss_and_gradient(model, batch, labels, config).map(|(_, g)| g)
}

/// Loss value and its gradient from a single forward pass.
pub fn loss_and_gradient(
    model: &ModelParams,
    batch: &Tensor,
    labels: &[usize],
    config: &LossConfig<'_>,
) -> Result<(f64, ModelParams)> {
    let pass = run_forward(model, batch)?;
    let classes = model.architecture().num_classes();
    check_labels(labels, pass.rows, classes)?;

    let mut nll = 0.0;
    let mut dlogits = Vec::with_capacity(pass.logprobs.len());
    for (row, &label) in pass.logprobs.chunks_exact(classes).zip(labels) {
        nll -= row[label];
        for (k, &lp) in row.iter().enumerate() {
            dlogits.push(lp.exp() - if k == label { 1.0 } else { 0.0 });
        }
    }
    let loss = nll / pass.rows as f64 + proximal_term(config, model)?;

    let mut sums: Vec<Vec<f64>> = model
        .layers()
        .iter()
        .map(|l| vec![0.0; l.tensor.len()])
        .collect();
    match &pass.cache {
        Cache::Mlp(c) => mlp::backward(model, batch.data(), c, &dlogits, &mut sums),
        Cache::Cnn(c) => cnn::backward(model, c, &dlogits, &mut sums),
    }

    let scale = pass.rows as f64;
    let proximal = config.active_proximal();
    if let Some((_, anchor)) = proximal {
        model.ensure_same_architecture(anchor)?;
    }
    let layers = model
        .layers()
        .iter()
        .enumerate()
        .map(|(li, layer)| {
            let data: Vec<f32> = match proximal {
                None => sums[li].iter().map(|&s| (s / scale) as f32).collect(),
                Some((mu, anchor)) => sums[li]
                    .iter()
                    .zip(layer.tensor.data())
                    .zip(anchor.layer(li))
                    .map(|((&s, &w), &a)| (s / scale + mu * (w as f64 - a as f64)) as f32)
                    .collect(),
            };
            let tensor = Tensor::new(layer.tensor.shape().to_vec(), data)
                .map_err(|e| e.context(format!("gradient of {}", layer.name)))?;
            Ok(Layer {
                name: layer.name.clone(),
                tensor,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("non-finite loss {loss}")));
    }
    Ok((loss, ModelParams::new(model.architecture(), layers)?))
}

/// `model − lr · grads`, element-wise.
pub fn sgd_step(model: &ModelParams, grads: &ModelParams, lr: f32) -> Result<ModelParams> {
    model.ensure_same_architecture(grads)?;
    let layers = model
        .layers()
        .iter()
        .zip(grads.layers())
        .map(|(w, g)| {
            let data = w
                .tensor
                .data()
                .iter()
                .zip(g.tensor.data())
                .map(|(&w, &g)| w - lr * g)
                .collect();
            Ok(Layer {
                name: w.name.clone(),
                tensor: Tensor::new(w.tensor.shape().to_vec(), data)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ModelParams::new(model.architecture(), layers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::init_params;

    const TOY: Architecture = Architecture::ToyMlp {
        inputs: 4,
        hidden: 6,
        classes: 3,
    };

    fn batch(rows: usize, inputs: usize, seed: u32) -> Tensor {
        let data = (0..rows * inputs)
            .map(|i| ((i as u32 * 37 + seed * 11) % 19) as f32 / 9.5 - 1.0)
            .collect();
        Tensor::new(vec![rows, inputs], data).unwrap()
    }

    #[test]
    fn zero_model_is_uniform() {
        let m = ModelParams::zeros(TOY).unwrap();
        let out = forward(&m, &batch(5, 4, 1)).unwrap();
        for v in out.data() {
            assert!((*v as f64 - (1.0f64 / 3.0).ln()).abs() < 1e-6);
        }
    }

    #[test]
    fn cnn_output_shape_and_normalization() {
        let m = init_params(Architecture::PaperCnn, 0).unwrap();
        let x = Tensor::filled(vec![4, 3, 32, 32], 0.5);
        let out = forward(&m, &x).unwrap();
        assert_eq!(out.shape(), &[4, 10]);
        for row in out.data().chunks(10) {
            let lse = row.iter().map(|&v| (v as f64).exp()).sum::<f64>().ln();
            assert!(lse.abs() < 1e-5);
        }
    }

    #[test]
    fn wrong_input_shape_is_dimension_error() {
        let m = ModelParams::zeros(TOY).unwrap();
        assert!(matches!(
            forward(&m, &batch(2, 5, 0)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn sgd_arithmetic_and_zero_lr() {
        let arch = Architecture::ToyMlp {
            inputs: 1,
            hidden: 1,
            classes: 2,
        };
        let m = init_params(arch, 9).unwrap();
        let g = init_params(arch, 10).unwrap();
        assert_eq!(sgd_step(&m, &g, 0.0).unwrap(), m);

        let mut layers = ModelParams::zeros(arch).unwrap().layers().to_vec();
        layers[2].tensor = Tensor::new(vec![2, 1], vec![1.0, 2.0]).unwrap();
        let model = ModelParams::new(arch, layers.clone()).unwrap();
        layers[2].tensor = Tensor::new(vec![2, 1], vec![1.0, 1.0]).unwrap();
        let grads = ModelParams::new(arch, layers).unwrap();
        let out = sgd_step(&model, &grads, 0.1).unwrap();
        assert_eq!(out.layer(2), &[1.0 - 0.1, 2.0 - 0.1]);
        assert!((out.layer(2)[0] - 0.9).abs() < 1e-7 && (out.layer(2)[1] - 1.9).abs() < 1e-7);
    }

    #[test]
    fn proximal_gradient_is_mu_times_offset() {
        let m = init_params(TOY, 1).unwrap();
        let anchor = init_params(TOY, 2).unwrap();
        let x = batch(3, 4, 2);
        let labels = [0, 1, 2];
        let plain = backward(&m, &x, &labels, &LossConfig::nll()).unwrap();
        let prox = backward(
            &m,
            &x,
            &labels,
            &LossConfig::proximal(0.5, &anchor).unwrap(),
        )
        .unwrap();
        for li in 0..4 {
            for (((p, g), w), a) in prox
                .layer(li)
                .iter()
                .zip(plain.layer(li))
                .zip(m.layer(li))
                .zip(anchor.layer(li))
            {
                let expected = *g as f64 + 0.5 * (*w as f64 - *a as f64);
                assert!((*p as f64 - expected).abs() < 1e-6);
            }
        }
        // At the anchor the proximal component vanishes.
        let at_anchor =
            backward(&m, &x, &labels, &LossConfig::proximal(0.001, &m).unwrap()).unwrap();
        assert_eq!(at_anchor, plain);
        let zero_mu = backward(
            &m,
            &x,
            &labels,
            &LossConfig::proximal(0.0, &anchor).unwrap(),
        )
        .unwrap();
        assert_eq!(zero_mu, plain);
    }

    #[test]
    fn duplicated_example_gives_same_mean_gradient() {
        let m = init_params(TOY, 3).unwrap();
        let one = batch(1, 4, 4);
        let two = Tensor::stack(&[&Tensor::new(vec![4], one.data().to_vec()).unwrap(); 2]).unwrap();
        let g1 = backward(&m, &one, &[1], &LossConfig::nll()).unwrap();
        let g2 = backward(&m, &two, &[1, 1], &LossConfig::nll()).unwrap();
        assert_eq!(g1, g2);
    }

    #[test]
    fn cnn_gradient_spot_check() {
        // Finite differences through the full CNN on a handful of parameters per layer.
        let m = init_params(Architecture::PaperCnn, 4).unwrap();
        let data: Vec<f32> = (0..2 * 3 * 32 * 32)
            .map(|i| ((i * 7919) % 256) as f32 / 255.0)
            .collect();
        let x = Tensor::new(vec![2, 3, 32, 32], data).unwrap();
        let labels = [3, 7];
        let (_, grads) = loss_and_gradient(&m, &x, &labels, &LossConfig::nll()).unwrap();
        let h = 1e-3f32;
        let mut worst = 0.0f64;
        for li in 0..m.layers().len() {
            let n = m.layer(li).len();
            for idx in [0, n / 3, n / 2, n - 1] {
                let eval = |delta: f32| {
                    let mut layers = m.layers().to_vec();
                    layers[li].tensor.data_mut()[idx] += delta;
                    let p = ModelParams::new(m.architecture(), layers).unwrap();
                    let lp = forward(&p, &x).unwrap();
                    crate::nn::nll_loss(&lp, &labels, &LossConfig::nll(), &p).unwrap()
                };
                let fd = (eval(h) - eval(-h)) / (2.0 * h as f64);
                let an = grads.layer(li)[idx] as f64;
                let err = (fd - an).abs() / (fd.abs().max(an.abs()).max(1e-2));
                worst = worst.max(err);
            }
        }
        assert!(worst < 5e-2, "worst relative error {worst}");
    }
}
