use crate::nn::kernels::{dense_backward, dense_forward};
use crate::nn::params::ModelParams;

pub(crate) struct MlpCache {
    /// Post-ReLU hidden activations, `[rows, hidden]`.
    hidden: Vec<f32>,
    width: usize,
}

pub(crate) fn forward(model: &ModelParams, x: &[f32], rows: usize) -> (Vec<f64>, MlpCache) {
    let (w1, b1, w2, b2) = (
        model.layer(0),
        model.layer(1),
        model.layer(2),
        model.layer(3),
    );
    let inputs = x.len() / rows;
    let width = b1.len();
    let mut hidden = Vec::with_capacity(rows * width);
    let mut logits = Vec::with_capacity(rows * b2.len());
    for row in x.chunks_exact(inputs) {
        let start = hidden.len();
        hidden.extend(
            dense_forward(w1, b1, row)
                .into_iter()
                .map(|s| s.max(0.0) as f32),
        );
        logits.extend(dense_forward(w2, b2, &hidden[start..]));
    }
    (logits, MlpCache { hidden, width })
}

pub(crate) fn backward(
    model: &ModelParams,
    x: &[f32],
    cache: &MlpCache,
    dlogits: &[f64],
    grads: &mut [Vec<f64>],
) {
    let rows = cache.hidden.len() / cache.width;
    let inputs = x.len() / rows;
    let classes = dlogits.len() / rows;
    let [g1, g1b, g2, g2b] = grads else {
        unreachable!("mlp has four parameter tensors")
    };
    for r in 0..rows {
        let h = &cache.hidden[r * cache.width..(r + 1) * cache.width];
        let dz = &dlogits[r * classes..(r + 1) * classes];
        let mut dh =
            dense_backward(model.layer(2), h, dz, g2, g2b, true).expect("input grad requested");
        for (d, &a) in dh.iter_mut().zip(h) {
            if a <= 0.0 {
                *d = 0.0;
            }
        }
        dense_backward(
            model.layer(0),
            &x[r * inputs..(r + 1) * inputs],
            &dh,
            g1,
            g1b,
            false,
        );
    }
}
