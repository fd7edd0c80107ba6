use crate::nn::kernels::{
    col2im_3x3, conv_backward, conv_forward, dense_backward, dense_forward, im2col_3x3, maxpool2,
    maxpool2_backward, relu_inplace,
};
use crate::nn::params::{ModelParams, CNN_CHANNELS, CNN_SIDE, CONV1_OUT, CONV2_OUT, FLAT};

const SIDE1: usize = CNN_SIDE;
const SIDE2: usize = CNN_SIDE / 2;
const HW1: usize = SIDE1 * SIDE1;
const HW2: usize = SIDE2 * SIDE2;

/// Activations of one example needed by the backward pass.
pub(crate) struct ExampleCache {
    cols1: Vec<f32>,
    act1: Vec<f32>,
    arg1: Vec<u32>,
    cols2: Vec<f32>,
    act2: Vec<f32>,
    arg2: Vec<u32>,
    flat: Vec<f32>,
    hidden: Vec<f32>,
}

pub(crate) fn forward(
    model: &ModelParams,
    x: &[f32],
    rows: usize,
) -> (Vec<f64>, Vec<ExampleCache>) {
    let per = x.len() / rows;
    let mut logits = Vec::with_capacity(rows * model.architecture().num_classes());
    let mut caches = Vec::with_capacity(rows);
    for example in x.chunks_exact(per) {
        let (z, cache) = forward_one(model, example);
        logits.extend(z);
        caches.push(cache);
    }
    (logits, caches)
}

fn forward_one(model: &ModelParams, x: &[f32]) -> (Vec<f64>, ExampleCache) {
    let mut cols1 = vec![0.0; CNN_CHANNELS * 9 * HW1];
    im2col_3x3(x, CNN_CHANNELS, SIDE1, &mut cols1);
    let mut act1 = vec![0.0; CONV1_OUT * HW1];
    conv_forward(model.layer(0), model.layer(1), &cols1, HW1, &mut act1);
    relu_inplace(&mut act1);
    let mut pooled1 = vec![0.0; CONV1_OUT * HW2];
    let mut arg1 = vec![0u32; CONV1_OUT * HW2];
    maxpool2(&act1, CONV1_OUT, SIDE1, &mut pooled1, &mut arg1);

    let mut cols2 = vec![0.0; CONV1_OUT * 9 * HW2];
    im2col_3x3(&pooled1, CONV1_OUT, SIDE2, &mut cols2);
    let mut act2 = vec![0.0; CONV2_OUT * HW2];
    conv_forward(model.layer(2), model.layer(3), &cols2, HW2, &mut act2);
    relu_inplace(&mut act2);
    let mut flat = vec![0.0; FLAT];
    let mut arg2 = vec![0u32; FLAT];
    maxpool2(&act2, CONV2_OUT, SIDE2, &mut flat, &mut arg2);

    let hidden: Vec<f32> = dense_forward(model.layer(4), model.layer(5), &flat)
        .into_iter()
        .map(|s| s.max(0.0) as f32)
        .collect();
    let logits = dense_forward(model.layer(6), model.layer(7), &hidden);
    (
        logits,
        ExampleCache {
            cols1,
            act1,
            arg1,
            cols2,
            act2,
            arg2,
            flat,
            hidden,
        },
    )
}

pub(crate) fn backward(
    model: &ModelParams,
    caches: &[ExampleCache],
    dlogits: &[f64],
    grads: &mut [Vec<f64>],
) {
    let classes = dlogits.len() / caches.len();
    for (cache, dz) in caches.iter().zip(dlogits.chunks_exact(classes)) {
        let (head, tail) = grads.split_at_mut(6);
        let (g7w, g7b) = tail.split_at_mut(1);
        let mut dh = dense_backward(
            model.layer(6),
            &cache.hidden,
            dz,
            &mut g7w[0],
            &mut g7b[0],
            true,
        )
        .expect("input grad requested");
        for (d, &a) in dh.iter_mut().zip(&cache.hidden) {
            if a <= 0.0 {
                *d = 0.0;
            }
        }
        let (conv_grads, fc1) = head.split_at_mut(4);
        let (g5w, g5b) = fc1.split_at_mut(1);
        let dflat: Vec<f32> = dense_backward(
            model.layer(4),
            &cache.flat,
            &dh,
            &mut g5w[0],
            &mut g5b[0],
            true,
        )
        .expect("input grad requested")
        .into_iter()
        .map(|v| v as f32)
        .collect();

        let mut dact2 = vec![0.0; CONV2_OUT * HW2];
        maxpool2_backward(&dflat, &cache.arg2, &mut dact2);
        mask_relu(&mut dact2, &cache.act2);
        let mut dcols2 = vec![0.0; CONV1_OUT * 9 * HW2];
        let (c1, c2) = conv_grads.split_at_mut(2);
        let (g3w, g3b) = c2.split_at_mut(1);
        conv_backward(
            model.layer(2),
            &cache.cols2,
            &dact2,
            HW2,
            &mut g3w[0],
            &mut g3b[0],
            Some(&mut dcols2),
        );
        let mut dpooled1 = vec![0.0; CONV1_OUT * HW2];
        col2im_3x3(&dcols2, CONV1_OUT, SIDE2, &mut dpooled1);

        let mut dact1 = vec![0.0; CONV1_OUT * HW1];
        maxpool2_backward(&dpooled1, &cache.arg1, &mut dact1);
        mask_relu(&mut dact1, &cache.act1);
        let (g1w, g1b) = c1.split_at_mut(1);
        conv_backward(
            model.layer(0),
            &cache.cols1,
            &dact1,
            HW1,
            &mut g1w[0],
            &mut g1b[0],
            None,
        );
    }
}

fn mask_relu(grad: &mut [f32], activation: &[f32]) {
    for (g, &a) in grad.iter_mut().zip(activation) {
        if a <= 0.0 {
            *g = 0.0;
        }
    }
}
