//! Convolution, pooling and dense-layer kernels shared by both architectures.

/// 3×3, stride 1, zero-pad 1 patch matrix: `[channels·9, side·side]`.
pub(crate) fn im2col_3x3(input: &[f32], channels: usize, side: usize, cols: &mut [f32]) {
    let hw = side * side;
    debug_assert_eq!(input.len(), channels * hw);
    debug_assert_eq!(cols.len(), channels * 9 * hw);
    for c in 0..channels {
        let plane = &input[c * hw..(c + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut cols[((c * 9) + ky * 3 + kx) * hw..][..hw];
                for y in 0..side {
                    let sy = y as isize + ky as isize - 1;
                    let out = &mut row[y * side..(y + 1) * side];
                    if sy < 0 || sy >= side as isize {
                        out.fill(0.0);
                        continue;
                    }
                    let src = &plane[sy as usize * side..(sy as usize + 1) * side];
                    for (x, o) in out.iter_mut().enumerate() {
                        let sx = x as isize + kx as isize - 1;
                        *o = if sx < 0 || sx >= side as isize {
                            0.0
                        } else {
                            src[sx as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col_3x3`]: scatters patch gradients back onto the input.
pub(crate) fn col2im_3x3(cols: &[f32], channels: usize, side: usize, input_grad: &mut [f32]) {
    let hw = side * side;
    input_grad.fill(0.0);
    for c in 0..channels {
        let plane = &mut input_grad[c * hw..(c + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &cols[((c * 9) + ky * 3 + kx) * hw..][..hw];
                for y in 0..side {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= side as isize {
                        continue;
                    }
                    for x in 0..side {
                        let sx = x as isize + kx as isize - 1;
                        if sx >= 0 && sx < side as isize {
                            plane[sy as usize * side + sx as usize] += row[y * side + x];
                        }
                    }
                }
            }
        }
    }
}

/// `out[o, p] = bias[o] + Σ_k weight[o, k] · cols[k, p]`.
pub(crate) fn conv_forward(
    weight: &[f32],
    bias: &[f32],
    cols: &[f32],
    positions: usize,
    out: &mut [f32],
) {
    let out_ch = bias.len();
    let k_len = weight.len() / out_ch;
    for o in 0..out_ch {
        let row = &mut out[o * positions..(o + 1) * positions];
        row.fill(bias[o]);
        for k in 0..k_len {
            let w = weight[o * k_len + k];
            let src = &cols[k * positions..(k + 1) * positions];
            for (r, &s) in row.iter_mut().zip(src) {
                *r += w * s;
            }
        }
    }
}

/// Accumulates weight/bias gradients (f64) and fills `dcols = Wᵀ · dout`.
pub(crate) fn conv_backward(
    weight: &[f32],
    cols: &[f32],
    dout: &[f32],
    positions: usize,
    dweight: &mut [f64],
    dbias: &mut [f64],
    dcols: Option<&mut [f32]>,
) {
    let out_ch = dbias.len();
    let k_len = weight.len() / out_ch;
    for o in 0..out_ch {
        let g = &dout[o * positions..(o + 1) * positions];
        dbias[o] += g.iter().map(|&v| v as f64).sum::<f64>();
        for k in 0..k_len {
            let src = &cols[k * positions..(k + 1) * positions];
            dweight[o * k_len + k] += dot64(g, src);
        }
    }
    if let Some(dcols) = dcols {
        dcols.fill(0.0);
        for o in 0..out_ch {
            let g = &dout[o * positions..(o + 1) * positions];
            for k in 0..k_len {
                let w = weight[o * k_len + k];
                let dst = &mut dcols[k * positions..(k + 1) * positions];
                for (d, &v) in dst.iter_mut().zip(g) {
                    *d += w * v;
                }
            }
        }
    }
}

/// 2×2 stride-2 max pooling; records the flat input index of each maximum
/// (first maximum wins on ties).
pub(crate) fn maxpool2(
    input: &[f32],
    channels: usize,
    side: usize,
    out: &mut [f32],
    argmax: &mut [u32],
) {
    let half = side / 2;
    for c in 0..channels {
        for y in 0..half {
            for x in 0..half {
                let mut best_idx = c * side * side + (2 * y) * side + 2 * x;
                let mut best = input[best_idx];
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = c * side * side + (2 * y + dy) * side + 2 * x + dx;
                    if input[idx] > best {
                        best = input[idx];
                        best_idx = idx;
                    }
                }
                let o = c * half * half + y * half + x;
                out[o] = best;
                argmax[o] = best_idx as u32;
            }
        }
    }
}

pub(crate) fn maxpool2_backward(dout: &[f32], argmax: &[u32], dinput: &mut [f32]) {
    dinput.fill(0.0);
    for (&g, &i) in dout.iter().zip(argmax) {
        dinput[i as usize] += g;
    }
}

pub(crate) fn relu_inplace(v: &mut [f32]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

pub(crate) fn dot64(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

/// Dense layer `out[j] = bias[j] + Σ_i weight[j, i] · input[i]`, f64 accumulation.
pub(crate) fn dense_forward(weight: &[f32], bias: &[f32], input: &[f32]) -> Vec<f64> {
    let n_in = input.len();
    bias.iter()
        .enumerate()
        .map(|(j, &b)| b as f64 + dot64(&weight[j * n_in..(j + 1) * n_in], input))
        .collect()
}

/// Accumulates `dW += dout ⊗ input`, `db += dout`; returns `Wᵀ · dout` when asked.
pub(crate) fn dense_backward(
    weight: &[f32],
    input: &[f32],
    dout: &[f64],
    dweight: &mut [f64],
    dbias: &mut [f64],
    want_input_grad: bool,
) -> Option<Vec<f64>> {
    let n_in = input.len();
    for (j, &g) in dout.iter().enumerate() {
        dbias[j] += g;
        if g == 0.0 {
            continue;
        }
        let row = &mut dweight[j * n_in..(j + 1) * n_in];
        for (d, &x) in row.iter_mut().zip(input) {
            *d += g * x as f64;
        }
    }
    want_input_grad.then(|| {
        let mut dinput = vec![0.0f64; n_in];
        for (j, &g) in dout.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let row = &weight[j * n_in..(j + 1) * n_in];
            for (d, &w) in dinput.iter_mut().zip(row) {
                *d += w as f64 * g;
            }
        }
        dinput
    })
}
