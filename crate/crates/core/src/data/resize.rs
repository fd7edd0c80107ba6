use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Area-weighted row or column resampling matrix, `[target, source]`.
fn area_weights(source: usize, target: usize) -> Vec<f64> {
    let scale = source as f64 / target as f64;
    let mut w = vec![0.0; target * source];
    for t in 0..target {
        let lo = t as f64 * scale;
        let hi = lo + scale;
        let first = lo.floor() as usize;
        let last = (hi.ceil() as usize).min(source);
        for s in first..last {
            let overlap = (hi.min(s as f64 + 1.0) - lo.max(s as f64)).max(0.0);
            w[t * source + s] = overlap / scale;
        }
    }
    w
}

/// Box (area-average) downsampling of a `[C, H, W]` image to `[C, h, w]`.
pub fn resize_image(image: &Tensor, target: (usize, usize)) -> Result<Tensor> {
    let &[channels, height, width] = image.shape() else {
        return Err(Error::Dimension(format!(
            "expected [C, H, W] image, got {:?}",
            image.shape()
        )));
    };
    let (th, tw) = target;
    if th == 0 || tw == 0 {
        return Err(Error::Dimension("target size must be positive".into()));
    }
    if th > height || tw > width {
        return Err(Error::Unsupported(format!(
            "upscaling {height}x{width} to {th}x{tw}"
        )));
    }
    let wy = area_weights(height, th);
    let wx = area_weights(width, tw);
    let src = image.data();
    let mut out = Vec::with_capacity(channels * th * tw);
    let mut rows = vec![0.0f64; th * width];
    for c in 0..channels {
        let plane = &src[c * height * width..(c + 1) * height * width];
        rows.fill(0.0);
        for ty in 0..th {
            for y in 0..height {
                let w = wy[ty * height + y];
                if w == 0.0 {
                    continue;
                }
                for x in 0..width {
                    rows[ty * width + x] += w * plane[y * width + x] as f64;
                }
            }
        }
        for ty in 0..th {
            for tx in 0..tw {
                let v: f64 = (0..width)
                    .map(|x| wx[tx * width + x] * rows[ty * width + x])
                    .sum();
                out.push(v as f32);
            }
        }
    }
    Tensor::new(vec![channels, th, tw], out)
}
