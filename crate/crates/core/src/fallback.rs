//! Hand-crafted per-cell features, used when no learned feature maps are
//! available.
//!
//! Each `stride x stride` cell (the last row/column of cells may be
//! partial) yields 7 channels: mean R, G, B; population standard deviation
//! of R, G, B; and the mean gradient magnitude of the gray image
//! `(R + G + B) / 3`. Intensities are scaled to `[0, 1]` (divided by 255) so
//! they share a range with the normalized centroid appended during
//! alignment. Gradients use central differences with clamped
//! borders, `gx = (I[x+1] - I[x-1]) / 2`, over the whole image, so cells see
//! their neighbors at cell boundaries.

use crate::error::{Error, Result};
use crate::types::{FeatureMap, ImageRGB};

pub const FALLBACK_CHANNELS: usize = 7;

fn gradient_magnitude(image: &ImageRGB) -> Vec<f64> {
    let (w, h) = (image.width() as usize, image.height() as usize);
    let gray: Vec<f64> = image
        .data()
        .chunks_exact(3)
        .map(|p| (p[0] as f64 + p[1] as f64 + p[2] as f64) / (3.0 * 255.0))
        .collect();
    let at = |x: usize, y: usize| gray[y * w + x];
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let gx = (at((x + 1).min(w - 1), y) - at(x.saturating_sub(1), y)) / 2.0;
            let gy = (at(x, (y + 1).min(h - 1)) - at(x, y.saturating_sub(1))) / 2.0;
            out.push((gx * gx + gy * gy).sqrt());
        }
    }
    out
}

pub fn handcrafted_feature_map(image: &ImageRGB, stride: usize, image_id: &str) -> Result<FeatureMap> {
    if stride == 0 {
        return Err(Error::InvalidParameter("stride must be at least 1".into()));
    }
    let (w, h) = (image.width() as usize, image.height() as usize);
    let (wf, hf) = (w.div_ceil(stride), h.div_ceil(stride));
    let grad = gradient_magnitude(image);
    let data = image.data();
    let plane = hf * wf;
    let mut out = vec![0.0f32; FALLBACK_CHANNELS * plane];

    for cy in 0..hf {
        for cx in 0..wf {
            let mut sum = [0u64; 3];
            let mut sq = [0u64; 3];
            let mut g = 0.0f64;
            let mut n = 0usize;
            for y in cy * stride..((cy + 1) * stride).min(h) {
                for x in cx * stride..((cx + 1) * stride).min(w) {
                    let i = y * w + x;
                    for c in 0..3 {
                        let v = data[i * 3 + c] as u64;
                        sum[c] += v;
                        sq[c] += v * v;
                    }
                    g += grad[i];
                    n += 1;
                }
            }
            let nf = n as f64;
            let cell = cy * wf + cx;
            for c in 0..3 {
                let mean = sum[c] as f64 / nf;
                let var = ((n as u64 * sq[c] - sum[c] * sum[c]) as f64) / (nf * nf);
                out[c * plane + cell] = (mean / 255.0) as f32;
                out[(3 + c) * plane + cell] = (var.sqrt() / 255.0) as f32;
            }
            out[6 * plane + cell] = (g / nf) as f32;
        }
    }
    FeatureMap::new(FALLBACK_CHANNELS, hf, wf, out, image_id)
}
