//! Superpixel alignment: pooling feature-map values into one vector per
//! superpixel.
//!
//! For each superpixel a fixed number of pixels is drawn uniformly with
//! replacement, each pixel is mapped into feature-map cell coordinates, the
//! feature map is bilinearly interpolated there, and the samples are
//! averaged. The segment centroid (scaled by `centroid_weight`) is appended.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{normalized_coord, FeatureMap, PriorConfig, SuperpixelMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperpixelFeature {
    pub segment_id: usize,
    pub image_id: String,
    /// Pooled features followed by the scaled normalized centroid `(row, col)`.
    pub vector: Vec<f64>,
    /// Location-prior weight in `(0, 1]`.
    pub prior_weight: f64,
}

/// Bilinear interpolation of every channel at cell coordinates `(y, x)`.
///
/// `x` indexes feature-map columns and `y` rows. At integer coordinates the
/// stored value is returned exactly.
pub fn bilinear_sample(fmap: &FeatureMap, y: f64, x: f64) -> Result<Vec<f64>> {
    let (hf, wf) = (fmap.height(), fmap.width());
    let in_range = |v: f64, n: usize| v.is_finite() && v >= 0.0 && v <= (n - 1) as f64;
    if hf == 0 || wf == 0 || !in_range(y, hf) || !in_range(x, wf) {
        return Err(Error::InvalidParameter(format!(
            "sample point ({y}, {x}) outside [0, {}] x [0, {}]",
            hf.saturating_sub(1),
            wf.saturating_sub(1)
        )));
    }
    let (y0, dy) = split(y, hf);
    let (x0, dx) = split(x, wf);
    let y1 = (y0 + 1).min(hf - 1);
    let x1 = (x0 + 1).min(wf - 1);
    let taps = [
        (y0, x0, (1.0 - dy) * (1.0 - dx)),
        (y0, x1, (1.0 - dy) * dx),
        (y1, x0, dy * (1.0 - dx)),
        (y1, x1, dy * dx),
    ];
    Ok((0..fmap.channels())
        .map(|c| {
            taps.iter()
                .filter(|t| t.2 != 0.0)
                .map(|&(ty, tx, wt)| fmap.get(c, ty, tx) as f64 * wt)
                .sum()
        })
        .collect())
}

/// Integer base cell and fractional offset, keeping the base inside the map.
fn split(v: f64, n: usize) -> (usize, f64) {
    let base = (v.floor() as usize).min(n.saturating_sub(2));
    (base, v - base as f64)
}

/// Maps pixel `(x, y)` of a `width x height` image to feature-map cell
/// coordinates `(y_f, x_f)` with the half-pixel (align-corners-false)
/// convention, clamped into the valid range.
pub fn pixel_to_cell(
    x: u32,
    y: u32,
    width: u32,
    height: u32,
    fmap_width: usize,
    fmap_height: usize,
) -> (f64, f64) {
    let map = |p: u32, n: u32, nf: usize| {
        let v = (p as f64 + 0.5) / n as f64 * nf as f64 - 0.5;
        v.clamp(0.0, (nf - 1) as f64)
    };
    (map(y, height, fmap_height), map(x, width, fmap_width))
}

/// Gaussian location-prior term for a single normalized point.
#[inline]
pub fn prior_term(p: [f64; 2], mu: [f64; 2], sigma: [f64; 2]) -> f64 {
    let e: f64 = (0..2).map(|d| (p[d] - mu[d]).powi(2) / (2.0 * sigma[d] * sigma[d])).sum();
    (-e).exp()
}

/// Average of Gaussian prior terms over the given normalized pixel
/// coordinates. Clamped below at the smallest positive normal `f64` so the
/// weight stays strictly positive even far from the prior.
pub fn prior_weight<I>(points: I, mu: [f64; 2], sigma: [f64; 2]) -> f64
where
    I: IntoIterator<Item = [f64; 2]>,
{
    let (sum, n) = points
        .into_iter()
        .fold((0.0f64, 0usize), |(s, n), p| (s + prior_term(p, mu, sigma), n + 1));
    if n == 0 {
        return f64::MIN_POSITIVE;
    }
    (sum / n as f64).clamp(f64::MIN_POSITIVE, 1.0)
}

/// Prior weight of one segment given its flat pixel indices.
pub fn segment_prior_weight(
    pixels: &[u32],
    width: u32,
    height: u32,
    mu: [f64; 2],
    sigma: [f64; 2],
) -> f64 {
    prior_weight(
        pixels.iter().map(|&i| normalized_coord(i % width, i / width, width, height)),
        mu,
        sigma,
    )
}

/// Average of bilinear samples at the given `(y, x)` cell coordinates.
pub fn pool_samples(fmap: &FeatureMap, points: &[(f64, f64)]) -> Result<Vec<f64>> {
    if points.is_empty() {
        return Err(Error::Empty("no sample points".into()));
    }
    let mut acc = vec![0.0f64; fmap.channels()];
    for &(y, x) in points {
        for (a, v) in acc.iter_mut().zip(bilinear_sample(fmap, y, x)?) {
            *a += v;
        }
    }
    let n = points.len() as f64;
    Ok(acc.into_iter().map(|a| a / n).collect())
}

/// Pools one feature vector per superpixel, in segment id order.
pub fn align_superpixels<R: Rng + ?Sized>(
    fmap: &FeatureMap,
    sp: &SuperpixelMap,
    cfg: &PriorConfig,
    rng: &mut R,
) -> Result<Vec<SuperpixelFeature>> {
    cfg.validate()?;
    if fmap.height() == 0 || fmap.width() == 0 {
        return Err(Error::InvalidParameter("empty feature map".into()));
    }
    let (w, h) = (sp.width(), sp.height());
    let pixels = sp.segment_pixels();
    let mut out = Vec::with_capacity(pixels.len());
    for (segment_id, members) in pixels.iter().enumerate() {
        if members.is_empty() {
            return Err(Error::Empty(format!("segment {segment_id} has no pixels")));
        }
        let points: Vec<(f64, f64)> = (0..cfg.samples_per_superpixel)
            .map(|_| {
                let idx = members[rng.gen_range(0..members.len() as u64) as usize];
                pixel_to_cell(idx % w, idx / w, w, h, fmap.width(), fmap.height())
            })
            .collect();
        let centroid = sp.segments()[segment_id].centroid;
        let mut vector = pool_samples(fmap, &points)?;
        vector.push(cfg.centroid_weight * centroid[0]);
        vector.push(cfg.centroid_weight * centroid[1]);
        out.push(SuperpixelFeature {
            segment_id,
            image_id: fmap.source_image_id().to_string(),
            vector,
            prior_weight: segment_prior_weight(members, w, h, cfg.mu, cfg.sigma),
        });
    }
    Ok(out)
}

/// Normalized `(row, col)` of the image pixel position that cell `(n, m)`'s
/// center maps to under [`pixel_to_cell`]'s convention.
pub fn cell_center(n: usize, m: usize, fmap_height: usize, fmap_width: usize, width: u32, height: u32) -> [f64; 2] {
    let to_pixel = |c: usize, nf: usize, size: u32| (c as f64 + 0.5) * size as f64 / nf as f64 - 0.5;
    [
        to_pixel(n, fmap_height, height) / height as f64,
        to_pixel(m, fmap_width, width) / width as f64,
    ]
}

/// Treats every feature-map cell as its own pseudo-superpixel. Segment ids
/// are `row * width + col` of the cell.
pub fn pixel_features_raw(
    fmap: &FeatureMap,
    image_dims: (u32, u32),
    cfg: &PriorConfig,
) -> Vec<SuperpixelFeature> {
    let (width, height) = image_dims;
    let (hf, wf) = (fmap.height(), fmap.width());
    let mut out = Vec::with_capacity(hf * wf);
    for n in 0..hf {
        for m in 0..wf {
            let center = cell_center(n, m, hf, wf, width, height);
            let mut vector: Vec<f64> = fmap.cell(n, m).into_iter().map(f64::from).collect();
            vector.push(cfg.centroid_weight * center[0]);
            vector.push(cfg.centroid_weight * center[1]);
            out.push(SuperpixelFeature {
                segment_id: n * wf + m,
                image_id: fmap.source_image_id().to_string(),
                vector,
                prior_weight: prior_weight([center], cfg.mu, cfg.sigma),
            });
        }
    }
    out
}
