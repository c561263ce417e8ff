//! Location-prior k-means.
//!
//! A Lloyd-style iteration over superpixel features in which cluster 0 is
//! the free-space cluster. Features whose prior weight is strictly above the
//! median start in cluster 0 and the rest start in a uniformly random cluster
//! among `1..k`. Each iteration sets
//!
//! * `c_0 = Σ_{m_i=0} w_i S_i / Σ_{m_i=0} w_i`,
//! * `c_q = Σ_{m_i=q} (1 - w_i) S_i / Σ_{m_i=q} (1 - w_i)` for `q > 0`,
//!
//! then reassigns every feature to its nearest center (squared Euclidean,
//! ties to the lowest index, weights ignored). Iteration stops when no
//! assignment changes or after `max_iters` rounds.
//!
//! Batch clustering concatenates the features of several images and runs
//! one clustering over all of them.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::align::SuperpixelFeature;
use crate::error::{Error, Result};
use crate::rng::feature_rng;
use crate::types::PriorConfig;

pub const FREE_SPACE_CLUSTER: usize = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    pub centers: Vec<Vec<f64>>,
    /// Cluster index of every input feature, in input order.
    pub membership: Vec<usize>,
    pub iterations_run: usize,
    /// True when an iteration left every assignment unchanged.
    pub converged: bool,
}

/// Lower median: element `(n - 1) / 2` of the sorted values.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("median of an empty list".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[(sorted.len() - 1) / 2])
}

/// Prior-driven initial assignment. The random branch draws from a stream
/// keyed by `(image_id, segment_id)`, so it does not depend on input order.
pub fn initial_membership(features: &[SuperpixelFeature], k: usize, seed: u64) -> Result<Vec<usize>> {
    let weights: Vec<f64> = features.iter().map(|f| f.prior_weight).collect();
    let med = median(&weights)?;
    Ok(features
        .iter()
        .map(|f| {
            if f.prior_weight > med {
                FREE_SPACE_CLUSTER
            } else {
                feature_rng(seed, &f.image_id, f.segment_id).gen_range(1..k as u64) as usize
            }
        })
        .collect())
}

#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest center index, ties to the lowest index.
#[inline]
pub fn nearest(v: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, squared_distance(v, &centers[0]));
    for (q, c) in centers.iter().enumerate().skip(1) {
        let d = squared_distance(v, c);
        if d < best.1 {
            best = (q, d);
        }
    }
    best
}

/// Weighted center of each cluster, `None` for clusters with no members.
///
/// A non-free-space cluster whose members all have weight exactly 1 has a
/// zero repellent mass; its center falls back to the plain member mean.
pub fn weighted_centers(
    features: &[SuperpixelFeature],
    membership: &[usize],
    k: usize,
) -> Vec<Option<Vec<f64>>> {
    let dim = features[0].vector.len();
    let mut sums = vec![vec![0.0f64; dim]; k];
    let mut mass = vec![0.0f64; k];
    let mut plain = vec![vec![0.0f64; dim]; k];
    let mut counts = vec![0usize; k];
    for (f, &m) in features.iter().zip(membership) {
        let wt = if m == FREE_SPACE_CLUSTER { f.prior_weight } else { 1.0 - f.prior_weight };
        for (d, &v) in f.vector.iter().enumerate() {
            sums[m][d] += wt * v;
            plain[m][d] += v;
        }
        mass[m] += wt;
        counts[m] += 1;
    }
    (0..k)
        .map(|q| {
            if counts[q] == 0 {
                None
            } else if mass[q] > 0.0 {
                Some(sums[q].iter().map(|s| s / mass[q]).collect())
            } else {
                Some(plain[q].iter().map(|s| s / counts[q] as f64).collect())
            }
        })
        .collect()
}

fn feature_key(f: &SuperpixelFeature) -> (&str, usize) {
    (&f.image_id, f.segment_id)
}

/// Fills empty clusters: each takes the vector of the feature farthest from
/// its nearest existing center. Distance ties go to the smallest
/// `(image_id, segment_id)` so the choice does not depend on input order.
fn repair_empty(features: &[SuperpixelFeature], centers: Vec<Option<Vec<f64>>>) -> Vec<Vec<f64>> {
    if centers.iter().all(Option::is_some) {
        return centers.into_iter().map(Option::unwrap).collect();
    }
    let mut present: Vec<Vec<f64>> = centers.iter().flatten().cloned().collect();
    let mut nearest_dist: Vec<f64> = features
        .iter()
        .map(|f| present.iter().map(|c| squared_distance(&f.vector, c)).fold(f64::INFINITY, f64::min))
        .collect();
    let mut out = Vec::with_capacity(centers.len());
    for c in centers {
        match c {
            Some(c) => out.push(c),
            None => {
                let far = (0..features.len())
                    .max_by(|&a, &b| {
                        nearest_dist[a]
                            .total_cmp(&nearest_dist[b])
                            .then_with(|| feature_key(&features[b]).cmp(&feature_key(&features[a])))
                    })
                    .unwrap_or(0);
                let seed = features[far].vector.clone();
                for (d, f) in nearest_dist.iter_mut().zip(features) {
                    *d = d.min(squared_distance(&f.vector, &seed));
                }
                present.push(seed.clone());
                out.push(seed);
            }
        }
    }
    out
}

pub fn assign(features: &[SuperpixelFeature], centers: &[Vec<f64>]) -> Vec<usize> {
    features.par_iter().map(|f| nearest(&f.vector, centers).0).collect()
}

fn check_inputs(features: &[SuperpixelFeature], k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("k must be at least 2, got {k}")));
    }
    if features.len() < k {
        return Err(Error::TooFewFeatures { count: features.len(), k });
    }
    let dim = features[0].vector.len();
    if let Some(bad) = features.iter().find(|f| f.vector.len() != dim) {
        return Err(Error::DimensionMismatch(format!(
            "feature ({}, {}) has dimension {}, expected {dim}",
            bad.image_id,
            bad.segment_id,
            bad.vector.len()
        )));
    }
    Ok(())
}

/// Runs the iteration from an explicit initial assignment.
pub fn location_prior_kmeans_from(
    features: &[SuperpixelFeature],
    initial: Vec<usize>,
    k: usize,
    max_iters: usize,
) -> Result<ClusterResult> {
    check_inputs(features, k)?;
    if initial.len() != features.len() || initial.iter().any(|&m| m >= k) {
        return Err(Error::InvalidParameter("initial membership does not fit the features".into()));
    }
    if max_iters == 0 {
        return Err(Error::InvalidParameter("max_iters must be at least 1".into()));
    }
    let mut membership = initial;
    let mut centers = Vec::new();
    let mut converged = false;
    let mut iterations_run = 0;
    for iter in 1..=max_iters {
        centers = repair_empty(features, weighted_centers(features, &membership, k));
        let next = assign(features, &centers);
        iterations_run = iter;
        let unchanged = next == membership;
        membership = next;
        if unchanged {
            converged = true;
            break;
        }
    }
    Ok(ClusterResult { centers, membership, iterations_run, converged })
}

pub fn location_prior_kmeans(features: &[SuperpixelFeature], cfg: &PriorConfig) -> Result<ClusterResult> {
    cfg.validate()?;
    check_inputs(features, cfg.k)?;
    let init = initial_membership(features, cfg.k, cfg.seed)?;
    location_prior_kmeans_from(features, init, cfg.k, cfg.max_iters)
}

/// Splits `0..n` into consecutive groups of at most `batch_size`.
pub fn batch_ranges(n: usize, batch_size: usize) -> Vec<std::ops::Range<usize>> {
    let size = batch_size.max(1);
    (0..n).step_by(size).map(|s| s..(s + size).min(n)).collect()
}

/// One clustering over the concatenated features of all given images,
/// returned as one view per image sharing the same centers.
pub fn cluster_together(per_image: &[Vec<SuperpixelFeature>], cfg: &PriorConfig) -> Result<Vec<ClusterResult>> {
    if per_image.is_empty() {
        return Err(Error::Empty("batch has no images".into()));
    }
    let all: Vec<SuperpixelFeature> = per_image.iter().flatten().cloned().collect();
    let joint = location_prior_kmeans(&all, cfg)?;
    let mut offset = 0;
    Ok(per_image
        .iter()
        .map(|feats| {
            let membership = joint.membership[offset..offset + feats.len()].to_vec();
            offset += feats.len();
            ClusterResult { membership, ..joint.clone() }
        })
        .collect())
}

/// Groups images into batches of `cfg.batch_size` in input order (the last
/// batch may be short) and clusters each batch jointly.
pub fn cluster_batch(per_image: &[Vec<SuperpixelFeature>], cfg: &PriorConfig) -> Result<Vec<ClusterResult>> {
    cfg.validate()?;
    if per_image.is_empty() {
        return Err(Error::Empty("no images to cluster".into()));
    }
    let mut out = Vec::with_capacity(per_image.len());
    for range in batch_ranges(per_image.len(), cfg.batch_size) {
        out.extend(cluster_together(&per_image[range], cfg)?);
    }
    Ok(out)
}
