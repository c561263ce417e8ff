//! Felzenszwalb-Huttenlocher graph-based superpixels.
//!
//! The image is Gaussian-smoothed per channel, then an 8-connected pixel
//! graph is built with edge weights equal to the Euclidean distance between
//! smoothed RGB values. Edges are processed in nondecreasing weight order and
//! two components merge when the edge weight does not exceed either
//! component's internal difference plus `scale / |C|`. A final pass over the
//! same edge order absorbs any component smaller than `min_size` into its
//! neighbor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{BinaryMask, ImageRGB, MaskLabel, SuperpixelMap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FHParams {
    pub scale: f64,
    pub smoothing_sigma: f64,
    pub min_size: usize,
}

impl Default for FHParams {
    fn default() -> Self {
        Self { scale: 300.0, smoothing_sigma: 0.8, min_size: 100 }
    }
}

impl FHParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::InvalidParameter(format!("scale must be > 0, got {}", self.scale)));
        }
        if self.min_size < 1 {
            return Err(Error::InvalidParameter("min_size must be at least 1".into()));
        }
        if !(self.smoothing_sigma >= 0.0 && self.smoothing_sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "smoothing_sigma must be >= 0, got {}",
                self.smoothing_sigma
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Edge {
    pub a: u32,
    pub b: u32,
    pub w: f32,
}

struct DisjointSet {
    parent: Vec<u32>,
    rank: Vec<u8>,
    size: Vec<u32>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self { parent: (0..n as u32).collect(), rank: vec![0; n], size: vec![1; n] }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        let mut root = x;
        while self.parent[root as usize] != root {
            root = self.parent[root as usize];
        }
        while self.parent[x as usize] != root {
            let next = self.parent[x as usize];
            self.parent[x as usize] = root;
            x = next;
        }
        root
    }

    /// Joins two roots; returns the new root.
    fn join(&mut self, a: u32, b: u32) -> u32 {
        let (ra, rb) = (self.rank[a as usize], self.rank[b as usize]);
        let (root, child) = if ra < rb { (b, a) } else { (a, b) };
        if ra == rb {
            self.rank[root as usize] += 1;
        }
        self.parent[child as usize] = root;
        self.size[root as usize] += self.size[child as usize];
        root
    }

    fn size(&self, root: u32) -> u32 {
        self.size[root as usize]
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f32> {
    let sigma = sigma.max(0.01);
    let len = (sigma * 4.0).ceil() as usize + 1;
    let mut k: Vec<f64> = (0..len).map(|i| (-0.5 * (i as f64 / sigma).powi(2)).exp()).collect();
    let sum = 2.0 * k.iter().sum::<f64>() - k[0];
    for v in &mut k {
        *v /= sum;
    }
    k.into_iter().map(|v| v as f32).collect()
}

/// Separable Gaussian blur of one channel plane, clamping at borders.
fn smooth_plane(src: &[f32], width: usize, height: usize, kernel: &[f32]) -> Vec<f32> {
    let r = kernel.len() as isize - 1;
    let mut tmp = vec![0.0f32; src.len()];
    for y in 0..height {
        let row = &src[y * width..(y + 1) * width];
        for x in 0..width {
            let mut acc = kernel[0] * row[x];
            for i in 1..=r {
                let l = (x as isize - i).max(0) as usize;
                let rr = (x as isize + i).min(width as isize - 1) as usize;
                acc += kernel[i as usize] * (row[l] + row[rr]);
            }
            tmp[y * width + x] = acc;
        }
    }
    let mut out = vec![0.0f32; src.len()];
    for y in 0..height {
        for x in 0..width {
            let mut acc = kernel[0] * tmp[y * width + x];
            for i in 1..=r {
                let u = (y as isize - i).max(0) as usize;
                let d = (y as isize + i).min(height as isize - 1) as usize;
                acc += kernel[i as usize] * (tmp[u * width + x] + tmp[d * width + x]);
            }
            out[y * width + x] = acc;
        }
    }
    out
}

fn smoothed_channels(image: &ImageRGB, sigma: f64) -> [Vec<f32>; 3] {
    let (w, h) = (image.width() as usize, image.height() as usize);
    let data = image.data();
    let plane = |c: usize| -> Vec<f32> { data.iter().skip(c).step_by(3).map(|&v| v as f32).collect() };
    let planes = [plane(0), plane(1), plane(2)];
    if sigma == 0.0 {
        return planes;
    }
    let kernel = gaussian_kernel(sigma);
    planes.map(|p| smooth_plane(&p, w, h, &kernel))
}

/// 8-connected edges, sorted by `(weight, a, b)`.
pub(crate) fn build_edges(image: &ImageRGB, sigma: f64) -> Vec<Edge> {
    let (w, h) = (image.width() as usize, image.height() as usize);
    let ch = smoothed_channels(image, sigma);
    let diff = |a: usize, b: usize| -> f32 {
        ch.iter().map(|p| (p[a] - p[b]).powi(2)).sum::<f32>().sqrt()
    };
    let mut edges = Vec::with_capacity(w * h * 4);
    for y in 0..h {
        for x in 0..w {
            let a = y * w + x;
            let mut push = |b: usize| edges.push(Edge { a: a as u32, b: b as u32, w: diff(a, b) });
            if x + 1 < w {
                push(a + 1);
            }
            if y + 1 < h {
                push(a + w);
            }
            if x + 1 < w && y + 1 < h {
                push(a + w + 1);
            }
            if x + 1 < w && y > 0 {
                push(a - w + 1);
            }
        }
    }
    edges.sort_by(|e, f| e.w.total_cmp(&f.w).then(e.a.cmp(&f.a)).then(e.b.cmp(&f.b)));
    edges
}

/// Segments `image` into superpixels.
///
/// Labels are assigned in raster order of each segment's first pixel. When
/// the whole image is smaller than `min_size` the result is one segment.
pub fn segment(image: &ImageRGB, params: &FHParams) -> Result<SuperpixelMap> {
    params.validate()?;
    let (w, h) = (image.width(), image.height());
    let n = w as usize * h as usize;
    let edges = build_edges(image, params.smoothing_sigma);
    let scale = params.scale as f32;

    let mut sets = DisjointSet::new(n);
    let mut threshold = vec![scale; n];
    for e in &edges {
        let a = sets.find(e.a);
        let b = sets.find(e.b);
        if a != b && e.w <= threshold[a as usize] && e.w <= threshold[b as usize] {
            let root = sets.join(a, b);
            threshold[root as usize] = e.w + scale / sets.size(root) as f32;
        }
    }

    let min_size = params.min_size as u32;
    for e in &edges {
        let a = sets.find(e.a);
        let b = sets.find(e.b);
        if a != b && (sets.size(a) < min_size || sets.size(b) < min_size) {
            sets.join(a, b);
        }
    }

    let mut remap = vec![u32::MAX; n];
    let mut next = 0u32;
    let mut labels = Vec::with_capacity(n);
    for i in 0..n as u32 {
        let root = sets.find(i) as usize;
        if remap[root] == u32::MAX {
            remap[root] = next;
            next += 1;
        }
        labels.push(remap[root]);
    }
    SuperpixelMap::from_labels(w, h, labels)
}

/// FREE on the segment with the most pixels, ties to the lowest id.
pub fn largest_superpixel_mask(sp: &SuperpixelMap) -> BinaryMask {
    let best = sp
        .segments()
        .iter()
        .enumerate()
        .fold((0usize, 0usize), |(bi, bc), (i, s)| {
            if s.pixel_count > bc {
                (i, s.pixel_count)
            } else {
                (bi, bc)
            }
        })
        .0 as u32;
    BinaryMask::from_fn(sp.width(), sp.height(), |x, y| {
        if sp.label(x, y) == best {
            MaskLabel::Free
        } else {
            MaskLabel::NotFree
        }
    })
}

/// Paints segment boundaries in `color` on a copy of `image`.
pub fn boundary_overlay(image: &ImageRGB, sp: &SuperpixelMap, color: [u8; 3]) -> Result<ImageRGB> {
    if image.width() != sp.width() || image.height() != sp.height() {
        return Err(Error::DimensionMismatch("overlay image and superpixel map differ".into()));
    }
    let (w, h) = (sp.width(), sp.height());
    ImageRGB::from_fn(w, h, |x, y| {
        let l = sp.label(x, y);
        let edge = (x + 1 < w && sp.label(x + 1, y) != l) || (y + 1 < h && sp.label(x, y + 1) != l);
        if edge {
            color
        } else {
            image.pixel(x, y)
        }
    })
}
