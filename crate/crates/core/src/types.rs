//! Domain types shared by every stage of the pipeline.
//!
//! Normalized coordinates are always `(row, col) = (y / height, x / width)`,
//! so `[0.75, 0.5]` means three-quarters of the way down and horizontally
//! centered.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Normalized `(row, col)` coordinate of pixel `(x, y)`.
#[inline]
pub fn normalized_coord(x: u32, y: u32, width: u32, height: u32) -> [f64; 2] {
    [y as f64 / height as f64, x as f64 / width as f64]
}

/// 8-bit RGB image, row-major, interleaved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageRGB {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl ImageRGB {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        let expected = width as usize * height as usize * 3;
        if data.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "RGB buffer of {} bytes for {width}x{height} image (expected {expected})",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [u8; 3]) -> Result<Self> {
        let mut data = Vec::with_capacity(width as usize * height as usize * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }
}

/// Dense rank-3 float tensor laid out `(channels, height, width)` in C order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
    source_image_id: String,
}

impl FeatureMap {
    pub fn new(
        channels: usize,
        height: usize,
        width: usize,
        data: Vec<f32>,
        source_image_id: impl Into<String>,
    ) -> Result<Self> {
        let declared = channels * height * width;
        if declared != data.len() {
            return Err(Error::ShapeMismatch { declared, actual: data.len() });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { channels, height, width, data, source_image_id: source_image_id.into() })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn source_image_id(&self) -> &str {
        &self.source_image_id
    }

    pub fn with_source_image_id(mut self, id: impl Into<String>) -> Self {
        self.source_image_id = id.into();
        self
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    /// Channel vector at cell `(y, x)`.
    pub fn cell(&self, y: usize, x: usize) -> Vec<f32> {
        (0..self.channels).map(|c| self.get(c, y, x)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BBox {
    pub x_min: u32,
    pub y_min: u32,
    pub x_max: u32,
    pub y_max: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub pixel_count: usize,
    /// Mean normalized `(row, col)` of the segment's pixels.
    pub centroid: [f64; 2],
    pub bbox: BBox,
}

/// Per-pixel segment labels, dense in `0..S`.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperpixelMap {
    width: u32,
    height: u32,
    labels: Vec<u32>,
    segments: Vec<Segment>,
}

impl SuperpixelMap {
    /// Builds the map and its per-segment metadata, rejecting label sets
    /// that are not dense.
    pub fn from_labels(width: u32, height: u32, labels: Vec<u32>) -> Result<Self> {
        let n = width as usize * height as usize;
        if n == 0 {
            return Err(Error::InvalidParameter("empty label map".into()));
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {width}x{height} map",
                labels.len()
            )));
        }
        let count = labels.iter().copied().max().map_or(0, |m| m as usize + 1);
        let mut sums = vec![[0.0f64; 2]; count];
        let mut counts = vec![0usize; count];
        let mut bboxes = vec![
            BBox { x_min: u32::MAX, y_min: u32::MAX, x_max: 0, y_max: 0 };
            count
        ];
        for y in 0..height {
            for x in 0..width {
                let l = labels[(y * width + x) as usize] as usize;
                let p = normalized_coord(x, y, width, height);
                sums[l][0] += p[0];
                sums[l][1] += p[1];
                counts[l] += 1;
                let b = &mut bboxes[l];
                b.x_min = b.x_min.min(x);
                b.y_min = b.y_min.min(y);
                b.x_max = b.x_max.max(x);
                b.y_max = b.y_max.max(y);
            }
        }
        if let Some(missing) = counts.iter().position(|&c| c == 0) {
            return Err(Error::InvalidParameter(format!(
                "label set is not dense: label {missing} unused"
            )));
        }
        let segments = (0..count)
            .map(|i| {
                let c = counts[i] as f64;
                Segment {
                    pixel_count: counts[i],
                    centroid: [sums[i][0] / c, sums[i][1] / c],
                    bbox: bboxes[i],
                }
            })
            .collect();
        Ok(Self { width, height, labels, segments })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn segment_count(&self) -> usize {
        self.segments.len()
    }

    #[inline]
    pub fn label(&self, x: u32, y: u32) -> u32 {
        self.labels[(y * self.width + x) as usize]
    }

    /// Flat pixel indices of every segment, each list in raster order.
    pub fn segment_pixels(&self) -> Vec<Vec<u32>> {
        let mut out: Vec<Vec<u32>> =
            self.segments.iter().map(|s| Vec::with_capacity(s.pixel_count)).collect();
        for (i, &l) in self.labels.iter().enumerate() {
            out[l as usize].push(i as u32);
        }
        out
    }
}

/// Parameters of the location prior and the clustering run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    /// Prior center, normalized `(row, col)`.
    pub mu: [f64; 2],
    /// Per-dimension standard deviations, normalized units.
    pub sigma: [f64; 2],
    pub k: usize,
    pub batch_size: usize,
    pub samples_per_superpixel: usize,
    pub centroid_weight: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            mu: [0.75, 0.5],
            sigma: [0.1, 0.1],
            k: 4,
            batch_size: 30,
            samples_per_superpixel: 10,
            centroid_weight: 1.0,
            max_iters: 100,
            seed: 0,
        }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.k < 2 {
            return bad(format!("k must be at least 2, got {}", self.k));
        }
        if !(self.sigma[0] > 0.0 && self.sigma[1] > 0.0) {
            return bad(format!("sigma components must be positive, got {:?}", self.sigma));
        }
        if self.samples_per_superpixel < 1 {
            return bad("samples_per_superpixel must be at least 1".into());
        }
        if self.batch_size < 1 {
            return bad("batch_size must be at least 1".into());
        }
        if !self.centroid_weight.is_finite() || !self.mu.iter().all(|m| m.is_finite()) {
            return bad("mu and centroid_weight must be finite".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MaskLabel {
    Free,
    NotFree,
    Void,
}

impl MaskLabel {
    pub const FREE_BYTE: u8 = 255;
    pub const NOT_FREE_BYTE: u8 = 0;
    pub const VOID_BYTE: u8 = 128;

    pub fn to_byte(self) -> u8 {
        match self {
            MaskLabel::Free => Self::FREE_BYTE,
            MaskLabel::NotFree => Self::NOT_FREE_BYTE,
            MaskLabel::Void => Self::VOID_BYTE,
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            Self::FREE_BYTE => Some(MaskLabel::Free),
            Self::NOT_FREE_BYTE => Some(MaskLabel::NotFree),
            Self::VOID_BYTE => Some(MaskLabel::Void),
            _ => None,
        }
    }
}

/// Per-pixel free-space labeling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    labels: Vec<MaskLabel>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32, labels: Vec<MaskLabel>) -> Result<Self> {
        if labels.len() != width as usize * height as usize {
            return Err(Error::DimensionMismatch(format!(
                "{} mask labels for {width}x{height}",
                labels.len()
            )));
        }
        Ok(Self { width, height, labels })
    }

    pub fn filled(width: u32, height: u32, label: MaskLabel) -> Self {
        Self { width, height, labels: vec![label; width as usize * height as usize] }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> MaskLabel) -> Self {
        let mut labels = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                labels.push(f(x, y));
            }
        }
        Self { width, height, labels }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn labels(&self) -> &[MaskLabel] {
        &self.labels
    }

    pub fn labels_mut(&mut self) -> &mut [MaskLabel] {
        &mut self.labels
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> MaskLabel {
        self.labels[(y * self.width + x) as usize]
    }

    pub fn count(&self, label: MaskLabel) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn same_dims(&self, other: &BinaryMask) -> bool {
        self.width == other.width && self.height == other.height
    }
}
