//! Turning cluster memberships into pixel masks, plus the simple baselines.

use crate::align::pixel_to_cell;
use crate::cluster::FREE_SPACE_CLUSTER;
use crate::error::{Error, Result};
use crate::types::{BinaryMask, ImageRGB, MaskLabel, SuperpixelMap};

/// A pixel is FREE iff its segment's membership is the free-space cluster.
pub fn mask_from_membership(sp: &SuperpixelMap, membership: &[usize]) -> Result<BinaryMask> {
    if membership.len() < sp.segment_count() {
        return Err(Error::MissingMembership(membership.len()));
    }
    let labels = sp
        .labels()
        .iter()
        .map(|&l| {
            if membership[l as usize] == FREE_SPACE_CLUSTER {
                MaskLabel::Free
            } else {
                MaskLabel::NotFree
            }
        })
        .collect();
    BinaryMask::new(sp.width(), sp.height(), labels)
}

/// Mask for per-cell (raw feature) clustering: each pixel takes the
/// membership of the feature-map cell nearest to its mapped position.
pub fn mask_from_cell_membership(
    width: u32,
    height: u32,
    fmap_height: usize,
    fmap_width: usize,
    membership: &[usize],
) -> Result<BinaryMask> {
    if membership.len() != fmap_height * fmap_width {
        return Err(Error::MissingMembership(membership.len()));
    }
    Ok(BinaryMask::from_fn(width, height, |x, y| {
        let (yf, xf) = pixel_to_cell(x, y, width, height, fmap_width, fmap_height);
        let cell = yf.round() as usize * fmap_width + xf.round() as usize;
        if membership[cell] == FREE_SPACE_CLUSTER {
            MaskLabel::Free
        } else {
            MaskLabel::NotFree
        }
    }))
}

/// Keeps every segment whose overlap with the saliency FREE region is at
/// least `tau` of its area.
pub fn overlap_select(sp: &SuperpixelMap, saliency: &BinaryMask, tau: f64) -> Result<BinaryMask> {
    if sp.width() != saliency.width() || sp.height() != saliency.height() {
        return Err(Error::DimensionMismatch(format!(
            "superpixels {}x{} vs saliency {}x{}",
            sp.width(),
            sp.height(),
            saliency.width(),
            saliency.height()
        )));
    }
    let mut hits = vec![0usize; sp.segment_count()];
    for (&l, &s) in sp.labels().iter().zip(saliency.labels()) {
        if s == MaskLabel::Free {
            hits[l as usize] += 1;
        }
    }
    let keep: Vec<bool> = sp
        .segments()
        .iter()
        .zip(&hits)
        .map(|(seg, &h)| h as f64 >= tau * seg.pixel_count as f64)
        .collect();
    let labels = sp
        .labels()
        .iter()
        .map(|&l| if keep[l as usize] { MaskLabel::Free } else { MaskLabel::NotFree })
        .collect();
    BinaryMask::new(sp.width(), sp.height(), labels)
}

/// FREE on rows `y >= ceil(height / 2)`.
pub fn bottom_half_mask(width: u32, height: u32) -> BinaryMask {
    let first = height.div_ceil(2);
    BinaryMask::from_fn(width, height, |_, y| if y >= first { MaskLabel::Free } else { MaskLabel::NotFree })
}

/// Alpha-blends red at 0.5 over FREE pixels, rounding halves up.
pub fn overlay(image: &ImageRGB, mask: &BinaryMask) -> Result<ImageRGB> {
    if image.width() != mask.width() || image.height() != mask.height() {
        return Err(Error::DimensionMismatch(format!(
            "image {}x{} vs mask {}x{}",
            image.width(),
            image.height(),
            mask.width(),
            mask.height()
        )));
    }
    const RED: [u8; 3] = [255, 0, 0];
    ImageRGB::from_fn(image.width(), image.height(), |x, y| {
        let p = image.pixel(x, y);
        if mask.get(x, y) == MaskLabel::Free {
            std::array::from_fn(|c| (p[c] as u16 + RED[c] as u16).div_ceil(2) as u8)
        } else {
            p
        }
    })
}
