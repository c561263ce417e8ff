//! PNG and FMP1/SPF1 file I/O.
//!
//! FMP1 layout: `b"FMP1"`, then `C`, `Hf`, `Wf` as little-endian `u32`, then
//! `C * Hf * Wf` little-endian `f32` values in `(C, Hf, Wf)` C order. No
//! padding, no footer.
//!
//! SPF1 layout: `b"SPF1"`, `count` and `dim` as little-endian `u32`, then
//! `count * dim` little-endian `f32` feature values, then `count` `f32`
//! prior weights.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use image::{ColorType, DynamicImage, ImageFormat, ImageReader};

use crate::align::SuperpixelFeature;
use crate::error::{Error, Result};
use crate::types::{BinaryMask, FeatureMap, ImageRGB, MaskLabel};

pub const FMP1_MAGIC: [u8; 4] = *b"FMP1";
pub const SPF1_MAGIC: [u8; 4] = *b"SPF1";

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::NotFound(path.to_path_buf()),
        _ => Error::Io(e),
    })
}

fn decode_png(path: &Path) -> Result<DynamicImage> {
    let bytes = read_bytes(path)?;
    let reader = ImageReader::with_format(Cursor::new(bytes), ImageFormat::Png);
    reader.decode().map_err(|e| match e {
        image::ImageError::Unsupported(u) => Error::UnsupportedBitDepth {
            path: path.to_path_buf(),
            detail: u.to_string(),
        },
        other => Error::CorruptStream { path: path.to_path_buf(), detail: other.to_string() },
    })
}

fn require_8bit(path: &Path, img: &DynamicImage) -> Result<()> {
    match img.color() {
        ColorType::L8 | ColorType::La8 | ColorType::Rgb8 | ColorType::Rgba8 => Ok(()),
        other => Err(Error::UnsupportedBitDepth {
            path: path.to_path_buf(),
            detail: format!("{other:?}; only 8-bit channels are accepted"),
        }),
    }
}

/// Loads an 8-bit PNG as RGB. Gray inputs are replicated across channels and
/// alpha is dropped.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageRGB> {
    let path = path.as_ref();
    let img = decode_png(path)?;
    require_8bit(path, &img)?;
    let rgb = img.into_rgb8();
    let (w, h) = rgb.dimensions();
    ImageRGB::new(w, h, rgb.into_raw())
}

pub fn save_image(path: impl AsRef<Path>, img: &ImageRGB) -> Result<()> {
    write_png(path.as_ref(), img.data(), img.width(), img.height(), image::ExtendedColorType::Rgb8)
}

fn write_png(
    path: &Path,
    buf: &[u8],
    width: u32,
    height: u32,
    color: image::ExtendedColorType,
) -> Result<()> {
    image::save_buffer_with_format(path, buf, width, height, color, ImageFormat::Png).map_err(
        |e| match e {
            image::ImageError::IoError(io) => Error::Io(io),
            other => Error::Io(std::io::Error::other(other.to_string())),
        },
    )
}

/// Loads a single-channel mask PNG; every value must be 0, 128 or 255.
pub fn load_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let path = path.as_ref();
    let img = decode_png(path)?;
    if img.color() != ColorType::L8 {
        return Err(Error::UnsupportedBitDepth {
            path: path.to_path_buf(),
            detail: format!("{:?}; masks must be 8-bit single-channel", img.color()),
        });
    }
    let gray = img.into_luma8();
    let (w, h) = gray.dimensions();
    let mut labels = Vec::with_capacity(w as usize * h as usize);
    for (i, &v) in gray.as_raw().iter().enumerate() {
        let label = MaskLabel::from_byte(v).ok_or(Error::InvalidMaskValue {
            value: v,
            x: i as u32 % w,
            y: i as u32 / w,
        })?;
        labels.push(label);
    }
    BinaryMask::new(w, h, labels)
}

pub fn save_mask(path: impl AsRef<Path>, mask: &BinaryMask) -> Result<()> {
    let bytes: Vec<u8> = mask.labels().iter().map(|l| l.to_byte()).collect();
    write_png(path.as_ref(), &bytes, mask.width(), mask.height(), image::ExtendedColorType::L8)
}

/// Loads an 8-bit gray PNG verbatim (e.g. Cityscapes `*_labelIds.png`).
pub fn load_gray8(path: impl AsRef<Path>) -> Result<(u32, u32, Vec<u8>)> {
    let path = path.as_ref();
    let img = decode_png(path)?;
    if img.color() != ColorType::L8 {
        return Err(Error::UnsupportedBitDepth {
            path: path.to_path_buf(),
            detail: format!("{:?}; expected 8-bit gray", img.color()),
        });
    }
    let g = img.into_luma8();
    let (w, h) = g.dimensions();
    Ok((w, h, g.into_raw()))
}

/// Writes segment labels as a 16-bit gray PNG.
pub fn save_label_map16(
    path: impl AsRef<Path>,
    width: u32,
    height: u32,
    labels: &[u32],
) -> Result<()> {
    let max = labels.iter().copied().max().unwrap_or(0);
    if max > u16::MAX as u32 {
        return Err(Error::TooManySegments(max as usize + 1));
    }
    let buf: Vec<u16> = labels.iter().map(|&l| l as u16).collect();
    let img = image::ImageBuffer::<image::Luma<u16>, _>::from_raw(width, height, buf)
        .ok_or_else(|| Error::DimensionMismatch("label buffer does not match dimensions".into()))?;
    img.save_with_format(path.as_ref(), ImageFormat::Png).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(other.to_string())),
    })
}

pub fn encode_feature_map(fmap: &FeatureMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + fmap.data().len() * 4);
    out.extend_from_slice(&FMP1_MAGIC);
    for dim in [fmap.channels(), fmap.height(), fmap.width()] {
        out.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    for v in fmap.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_feature_map(bytes: &[u8], source_image_id: &str) -> Result<FeatureMap> {
    if bytes.len() < 4 || bytes[..4] != FMP1_MAGIC {
        return Err(Error::BadMagic {
            expected: FMP1_MAGIC,
            found: bytes[..bytes.len().min(4)].to_vec(),
        });
    }
    if bytes.len() < 16 {
        return Err(Error::ShapeMismatch { declared: 0, actual: 0 });
    }
    let dim = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    let (c, h, w) = (dim(0), dim(1), dim(2));
    let declared = c
        .checked_mul(h)
        .and_then(|v| v.checked_mul(w))
        .ok_or_else(|| Error::InvalidParameter(format!("FMP1 shape {c}x{h}x{w} overflows")))?;
    let payload = &bytes[16..];
    if !payload.len().is_multiple_of(4) || payload.len() / 4 != declared {
        return Err(Error::ShapeMismatch { declared, actual: payload.len() / 4 });
    }
    let data: Vec<f32> = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    FeatureMap::new(c, h, w, data, source_image_id)
}

/// Loads an FMP1 file; the file stem becomes the source image id.
pub fn load_feature_map(path: impl AsRef<Path>) -> Result<FeatureMap> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    decode_feature_map(&bytes, &id)
}

pub fn write_feature_map(path: impl AsRef<Path>, fmap: &FeatureMap) -> Result<()> {
    fs::write(path, encode_feature_map(fmap))?;
    Ok(())
}

pub fn encode_superpixel_features(features: &[SuperpixelFeature]) -> Result<Vec<u8>> {
    let dim = features.first().map_or(0, |f| f.vector.len());
    if features.iter().any(|f| f.vector.len() != dim) {
        return Err(Error::DimensionMismatch("superpixel features differ in length".into()));
    }
    let mut out = Vec::with_capacity(12 + features.len() * (dim + 1) * 4);
    out.extend_from_slice(&SPF1_MAGIC);
    out.extend_from_slice(&(features.len() as u32).to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    for f in features {
        for &v in &f.vector {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    for f in features {
        out.extend_from_slice(&(f.prior_weight as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn write_superpixel_features(path: impl AsRef<Path>, features: &[SuperpixelFeature]) -> Result<()> {
    fs::write(path, encode_superpixel_features(features)?)?;
    Ok(())
}
