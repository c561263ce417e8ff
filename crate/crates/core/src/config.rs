//! Run configuration: a flat `key = value` text file.
//!
//! Blank lines and lines starting with `#` are ignored. Recognized keys:
//!
//! | key | meaning | default |
//! |-----|---------|---------|
//! | `image_dir` | directory of input PNGs | required for `generate` |
//! | `feature_dir` | directory of `<stem>.fmp1` feature maps; omit for the fallback extractor | none |
//! | `out_dir` | where masks and the manifest go | `masks` |
//! | `fallback_stride` | cell size of the fallback extractor | 8 |
//! | `mode` | `aligned`, `raw` or `raw_overlap` | `aligned` |
//! | `overlap_tau` | overlap fraction for `raw_overlap` | 0.5 |
//! | `k` | number of clusters | 4 |
//! | `batch_size` | images per clustering batch | 30 |
//! | `samples_per_superpixel` | sampled pixels per superpixel | 10 |
//! | `centroid_weight` | multiplier on the appended centroid | 1.0 |
//! | `max_iters` | iteration cap | 100 |
//! | `seed` | run seed | 0 |
//! | `mu_row`, `mu_col` | prior center | 0.75, 0.5 |
//! | `sigma_row`, `sigma_col` | prior std-devs | 0.1, 0.1 |
//! | `scale` | superpixel merge threshold | 300 |
//! | `smoothing_sigma` | pre-smoothing std-dev | 0.8 |
//! | `min_size` | minimum superpixel size | 100 |
//! | `workers` | worker threads, 0 = all cores | 0 |

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::superpix::FHParams;
use crate::types::PriorConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    /// Superpixel-aligned features.
    Aligned,
    /// One pseudo-superpixel per feature-map cell.
    Raw,
    /// Raw-cell clustering used as saliency, then superpixel overlap selection.
    RawOverlap,
}

impl FromStr for FeatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "aligned" => Ok(FeatureMode::Aligned),
            "raw" => Ok(FeatureMode::Raw),
            "raw_overlap" => Ok(FeatureMode::RawOverlap),
            other => Err(Error::Config(format!("unknown mode {other:?}"))),
        }
    }
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureMode::Aligned => "aligned",
            FeatureMode::Raw => "raw",
            FeatureMode::RawOverlap => "raw_overlap",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub image_dir: Option<PathBuf>,
    pub feature_dir: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub fallback_stride: usize,
    pub mode: FeatureMode,
    pub overlap_tau: f64,
    pub prior: PriorConfig,
    pub superpixels: FHParams,
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            image_dir: None,
            feature_dir: None,
            out_dir: PathBuf::from("masks"),
            fallback_stride: 8,
            mode: FeatureMode::Aligned,
            overlap_tau: 0.5,
            prior: PriorConfig::default(),
            superpixels: FHParams::default(),
            workers: 0,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

impl RunConfig {
    pub fn from_str_pairs(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_str_pairs(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "image_dir" => self.image_dir = Some(PathBuf::from(value)),
            "feature_dir" => {
                self.feature_dir = if value.is_empty() { None } else { Some(PathBuf::from(value)) }
            }
            "out_dir" => self.out_dir = PathBuf::from(value),
            "fallback_stride" => self.fallback_stride = parse(key, value)?,
            "mode" => self.mode = value.parse()?,
            "overlap_tau" => self.overlap_tau = parse(key, value)?,
            "k" => self.prior.k = parse(key, value)?,
            "batch_size" => self.prior.batch_size = parse(key, value)?,
            "samples_per_superpixel" => self.prior.samples_per_superpixel = parse(key, value)?,
            "centroid_weight" => self.prior.centroid_weight = parse(key, value)?,
            "max_iters" => self.prior.max_iters = parse(key, value)?,
            "seed" => self.prior.seed = parse(key, value)?,
            "mu_row" => self.prior.mu[0] = parse(key, value)?,
            "mu_col" => self.prior.mu[1] = parse(key, value)?,
            "sigma_row" => self.prior.sigma[0] = parse(key, value)?,
            "sigma_col" => self.prior.sigma[1] = parse(key, value)?,
            "scale" => self.superpixels.scale = parse(key, value)?,
            "smoothing_sigma" => self.superpixels.smoothing_sigma = parse(key, value)?,
            "min_size" => self.superpixels.min_size = parse(key, value)?,
            "workers" => self.workers = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Applies `key=value` overrides, e.g. from the command line.
    pub fn apply_overrides<'a>(&mut self, overrides: impl IntoIterator<Item = &'a str>) -> Result<()> {
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override {o:?} is not key=value")))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.prior.validate()?;
        self.superpixels.validate()?;
        if self.fallback_stride == 0 {
            return Err(Error::InvalidParameter("fallback_stride must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.overlap_tau) {
            return Err(Error::InvalidParameter("overlap_tau must lie in [0, 1]".into()));
        }
        if self.prior.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be at least 1".into()));
        }
        Ok(())
    }

    /// Every key with its effective value, in key order; recorded in the
    /// manifest and re-parseable with [`RunConfig::from_str_pairs`].
    pub fn to_pairs(&self) -> BTreeMap<String, String> {
        let p = &self.prior;
        let s = &self.superpixels;
        let path = |o: &Option<PathBuf>| o.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        [
            ("image_dir", path(&self.image_dir)),
            ("feature_dir", path(&self.feature_dir)),
            ("out_dir", self.out_dir.display().to_string()),
            ("fallback_stride", self.fallback_stride.to_string()),
            ("mode", self.mode.to_string()),
            ("overlap_tau", self.overlap_tau.to_string()),
            ("k", p.k.to_string()),
            ("batch_size", p.batch_size.to_string()),
            ("samples_per_superpixel", p.samples_per_superpixel.to_string()),
            ("centroid_weight", p.centroid_weight.to_string()),
            ("max_iters", p.max_iters.to_string()),
            ("seed", p.seed.to_string()),
            ("mu_row", p.mu[0].to_string()),
            ("mu_col", p.mu[1].to_string()),
            ("sigma_row", p.sigma[0].to_string()),
            ("sigma_col", p.sigma[1].to_string()),
            ("scale", s.scale.to_string()),
            ("smoothing_sigma", s.smoothing_sigma.to_string()),
            ("min_size", s.min_size.to_string()),
            ("workers", self.workers.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }
}
