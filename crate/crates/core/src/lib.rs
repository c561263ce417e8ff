//! Free-space mask generation for driving images without manual labels.
//!
//! The pipeline over-segments each image into superpixels, pools a feature
//! map into one vector per superpixel, clusters those vectors with a
//! location-prior k-means in which cluster 0 is pulled toward the
//! bottom-center of the frame, and emits cluster 0 as the free-space mask.
//! Masks can be scored against ground truth with void-aware IoU.
//!
//! Modules map onto the pipeline stages:
//!
//! * [`superpix`]: graph-based superpixels
//! * [`align`]: per-superpixel feature pooling and prior weights
//! * [`fallback`]: hand-crafted feature maps when none are supplied
//! * [`cluster`]: location-prior k-means and batch clustering
//! * [`maskgen`] / [`eval`]: masks, baselines and scoring
//! * [`pipeline`]: directory-level generate / evaluate / sweep

pub mod align;
pub mod cluster;
pub mod config;
pub mod error;
pub mod eval;
pub mod fallback;
pub mod io;
pub mod maskgen;
pub mod pipeline;
pub mod rng;
pub mod superpix;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use types::{BinaryMask, FeatureMap, ImageRGB, MaskLabel, PriorConfig, Segment, SuperpixelMap};
