//! Directory-level orchestration: mask generation, evaluation and parameter
//! sweeps.
//!
//! Images are processed in sorted-filename order and grouped into batches of
//! `batch_size` before anything is loaded, so batch membership depends only
//! on the file listing. Per-image stages (superpixels, features, alignment)
//! run on a worker pool; each batch is then clustered jointly. All
//! randomness is keyed by image id, so results do not depend on the number
//! of workers.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::align::{align_superpixels, pixel_features_raw, SuperpixelFeature};
use crate::cluster::{batch_ranges, cluster_together};
use crate::config::{FeatureMode, RunConfig};
use crate::error::{Error, Result};
use crate::eval::{aggregate_scores, cityscapes_road_mask, score, Score};
use crate::fallback::handcrafted_feature_map;
use crate::io;
use crate::maskgen::{bottom_half_mask, mask_from_cell_membership, mask_from_membership, overlap_select};
use crate::rng::image_rng;
use crate::superpix::{largest_superpixel_mask, segment};
use crate::types::{BinaryMask, FeatureMap, ImageRGB, MaskLabel, SuperpixelMap};

/// One image ready to enter the pipeline.
#[derive(Debug, Clone)]
pub struct ImageInput {
    pub id: String,
    pub image: ImageRGB,
    /// Precomputed feature map; `None` uses the fallback extractor.
    pub features: Option<FeatureMap>,
}

#[derive(Debug, Clone)]
pub struct Prepared {
    pub id: String,
    pub width: u32,
    pub height: u32,
    pub superpixels: SuperpixelMap,
    pub fmap: FeatureMap,
    pub features: Vec<SuperpixelFeature>,
}

#[derive(Debug, Clone)]
pub struct ImageOutcome {
    pub id: String,
    pub mask: BinaryMask,
    pub segments: usize,
    pub features: usize,
    pub converged: bool,
    pub iterations: usize,
}

/// Superpixels, feature map and clustering features for one image.
pub fn prepare(input: ImageInput, cfg: &RunConfig) -> Result<Prepared> {
    let ImageInput { id, image, features } = input;
    let superpixels = segment(&image, &cfg.superpixels)?;
    let fmap = match features {
        Some(f) => f.with_source_image_id(id.clone()),
        None => handcrafted_feature_map(&image, cfg.fallback_stride, &id)?,
    };
    let features = match cfg.mode {
        FeatureMode::Aligned => {
            let mut rng = image_rng(cfg.prior.seed, &id);
            align_superpixels(&fmap, &superpixels, &cfg.prior, &mut rng)?
        }
        FeatureMode::Raw | FeatureMode::RawOverlap => {
            pixel_features_raw(&fmap, (image.width(), image.height()), &cfg.prior)
        }
    };
    Ok(Prepared { id, width: image.width(), height: image.height(), superpixels, fmap, features })
}

/// Clusters one batch jointly and converts memberships to masks.
pub fn masks_for_batch(batch: &[Prepared], cfg: &RunConfig) -> Result<Vec<ImageOutcome>> {
    let per_image: Vec<Vec<SuperpixelFeature>> = batch.iter().map(|p| p.features.clone()).collect();
    let views = cluster_together(&per_image, &cfg.prior)?;
    batch
        .iter()
        .zip(views)
        .map(|(p, view)| {
            let mask = match cfg.mode {
                FeatureMode::Aligned => mask_from_membership(&p.superpixels, &view.membership)?,
                FeatureMode::Raw => mask_from_cell_membership(
                    p.width,
                    p.height,
                    p.fmap.height(),
                    p.fmap.width(),
                    &view.membership,
                )?,
                FeatureMode::RawOverlap => {
                    let saliency = mask_from_cell_membership(
                        p.width,
                        p.height,
                        p.fmap.height(),
                        p.fmap.width(),
                        &view.membership,
                    )?;
                    overlap_select(&p.superpixels, &saliency, cfg.overlap_tau)?
                }
            };
            Ok(ImageOutcome {
                id: p.id.clone(),
                mask,
                segments: p.superpixels.segment_count(),
                features: p.features.len(),
                converged: view.converged,
                iterations: view.iterations_run,
            })
        })
        .collect()
}

/// Runs the whole pipeline in memory, batching in input order.
pub fn run_in_memory(inputs: Vec<ImageInput>, cfg: &RunConfig) -> Result<Vec<ImageOutcome>> {
    cfg.validate()?;
    if inputs.is_empty() {
        return Err(Error::Empty("no images".into()));
    }
    let prepared: Vec<Prepared> = with_pool(cfg.workers, || {
        inputs.into_par_iter().map(|i| prepare(i, cfg)).collect::<Result<Vec<_>>>()
    })??;
    let mut out = Vec::with_capacity(prepared.len());
    for range in batch_ranges(prepared.len(), cfg.prior.batch_size) {
        out.extend(masks_for_batch(&prepared[range], cfg)?);
    }
    Ok(out)
}

fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(pool.install(f))
}

/// Sorted `*.png` files directly inside `dir`.
pub fn list_pngs(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::NotFound(dir.to_path_buf()),
        _ => Error::Io(e),
    })?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry?.path();
        if path.is_file() && path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub name: String,
    pub mask: String,
    pub batch: usize,
    pub segments: usize,
    pub features: usize,
    pub converged: bool,
    pub iterations: usize,
    pub free_pixels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub name: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub params: std::collections::BTreeMap<String, String>,
    pub seed: u64,
    pub images: Vec<ImageRecord>,
    pub failures: Vec<Failure>,
}

impl Manifest {
    pub fn is_partial(&self) -> bool {
        !self.failures.is_empty()
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";

fn load_input(path: &Path, cfg: &RunConfig) -> Result<ImageInput> {
    let id = stem(path);
    let image = io::load_image(path)?;
    let features = match &cfg.feature_dir {
        Some(dir) => {
            let f = io::load_feature_map(dir.join(format!("{id}.fmp1")))?;
            Some(f)
        }
        None => None,
    };
    Ok(ImageInput { id, image, features })
}

/// Generates a mask PNG per input image plus `manifest.json` in `out_dir`.
///
/// Images that fail to load (or whose batch cannot be clustered) are
/// recorded as failures and skipped; the rest of the run continues.
pub fn generate(cfg: &RunConfig) -> Result<Manifest> {
    cfg.validate()?;
    let image_dir = cfg.image_dir.as_ref().ok_or_else(|| Error::Config("image_dir is not set".into()))?;
    let files = list_pngs(image_dir)?;
    if files.is_empty() {
        return Err(Error::Empty(format!("no PNG images in {}", image_dir.display())));
    }
    fs::create_dir_all(&cfg.out_dir)?;

    let prepared: Vec<std::result::Result<Prepared, Failure>> = with_pool(cfg.workers, || {
        files
            .par_iter()
            .map(|path| {
                load_input(path, cfg)
                    .and_then(|input| prepare(input, cfg))
                    .map_err(|e| Failure { name: file_name(path), error: e.to_string() })
            })
            .collect()
    })?;

    let mut images = Vec::new();
    let mut failures = Vec::new();
    for (batch_index, range) in batch_ranges(files.len(), cfg.prior.batch_size).into_iter().enumerate() {
        let mut ok = Vec::new();
        let mut names = Vec::new();
        for (path, p) in files[range.clone()].iter().zip(&prepared[range]) {
            match p {
                Ok(p) => {
                    ok.push(p.clone());
                    names.push(file_name(path));
                }
                Err(f) => {
                    warn!("{}: {}", f.name, f.error);
                    failures.push(f.clone());
                }
            }
        }
        if ok.is_empty() {
            continue;
        }
        let outcomes = match masks_for_batch(&ok, cfg) {
            Ok(o) => o,
            Err(e) => {
                warn!("batch {batch_index}: {e}");
                failures.extend(names.iter().map(|n| Failure { name: n.clone(), error: e.to_string() }));
                continue;
            }
        };
        let written: Vec<Result<ImageRecord>> = outcomes
            .par_iter()
            .zip(&names)
            .map(|(o, name)| {
                let mask_name = format!("{}.png", o.id);
                io::save_mask(cfg.out_dir.join(&mask_name), &o.mask)?;
                Ok(ImageRecord {
                    name: name.clone(),
                    mask: mask_name,
                    batch: batch_index,
                    segments: o.segments,
                    features: o.features,
                    converged: o.converged,
                    iterations: o.iterations,
                    free_pixels: o.mask.count(MaskLabel::Free),
                })
            })
            .collect();
        for r in written {
            images.push(r?);
        }
        info!("batch {batch_index}: {} images", names.len());
    }

    let manifest = Manifest { params: cfg.to_pairs(), seed: cfg.prior.seed, images, failures };
    fs::write(cfg.out_dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageMetrics {
    pub name: String,
    #[serde(flatten)]
    pub score: Score,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub per_image: Vec<ImageMetrics>,
    pub dataset: Score,
}

/// Scores every mask in `pred_dir` against the same-named mask in `gt_dir`.
pub fn evaluate(pred_dir: &Path, gt_dir: &Path) -> Result<Metrics> {
    let names = |dir: &Path| -> Result<BTreeSet<String>> {
        Ok(list_pngs(dir)?.iter().map(|p| file_name(p)).collect())
    };
    let pred = names(pred_dir)?;
    let gt = names(gt_dir)?;
    if pred != gt {
        return Err(Error::Unmatched {
            missing_in_gt: pred.difference(&gt).cloned().collect(),
            missing_in_pred: gt.difference(&pred).cloned().collect(),
        });
    }
    if pred.is_empty() {
        return Err(Error::Empty(format!("no masks in {}", pred_dir.display())));
    }
    let names: Vec<String> = pred.into_iter().collect();
    let per_image = names
        .par_iter()
        .map(|name| {
            let p = io::load_mask(pred_dir.join(name))?;
            let g = io::load_mask(gt_dir.join(name))?;
            Ok(ImageMetrics { name: name.clone(), score: score(&p, &g)? })
        })
        .collect::<Result<Vec<_>>>()?;
    let dataset = aggregate_scores(&per_image.iter().map(|m| m.score).collect::<Vec<_>>())?;
    Ok(Metrics { per_image, dataset })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Clusters,
    BatchSize,
    Scale,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Clusters => "clusters",
            SweepAxis::BatchSize => "batch_size",
            SweepAxis::Scale => "scale",
        }
    }

    fn config_key(self) -> &'static str {
        match self {
            SweepAxis::Clusters => "k",
            SweepAxis::BatchSize => "batch_size",
            SweepAxis::Scale => "scale",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: String,
    #[serde(flatten)]
    pub score: Score,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub axis: SweepAxis,
    pub seed: u64,
    pub rows: Vec<SweepRow>,
}

/// Runs generate + evaluate once per value of `axis`, writing each run to
/// `out_dir/<axis>_<value>/`, and the table to `sweep.csv` / `sweep.json`.
pub fn sweep(
    cfg: &RunConfig,
    gt_dir: &Path,
    axis: SweepAxis,
    values: &[String],
    out_dir: &Path,
) -> Result<SweepReport> {
    if values.is_empty() {
        return Err(Error::InvalidParameter("sweep needs at least one value".into()));
    }
    fs::create_dir_all(out_dir)?;
    let mut rows = Vec::with_capacity(values.len());
    for value in values {
        let mut run = cfg.clone();
        run.set(axis.config_key(), value)?;
        run.out_dir = out_dir.join(format!("{}_{value}", axis.name()));
        let manifest = generate(&run)?;
        if manifest.is_partial() {
            return Err(Error::Empty(format!(
                "{} image(s) failed for {}={value}",
                manifest.failures.len(),
                axis.name()
            )));
        }
        let metrics = evaluate(&run.out_dir, gt_dir)?;
        info!("{}={value}: iou {:.4}", axis.name(), metrics.dataset.iou);
        rows.push(SweepRow { value: value.clone(), score: metrics.dataset });
    }
    let report = SweepReport { axis, seed: cfg.prior.seed, rows };
    let mut csv = String::from("value,iou,precision,recall,tp,fp,fn\n");
    for r in &report.rows {
        let s = &r.score;
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.value, s.iou, s.precision, s.recall, s.tp, s.fp, s.fn_
        ));
    }
    fs::write(out_dir.join("sweep.csv"), csv)?;
    fs::write(out_dir.join("sweep.json"), serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    BottomHalf,
    LargestSuperpixel,
}

/// Writes a baseline mask for every image in `cfg.image_dir` to `cfg.out_dir`.
pub fn baseline_masks(cfg: &RunConfig, kind: Baseline) -> Result<usize> {
    let image_dir = cfg.image_dir.as_ref().ok_or_else(|| Error::Config("image_dir is not set".into()))?;
    let files = list_pngs(image_dir)?;
    if files.is_empty() {
        return Err(Error::Empty(format!("no PNG images in {}", image_dir.display())));
    }
    fs::create_dir_all(&cfg.out_dir)?;
    with_pool(cfg.workers, || {
        files
            .par_iter()
            .map(|path| {
                let img = io::load_image(path)?;
                let mask = match kind {
                    Baseline::BottomHalf => bottom_half_mask(img.width(), img.height()),
                    Baseline::LargestSuperpixel => largest_superpixel_mask(&segment(&img, &cfg.superpixels)?),
                };
                io::save_mask(cfg.out_dir.join(format!("{}.png", stem(path))), &mask)
            })
            .collect::<Result<Vec<()>>>()
    })??;
    Ok(files.len())
}

/// Scores the bottom-half baseline against every Cityscapes
/// `*_labelIds.png` found under `gt_root` (searched recursively).
pub fn cityscapes_bottom_half(gt_root: &Path) -> Result<(Score, usize)> {
    let files: Vec<PathBuf> = walkdir::WalkDir::new(gt_root)
        .sort_by_file_name()
        .into_iter()
        .filter_map(|e| e.ok())
        .map(|e| e.into_path())
        .filter(|p| p.to_string_lossy().ends_with("_labelIds.png"))
        .collect();
    if files.is_empty() {
        return Err(Error::Empty(format!("no *_labelIds.png under {}", gt_root.display())));
    }
    let scores = files
        .par_iter()
        .map(|p| {
            let (w, h, ids) = io::load_gray8(p)?;
            let gt = cityscapes_road_mask(w, h, &ids)?;
            score(&bottom_half_mask(w, h), &gt)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((aggregate_scores(&scores)?, files.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_scene, SceneParams};

    fn write_scenes(dir: &Path, gt: &Path, n: usize) {
        fs::create_dir_all(dir).unwrap();
        fs::create_dir_all(gt).unwrap();
        for i in 0..n {
            let s = generate_scene(100 + i as u64, &SceneParams::default());
            io::save_image(dir.join(format!("scene_{i:03}.png")), &s.image).unwrap();
            io::save_mask(gt.join(format!("scene_{i:03}.png")), &s.ground_truth).unwrap();
        }
    }

    #[test]
    fn empty_directory_is_an_error_without_manifest() {
        let tmp = tempfile::tempdir().unwrap();
        let images = tmp.path().join("img");
        fs::create_dir_all(&images).unwrap();
        let cfg = RunConfig {
            image_dir: Some(images),
            out_dir: tmp.path().join("out"),
            ..Default::default()
        };
        assert!(matches!(generate(&cfg), Err(Error::Empty(_))));
        assert!(!cfg.out_dir.join(MANIFEST_FILE).exists());
    }

    #[test]
    fn missing_feature_file_is_a_partial_failure() {
        let tmp = tempfile::tempdir().unwrap();
        let (img, gt, feats) = (tmp.path().join("img"), tmp.path().join("gt"), tmp.path().join("feat"));
        write_scenes(&img, &gt, 3);
        fs::create_dir_all(&feats).unwrap();
        for i in [0, 2] {
            let image = io::load_image(img.join(format!("scene_{i:03}.png"))).unwrap();
            let f = handcrafted_feature_map(&image, 8, "").unwrap();
            io::write_feature_map(feats.join(format!("scene_{i:03}.fmp1")), &f).unwrap();
        }
        let mut cfg = RunConfig {
            image_dir: Some(img),
            feature_dir: Some(feats),
            out_dir: tmp.path().join("out"),
            ..Default::default()
        };
        cfg.prior.k = 3;
        let m = generate(&cfg).unwrap();
        assert!(m.is_partial());
        assert_eq!(m.failures.len(), 1);
        assert_eq!(m.failures[0].name, "scene_001.png");
        assert_eq!(m.images.len(), 2);
        assert!(cfg.out_dir.join("scene_000.png").exists());
        assert!(!cfg.out_dir.join("scene_001.png").exists());
    }

    #[test]
    fn fmp1_features_match_fallback_run() {
        // feeding the fallback maps through FMP1 files gives identical masks
        let tmp = tempfile::tempdir().unwrap();
        let (img, gt, feats) = (tmp.path().join("img"), tmp.path().join("gt"), tmp.path().join("feat"));
        write_scenes(&img, &gt, 2);
        fs::create_dir_all(&feats).unwrap();
        for i in 0..2 {
            let image = io::load_image(img.join(format!("scene_{i:03}.png"))).unwrap();
            let f = handcrafted_feature_map(&image, 8, "").unwrap();
            io::write_feature_map(feats.join(format!("scene_{i:03}.fmp1")), &f).unwrap();
        }
        let base = RunConfig { image_dir: Some(img), out_dir: tmp.path().join("a"), ..Default::default() };
        let with_files = RunConfig { feature_dir: Some(feats), out_dir: tmp.path().join("b"), ..base.clone() };
        generate(&base).unwrap();
        generate(&with_files).unwrap();
        for i in 0..2 {
            let n = format!("scene_{i:03}.png");
            assert_eq!(fs::read(base.out_dir.join(&n)).unwrap(), fs::read(with_files.out_dir.join(&n)).unwrap());
        }
    }

    #[test]
    fn evaluate_reports_unmatched_files() {
        let tmp = tempfile::tempdir().unwrap();
        let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
        fs::create_dir_all(&a).unwrap();
        fs::create_dir_all(&b).unwrap();
        let m = bottom_half_mask(4, 4);
        io::save_mask(a.join("x.png"), &m).unwrap();
        io::save_mask(a.join("y.png"), &m).unwrap();
        io::save_mask(b.join("x.png"), &m).unwrap();
        io::save_mask(b.join("z.png"), &m).unwrap();
        match evaluate(&a, &b) {
            Err(Error::Unmatched { missing_in_gt, missing_in_pred }) => {
                assert_eq!(missing_in_gt, vec!["y.png"]);
                assert_eq!(missing_in_pred, vec!["z.png"]);
            }
            other => panic!("expected unmatched error, got {other:?}"),
        }
    }

    #[test]
    fn raw_modes_produce_masks() {
        let inputs: Vec<ImageInput> = (0..3)
            .map(|i| ImageInput {
                id: format!("s{i}"),
                image: generate_scene(7 + i, &SceneParams::default()).image,
                features: None,
            })
            .collect();
        for mode in [FeatureMode::Raw, FeatureMode::RawOverlap] {
            let cfg = RunConfig { mode, ..Default::default() };
            let out = run_in_memory(inputs.clone(), &cfg).unwrap();
            assert_eq!(out.len(), 3);
            for o in &out {
                assert_eq!((o.mask.width(), o.mask.height()), (128, 96));
                assert!(o.mask.count(MaskLabel::Free) > 0);
            }
        }
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let inputs: Vec<ImageInput> = (0..4)
            .map(|i| ImageInput {
                id: format!("w{i}"),
                image: generate_scene(40 + i, &SceneParams::default()).image,
                features: None,
            })
            .collect();
        let one = run_in_memory(inputs.clone(), &RunConfig { workers: 1, ..Default::default() }).unwrap();
        let many = run_in_memory(inputs, &RunConfig { workers: 4, ..Default::default() }).unwrap();
        for (a, b) in one.iter().zip(&many) {
            assert_eq!(a.mask, b.mask);
        }
    }

    #[test]
    fn cityscapes_bottom_half_scoring() {
        let tmp = tempfile::tempdir().unwrap();
        let city = tmp.path().join("val/aachen");
        fs::create_dir_all(&city).unwrap();
        // 4x4 labelIds: bottom two rows road, top row void, rest building
        let ids: Vec<u8> = (0..16).map(|i| match i / 4 { 0 => 0, 1 => 11, _ => 7 }).collect();
        let img = image::GrayImage::from_raw(4, 4, ids).unwrap();
        img.save(city.join("a_000000_000019_gtFine_labelIds.png")).unwrap();
        let (s, n) = cityscapes_bottom_half(tmp.path()).unwrap();
        assert_eq!(n, 1);
        assert_eq!((s.tp, s.fp, s.fn_), (8, 0, 0));
        assert_eq!(s.iou, 1.0);
    }
}
