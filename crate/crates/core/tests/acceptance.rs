//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p freespace --test acceptance -- --nocapture`.
//! The Cityscapes check runs only when `FREESPACE_CITYSCAPES_GT` points at a
//! directory containing `*_labelIds.png` files (e.g. `gtFine/val`).

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use freespace::align::{bilinear_sample, prior_term, segment_prior_weight, SuperpixelFeature};
use freespace::cluster::{location_prior_kmeans, location_prior_kmeans_from};
use freespace::config::RunConfig;
use freespace::eval::{aggregate_scores, score, Score};
use freespace::pipeline::{cityscapes_bottom_half, run_in_memory, ImageInput};
use freespace::superpix::{segment, FHParams};
use freespace::synth::{generate_scene, SceneParams};
use freespace::{BinaryMask, FeatureMap, ImageRGB, MaskLabel, PriorConfig};

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Sum of every cell weighted by the tent kernel in both directions.
fn dense_bilinear(fmap: &FeatureMap, y: f64, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; fmap.channels()];
    for c in 0..fmap.channels() {
        for i in 0..fmap.height() {
            for j in 0..fmap.width() {
                let wy = (1.0 - (y - i as f64).abs()).max(0.0);
                let wx = (1.0 - (x - j as f64).abs()).max(0.0);
                out[c] += wy * wx * fmap.get(c, i, j) as f64;
            }
        }
    }
    out
}

fn bilinear_oracle() -> Outcome {
    let mut r = rng(1);
    let start = Instant::now();
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let (c, h, w) = (r.gen_range(1..=4), r.gen_range(1..=9), r.gen_range(1..=9));
        let data: Vec<f32> = (0..c * h * w).map(|_| r.gen_range(-10.0..10.0)).collect();
        let fmap = FeatureMap::new(c, h, w, data, "m").unwrap();
        let y = if r.gen_bool(0.1) { r.gen_range(0..h) as f64 } else { r.gen_range(0.0..=(h - 1) as f64) };
        let x = if r.gen_bool(0.1) { r.gen_range(0..w) as f64 } else { r.gen_range(0.0..=(w - 1) as f64) };
        let got = bilinear_sample(&fmap, y, x).unwrap();
        for (a, b) in got.iter().zip(dense_bilinear(&fmap, y, x)) {
            worst = worst.max((a - b).abs());
        }
    }
    let elapsed = start.elapsed();
    check(
        worst <= 1e-6 && elapsed < Duration::from_secs(5),
        format!("10000 pairs, max abs error {worst:.3e}, {:.2}s", elapsed.as_secs_f64()),
    )
}

fn prior_closed_forms() -> Outcome {
    // 4x4 image: pixel (x=2, y=3) sits at normalized (0.75, 0.5).
    let mu = [0.75, 0.5];
    let sigma = [0.25, 0.1];
    let at_mu = segment_prior_weight(&[3 * 4 + 2], 4, 4, mu, sigma);
    // pixel (x=2, y=2) is one sigma above along rows.
    let one_sigma = segment_prior_weight(&[2 * 4 + 2], 4, 4, mu, sigma);
    let expected = (-0.5f64).exp();
    check(
        at_mu == 1.0 && (one_sigma - expected).abs() <= 1e-12,
        format!("w(mu) = {at_mu}, w(one sigma) = {one_sigma:.15} vs {expected:.15}"),
    )
}

fn feature(segment_id: usize, vector: Vec<f64>, prior_weight: f64) -> SuperpixelFeature {
    SuperpixelFeature { segment_id, image_id: "planted".into(), vector, prior_weight }
}

/// Two blobs: one around the prior location, one far above it.
fn planted(seed: u64) -> (Vec<SuperpixelFeature>, Vec<bool>) {
    let mut r = rng(seed);
    let cfg = PriorConfig::default();
    let noise = Normal::new(0.0, 0.04).unwrap();
    let near_app: [f64; 3] = [r.gen(), r.gen(), r.gen()];
    let far_app: [f64; 3] = near_app.map(|v| if v > 0.5 { v - 0.5 } else { v + 0.5 });
    let n_near = r.gen_range(15..60);
    let n_far = r.gen_range(15..60);
    let mut feats = Vec::new();
    let mut truth = Vec::new();
    for i in 0..n_near + n_far {
        let near = i < n_near;
        let (app, row, col) = if near {
            (near_app, cfg.mu[0] + noise.sample(&mut r), cfg.mu[1] + noise.sample(&mut r))
        } else {
            (far_app, r.gen_range(0.05..0.35), r.gen_range(0.0..1.0))
        };
        let mut v: Vec<f64> = app.iter().map(|a| a + noise.sample(&mut r)).collect();
        v.push(row);
        v.push(col);
        let w = prior_term([row, col], cfg.mu, cfg.sigma).clamp(f64::MIN_POSITIVE, 1.0);
        feats.push(feature(i, v, w));
        truth.push(near);
    }
    // interleave so the near blob is not simply a prefix
    let mut order: Vec<usize> = (0..feats.len()).collect();
    for i in (1..order.len()).rev() {
        order.swap(i, r.gen_range(0..=i));
    }
    let feats = order.iter().enumerate().map(|(k, &i)| SuperpixelFeature { segment_id: k, ..feats[i].clone() }).collect();
    (feats, order.iter().map(|&i| truth[i]).collect())
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Plain Lloyd iteration from a given assignment.
fn lloyd(points: &[Vec<f64>], mut membership: Vec<usize>, k: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let d = points[0].len();
    loop {
        let mut centers = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (p, &m) in points.iter().zip(&membership) {
            counts[m] += 1;
            for (c, v) in centers[m].iter_mut().zip(p) {
                *c += v;
            }
        }
        for (c, &n) in centers.iter_mut().zip(&counts) {
            c.iter_mut().for_each(|v| *v /= n as f64);
        }
        let next: Vec<usize> = points
            .iter()
            .map(|p| {
                let mut best = 0;
                for q in 1..k {
                    if sq(p, &centers[q]) < sq(p, &centers[best]) {
                        best = q;
                    }
                }
                best
            })
            .collect();
        if next == membership {
            return (centers, membership);
        }
        membership = next;
    }
}

fn algorithm_fidelity() -> Outcome {
    let cfg = PriorConfig { k: 2, ..PriorConfig::default() };
    let mut perfect = 0;
    for trial in 0..100 {
        let (feats, near) = planted(1000 + trial);
        let res = location_prior_kmeans(&feats, &PriorConfig { seed: trial, ..cfg.clone() }).unwrap();
        if res.membership.iter().zip(&near).all(|(&m, &n)| (m == 0) == n) {
            perfect += 1;
        }
    }

    let mut worst = 0.0f64;
    let mut same_membership = true;
    for trial in 0..100u64 {
        let mut r = rng(5000 + trial);
        let k = 3;
        let blob = Normal::new(0.0, 0.3).unwrap();
        let n = r.gen_range(30..90);
        let points: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let base = (i % k) as f64 * 2.0;
                (0..4).map(|_| base + blob.sample(&mut r)).collect()
            })
            .collect();
        let mut init: Vec<usize> = (0..n).map(|_| r.gen_range(0..k)).collect();
        init[..k].copy_from_slice(&[0, 1, 2]);
        let w = r.gen_range(0.05..0.95);
        let feats: Vec<SuperpixelFeature> = points.iter().enumerate().map(|(i, p)| feature(i, p.clone(), w)).collect();
        let ours = location_prior_kmeans_from(&feats, init.clone(), k, 1000).unwrap();
        let (centers, membership) = lloyd(&points, init, k);
        same_membership &= ours.membership == membership && ours.converged;
        for (a, b) in ours.centers.iter().zip(&centers) {
            worst = worst.max(sq(a, b).sqrt());
        }
    }
    check(
        perfect == 100 && same_membership && worst < 1e-9,
        format!(
            "planted: {perfect}/100 trials exact; constant-weight vs Lloyd: max center distance {worst:.3e}, memberships {}",
            if same_membership { "identical" } else { "differ" }
        ),
    )
}

fn road_and_total(mask: &BinaryMask, gt: &BinaryMask) -> (u64, usize) {
    (score(mask, gt).unwrap().tp, mask.count(MaskLabel::Free))
}

/// Occluded scene `base` batched with normal scenes `base+1..=base+3`.
fn rescue(base: u64) -> ((u64, usize), (u64, usize)) {
    let occ = generate_scene(base, &SceneParams { occluded: true, ..SceneParams::default() });
    let mut inputs = vec![ImageInput { id: "occluded".into(), image: occ.image.clone(), features: None }];
    for i in 1..=3 {
        let s = generate_scene(base + i, &SceneParams::default());
        inputs.push(ImageInput { id: format!("normal_{i}"), image: s.image, features: None });
    }
    let mut cfg = RunConfig::default();
    cfg.prior.batch_size = 4;
    let batch = run_in_memory(inputs.clone(), &cfg).unwrap();
    cfg.prior.batch_size = 1;
    let single = run_in_memory(inputs, &cfg).unwrap();
    (road_and_total(&batch[0].mask, &occ.ground_truth), road_and_total(&single[0].mask, &occ.ground_truth))
}

fn batch_rescue() -> Outcome {
    let ((b_road, b_total), (s_road, s_total)) = rescue(0);
    let (mut higher, mut lower) = (0, 0);
    for c in 1..20 {
        let ((b, _), (s, _)) = rescue(c * 10);
        higher += (b > s) as usize;
        lower += (b < s) as usize;
    }
    check(
        b_road > s_road && b_total > s_total,
        format!(
            "road pixels in cluster 0: batch {b_road} vs individual {s_road} (all cluster 0: {b_total} vs {s_total}); \
             19 more constructions: higher {higher}, lower {lower}"
        ),
    )
}

fn random_texture(seed: u64) -> ImageRGB {
    let mut r = rng(seed);
    let (w, h) = (r.gen_range(24..72), r.gen_range(24..56));
    let blocks: Vec<[u8; 3]> = (0..16).map(|_| [r.gen(), r.gen(), r.gen()]).collect();
    let cell = r.gen_range(4..16);
    let amp = r.gen_range(0..60);
    ImageRGB::from_fn(w, h, |x, y| {
        let b = blocks[((x / cell + 3 * (y / cell)) % 16) as usize];
        let n: i32 = if amp == 0 { 0 } else { r.gen_range(-amp..=amp) };
        b.map(|c| (c as i32 + n).clamp(0, 255) as u8)
    })
    .unwrap()
}

fn superpixel_properties() -> Outcome {
    let mut problems = Vec::new();
    let mut total_segments = 0;
    for i in 0..100u64 {
        let img = random_texture(i);
        let mut r = rng(9000 + i);
        let params = FHParams {
            scale: r.gen_range(20.0..800.0),
            smoothing_sigma: [0.0, 0.5, 0.8][i as usize % 3],
            min_size: r.gen_range(1..80),
        };
        let a = segment(&img, &params).unwrap();
        let b = segment(&img, &params).unwrap();
        let n = (img.width() * img.height()) as usize;
        let s = a.segment_count();
        total_segments += s;
        let mut counts = vec![0usize; s];
        for &l in a.labels() {
            match counts.get_mut(l as usize) {
                Some(c) => *c += 1,
                None => problems.push(format!("image {i}: label {l} >= {s}")),
            }
        }
        if counts.contains(&0) {
            problems.push(format!("image {i}: labels not dense"));
        }
        if counts.iter().sum::<usize>() != n || a.segments().iter().map(|g| g.pixel_count).sum::<usize>() != n {
            problems.push(format!("image {i}: pixel counts do not sum to {n}"));
        }
        if a.segments().iter().zip(&counts).any(|(g, &c)| g.pixel_count != c) {
            problems.push(format!("image {i}: stored pixel counts disagree with a label scan"));
        }
        if n >= params.min_size && counts.iter().any(|&c| c < params.min_size) {
            problems.push(format!("image {i}: segment below min_size {}", params.min_size));
        }
        let bytes = |m: &freespace::SuperpixelMap| m.labels().iter().flat_map(|l| l.to_le_bytes()).collect::<Vec<u8>>();
        if bytes(&a) != bytes(&b) {
            problems.push(format!("image {i}: two runs differ"));
        }
    }
    check(
        problems.is_empty(),
        if problems.is_empty() {
            format!("100 images, {total_segments} segments, all properties hold")
        } else {
            problems.join("; ")
        },
    )
}

fn synthetic_end_to_end() -> Outcome {
    let start = Instant::now();
    let scenes: Vec<_> = (0..50).map(|i| generate_scene(i, &SceneParams::default())).collect();
    let inputs = scenes
        .iter()
        .enumerate()
        .map(|(i, s)| ImageInput { id: format!("scene_{i:03}"), image: s.image.clone(), features: None })
        .collect();
    let outcomes = run_in_memory(inputs, &RunConfig::default()).unwrap();
    let scores: Vec<Score> =
        outcomes.iter().zip(&scenes).map(|(o, s)| score(&o.mask, &s.ground_truth).unwrap()).collect();
    let total = aggregate_scores(&scores).unwrap();
    let elapsed = start.elapsed();
    check(
        total.iou >= 0.90 && elapsed < Duration::from_secs(60),
        format!(
            "50 scenes, dataset IoU {:.4} (precision {:.4}, recall {:.4}), {:.2}s",
            total.iou,
            total.precision,
            total.recall,
            elapsed.as_secs_f64()
        ),
    )
}

const FREE: u8 = 255;
const NOT_FREE: u8 = 0;
const VOID: u8 = 128;

fn random_bytes(r: &mut ChaCha8Rng, n: usize, void_p: f64) -> Vec<u8> {
    (0..n)
        .map(|_| if r.gen_bool(void_p) { VOID } else if r.gen_bool(0.5) { FREE } else { NOT_FREE })
        .collect()
}

fn to_mask(w: u32, h: u32, bytes: &[u8]) -> BinaryMask {
    BinaryMask::new(w, h, bytes.iter().map(|&b| MaskLabel::from_byte(b).unwrap()).collect()).unwrap()
}

/// (tp, fp, fn) by a direct scan of the stored byte values.
fn scan(pred: &[u8], gt: &[u8]) -> [u64; 3] {
    let mut c = [0u64; 3];
    for (&p, &g) in pred.iter().zip(gt) {
        if g == VOID {
            continue;
        }
        match (p == FREE, g == FREE) {
            (true, true) => c[0] += 1,
            (true, false) => c[1] += 1,
            (false, true) => c[2] += 1,
            (false, false) => {}
        }
    }
    c
}

fn ratio(n: u64, d: u64) -> f64 {
    if d == 0 {
        1.0
    } else {
        n as f64 / d as f64
    }
}

fn matches(s: &Score, c: [u64; 3]) -> bool {
    let [tp, fp, fn_] = c;
    s.tp == tp
        && s.fp == fp
        && s.fn_ == fn_
        && s.iou == ratio(tp, tp + fp + fn_)
        && s.precision == ratio(tp, tp + fp)
        && s.recall == ratio(tp, tp + fn_)
}

fn metric_oracle() -> Outcome {
    let mut r = rng(77);
    let mut mismatches = 0;
    let mut toggles_changed = 0;
    let mut scores = Vec::new();
    let mut global = [0u64; 3];
    for _ in 0..1000 {
        let (w, h) = (r.gen_range(1..40), r.gen_range(1..40));
        let n = (w * h) as usize;
        let void_p = [0.0, 0.1, 0.5, 1.0][r.gen_range(0..4)];
        let pred = random_bytes(&mut r, n, void_p / 2.0);
        let gt = random_bytes(&mut r, n, void_p);
        let s = score(&to_mask(w, h, &pred), &to_mask(w, h, &gt)).unwrap();
        let c = scan(&pred, &gt);
        mismatches += !matches(&s, c) as usize;
        for (g, v) in global.iter_mut().zip(c) {
            *g += v;
        }
        scores.push(s);

        let toggled: Vec<u8> = pred
            .iter()
            .zip(&gt)
            .map(|(&p, &g)| if g == VOID { [FREE, NOT_FREE, VOID][r.gen_range(0..3)] } else { p })
            .collect();
        let t = score(&to_mask(w, h, &toggled), &to_mask(w, h, &gt)).unwrap();
        toggles_changed += (t.counts() != s.counts()) as usize;
    }
    let agg = aggregate_scores(&scores).unwrap();
    let agg_ok = matches(&agg, global);
    check(
        mismatches == 0 && toggles_changed == 0 && agg_ok,
        format!(
            "1000 pairs: {mismatches} score mismatches, {toggles_changed} VOID toggles changed counts, aggregate {}",
            if agg_ok { "exact" } else { "differs" }
        ),
    )
}

fn cityscapes_bottom_half_iou() -> Outcome {
    let Some(root) = std::env::var_os("FREESPACE_CITYSCAPES_GT") else {
        return Outcome::Skip("set FREESPACE_CITYSCAPES_GT to a gtFine/val directory".into());
    };
    match cityscapes_bottom_half(std::path::Path::new(&root)) {
        Ok((s, n)) => check((s.iou - 0.720).abs() <= 0.01, format!("{n} images, IoU {:.4} (target 0.720 +/- 0.01)", s.iou)),
        Err(e) => Outcome::Fail(e.to_string()),
    }
}

type Criterion = (&'static str, fn() -> Outcome);

#[test]
fn acceptance() {
    let criteria: [Criterion; 8] = [
        ("bilinear oracle equivalence", bilinear_oracle),
        ("prior-weight closed forms", prior_closed_forms),
        ("clustering algorithm fidelity", algorithm_fidelity),
        ("batch-clustering rescue", batch_rescue),
        ("superpixel partition properties", superpixel_properties),
        ("synthetic end-to-end", synthetic_end_to_end),
        ("metric oracle", metric_oracle),
        ("cityscapes bottom-half baseline", cityscapes_bottom_half_iou),
    ];
    let mut failed = Vec::new();
    for (name, run) in criteria {
        match run() {
            Outcome::Pass(d) => println!("PASS  {name}: {d}"),
            Outcome::Fail(d) => {
                println!("FAIL  {name}: {d}");
                failed.push(name);
            }
            Outcome::Skip(d) => println!("SKIP  {name}: {d}"),
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
