//! Synthetic driving scenes with known free-space ground truth.
//!
//! A scene is a smooth sky, a band of textured building blocks, textured
//! verges on both sides, and a homogeneous gray trapezoidal road narrowing
//! toward the horizon. Textured rectangles ("vehicles") are scattered along
//! the road edges and are excluded from the ground truth. An optional large
//! occluder can be placed squarely on the location prior.

use rand::Rng;

use crate::rng::rng_from_seed;
use crate::types::{BinaryMask, ImageRGB, MaskLabel};

#[derive(Debug, Clone, PartialEq)]
pub struct SceneParams {
    pub width: u32,
    pub height: u32,
    /// Horizon row as a fraction of height; the road apex sits here.
    pub horizon: f64,
    pub distractors: usize,
    /// Place a large vehicle over the bottom-center of the frame.
    pub occluded: bool,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self { width: 128, height: 96, horizon: 0.5, distractors: 3, occluded: false }
    }
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub image: ImageRGB,
    pub ground_truth: BinaryMask,
}

#[derive(Debug, Clone, Copy)]
struct Rect {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
    color: [u8; 3],
    noise: i32,
}

impl Rect {
    fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }
}

fn jitter<R: Rng>(rng: &mut R, base: [u8; 3], amp: i32) -> [u8; 3] {
    if amp == 0 {
        return base;
    }
    let n = rng.gen_range(-amp..=amp);
    base.map(|c| (c as i32 + n + rng.gen_range(-amp / 4..=amp / 4)).clamp(0, 255) as u8)
}

/// Whether normalized point `(row, col)` lies on the road surface.
fn on_road(row: f64, col: f64, horizon: f64, apex_half: f64, base_half: f64) -> bool {
    if row < horizon {
        return false;
    }
    let t = (row - horizon) / (1.0 - horizon);
    let half = apex_half + t * (base_half - apex_half);
    (col - 0.5).abs() <= half
}

pub fn generate_scene(seed: u64, params: &SceneParams) -> Scene {
    let mut rng = rng_from_seed(seed);
    let (w, h) = (params.width, params.height);
    let horizon = params.horizon;
    let road_gray = rng.gen_range(95u8..=135);
    let road = [road_gray, road_gray, road_gray.saturating_add(6)];
    let apex_half = rng.gen_range(0.06..0.12);
    let base_half = rng.gen_range(0.40..0.48);
    let sky_top = [rng.gen_range(90..130), rng.gen_range(150..180), rng.gen_range(215..250)];
    let verge = [rng.gen_range(40..80), rng.gen_range(100..150), rng.gen_range(20..60)];
    let building_line = horizon * rng.gen_range(0.4..0.7);

    // building blocks: vertical strips between building_line and horizon
    let mut blocks = Vec::new();
    let mut x = 0.0;
    while x < 1.0 {
        let bw = rng.gen_range(0.08..0.2);
        let top = building_line + rng.gen_range(-0.1..0.1) * horizon;
        blocks.push(Rect {
            x0: x,
            x1: x + bw,
            y0: top.max(0.02),
            y1: horizon,
            color: [rng.gen_range(60..200), rng.gen_range(50..180), rng.gen_range(40..170)],
            noise: 40,
        });
        x += bw;
    }

    let mut vehicles = Vec::new();
    for i in 0..params.distractors {
        let vh = rng.gen_range(0.10..0.2);
        let vw = vh * rng.gen_range(1.2..1.8) * h as f64 / w as f64;
        let bottom = rng.gen_range(horizon + 0.15..horizon + 0.35).min(0.97);
        let top = bottom - vh;
        let t = ((bottom - horizon) / (1.0 - horizon)).clamp(0.0, 1.0);
        let edge = apex_half + t * (base_half - apex_half);
        let side = if i % 2 == 0 { -1.0 } else { 1.0 };
        let cx = 0.5 + side * (edge + rng.gen_range(-0.3..0.2) * vw);
        vehicles.push(Rect {
            x0: cx - vw / 2.0,
            x1: cx + vw / 2.0,
            y0: top,
            y1: bottom,
            color: [rng.gen_range(120..240), rng.gen_range(10..90), rng.gen_range(10..90)],
            noise: 30,
        });
    }
    if params.occluded {
        vehicles.push(Rect {
            x0: 0.28,
            x1: 0.72,
            y0: horizon + 0.08,
            y1: 0.97,
            color: [rng.gen_range(150..220), rng.gen_range(20..60), rng.gen_range(120..200)],
            noise: 30,
        });
    }

    let mut pixels = Vec::with_capacity(w as usize * h as usize * 3);
    let mut truth = Vec::with_capacity(w as usize * h as usize);
    for y in 0..h {
        for x in 0..w {
            let row = (y as f64 + 0.5) / h as f64;
            let col = (x as f64 + 0.5) / w as f64;
            let (color, free) = if let Some(v) = vehicles.iter().find(|v| v.contains(col, row)) {
                (jitter(&mut rng, v.color, v.noise), false)
            } else if on_road(row, col, horizon, apex_half, base_half) {
                (jitter(&mut rng, road, 3), true)
            } else if row >= horizon {
                (jitter(&mut rng, verge, 45), false)
            } else if let Some(b) = blocks.iter().find(|b| b.contains(col, row)) {
                (jitter(&mut rng, b.color, b.noise), false)
            } else {
                let fade = (row / horizon * 30.0) as u8;
                (jitter(&mut rng, sky_top.map(|c: u8| c.saturating_add(fade)), 2), false)
            };
            pixels.extend_from_slice(&color);
            truth.push(if free { MaskLabel::Free } else { MaskLabel::NotFree });
        }
    }
    Scene {
        image: ImageRGB::new(w, h, pixels).expect("scene buffer matches dimensions"),
        ground_truth: BinaryMask::new(w, h, truth).expect("truth matches dimensions"),
    }
}
