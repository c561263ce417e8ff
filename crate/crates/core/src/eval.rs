//! Free-space scoring against ground truth.
//!
//! Pixels whose ground truth is VOID are skipped. A VOID prediction counts
//! as NOT_FREE. Ratios with a zero denominator are defined as 1.0 (nothing
//! to find and nothing wrongly claimed).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{BinaryMask, MaskLabel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub iou: f64,
    pub precision: f64,
    pub recall: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

impl From<Counts> for Score {
    fn from(c: Counts) -> Self {
        Score {
            iou: ratio(c.tp, c.tp + c.fp + c.fn_),
            precision: ratio(c.tp, c.tp + c.fp),
            recall: ratio(c.tp, c.tp + c.fn_),
            tp: c.tp,
            fp: c.fp,
            fn_: c.fn_,
        }
    }
}

impl Score {
    pub fn counts(&self) -> Counts {
        Counts { tp: self.tp, fp: self.fp, fn_: self.fn_ }
    }
}

pub fn count(pred: &BinaryMask, gt: &BinaryMask) -> Result<Counts> {
    if !pred.same_dims(gt) {
        return Err(Error::DimensionMismatch(format!(
            "prediction {}x{} vs ground truth {}x{}",
            pred.width(),
            pred.height(),
            gt.width(),
            gt.height()
        )));
    }
    let mut c = Counts::default();
    for (&p, &g) in pred.labels().iter().zip(gt.labels()) {
        let p_free = p == MaskLabel::Free;
        match g {
            MaskLabel::Void => {}
            MaskLabel::Free if p_free => c.tp += 1,
            MaskLabel::Free => c.fn_ += 1,
            MaskLabel::NotFree if p_free => c.fp += 1,
            MaskLabel::NotFree => {}
        }
    }
    Ok(c)
}

pub fn score(pred: &BinaryMask, gt: &BinaryMask) -> Result<Score> {
    count(pred, gt).map(Score::from)
}

/// Dataset score from summed counts (not the mean of per-image IoUs).
pub fn aggregate_scores(scores: &[Score]) -> Result<Score> {
    if scores.is_empty() {
        return Err(Error::Empty("no scores to aggregate".into()));
    }
    let total = scores.iter().fold(Counts::default(), |a, s| Counts {
        tp: a.tp + s.tp,
        fp: a.fp + s.fp,
        fn_: a.fn_ + s.fn_,
    });
    Ok(total.into())
}

/// Cityscapes label ids excluded from evaluation (`ignoreInEval` in the
/// official label table): the void category 0-6 plus parking, rail track,
/// guard rail, bridge, tunnel, polegroup, caravan and trailer.
pub const CITYSCAPES_IGNORED_IDS: [u8; 15] = [0, 1, 2, 3, 4, 5, 6, 9, 10, 14, 15, 16, 18, 29, 30];
pub const CITYSCAPES_ROAD_ID: u8 = 7;

/// Converts a Cityscapes `*_labelIds.png` buffer to a road mask.
pub fn cityscapes_road_mask(width: u32, height: u32, label_ids: &[u8]) -> Result<BinaryMask> {
    let labels = label_ids
        .iter()
        .map(|&id| {
            if id == CITYSCAPES_ROAD_ID {
                MaskLabel::Free
            } else if CITYSCAPES_IGNORED_IDS.contains(&id) || id == 255 {
                MaskLabel::Void
            } else {
                MaskLabel::NotFree
            }
        })
        .collect();
    BinaryMask::new(width, height, labels)
}
