//! RoI sampling for detection-head training.

use crate::geometry::{iou_3d, Box3D};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Sampled RoI set; `positive_mask` and `matched_gt` align with `indices`.
#[derive(Debug, Clone, PartialEq)]
pub struct RoiSample {
    /// Indices into the proposal list, ascending.
    pub indices: Vec<usize>,
    pub positive_mask: Vec<bool>,
    /// Best-IoU ground-truth index for each sampled proposal (present for
    /// positives; negatives keep theirs for diagnostics when any overlap
    /// exists).
    pub matched_gt: Vec<Option<usize>>,
}

impl RoiSample {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn positive_count(&self) -> usize {
        self.positive_mask.iter().filter(|&&p| p).count()
    }
}

/// Samples up to `count` RoIs, aiming for a 1:1 positive:negative split.
///
/// A proposal is positive when its best ground-truth 3D IoU reaches
/// `fg_iou`. When one side runs short the other fills the remainder, so the
/// output only falls below `count` when there are fewer proposals than
/// `count`. Selection within each side is a seeded shuffle; the result is
/// deterministic under (inputs, seed).
pub fn sample_rois(
    proposals: &[Box3D],
    gts: &[Box3D],
    count: usize,
    fg_iou: f64,
    seed: u64,
) -> RoiSample {
    assert!(count > 0, "sample count must be positive");
    let mut best: Vec<(Option<usize>, f64)> = Vec::with_capacity(proposals.len());
    for proposal in proposals {
        let mut best_gt = None;
        let mut best_iou = 0.0;
        for (g, gt) in gts.iter().enumerate() {
            let iou = iou_3d(proposal, gt);
            if iou > best_iou {
                best_iou = iou;
                best_gt = Some(g);
            }
        }
        best.push((best_gt, best_iou));
    }
    let mut positives: Vec<usize> = (0..proposals.len())
        .filter(|&i| best[i].1 >= fg_iou)
        .collect();
    let mut negatives: Vec<usize> = (0..proposals.len())
        .filter(|&i| best[i].1 < fg_iou)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    positives.shuffle(&mut rng);
    negatives.shuffle(&mut rng);

    let mut n_fg = positives.len().min(count / 2);
    let n_bg = negatives.len().min(count - n_fg);
    if n_fg + n_bg < count {
        n_fg = positives.len().min(count - n_bg);
    }

    let mut selected: Vec<(usize, bool)> = positives[..n_fg]
        .iter()
        .map(|&i| (i, true))
        .chain(negatives[..n_bg].iter().map(|&i| (i, false)))
        .collect();
    selected.sort_unstable_by_key(|&(i, _)| i);

    RoiSample {
        indices: selected.iter().map(|&(i, _)| i).collect(),
        positive_mask: selected.iter().map(|&(_, p)| p).collect(),
        matched_gt: selected.iter().map(|&(i, _)| best[i].0).collect(),
    }
}
