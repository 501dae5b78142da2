//! Point completeness scoring and completeness-aware task re-weighting.
//!
//! The completeness score of an object is the volume ratio between the
//! smallest box aligned with its ground-truth box that encloses the observed
//! in-box points and the ground-truth box itself. Because the enclosing box
//! is contained in the ground-truth box, the ratio is the IoU of the two and
//! lives in [0, 1]: 0 for no points, 1 for points spanning the full box.
//!
//! Task weights redistribute a fixed per-batch weight mass across positive
//! proposals in proportion to a quality score (completeness or an IoU
//! variant), leaving negatives untouched.

use crate::geometry::{points_in_box, smallest_enclosing_aligned_box, Box3D, PointCloud};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CompletenessError {
    #[error("degenerate ground-truth box (zero extent)")]
    DegenerateGroundTruthBox,
    #[error("negative quality score {score} at index {index}")]
    NegativeScore { index: usize, score: f64 },
    #[error("scores and positive mask differ in length ({scores} vs {mask})")]
    LengthMismatch { scores: usize, mask: usize },
    #[error("completeness score {0} outside [0, 1]")]
    ScoreOutOfRange(f64),
    #[error("bin width {0} does not evenly divide 1")]
    InvalidBinWidth(f64),
}

/// Completeness of one object: score, the aligned enclosing box of its
/// points, and how many points fell inside the ground-truth box.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletenessResult {
    pub score: f64,
    pub enclosing_box: Box3D,
    pub point_count: usize,
}

/// Point completeness score of a ground-truth box against a scene cloud.
///
/// The cloud is filtered to in-box points internally; points outside the
/// label box are ignored rather than clipped in.
pub fn pc_score(gt_box: &Box3D, cloud: &PointCloud) -> Result<CompletenessResult, CompletenessError> {
    if gt_box.l <= 0.0 || gt_box.w <= 0.0 || gt_box.h <= 0.0 {
        return Err(CompletenessError::DegenerateGroundTruthBox);
    }
    let inside = points_in_box(gt_box, cloud);
    let enclosing = smallest_enclosing_aligned_box(gt_box, cloud, &inside);
    let score = (enclosing.volume() / gt_box.volume()).clamp(0.0, 1.0);
    Ok(CompletenessResult {
        score,
        enclosing_box: enclosing,
        point_count: inside.len(),
    })
}

/// Coarse sparsity grouping by completeness score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SparsityLevel {
    /// Q < 0.3
    Sparse,
    /// 0.3 ≤ Q < 0.6
    Modest,
    /// Q ≥ 0.6
    Complete,
}

impl SparsityLevel {
    pub fn name(&self) -> &'static str {
        match self {
            SparsityLevel::Sparse => "Sparse",
            SparsityLevel::Modest => "Modest",
            SparsityLevel::Complete => "Complete",
        }
    }
}

pub fn sparsity_level(q: f64) -> Result<SparsityLevel, CompletenessError> {
    if !(0.0..=1.0).contains(&q) {
        return Err(CompletenessError::ScoreOutOfRange(q));
    }
    Ok(if q < 0.3 {
        SparsityLevel::Sparse
    } else if q < 0.6 {
        SparsityLevel::Modest
    } else {
        SparsityLevel::Complete
    })
}

/// What the per-proposal quality score means when computing task weights.
///
/// The normalization is identical for all three; the variants document which
/// quantity the caller supplied, matching the re-weighting ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightStrategy {
    /// Completeness score of the matched ground-truth object.
    PcScore,
    /// IoU between the proposal and the matched ground-truth box.
    IouV1,
    /// IoU between the proposal and the enclosing box of the object's points.
    IouV2,
}

/// How positive scores are turned into weights. Linear is the default;
/// softmax is an alternative that is available but not used by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    #[default]
    Linear,
    Softmax,
}

/// Per-proposal training weights.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskWeights {
    pub weights: Vec<f64>,
    pub positive_mask: Vec<bool>,
    pub strategy: WeightStrategy,
}

impl TaskWeights {
    pub fn positive_count(&self) -> usize {
        self.positive_mask.iter().filter(|&&p| p).count()
    }

    /// Sum of weights over positive proposals; equals the positive count
    /// whenever any positive score is nonzero.
    pub fn positive_mass(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.positive_mask)
            .filter(|(_, &p)| p)
            .map(|(w, _)| w)
            .sum()
    }
}

/// Linear-normalized task weights: positives get `|P| * s_i / Σ_P s_j`,
/// negatives keep weight 1.
///
/// All-zero positive scores fall back to uniform weight 1 so the objective
/// matches the un-reweighted one.
pub fn task_weights(
    scores: &[f64],
    positive_mask: &[bool],
    strategy: WeightStrategy,
) -> Result<TaskWeights, CompletenessError> {
    task_weights_with(scores, positive_mask, strategy, Normalization::Linear)
}

/// Task weights with an explicit normalization choice.
pub fn task_weights_with(
    scores: &[f64],
    positive_mask: &[bool],
    strategy: WeightStrategy,
    normalization: Normalization,
) -> Result<TaskWeights, CompletenessError> {
    if scores.len() != positive_mask.len() {
        return Err(CompletenessError::LengthMismatch {
            scores: scores.len(),
            mask: positive_mask.len(),
        });
    }
    for (index, &score) in scores.iter().enumerate() {
        if score < 0.0 {
            return Err(CompletenessError::NegativeScore { index, score });
        }
    }
    let positives: Vec<usize> = (0..scores.len()).filter(|&i| positive_mask[i]).collect();
    let n_pos = positives.len() as f64;
    let mut weights = vec![1.0; scores.len()];
    if positives.is_empty() {
        return Ok(TaskWeights {
            weights,
            positive_mask: positive_mask.to_vec(),
            strategy,
        });
    }
    match normalization {
        Normalization::Linear => {
            let total: f64 = positives.iter().map(|&i| scores[i]).sum();
            if total > 0.0 {
                for &i in &positives {
                    weights[i] = n_pos * scores[i] / total;
                }
            }
        }
        Normalization::Softmax => {
            // Shift by the max for numerical stability; scores are bounded
            // quality values so overflow is not otherwise a concern.
            let max = positives.iter().map(|&i| scores[i]).fold(f64::NEG_INFINITY, f64::max);
            let total: f64 = positives.iter().map(|&i| (scores[i] - max).exp()).sum();
            for &i in &positives {
                weights[i] = n_pos * (scores[i] - max).exp() / total;
            }
        }
    }
    Ok(TaskWeights {
        weights,
        positive_mask: positive_mask.to_vec(),
        strategy,
    })
}

/// One completeness-score histogram bin over [lo, hi).
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub fraction: f64,
}

/// Histogram of completeness scores with half-open bins; the final bin is
/// closed so Q = 1 lands in it. Fractions sum to 1 for non-empty input.
pub fn pc_score_histogram(
    results: &[CompletenessResult],
    bin_width: f64,
) -> Result<Vec<HistogramBin>, CompletenessError> {
    let bins = score_histogram(results.iter().map(|r| r.score), bin_width)?;
    Ok(bins)
}

/// Histogram over raw scores; shared by the completeness result path and
/// table emitters that only carry scores.
pub fn score_histogram(
    scores: impl IntoIterator<Item = f64>,
    bin_width: f64,
) -> Result<Vec<HistogramBin>, CompletenessError> {
    if bin_width.is_nan() || bin_width <= 0.0 {
        return Err(CompletenessError::InvalidBinWidth(bin_width));
    }
    let n_bins_f = 1.0 / bin_width;
    let n_bins = n_bins_f.round() as usize;
    if n_bins == 0 || (n_bins as f64 * bin_width - 1.0).abs() > 1e-9 {
        return Err(CompletenessError::InvalidBinWidth(bin_width));
    }
    let mut counts = vec![0usize; n_bins];
    let mut total = 0usize;
    for q in scores {
        // The epsilon keeps boundary scores in the higher bin even when
        // the quotient rounds just below an integer (0.15 / 0.05 lands at
        // 2.9999999999999996).
        let idx = (((q / bin_width) + 1e-9).floor() as usize).min(n_bins - 1);
        counts[idx] += 1;
        total += 1;
    }
    if total == 0 {
        return Ok(Vec::new());
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            lo: i as f64 * bin_width,
            hi: (i + 1) as f64 * bin_width,
            count,
            fraction: count as f64 / total as f64,
        })
        .collect())
}
