//! Detection evaluation: greedy score-ordered matching, interpolated
//! average precision at 11 or 40 recall positions, difficulty / level /
//! completeness-bin stratification, and error-type analysis.
//!
//! Matching semantics follow the KITTI devkit in spirit: ground truths
//! outside the active stratum (and `DontCare` regions) absorb overlapping
//! detections without counting as true or false positives, so a detector is
//! never penalized for finding an object the stratum excludes.

use crate::dataset::kitti::Difficulty;
use crate::dataset::DetectionRecord;
use crate::geometry::{iou_3d, iou_bev, Box3D};

/// Which overlap the matcher uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IouKind {
    ThreeD,
    Bev,
}

impl IouKind {
    pub fn overlap(&self, a: &Box3D, b: &Box3D) -> f64 {
        match self {
            IouKind::ThreeD => iou_3d(a, b),
            IouKind::Bev => iou_bev(a, b),
        }
    }
}

/// One ground-truth object with the attributes evaluation strata need.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub box3d: Box3D,
    pub class_name: String,
    pub difficulty: Difficulty,
    /// Point completeness score of the object, in [0, 1].
    pub q: f64,
    pub num_points: usize,
    /// Planar distance from the sensor, sqrt(cx² + cy²).
    pub distance: f64,
}

impl GroundTruth {
    pub fn new(
        box3d: Box3D,
        class_name: impl Into<String>,
        difficulty: Difficulty,
        q: f64,
        num_points: usize,
    ) -> Self {
        let distance = (box3d.cx * box3d.cx + box3d.cy * box3d.cy).sqrt();
        Self {
            box3d,
            class_name: class_name.into(),
            difficulty,
            q,
            num_points,
            distance,
        }
    }

    pub fn is_dont_care(&self) -> bool {
        self.class_name == "DontCare"
    }
}

/// Matched detections and ground truths of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameEvalRecord {
    pub frame_id: String,
    pub detections: Vec<DetectionRecord>,
    pub ground_truths: Vec<GroundTruth>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetOutcome {
    TruePositive,
    FalsePositive,
    /// Wrong class for this evaluation, or absorbed by an out-of-stratum /
    /// DontCare ground truth.
    Ignored,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GtOutcome {
    /// Matched by the detection at this index.
    Matched(usize),
    Missed,
    /// Outside the active stratum; absorbs detections silently.
    Ignored,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub det_outcomes: Vec<DetOutcome>,
    pub gt_outcomes: Vec<GtOutcome>,
    /// Ground truths the stratum counts (denominator of recall).
    pub counted_gt: usize,
}

/// Greedy score-ordered matching of one frame for one class.
///
/// Detections are visited by descending score (ties by input order); each
/// takes the unmatched counted ground truth of highest IoU when that IoU
/// reaches the threshold (IoU ties break toward the lower GT index).
/// Detections that only reach an ignored ground truth are absorbed.
pub fn match_detections(
    frame: &FrameEvalRecord,
    class_name: &str,
    iou_kind: IouKind,
    iou_thresh: f64,
    counted: &dyn Fn(&GroundTruth) -> bool,
) -> MatchResult {
    let n_det = frame.detections.len();
    let n_gt = frame.ground_truths.len();

    // Partition ground truths: counted, ignored-absorbing, irrelevant.
    let mut gt_counted = vec![false; n_gt];
    let mut gt_absorbing = vec![false; n_gt];
    for (i, gt) in frame.ground_truths.iter().enumerate() {
        if gt.is_dont_care() {
            gt_absorbing[i] = true;
        } else if gt.class_name == class_name {
            if counted(gt) {
                gt_counted[i] = true;
            } else {
                gt_absorbing[i] = true;
            }
        }
    }

    let mut det_order: Vec<usize> = (0..n_det)
        .filter(|&i| frame.detections[i].class_name == class_name)
        .collect();
    det_order.sort_by(|&a, &b| {
        frame.detections[b]
            .score
            .partial_cmp(&frame.detections[a].score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let mut det_outcomes = vec![DetOutcome::Ignored; n_det];
    let mut gt_outcomes: Vec<GtOutcome> = (0..n_gt)
        .map(|i| if gt_counted[i] { GtOutcome::Missed } else { GtOutcome::Ignored })
        .collect();
    let mut gt_taken = vec![false; n_gt];

    for &d in &det_order {
        let det_box = &frame.detections[d].box3d;
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in frame.ground_truths.iter().enumerate() {
            if !gt_counted[g] || gt_taken[g] {
                continue;
            }
            let iou = iou_kind.overlap(det_box, &gt.box3d);
            let better = match best {
                None => iou > 0.0,
                Some((_, best_iou)) => iou > best_iou,
            };
            if better {
                best = Some((g, iou));
            }
        }
        if let Some((g, iou)) = best {
            if iou >= iou_thresh {
                det_outcomes[d] = DetOutcome::TruePositive;
                gt_outcomes[g] = GtOutcome::Matched(d);
                gt_taken[g] = true;
                continue;
            }
        }
        let absorbed = frame
            .ground_truths
            .iter()
            .enumerate()
            .filter(|(g, _)| gt_absorbing[*g])
            .any(|(_, gt)| iou_kind.overlap(det_box, &gt.box3d) >= iou_thresh);
        det_outcomes[d] = if absorbed {
            DetOutcome::Ignored
        } else {
            DetOutcome::FalsePositive
        };
    }

    MatchResult {
        det_outcomes,
        gt_outcomes,
        counted_gt: gt_counted.iter().filter(|&&c| c).count(),
    }
}

/// One point of a precision–recall curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub recall: f64,
    pub precision: f64,
}

/// Pools matches across frames into a PR curve.
///
/// Detections are cumulated in descending score order, ties broken by frame
/// id then detection index, so the curve is independent of frame order and
/// thread count. Returns the curve and the counted ground-truth total.
pub fn pr_curve(
    frames: &[FrameEvalRecord],
    class_name: &str,
    iou_kind: IouKind,
    iou_thresh: f64,
    counted: &dyn Fn(&GroundTruth) -> bool,
) -> (Vec<PrPoint>, usize) {
    let mut total_gt = 0usize;
    let mut pool: Vec<(f64, &str, usize, bool)> = Vec::new();
    for frame in frames {
        let result = match_detections(frame, class_name, iou_kind, iou_thresh, counted);
        total_gt += result.counted_gt;
        for (i, outcome) in result.det_outcomes.iter().enumerate() {
            match outcome {
                DetOutcome::TruePositive => {
                    pool.push((frame.detections[i].score, &frame.frame_id, i, true))
                }
                DetOutcome::FalsePositive => {
                    pool.push((frame.detections[i].score, &frame.frame_id, i, false))
                }
                DetOutcome::Ignored => {}
            }
        }
    }
    if total_gt == 0 {
        return (Vec::new(), 0);
    }
    pool.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.1.cmp(b.1))
            .then_with(|| a.2.cmp(&b.2))
    });
    let mut points = Vec::with_capacity(pool.len());
    let mut tp = 0usize;
    let mut fp = 0usize;
    for (_, _, _, is_tp) in pool {
        if is_tp {
            tp += 1;
        } else {
            fp += 1;
        }
        points.push(PrPoint {
            recall: tp as f64 / total_gt as f64,
            precision: tp as f64 / (tp + fp) as f64,
        });
    }
    (points, total_gt)
}

/// Number of interpolation positions for average precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApPositions {
    /// Recall thresholds {0, 0.1, …, 1.0}.
    Eleven,
    /// Recall thresholds {1/40, 2/40, …, 1}; recall 0 is excluded.
    Forty,
}

impl ApPositions {
    pub fn thresholds(&self) -> Vec<f64> {
        match self {
            ApPositions::Eleven => (0..=10).map(|i| i as f64 / 10.0).collect(),
            ApPositions::Forty => (1..=40).map(|i| i as f64 / 40.0).collect(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ApPositions::Eleven => "AP11",
            ApPositions::Forty => "AP40",
        }
    }
}

/// Interpolated AP over a PR curve: the mean over recall thresholds of the
/// maximum precision at recall ≥ threshold (0 where unreached).
///
/// An empty curve gives 0; the no-ground-truth case is distinguished by the
/// caller, which knows the counted GT total.
pub fn ap_interpolated(pr: &[PrPoint], positions: ApPositions) -> f64 {
    let thresholds = positions.thresholds();
    if pr.is_empty() {
        return 0.0;
    }
    // Suffix maxima of precision; recall is non-decreasing along the curve.
    let mut suffix_max = vec![0.0f64; pr.len()];
    let mut running = 0.0f64;
    for i in (0..pr.len()).rev() {
        running = running.max(pr[i].precision);
        suffix_max[i] = running;
    }
    let mut total = 0.0;
    for &r in &thresholds {
        let idx = pr.partition_point(|p| p.recall < r);
        if idx < pr.len() {
            total += suffix_max[idx];
        }
    }
    total / thresholds.len() as f64
}

/// AP per stratum.
#[derive(Debug, Clone, PartialEq)]
pub struct StratumAp {
    pub stratum: String,
    pub counted_gt: usize,
    /// None marks a stratum with no counted ground truth.
    pub ap: Option<f64>,
}

/// How `evaluate` slices the ground truths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stratifier {
    /// Single all-inclusive stratum; equals unstratified evaluation.
    AllInOne,
    /// KITTI Easy / Moderate / Hard, each including the easier tiers.
    KittiDifficulty,
    /// Waymo LEVEL_1 (≥ 5 points) and LEVEL_2 (≥ 1 point), each overall and
    /// split by distance bins [0, 30), [30, 50), [50, ∞).
    WaymoLevels,
}

#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub class_name: String,
    pub iou_kind: IouKind,
    pub iou_thresh: f64,
    pub positions: ApPositions,
    pub stratifier: Stratifier,
}

type GtPredicate = Box<dyn Fn(&GroundTruth) -> bool>;

fn strata_of(stratifier: Stratifier) -> Vec<(String, GtPredicate)> {
    match stratifier {
        Stratifier::AllInOne => vec![("All".to_string(), Box::new(|_: &GroundTruth| true) as GtPredicate)],
        Stratifier::KittiDifficulty => [Difficulty::Easy, Difficulty::Moderate, Difficulty::Hard]
            .into_iter()
            .map(|level| {
                (
                    level.name().to_string(),
                    Box::new(move |gt: &GroundTruth| gt.difficulty <= level) as GtPredicate,
                )
            })
            .collect(),
        Stratifier::WaymoLevels => {
            let mut strata: Vec<(String, GtPredicate)> = Vec::new();
            for (level_name, min_points) in [("LEVEL_1", 5usize), ("LEVEL_2", 1usize)] {
                let bins: [(&str, f64, f64); 4] = [
                    ("Overall", 0.0, f64::INFINITY),
                    ("0-30m", 0.0, 30.0),
                    ("30-50m", 30.0, 50.0),
                    ("50m-inf", 50.0, f64::INFINITY),
                ];
                for (bin_name, lo, hi) in bins {
                    strata.push((
                        format!("{level_name}/{bin_name}"),
                        Box::new(move |gt: &GroundTruth| {
                            gt.num_points >= min_points && gt.distance >= lo && gt.distance < hi
                        }) as GtPredicate,
                    ));
                }
            }
            strata
        }
    }
}

/// Stratified AP over pooled frames.
pub fn evaluate(frames: &[FrameEvalRecord], config: &EvalConfig) -> Vec<StratumAp> {
    strata_of(config.stratifier)
        .into_iter()
        .map(|(stratum, predicate)| {
            let (pr, total_gt) = pr_curve(
                frames,
                &config.class_name,
                config.iou_kind,
                config.iou_thresh,
                &*predicate,
            );
            StratumAp {
                stratum,
                counted_gt: total_gt,
                ap: (total_gt > 0).then(|| ap_interpolated(&pr, config.positions)),
            }
        })
        .collect()
}

/// AP per completeness-score bin.
#[derive(Debug, Clone, PartialEq)]
pub struct PcBinAp {
    pub lo: f64,
    pub hi: f64,
    pub counted_gt: usize,
    pub ap: Option<f64>,
}

/// AP restricted to ground truths whose completeness score falls in each
/// bin; out-of-bin ground truths are ignored (they absorb their matches
/// rather than producing false positives or negatives).
///
/// Bins are half-open [lo, hi) except the last, which is closed.
pub fn pc_binned_ap(
    frames: &[FrameEvalRecord],
    bin_edges: &[f64],
    config: &EvalConfig,
) -> Vec<PcBinAp> {
    let mut out = Vec::new();
    for i in 0..bin_edges.len().saturating_sub(1) {
        let lo = bin_edges[i];
        let hi = bin_edges[i + 1];
        let last = i + 2 == bin_edges.len();
        let in_bin = move |gt: &GroundTruth| gt.q >= lo && (gt.q < hi || (last && gt.q <= hi));
        let (pr, total_gt) = pr_curve(
            frames,
            &config.class_name,
            config.iou_kind,
            config.iou_thresh,
            &in_bin,
        );
        out.push(PcBinAp {
            lo,
            hi,
            counted_gt: total_gt,
            ap: (total_gt > 0).then(|| ap_interpolated(&pr, config.positions)),
        });
    }
    out
}

/// Classification of high-confidence detections by their best ground-truth
/// overlap: Correct [0.7, 1.0], Mis-Localized [0.5, 0.7), Background
/// [0.0, 0.5).
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorBreakdown {
    pub correct: usize,
    pub mislocalized: usize,
    pub background: usize,
    pub score_threshold: f64,
}

impl ErrorBreakdown {
    pub fn total(&self) -> usize {
        self.correct + self.mislocalized + self.background
    }

    /// (correct, mislocalized, background) fractions; zeros when no
    /// detections pass the threshold.
    pub fn ratios(&self) -> (f64, f64, f64) {
        let total = self.total();
        if total == 0 {
            return (0.0, 0.0, 0.0);
        }
        let t = total as f64;
        (
            self.correct as f64 / t,
            self.mislocalized as f64 / t,
            self.background as f64 / t,
        )
    }
}

/// Error analysis over detections with score strictly above the threshold.
pub fn error_analysis(
    frames: &[FrameEvalRecord],
    class_name: &str,
    score_threshold: f64,
    iou_kind: IouKind,
) -> ErrorBreakdown {
    let mut breakdown = ErrorBreakdown {
        correct: 0,
        mislocalized: 0,
        background: 0,
        score_threshold,
    };
    for frame in frames {
        for det in &frame.detections {
            if det.class_name != class_name || det.score <= score_threshold {
                continue;
            }
            let best = frame
                .ground_truths
                .iter()
                .filter(|gt| gt.class_name == class_name)
                .map(|gt| iou_kind.overlap(&det.box3d, &gt.box3d))
                .fold(0.0f64, f64::max);
            if best >= 0.7 {
                breakdown.correct += 1;
            } else if best >= 0.5 {
                breakdown.mislocalized += 1;
            } else {
                breakdown.background += 1;
            }
        }
    }
    breakdown
}
