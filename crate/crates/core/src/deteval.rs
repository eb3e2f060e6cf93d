//! Detector output evaluation: greedy box matching, average precision,
//! and the summary numbers the reports carry (mAP at loose-to-strict IoU
//! thresholds, mean matched IoU, PR curves).
//!
//! Matching protocol, applied per frame and per class: predictions are
//! taken in descending confidence (ties keep input order); each claims
//! the unmatched same-class ground-truth box with the highest IoU at or
//! above the threshold (IoU ties go to the earlier ground-truth entry).
//! AP integrates the all-points interpolated precision envelope, so it
//! depends only on the ranking, never on absolute confidence values.

use crate::geometry::{iou, ArtifactClass, Detection};
use crate::{Error, Result};

/// IoU thresholds the standard evaluation sweeps, loosest first.
pub const EVAL_IOU_THRESHOLDS: [f64; 3] = [0.05, 0.25, 0.50];

/// Threshold used for operating-point numbers (mean matched IoU, PR curves).
pub const OPERATING_IOU: f64 = 0.25;

/// Ground truth and predictions for one frame.
#[derive(Debug, Clone, Default)]
pub struct EvalFrame {
    pub frame_id: String,
    /// Confidence on ground-truth entries is ignored.
    pub ground_truth: Vec<Detection>,
    pub predictions: Vec<Detection>,
}

/// A whole evaluation run's input: frames stay in input order, which is
/// also the tie-break order for equal confidences across frames.
#[derive(Debug, Clone, Default)]
pub struct EvalDataset {
    pub frames: Vec<EvalFrame>,
}

/// One matched prediction/ground-truth pair inside a frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchPair {
    pub pred_index: usize,
    pub gt_index: usize,
    pub iou: f64,
}

#[derive(Debug, Clone, Default)]
pub struct MatchResult {
    pub matches: Vec<MatchPair>,
    pub unmatched_predictions: Vec<usize>,
    pub unmatched_ground_truth: Vec<usize>,
}

/// Greedy same-class matching for a single frame. Indices refer to the
/// input slices.
pub fn match_predictions(
    predictions: &[Detection],
    ground_truth: &[Detection],
    iou_threshold: f64,
) -> Result<MatchResult> {
    if !(iou_threshold.is_finite() && (0.0..=1.0).contains(&iou_threshold)) {
        return Err(Error::invalid(format!(
            "iou threshold {iou_threshold} outside [0,1]"
        )));
    }
    let mut order: Vec<usize> = (0..predictions.len()).collect();
    order.sort_by(|a, b| {
        predictions[*b]
            .confidence
            .partial_cmp(&predictions[*a].confidence)
            .expect("confidences are finite")
    });
    let mut gt_taken = vec![false; ground_truth.len()];
    let mut result = MatchResult::default();
    for pi in order {
        let pred = &predictions[pi];
        let mut best: Option<(usize, f64)> = None;
        for (gi, gt) in ground_truth.iter().enumerate() {
            if gt_taken[gi] || gt.class != pred.class {
                continue;
            }
            let overlap = iou(&pred.bbox, &gt.bbox);
            if overlap < iou_threshold {
                continue;
            }
            let better = match best {
                None => true,
                Some((_, b)) => overlap > b,
            };
            if better {
                best = Some((gi, overlap));
            }
        }
        match best {
            Some((gi, overlap)) => {
                gt_taken[gi] = true;
                result.matches.push(MatchPair {
                    pred_index: pi,
                    gt_index: gi,
                    iou: overlap,
                });
            }
            None => result.unmatched_predictions.push(pi),
        }
    }
    result.unmatched_predictions.sort_unstable();
    for (gi, taken) in gt_taken.iter().enumerate() {
        if !taken {
            result.unmatched_ground_truth.push(gi);
        }
    }
    Ok(result)
}

/// One prediction's place in the dataset-wide ranking for a class.
struct RankedPrediction {
    confidence: f64,
    is_tp: bool,
}

/// Builds the dataset-wide ranked TP/FP list for one class. Ranking is by
/// descending confidence; the stable sort keeps (frame order, input order)
/// for ties. Returns the list plus the class's ground-truth count and the
/// matched IoUs.
fn ranked_list(
    dataset: &EvalDataset,
    class: ArtifactClass,
    iou_threshold: f64,
) -> Result<(Vec<RankedPrediction>, usize, Vec<f64>)> {
    let mut ranked = Vec::new();
    let mut gt_count = 0;
    let mut matched_ious = Vec::new();
    for frame in &dataset.frames {
        gt_count += frame
            .ground_truth
            .iter()
            .filter(|d| d.class == class)
            .count();
        let matches = match_predictions(&frame.predictions, &frame.ground_truth, iou_threshold)?;
        let mut is_tp = vec![false; frame.predictions.len()];
        for m in &matches.matches {
            if frame.predictions[m.pred_index].class == class {
                is_tp[m.pred_index] = true;
                matched_ious.push(m.iou);
            }
        }
        for (pi, pred) in frame.predictions.iter().enumerate() {
            if pred.class == class {
                ranked.push(RankedPrediction {
                    confidence: pred.confidence,
                    is_tp: is_tp[pi],
                });
            }
        }
    }
    ranked.sort_by(|a, b| {
        b.confidence
            .partial_cmp(&a.confidence)
            .expect("confidences are finite")
    });
    Ok((ranked, gt_count, matched_ious))
}

/// Cumulative (recall, precision) pairs down the ranked list.
fn pr_points(ranked: &[RankedPrediction], gt_count: usize) -> Vec<(f64, f64)> {
    let mut tp = 0usize;
    let mut points = Vec::with_capacity(ranked.len());
    for (i, r) in ranked.iter().enumerate() {
        if r.is_tp {
            tp += 1;
        }
        points.push((tp as f64 / gt_count as f64, tp as f64 / (i + 1) as f64));
    }
    points
}

/// Area under the interpolated precision envelope, integrated over every
/// achieved recall step.
fn envelope_area(points: &[(f64, f64)]) -> f64 {
    let mut env: Vec<f64> = points.iter().map(|p| p.1).collect();
    for i in (0..env.len().saturating_sub(1)).rev() {
        env[i] = env[i].max(env[i + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (i, (recall, _)) in points.iter().enumerate() {
        ap += (recall - prev_recall) * env[i];
        prev_recall = *recall;
    }
    ap
}

/// All-points interpolated AP for one class, as a percentage.
/// `None` when the class has no ground truth anywhere in the dataset.
pub fn average_precision(
    dataset: &EvalDataset,
    class: ArtifactClass,
    iou_threshold: f64,
) -> Result<Option<f64>> {
    let (ranked, gt_count, _) = ranked_list(dataset, class, iou_threshold)?;
    if gt_count == 0 {
        return Ok(None);
    }
    Ok(Some(100.0 * envelope_area(&pr_points(&ranked, gt_count))))
}

/// Unweighted mean AP over classes that have ground truth, as a
/// percentage. `None` if the dataset has no ground truth at all.
pub fn mean_average_precision(dataset: &EvalDataset, iou_threshold: f64) -> Result<Option<f64>> {
    let mut sum = 0.0;
    let mut n = 0;
    for class in ArtifactClass::ALL {
        if let Some(ap) = average_precision(dataset, class, iou_threshold)? {
            sum += ap;
            n += 1;
        }
    }
    Ok(if n == 0 { None } else { Some(sum / n as f64) })
}

/// Raw cumulative PR samples for one class, one per ranked prediction.
/// `None` when the class has no ground truth.
pub fn pr_curve(
    dataset: &EvalDataset,
    class: ArtifactClass,
    iou_threshold: f64,
) -> Result<Option<Vec<(f64, f64)>>> {
    let (ranked, gt_count, _) = ranked_list(dataset, class, iou_threshold)?;
    if gt_count == 0 {
        return Ok(None);
    }
    Ok(Some(pr_points(&ranked, gt_count)))
}

/// Per-class numbers inside an [`EvalResult`]. Only classes with ground
/// truth appear.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ClassEval {
    pub class: ArtifactClass,
    /// AP (percent) at each of [`EVAL_IOU_THRESHOLDS`], same order.
    pub ap_percent: [f64; 3],
    pub gt_count: usize,
    pub prediction_count: usize,
    /// Cumulative PR samples at the operating threshold.
    pub pr_points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct EvalResult {
    pub per_class: Vec<ClassEval>,
    /// Mean AP (percent) at each of [`EVAL_IOU_THRESHOLDS`]. `None` when
    /// the dataset carries no ground truth.
    pub map_percent: [Option<f64>; 3],
    /// Mean IoU of matched pairs at the operating threshold, all classes
    /// pooled. `None` when nothing matched.
    pub mean_matched_iou: Option<f64>,
    pub predicted_boxes: usize,
}

/// Full evaluation sweep at the standard thresholds.
pub fn evaluate(dataset: &EvalDataset) -> Result<EvalResult> {
    let mut per_class = Vec::new();
    let mut iou_sum = 0.0;
    let mut iou_n = 0usize;
    for class in ArtifactClass::ALL {
        let mut ap_percent = [0.0; 3];
        let mut present = false;
        for (ti, thr) in EVAL_IOU_THRESHOLDS.iter().enumerate() {
            match average_precision(dataset, class, *thr)? {
                Some(ap) => {
                    ap_percent[ti] = ap;
                    present = true;
                }
                None => {
                    present = false;
                    break;
                }
            }
        }
        if !present {
            continue;
        }
        let (ranked, gt_count, matched) = ranked_list(dataset, class, OPERATING_IOU)?;
        iou_sum += matched.iter().sum::<f64>();
        iou_n += matched.len();
        per_class.push(ClassEval {
            class,
            ap_percent,
            gt_count,
            prediction_count: ranked.len(),
            pr_points: pr_points(&ranked, gt_count),
        });
    }
    let mut map_percent = [None; 3];
    for (ti, thr) in EVAL_IOU_THRESHOLDS.iter().enumerate() {
        map_percent[ti] = mean_average_precision(dataset, *thr)?;
    }
    let predicted_boxes = dataset.frames.iter().map(|f| f.predictions.len()).sum();
    Ok(EvalResult {
        per_class,
        map_percent,
        mean_matched_iou: if iou_n == 0 {
            None
        } else {
            Some(iou_sum / iou_n as f64)
        },
        predicted_boxes,
    })
}
