use crate::criticality::{assess, CriticalityInputs, CriticalityModel};
use crate::matching::{greedy_outcomes, Outcome};
use crate::model::{in_range, Dataset, Detection, DetectionSet, EgoState, ObjectState};

use super::fsum::{fsum, ExactSum};
use super::{CurvePoint, WeightedCounts};

/// One frame restricted to a class and the evaluation range, with the
/// configuration-independent criticality inputs of every object.
#[derive(Debug, Clone)]
pub struct PreparedFrame {
    pub frame_id: String,
    pub ego: EgoState,
    pub ground_truth: Vec<ObjectState>,
    pub gt_inputs: Vec<CriticalityInputs>,
    pub detections: Vec<Detection>,
    pub det_inputs: Vec<CriticalityInputs>,
}

/// A dataset/detection pair ready for matching and weighting.
#[derive(Debug, Clone)]
pub struct EvalSet {
    pub class_name: String,
    pub max_range: f64,
    pub frames: Vec<PreparedFrame>,
}

impl EvalSet {
    /// Detections on frames absent from `dataset` are skipped.
    pub fn new(dataset: &Dataset, detections: &DetectionSet, class_name: &str, max_range: f64) -> Self {
        let frames = dataset
            .frames
            .iter()
            .map(|frame| {
                let ego = frame.ego;
                let keep = |o: &ObjectState| o.class_name == class_name && in_range(&ego, o.center, max_range);
                let ground_truth: Vec<ObjectState> = frame.ground_truth.iter().filter(|o| keep(o)).cloned().collect();
                let dets: Vec<Detection> = detections
                    .for_frame(&frame.frame_id)
                    .iter()
                    .filter(|d| keep(&d.state))
                    .cloned()
                    .collect();
                let inputs = |o: &ObjectState| assess(&ego, o.center, o.velocity).inputs;
                PreparedFrame {
                    frame_id: frame.frame_id.clone(),
                    ego,
                    gt_inputs: ground_truth.iter().map(inputs).collect(),
                    det_inputs: dets.iter().map(|d| inputs(&d.state)).collect(),
                    ground_truth,
                    detections: dets,
                }
            })
            .collect();
        EvalSet {
            class_name: class_name.to_owned(),
            max_range,
            frames,
        }
    }

    pub fn gt_count(&self) -> usize {
        self.frames.iter().map(|f| f.ground_truth.len()).sum()
    }

    pub fn detection_count(&self) -> usize {
        self.frames.iter().map(|f| f.detections.len()).sum()
    }

    /// κ for every ground-truth object, per frame.
    pub fn gt_weights(&self, model: &impl CriticalityModel) -> Vec<Vec<f64>> {
        self.frames
            .iter()
            .map(|f| f.gt_inputs.iter().map(|i| model.weight(i)).collect())
            .collect()
    }

    /// κ′ for every detection, per frame.
    pub fn det_weights(&self, model: &impl CriticalityModel) -> Vec<Vec<f64>> {
        self.frames
            .iter()
            .map(|f| f.det_inputs.iter().map(|i| model.weight(i)).collect())
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
struct Ranked {
    confidence: f64,
    frame: usize,
    det: usize,
    gt: Option<usize>,
}

/// Greedy matching outcomes for one distance limit, with all detections in
/// global descending-confidence order. Independent of the criticality
/// configuration, so one instance serves any number of configurations.
#[derive(Debug, Clone)]
pub struct MatchedSet {
    pub distance_limit: f64,
    n_gt: usize,
    ranked: Vec<Ranked>,
}

impl MatchedSet {
    pub fn new(set: &EvalSet, distance_limit: f64) -> Self {
        let mut ranked = Vec::with_capacity(set.detection_count());
        for (fi, frame) in set.frames.iter().enumerate() {
            for (det, outcome) in greedy_outcomes(&frame.ground_truth, &frame.detections, distance_limit) {
                ranked.push(Ranked {
                    confidence: frame.detections[det].confidence,
                    frame: fi,
                    det,
                    gt: match outcome {
                        Outcome::Matched { gt, .. } => Some(gt),
                        Outcome::Unmatched => None,
                    },
                });
            }
        }
        // Stable: equal confidences keep frame order, then in-frame order.
        ranked.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
        MatchedSet {
            distance_limit,
            n_gt: set.gt_count(),
            ranked,
        }
    }

    /// One operating point per distinct confidence, from high to low.
    ///
    /// Weights are indexed `[frame][object]` as produced by
    /// [`EvalSet::gt_weights`] and [`EvalSet::det_weights`].
    pub fn curve(&self, gt_weights: &[Vec<f64>], det_weights: &[Vec<f64>]) -> Vec<CurvePoint> {
        let mut counts = WeightedCounts {
            sum_gt: fsum(gt_weights.iter().flatten()),
            n_fn: self.n_gt,
            ..Default::default()
        };
        if self.ranked.is_empty() {
            return vec![CurvePoint::from_counts(1.0, &counts)];
        }
        let (mut tp_gt, mut tp_pred, mut fp_pred) = (ExactSum::default(), ExactSum::default(), ExactSum::default());
        let mut points = Vec::new();
        for (i, r) in self.ranked.iter().enumerate() {
            let w_det = det_weights[r.frame][r.det];
            match r.gt {
                Some(g) => {
                    counts.n_tp += 1;
                    tp_gt.add(gt_weights[r.frame][g]);
                    tp_pred.add(w_det);
                }
                None => {
                    counts.n_fp += 1;
                    fp_pred.add(w_det);
                }
            }
            let last_at_threshold = self
                .ranked
                .get(i + 1)
                .is_none_or(|next| next.confidence != r.confidence);
            if last_at_threshold {
                counts.n_fn = self.n_gt - counts.n_tp;
                counts.sum_tp_gt = tp_gt.value();
                counts.sum_tp_pred = tp_pred.value();
                counts.sum_fp_pred = fp_pred.value();
                points.push(CurvePoint::from_counts(r.confidence, &counts));
            }
        }
        points
    }

    pub fn curve_for(&self, set: &EvalSet, model: &impl CriticalityModel) -> Vec<CurvePoint> {
        self.curve(&set.gt_weights(model), &set.det_weights(model))
    }
}

/// Operating points over all distinct confidences of the detections of
/// `class_name` within `max_range` of ego.
pub fn build_curve(
    dataset: &Dataset,
    detections: &DetectionSet,
    class_name: &str,
    distance_limit: f64,
    model: &impl CriticalityModel,
    max_range: f64,
) -> Vec<CurvePoint> {
    let set = EvalSet::new(dataset, detections, class_name, max_range);
    MatchedSet::new(&set, distance_limit).curve_for(&set, model)
}

/// Picks, for each recall step of 0.01, the first operating point reaching
/// it. Consecutive repeats are collapsed. For reporting only.
pub fn resample_curve(curve: &[CurvePoint]) -> Vec<CurvePoint> {
    let mut out: Vec<CurvePoint> = Vec::new();
    for k in 0..=100 {
        let target = k as f64 / 100.0;
        let Some(point) = curve.iter().find(|p| p.recall >= target) else {
            break;
        };
        if out.last() != Some(point) {
            out.push(*point);
        }
    }
    out
}
