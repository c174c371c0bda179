//! Greedy center-distance matching of predictions to ground truth.

use crate::model::{Detection, ObjectState};

/// Distance limits `l` evaluated by the nuScenes detection benchmark, meters.
pub fn distance_limits_default() -> Vec<f64> {
    vec![0.5, 1.0, 2.0, 4.0]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchPair {
    pub gt: usize,
    pub pred: usize,
    pub distance: f64,
}

/// Per-frame TP/FP/FN partition. Indices refer to the slices passed to
/// [`match_frame`].
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub true_positives: Vec<MatchPair>,
    pub false_positives: Vec<usize>,
    pub false_negatives: Vec<usize>,
    pub distance_limit: f64,
    pub threshold: f64,
}

/// Prediction indices sorted by descending confidence, ties in input order.
pub fn confidence_order(preds: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].confidence.total_cmp(&preds[a].confidence));
    order
}

/// Outcome of one prediction in the greedy pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    Matched { gt: usize, distance: f64 },
    Unmatched,
}

/// Runs the greedy pass over every prediction, most confident first.
///
/// Each prediction takes the nearest still-free ground truth within
/// `distance_limit`. A prediction's outcome never depends on less confident
/// predictions, so the matching at any threshold is a prefix of this pass.
pub fn greedy_outcomes(gts: &[ObjectState], preds: &[Detection], distance_limit: f64) -> Vec<(usize, Outcome)> {
    let mut taken = vec![false; gts.len()];
    confidence_order(preds)
        .into_iter()
        .map(|p| {
            let center = preds[p].state.center;
            let mut best: Option<(usize, f64)> = None;
            for (g, gt) in gts.iter().enumerate() {
                if taken[g] {
                    continue;
                }
                let d = gt.center.distance(center);
                if d <= distance_limit && best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((g, d));
                }
            }
            match best {
                Some((gt, distance)) => {
                    taken[gt] = true;
                    (p, Outcome::Matched { gt, distance })
                }
                None => (p, Outcome::Unmatched),
            }
        })
        .collect()
}

pub fn match_frame(
    gts: &[ObjectState],
    preds: &[Detection],
    distance_limit: f64,
    threshold: f64,
) -> MatchResult {
    debug_assert!(distance_limit > 0.0);
    let mut result = MatchResult {
        true_positives: Vec::new(),
        false_positives: Vec::new(),
        false_negatives: Vec::new(),
        distance_limit,
        threshold,
    };
    let mut matched = vec![false; gts.len()];
    for (pred, outcome) in greedy_outcomes(gts, preds, distance_limit) {
        if preds[pred].confidence < threshold {
            break;
        }
        match outcome {
            Outcome::Matched { gt, distance } => {
                matched[gt] = true;
                result.true_positives.push(MatchPair { gt, pred, distance });
            }
            Outcome::Unmatched => result.false_positives.push(pred),
        }
    }
    result.false_negatives = (0..gts.len()).filter(|&g| !matched[g]).collect();
    result
}
