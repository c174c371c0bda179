//! Classic precision/recall/AP and their criticality-weighted counterparts:
//! reliability-weighted precision `P_R`, safety-weighted recall `R_S` and
//! the critical average precision `AP_crit`.

mod curve;
mod fsum;
mod report;

pub use curve::{build_curve, resample_curve, EvalSet, MatchedSet, PreparedFrame};
pub use report::{curve_csv, evaluate, EvaluationEntry, EvaluationReport};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use fsum::fsum;

/// Minimum precision and recall for an operating point to enter AP.
pub const AP_MIN_PRECISION: f64 = 0.1;
pub const AP_MIN_RECALL: f64 = 0.1;

/// Raw and criticality-weighted TP/FP/FN tallies at one operating point.
///
/// `sum_gt` is the total ground-truth criticality over TP and FN; the FN
/// share is derived from it so the recall denominator stays fixed while the
/// threshold moves.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WeightedCounts {
    /// Σ κ over true positives, from ground-truth states.
    pub sum_tp_gt: f64,
    /// Σ κ′ over true positives, from predicted states.
    pub sum_tp_pred: f64,
    /// Σ κ′ over false positives.
    pub sum_fp_pred: f64,
    /// Σ κ over every ground-truth object (TP and FN).
    pub sum_gt: f64,
    pub n_tp: usize,
    pub n_fp: usize,
    pub n_fn: usize,
}

impl WeightedCounts {
    /// Tallies explicit per-object weights.
    pub fn from_weights(tp: &[(f64, f64)], fp_pred: &[f64], fn_gt: &[f64]) -> Self {
        let tp_gt: Vec<f64> = tp.iter().map(|&(gt, _)| gt).collect();
        let tp_pred: Vec<f64> = tp.iter().map(|&(_, pred)| pred).collect();
        WeightedCounts {
            sum_tp_gt: fsum(&tp_gt),
            sum_tp_pred: fsum(&tp_pred),
            sum_fp_pred: fsum(fp_pred),
            sum_gt: fsum(tp_gt.iter().chain(fn_gt)),
            n_tp: tp.len(),
            n_fp: fp_pred.len(),
            n_fn: fn_gt.len(),
        }
    }

    pub fn sum_fn_gt(&self) -> f64 {
        (self.sum_gt - self.sum_tp_gt).max(0.0)
    }
}

/// `num / den` clamped to 1, with an empty denominator counting as 1.
fn clamped_ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        (num / den).min(1.0)
    } else {
        1.0
    }
}

/// `(P, R)` from the raw counts.
pub fn classic_pr(c: &WeightedCounts) -> (f64, f64) {
    (
        clamped_ratio(c.n_tp as f64, (c.n_tp + c.n_fp) as f64),
        clamped_ratio(c.n_tp as f64, (c.n_tp + c.n_fn) as f64),
    )
}

/// `(P_R, R_S)`: ground-truth criticality over predicted criticality for
/// precision, predicted over ground truth for recall, both capped at 1.
pub fn weighted_pr(c: &WeightedCounts) -> (f64, f64) {
    (
        clamped_ratio(c.sum_tp_gt, c.sum_tp_pred + c.sum_fp_pred),
        clamped_ratio(c.sum_tp_pred, c.sum_gt),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub p_r: f64,
    pub r_s: f64,
}

impl CurvePoint {
    pub fn from_counts(threshold: f64, counts: &WeightedCounts) -> Self {
        let (precision, recall) = classic_pr(counts);
        let (p_r, r_s) = weighted_pr(counts);
        CurvePoint {
            threshold,
            precision,
            recall,
            p_r,
            r_s,
        }
    }

    /// `(recall, precision)` or `(r_s, p_r)`.
    pub fn axes(&self, weighted: bool) -> (f64, f64) {
        if weighted {
            (self.r_s, self.p_r)
        } else {
            (self.recall, self.precision)
        }
    }
}

/// How a curve is summarised into a single number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApStyle {
    /// `Σ (R_n - R_{n-1}) P_n` over points with `P, R >= 0.1`.
    #[default]
    Anchored,
    /// nuScenes devkit: precision interpolated on 101 recall steps, bins up
    /// to recall 0.1 dropped, precision floor 0.1 subtracted and rescaled.
    Devkit,
}

impl std::str::FromStr for ApStyle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "anchored" => Ok(ApStyle::Anchored),
            "devkit" => Ok(ApStyle::Devkit),
            other => Err(Error::config(format!(
                "unknown AP style `{other}` (expected anchored or devkit)"
            ))),
        }
    }
}

fn check_sorted(curve: &[CurvePoint], weighted: bool) -> Result<()> {
    let axis = if weighted { "r_s" } else { "recall" };
    for (i, w) in curve.windows(2).enumerate() {
        if w[1].axes(weighted).0 < w[0].axes(weighted).0 {
            return Err(Error::UnsortedCurve { axis, index: i + 1 });
        }
    }
    Ok(())
}

/// Area summary of a curve ordered by nondecreasing recall (`r_s` when
/// `weighted`). AP uses the classic axes, AP_crit the weighted ones.
pub fn average_precision(curve: &[CurvePoint], weighted: bool) -> Result<f64> {
    check_sorted(curve, weighted)?;
    let mut sum = 0.0;
    let mut prev_recall: Option<f64> = None;
    for (i, point) in curve.iter().enumerate() {
        let (recall, precision) = point.axes(weighted);
        if precision < AP_MIN_PRECISION || recall < AP_MIN_RECALL {
            continue;
        }
        // The first retained point is anchored at its predecessor on the
        // unfiltered curve.
        let base = prev_recall.unwrap_or_else(|| if i == 0 { 0.0 } else { curve[i - 1].axes(weighted).0 });
        sum += (recall - base) * precision;
        prev_recall = Some(recall);
    }
    Ok(sum)
}

/// Number of recall bins the devkit interpolates onto.
const DEVKIT_BINS: usize = 101;

pub fn average_precision_devkit(curve: &[CurvePoint], weighted: bool) -> Result<f64> {
    check_sorted(curve, weighted)?;
    let (recalls, precisions): (Vec<f64>, Vec<f64>) = curve.iter().map(|p| p.axes(weighted)).unzip();
    let first_bin = (100.0 * AP_MIN_RECALL).round() as usize + 1;
    let total: f64 = (first_bin..DEVKIT_BINS)
        .map(|k| {
            let r = k as f64 / (DEVKIT_BINS - 1) as f64;
            (interp(r, &recalls, &precisions) - AP_MIN_PRECISION).max(0.0) / (1.0 - AP_MIN_PRECISION)
        })
        .sum();
    Ok(total / (DEVKIT_BINS - first_bin) as f64)
}

pub fn summarize(curve: &[CurvePoint], weighted: bool, style: ApStyle) -> Result<f64> {
    match style {
        ApStyle::Anchored => average_precision(curve, weighted),
        ApStyle::Devkit => average_precision_devkit(curve, weighted),
    }
}

/// Piecewise-linear interpolation with numpy's `interp(x, xp, fp, right=0)`
/// semantics; `xp` is nondecreasing and may repeat.
fn interp(x: f64, xp: &[f64], fp: &[f64]) -> f64 {
    let (Some(&first), Some(&last)) = (xp.first(), xp.last()) else {
        return 0.0;
    };
    if x > last {
        return 0.0;
    }
    if x < first {
        return fp[0];
    }
    let j = xp.partition_point(|&v| v <= x) - 1;
    if j + 1 == xp.len() {
        return fp[j];
    }
    let (x0, x1) = (xp[j], xp[j + 1]);
    fp[j] + (x - x0) * (fp[j + 1] - fp[j]) / (x1 - x0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(recall: f64, precision: f64) -> CurvePoint {
        CurvePoint {
            threshold: 0.0,
            precision,
            recall,
            p_r: precision,
            r_s: recall,
        }
    }

    fn raw(n_tp: usize, n_fp: usize, n_fn: usize) -> WeightedCounts {
        WeightedCounts {
            n_tp,
            n_fp,
            n_fn,
            ..Default::default()
        }
    }

    #[test]
    fn classic_examples() {
        assert_eq!(classic_pr(&raw(3, 1, 0)), (0.75, 1.0));
        assert_eq!(classic_pr(&raw(0, 0, 5)), (1.0, 0.0));
        assert_eq!(classic_pr(&raw(0, 0, 0)), (1.0, 1.0));
    }

    #[test]
    fn weighted_examples() {
        let c = WeightedCounts::from_weights(&[(0.8, 0.9)], &[0.1], &[]);
        assert_eq!(weighted_pr(&c), (0.8, 1.0));

        let c = WeightedCounts::from_weights(&[(1.0, 1.0); 3], &[1.0], &[1.0, 1.0]);
        assert_eq!(weighted_pr(&c), (0.75, 0.6));
        assert_eq!(weighted_pr(&c), classic_pr(&c));

        let c = WeightedCounts::from_weights(&[], &[], &[0.5]);
        assert_eq!(weighted_pr(&c).1, 0.0);
        assert_eq!(c.sum_fn_gt(), 0.5);
    }

    #[test]
    fn ap_hand_curve() {
        let curve = [pt(0.2, 1.0), pt(0.5, 0.8), pt(1.0, 0.5)];
        let ap = average_precision(&curve, false).unwrap();
        assert!((ap - 0.69).abs() < 1e-15, "{ap}");
        assert_eq!(average_precision(&[pt(1.0, 1.0)], false).unwrap(), 1.0);
        assert_eq!(average_precision(&[pt(0.3, 0.05), pt(0.9, 0.02)], false).unwrap(), 0.0);
    }

    #[test]
    fn ap_filter_anchors_at_predecessor() {
        // The first point is dropped (recall < 0.1); the second one starts
        // from the dropped point's recall.
        let curve = [pt(0.05, 1.0), pt(0.3, 0.9)];
        let ap = average_precision(&curve, false).unwrap();
        assert!((ap - 0.25 * 0.9).abs() < 1e-15);
    }

    #[test]
    fn ap_rejects_unsorted() {
        let curve = [pt(0.5, 1.0), pt(0.2, 1.0)];
        assert!(matches!(
            average_precision(&curve, false),
            Err(Error::UnsortedCurve { index: 1, .. })
        ));
        assert!(average_precision_devkit(&curve, true).is_err());
    }

    #[test]
    fn devkit_perfect_and_empty() {
        assert!((average_precision_devkit(&[pt(1.0, 1.0)], false).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(average_precision_devkit(&[pt(0.0, 1.0)], false).unwrap(), 0.0);
        assert_eq!(average_precision_devkit(&[], false).unwrap(), 0.0);
    }

    #[test]
    fn devkit_constant_precision() {
        // Precision 0.55 up to full recall: (0.55 - 0.1) / 0.9 = 0.5.
        let curve = [pt(0.0, 0.55), pt(1.0, 0.55)];
        let ap = average_precision_devkit(&curve, false).unwrap();
        assert!((ap - 0.5).abs() < 1e-12, "{ap}");
    }

    #[test]
    fn interp_matches_numpy() {
        let xp = [0.0, 0.5, 0.5, 1.0];
        let fp = [1.0, 0.8, 0.6, 0.2];
        assert_eq!(interp(0.25, &xp, &fp), 0.9);
        assert_eq!(interp(0.5, &xp, &fp), 0.6);
        assert!((interp(0.75, &xp, &fp) - 0.4).abs() < 1e-15);
        assert_eq!(interp(1.0, &xp, &fp), 0.2);
        assert_eq!(interp(-1.0, &xp, &fp), 1.0);
        assert_eq!(interp(0.7, &[0.1, 0.6], &[1.0, 1.0]), 0.0);
    }

    #[test]
    fn ap_style_parses() {
        assert_eq!("devkit".parse::<ApStyle>().unwrap(), ApStyle::Devkit);
        assert!("coco".parse::<ApStyle>().is_err());
    }
}
