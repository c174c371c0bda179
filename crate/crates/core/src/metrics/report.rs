use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::criticality::CriticalityConfig;
use crate::error::Result;
use crate::model::{Dataset, DetectionSet, IngestSummary};

use super::{resample_curve, summarize, ApStyle, CurvePoint, EvalSet, MatchedSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationEntry {
    pub class_name: String,
    pub distance_limit: f64,
    pub config: CriticalityConfig,
    pub ap: f64,
    pub ap_crit: f64,
    /// Operating points resampled on a 0.01 recall grid.
    pub curve: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub ap_style: ApStyle,
    pub max_range: f64,
    pub ingest: IngestSummary,
    pub entries: Vec<EvaluationEntry>,
}

impl EvaluationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Plain-text table, one row per (class, distance limit).
    pub fn summary_table(&self) -> String {
        let mut out = format!("{:<12} {:>6} {:>8} {:>8}\n", "class", "l", "AP", "AP_crit");
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{:<12} {:>6} {:>8.4} {:>8.4}",
                e.class_name, e.distance_limit, e.ap, e.ap_crit
            );
        }
        out
    }
}

/// AP and AP_crit for every (class, distance limit) at one configuration.
pub fn evaluate(
    dataset: &Dataset,
    detections: &DetectionSet,
    classes: &[String],
    distance_limits: &[f64],
    config: &CriticalityConfig,
    ap_style: ApStyle,
    max_range: f64,
) -> Result<EvaluationReport> {
    let mut entries = Vec::new();
    for class_name in classes {
        let set = EvalSet::new(dataset, detections, class_name, max_range);
        let gt_w = set.gt_weights(config);
        let det_w = set.det_weights(config);
        for &l in distance_limits {
            let curve = MatchedSet::new(&set, l).curve(&gt_w, &det_w);
            entries.push(EvaluationEntry {
                class_name: class_name.clone(),
                distance_limit: l,
                config: *config,
                ap: summarize(&curve, false, ap_style)?,
                ap_crit: summarize(&curve, true, ap_style)?,
                curve: resample_curve(&curve),
            });
        }
    }
    Ok(EvaluationReport {
        ap_style,
        max_range,
        ingest: IngestSummary::new(dataset, detections),
        entries,
    })
}

/// `threshold,P,R,P_R,R_S` rows with six decimals.
pub fn curve_csv(curve: &[CurvePoint]) -> String {
    let mut out = String::from("threshold,P,R,P_R,R_S\n");
    for p in curve {
        let _ = writeln!(
            out,
            "{:.6},{:.6},{:.6},{:.6},{:.6}",
            p.threshold, p.precision, p.recall, p.p_r, p.r_s
        );
    }
    out
}
