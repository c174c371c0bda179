//! Browser bindings for the demo page in `www/`.
//!
//! Every export returns a string (JSON or SVG) so the page needs no glue
//! beyond what `wasm-bindgen` generates.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use criteval::birdview::{birdview_data, render_svg, WeightKind};
use criteval::criticality::{assess, CornerCase, CriticalityConfig, CriticalityWeights};
use criteval::metrics::{summarize, ApStyle, CurvePoint, EvalSet, MatchedSet};
use criteval::model::{EgoState, Vec2, DEFAULT_MAX_RANGE};
use criteval::synthgen::fixtures;

#[derive(Serialize)]
struct Explained {
    case: CornerCase,
    weights: CriticalityWeights,
    ego_to_object: f64,
    ego_to_closest: Option<f64>,
    time_to_closest: Option<f64>,
    closest_point: Option<Vec2>,
    relative_velocity: Option<Vec2>,
}

#[derive(Serialize)]
struct DetectorCurves {
    name: String,
    ap: f64,
    ap_crit: f64,
    curve: Vec<CurvePoint>,
}

fn config(d_max: f64, r_max: f64, t_max: f64) -> Result<CriticalityConfig, String> {
    CriticalityConfig::new(d_max, r_max, t_max).map_err(|e| e.to_string())
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

/// Scores one object against ego at the origin driving with
/// `(ego_vx, ego_vy)`. A non-finite object velocity component marks the
/// velocity as unavailable.
#[allow(clippy::too_many_arguments)]
pub fn explain(
    ego_vx: f64,
    ego_vy: f64,
    x: f64,
    y: f64,
    vx: f64,
    vy: f64,
    d_max: f64,
    r_max: f64,
    t_max: f64,
) -> Result<String, String> {
    let cfg = config(d_max, r_max, t_max)?;
    let ego = EgoState {
        center: Vec2::ZERO,
        velocity: Vec2::new(ego_vx, ego_vy),
        yaw: None,
    };
    let velocity = Some(Vec2::new(vx, vy)).filter(|v| v.is_finite());
    let a = assess(&ego, Vec2::new(x, y), velocity);
    to_json(&Explained {
        case: a.inputs.case,
        weights: a.inputs.weights(&cfg),
        ego_to_object: a.inputs.ego_to_object,
        ego_to_closest: a.inputs.ego_to_closest,
        time_to_closest: a.inputs.time_to_closest,
        closest_point: a.geometry.approach.map(|ap| ap.closest_point),
        relative_velocity: a.relative_velocity,
    })
}

/// Bird's-eye SVG of the head-on scene with the chosen overlay.
pub fn head_on_svg(d_max: f64, r_max: f64, t_max: f64, weight: &str) -> Result<String, String> {
    let cfg = config(d_max, r_max, t_max)?;
    let weight: WeightKind = weight.parse().map_err(|e: criteval::Error| e.to_string())?;
    let (dataset, detections) = fixtures::head_on().map_err(|e| e.to_string())?;
    let frame = &dataset.frames[0];
    let data = birdview_data(
        frame,
        detections.for_frame(&frame.frame_id),
        &cfg,
        weight,
        Some("car"),
        DEFAULT_MAX_RANGE,
    );
    Ok(render_svg(&data))
}

/// Curves and AP/AP_crit of the two detectors of the ranking-divergence
/// scene at one configuration and distance limit.
pub fn divergence_curves(d_max: f64, r_max: f64, t_max: f64, distance_limit: f64) -> Result<String, String> {
    let cfg = config(d_max, r_max, t_max)?;
    if !(distance_limit.is_finite() && distance_limit > 0.0) {
        return Err(format!("distance limit must be positive, got {distance_limit}"));
    }
    let (dataset, detectors) = fixtures::ranking_divergence().map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    for (name, dets) in &detectors {
        let set = EvalSet::new(&dataset, dets, "car", DEFAULT_MAX_RANGE);
        let curve = MatchedSet::new(&set, distance_limit).curve_for(&set, &cfg);
        out.push(DetectorCurves {
            name: name.clone(),
            ap: summarize(&curve, false, ApStyle::Anchored).map_err(|e| e.to_string())?,
            ap_crit: summarize(&curve, true, ApStyle::Anchored).map_err(|e| e.to_string())?,
            curve,
        });
    }
    to_json(&out)
}

#[wasm_bindgen(js_name = explainObject)]
#[allow(clippy::too_many_arguments)]
pub fn explain_object(
    ego_vx: f64,
    ego_vy: f64,
    x: f64,
    y: f64,
    vx: f64,
    vy: f64,
    d_max: f64,
    r_max: f64,
    t_max: f64,
) -> Result<String, JsValue> {
    explain(ego_vx, ego_vy, x, y, vx, vy, d_max, r_max, t_max).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = headOnBirdview)]
pub fn head_on_birdview(d_max: f64, r_max: f64, t_max: f64, weight: &str) -> Result<String, JsValue> {
    head_on_svg(d_max, r_max, t_max, weight).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = divergenceCurves)]
pub fn divergence_curves_js(d_max: f64, r_max: f64, t_max: f64, distance_limit: f64) -> Result<String, JsValue> {
    divergence_curves(d_max, r_max, t_max, distance_limit).map_err(|e| JsValue::from_str(&e))
}
