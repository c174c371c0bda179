//! Annotated bird's-eye views of a single frame.
//!
//! [`birdview_data`] collects what is drawn; [`render_svg`] turns it into a
//! deterministic SVG in ego coordinates (ego at the origin, heading up).

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::criticality::{assess, CornerCase, CriticalityConfig, CriticalityWeights};
use crate::error::{Error, Result};
use crate::model::{filter_eval_range, select_class, Detection, EgoState, Frame, Size, Vec2};

const HALF_EXTENT_M: f64 = 60.0;
const PX_PER_M: f64 = 5.0;
const MARGIN_PX: f64 = 40.0;
const GRID_STEP_M: f64 = 10.0;
const GT_COLOR: &str = "#2e9e44";
const PRED_COLOR: &str = "#2f6fd6";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    Kappa,
    KappaD,
    KappaR,
    KappaT,
}

impl WeightKind {
    pub fn select(self, w: &CriticalityWeights) -> f64 {
        match self {
            WeightKind::Kappa => w.kappa,
            WeightKind::KappaD => w.kappa_d,
            WeightKind::KappaR => w.kappa_r,
            WeightKind::KappaT => w.kappa_t,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            WeightKind::Kappa => "kappa",
            WeightKind::KappaD => "kappa_d",
            WeightKind::KappaR => "kappa_r",
            WeightKind::KappaT => "kappa_t",
        }
    }
}

impl FromStr for WeightKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kappa" => Ok(WeightKind::Kappa),
            "kappa_d" => Ok(WeightKind::KappaD),
            "kappa_r" => Ok(WeightKind::KappaR),
            "kappa_t" => Ok(WeightKind::KappaT),
            other => Err(Error::config(format!(
                "unknown weight '{other}' (expected kappa, kappa_d, kappa_r or kappa_t)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoxKind {
    GroundTruth,
    Prediction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirdviewBox {
    pub kind: BoxKind,
    pub id: String,
    /// World coordinates.
    pub center: Vec2,
    pub size: Size,
    pub yaw: f64,
    pub confidence: Option<f64>,
    pub case: CornerCase,
    pub weights: CriticalityWeights,
    /// The selected weight rounded to two decimals, as printed in the SVG.
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirdviewData {
    pub frame_id: String,
    pub ego: EgoState,
    pub config: CriticalityConfig,
    pub weight: WeightKind,
    pub boxes: Vec<BirdviewBox>,
}

impl BirdviewData {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bird-view data serializes")
    }
}

/// Scores every in-range ground-truth object and detection of `class_name`
/// (all classes when `None`) in `frame`.
pub fn birdview_data(
    frame: &Frame,
    detections: &[Detection],
    config: &CriticalityConfig,
    weight: WeightKind,
    class_name: Option<&str>,
    max_range: f64,
) -> BirdviewData {
    let (frame, dets) = filter_eval_range(frame, detections, max_range);
    let (frame, dets) = match class_name {
        Some(c) => select_class(&frame, &dets, c),
        None => (frame, dets),
    };
    let make = |kind, state: &crate::model::ObjectState, confidence| {
        let inputs = assess(&frame.ego, state.center, state.velocity).inputs;
        let weights = inputs.weights(config);
        BirdviewBox {
            kind,
            id: state.id.clone(),
            center: state.center,
            size: state.size,
            yaw: state.yaw,
            confidence,
            case: inputs.case,
            weights,
            label: format!("{:.2}", weight.select(&weights)),
        }
    };
    let mut boxes: Vec<BirdviewBox> = frame
        .ground_truth
        .iter()
        .map(|o| make(BoxKind::GroundTruth, o, None))
        .collect();
    boxes.extend(dets.iter().map(|d| make(BoxKind::Prediction, &d.state, Some(d.confidence))));
    BirdviewData {
        frame_id: frame.frame_id.clone(),
        ego: frame.ego,
        config: *config,
        weight,
        boxes,
    }
}

struct View {
    origin: Vec2,
    rotation: f64,
}

impl View {
    fn new(ego: &EgoState) -> Self {
        View {
            origin: ego.center,
            rotation: FRAC_PI_2 - ego.heading(),
        }
    }

    /// World point to ego-frame meters.
    fn local(&self, p: Vec2) -> Vec2 {
        (p - self.origin).rotated(self.rotation)
    }

    fn px(local: Vec2) -> (f64, f64) {
        let c = MARGIN_PX + HALF_EXTENT_M * PX_PER_M;
        (c + local.x * PX_PER_M, c - local.y * PX_PER_M)
    }
}

fn corners(center: Vec2, size: Size, yaw: f64) -> [Vec2; 4] {
    let fwd = Vec2::new(yaw.cos(), yaw.sin());
    let left = Vec2::new(-fwd.y, fwd.x);
    let (hl, hw) = (size.length / 2.0, size.width / 2.0);
    [
        center + fwd * hl + left * hw,
        center + fwd * hl - left * hw,
        center - fwd * hl - left * hw,
        center - fwd * hl + left * hw,
    ]
}

fn fmt2(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

pub fn render_svg(data: &BirdviewData) -> String {
    let view = View::new(&data.ego);
    let side = 2.0 * (MARGIN_PX + HALF_EXTENT_M * PX_PER_M);
    let lo = MARGIN_PX;
    let hi = side - MARGIN_PX;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{side}" height="{side}" viewBox="0 0 {side} {side}" font-family="sans-serif" font-size="10">"#
    );
    let _ = writeln!(out, "<title>{} ({})</title>", escape(&data.frame_id), data.weight.as_str());
    let _ = writeln!(
        out,
        r#"<defs><clipPath id="plot"><rect x="{lo}" y="{lo}" width="{w}" height="{w}"/></clipPath></defs>"#,
        w = hi - lo
    );
    let _ = writeln!(out, r##"<rect width="{side}" height="{side}" fill="#ffffff"/>"##);

    out.push_str("<g id=\"grid\" stroke=\"#dddddd\" stroke-width=\"1\">\n");
    let steps = (HALF_EXTENT_M / GRID_STEP_M) as i64;
    for k in -steps..=steps {
        let m = k as f64 * GRID_STEP_M;
        let (x, y) = View::px(Vec2::new(m, m));
        let _ = writeln!(out, r#"<line x1="{}" y1="{lo}" x2="{}" y2="{hi}"/>"#, fmt2(x), fmt2(x));
        let _ = writeln!(out, r#"<line x1="{lo}" y1="{}" x2="{hi}" y2="{}"/>"#, fmt2(y), fmt2(y));
    }
    out.push_str("</g>\n<g id=\"axes\" fill=\"#555555\">\n");
    for k in -steps..=steps {
        let m = k as f64 * GRID_STEP_M;
        let (x, y) = View::px(Vec2::new(m, m));
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            fmt2(x),
            fmt2(hi + 14.0),
            m
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            fmt2(lo - 4.0),
            fmt2(y + 3.0),
            m
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">x [m]</text>"#,
        fmt2(side / 2.0),
        fmt2(side - 6.0)
    );
    let _ = writeln!(
        out,
        r#"<text x="12" y="{}" text-anchor="middle" transform="rotate(-90 12 {})">y [m]</text>"#,
        fmt2(side / 2.0),
        fmt2(side / 2.0)
    );
    out.push_str("</g>\n<g id=\"scene\" clip-path=\"url(#plot)\">\n");

    let ego_box = corners(Vec2::ZERO, Size::CAR, FRAC_PI_2);
    push_box(&mut out, "ego", &ego_box, "#000000", "#cccccc");

    for b in &data.boxes {
        let color = match b.kind {
            BoxKind::GroundTruth => GT_COLOR,
            BoxKind::Prediction => PRED_COLOR,
        };
        let center = view.local(b.center);
        let pts = corners(center, b.size, b.yaw + view.rotation);
        let class = match b.kind {
            BoxKind::GroundTruth => "gt",
            BoxKind::Prediction => "pred",
        };
        push_box(&mut out, class, &pts, color, "none");
        let (lx, ly) = View::px(center);
        let _ = writeln!(
            out,
            r#"<text class="label {class}" data-id="{}" x="{}" y="{}" fill="{color}" text-anchor="middle">{}</text>"#,
            escape(&b.id),
            fmt2(lx),
            fmt2(ly - b.size.length.max(b.size.width) / 2.0 * PX_PER_M - 3.0),
            b.label
        );
    }
    out.push_str("</g>\n</svg>\n");
    out
}

fn push_box(out: &mut String, class: &str, pts: &[Vec2; 4], stroke: &str, fill: &str) {
    let coords: Vec<String> = pts
        .iter()
        .map(|p| {
            let (x, y) = View::px(*p);
            format!("{},{}", fmt2(x), fmt2(y))
        })
        .collect();
    let _ = writeln!(
        out,
        r#"<polygon class="{class}" points="{}" stroke="{stroke}" stroke-width="1.5" fill="{fill}"/>"#,
        coords.join(" ")
    );
    // Front edge runs between the first two corners.
    let (x1, y1) = View::px(pts[0]);
    let (x2, y2) = View::px(pts[1]);
    let _ = writeln!(
        out,
        r#"<line class="{class} front" x1="{}" y1="{}" x2="{}" y2="{}" stroke="{stroke}" stroke-width="3.5"/>"#,
        fmt2(x1),
        fmt2(y1),
        fmt2(x2),
        fmt2(y2)
    );
}

/// Labels printed in an SVG, in document order.
pub fn svg_labels(svg: &str) -> Vec<String> {
    svg.lines()
        .filter(|l| l.starts_with("<text class=\"label"))
        .filter_map(|l| {
            let end = l.rfind("</text>")?;
            let start = l[..end].rfind('>')? + 1;
            Some(l[start..end].to_string())
        })
        .collect()
}
