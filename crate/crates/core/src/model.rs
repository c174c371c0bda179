//! Domain types and ingestion of the ground-truth and detection JSON files.
//!
//! All positions live in one global `(x, y)` frame per scene. Any third
//! coordinate present in the input (altitude, box height) is read and
//! discarded.

use std::borrow::Cow;
use std::collections::{BTreeMap, HashSet};
use std::ops::{Add, Mul, Neg, Sub};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// Range used by the nuScenes detection challenge, in meters.
pub const DEFAULT_MAX_RANGE: f64 = 50.0;

/// Serialized as a `[x, y]` array.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    /// Euclidean length, computed without intermediate overflow/underflow.
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn is_zero(self) -> bool {
        self.x == 0.0 && self.y == 0.0
    }

    /// Counter-clockwise rotation by `angle` radians.
    pub fn rotated(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from([x, y]: [f64; 2]) -> Self {
        Vec2 { x, y }
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

/// Box footprint in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Size {
    pub width: f64,
    pub length: f64,
}

impl Size {
    pub const CAR: Size = Size {
        width: 1.9,
        length: 4.6,
    };
}

/// Kinematic snapshot of one object at a keyframe.
///
/// `velocity` is `None` when the value is unavailable; a vector with any
/// non-finite component is treated as unavailable as a whole.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectState {
    pub id: String,
    pub class_name: String,
    pub center: Vec2,
    pub velocity: Option<Vec2>,
    pub size: Size,
    /// Heading in radians, counter-clockwise from +x.
    pub yaw: f64,
}

/// Ego vehicle state. Always ground truth, so the velocity is never missing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoState {
    pub center: Vec2,
    pub velocity: Vec2,
    pub yaw: Option<f64>,
}

impl EgoState {
    /// Heading used to orient bird views: the explicit yaw, else the
    /// direction of travel, else +y.
    pub fn heading(&self) -> f64 {
        match self.yaw {
            Some(yaw) => yaw,
            None if !self.velocity.is_zero() => self.velocity.y.atan2(self.velocity.x),
            None => std::f64::consts::FRAC_PI_2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub frame_id: String,
    pub timestamp: f64,
    pub ego: EgoState,
    pub ground_truth: Vec<ObjectState>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub frame_id: String,
    pub state: ObjectState,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub frames: Vec<Frame>,
    pub meta: BTreeMap<String, Value>,
}

impl Dataset {
    /// Builds a dataset, checking frame and object invariants.
    pub fn new(frames: Vec<Frame>, meta: BTreeMap<String, Value>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (i, frame) in frames.iter().enumerate() {
            if !seen.insert(frame.frame_id.as_str()) {
                return Err(Error::invariant(format!(
                    "duplicate frame_id `{}` at frames[{i}]",
                    frame.frame_id
                )));
            }
            validate_frame(frame, &format!("frames[{i}]"))?;
        }
        Ok(Dataset { frames, meta })
    }

    pub fn frame(&self, frame_id: &str) -> Option<&Frame> {
        self.frames.iter().find(|f| f.frame_id == frame_id)
    }

    pub fn object_count(&self) -> usize {
        self.frames.iter().map(|f| f.ground_truth.len()).sum()
    }

    pub fn to_json(&self) -> String {
        let raw = RawGroundTruth {
            frames: self.frames.iter().map(RawFrame::from_frame).collect(),
            meta: self.meta.clone(),
        };
        serde_json::to_string_pretty(&raw).expect("ground truth serializes")
    }

    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let raw: RawGroundTruth = parse_json(text, origin)?;
        let frames = raw
            .frames
            .into_iter()
            .enumerate()
            .map(|(i, f)| f.into_frame(&format!("frames[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(frames, raw.meta)
    }
}

fn validate_frame(frame: &Frame, at: &str) -> Result<()> {
    if !frame.timestamp.is_finite() {
        return Err(Error::invariant(format!("{at}.timestamp is not finite")));
    }
    if !frame.ego.center.is_finite() || !frame.ego.velocity.is_finite() {
        return Err(Error::invariant(format!(
            "{at}.ego must have finite center and velocity"
        )));
    }
    let mut ids = HashSet::new();
    for (j, obj) in frame.ground_truth.iter().enumerate() {
        let at = format!("{at}.objects[{j}]");
        if !ids.insert(obj.id.as_str()) {
            return Err(Error::invariant(format!(
                "duplicate object id `{}` at {at}",
                obj.id
            )));
        }
        validate_object(obj, &at)?;
    }
    Ok(())
}

fn validate_object(obj: &ObjectState, at: &str) -> Result<()> {
    if !obj.center.is_finite() {
        return Err(Error::invariant(format!("{at}.center is not finite")));
    }
    let size_ok = |v: f64| v.is_finite() && v > 0.0;
    if !size_ok(obj.size.width) || !size_ok(obj.size.length) {
        return Err(Error::invariant(format!(
            "{at}.size must be positive, got [{}, {}]",
            obj.size.width, obj.size.length
        )));
    }
    if !obj.yaw.is_finite() {
        return Err(Error::invariant(format!("{at}.yaw is not finite")));
    }
    if obj.velocity.is_some_and(|v| !v.is_finite()) {
        return Err(Error::invariant(format!(
            "{at}.velocity must be finite or missing"
        )));
    }
    Ok(())
}

/// Detections grouped by frame id. Order within a frame follows the input.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DetectionSet {
    by_frame: BTreeMap<String, Vec<Detection>>,
    meta: BTreeMap<String, Value>,
}

impl DetectionSet {
    pub fn new(detections: impl IntoIterator<Item = Detection>) -> Result<Self> {
        let mut by_frame: BTreeMap<String, Vec<Detection>> = BTreeMap::new();
        for det in detections {
            by_frame.entry(det.frame_id.clone()).or_default().push(det);
        }
        for (frame_id, dets) in &by_frame {
            for (i, det) in dets.iter().enumerate() {
                let at = format!("results.{frame_id}[{i}]");
                if !(0.0..=1.0).contains(&det.confidence) {
                    return Err(Error::invariant(format!(
                        "{at}.confidence {} outside [0, 1]",
                        det.confidence
                    )));
                }
                validate_object(&det.state, &at)?;
            }
        }
        Ok(DetectionSet {
            by_frame,
            meta: BTreeMap::new(),
        })
    }

    pub fn for_frame(&self, frame_id: &str) -> &[Detection] {
        self.by_frame.get(frame_id).map_or(&[], Vec::as_slice)
    }

    pub fn frame_ids(&self) -> impl Iterator<Item = &str> {
        self.by_frame.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Detection> {
        self.by_frame.values().flatten()
    }

    pub fn len(&self) -> usize {
        self.by_frame.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_json(&self) -> String {
        let results = self
            .by_frame
            .iter()
            .map(|(k, dets)| (k.clone(), dets.iter().map(RawDetection::from_detection).collect()))
            .collect();
        let raw = RawResults {
            results,
            meta: self.meta.clone(),
        };
        serde_json::to_string_pretty(&raw).expect("detections serialize")
    }

    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let raw: RawResults = parse_json(text, origin)?;
        let mut all = Vec::new();
        for (frame_id, dets) in raw.results {
            for (i, det) in dets.into_iter().enumerate() {
                all.push(det.into_detection(&frame_id, i)?);
            }
        }
        let mut set = DetectionSet::new(all)?;
        set.meta = raw.meta;
        Ok(set)
    }
}

/// Counts reported after loading a ground-truth/detection pair.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IngestSummary {
    pub frames: usize,
    pub ground_truth_objects: usize,
    pub ground_truth_missing_velocity: usize,
    pub detections: usize,
    pub detections_missing_velocity: usize,
    /// Detection frame ids with no ground-truth frame. These are skipped.
    pub unknown_frames: Vec<String>,
}

impl IngestSummary {
    pub fn new(dataset: &Dataset, detections: &DetectionSet) -> Self {
        let known: HashSet<&str> = dataset.frames.iter().map(|f| f.frame_id.as_str()).collect();
        IngestSummary {
            frames: dataset.frames.len(),
            ground_truth_objects: dataset.object_count(),
            ground_truth_missing_velocity: dataset
                .frames
                .iter()
                .flat_map(|f| &f.ground_truth)
                .filter(|o| o.velocity.is_none())
                .count(),
            detections: detections.len(),
            detections_missing_velocity: detections
                .iter()
                .filter(|d| d.state.velocity.is_none())
                .count(),
            unknown_frames: detections
                .frame_ids()
                .filter(|id| !known.contains(id))
                .map(str::to_owned)
                .collect(),
        }
    }
}

pub fn load_ground_truth(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    Dataset::from_json(&read(path)?, path)
}

pub fn load_detections(path: impl AsRef<Path>) -> Result<DetectionSet> {
    let path = path.as_ref();
    DetectionSet::from_json(&read(path)?, path)
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// True when `point` lies within `max_range` meters of `ego` (inclusive).
pub fn in_range(ego: &EgoState, point: Vec2, max_range: f64) -> bool {
    ego.center.distance(point) <= max_range
}

/// Drops ground truth and detections farther than `max_range` from ego.
pub fn filter_eval_range(
    frame: &Frame,
    detections: &[Detection],
    max_range: f64,
) -> (Frame, Vec<Detection>) {
    debug_assert!(max_range > 0.0);
    let ego = frame.ego;
    let kept = Frame {
        ground_truth: frame
            .ground_truth
            .iter()
            .filter(|o| in_range(&ego, o.center, max_range))
            .cloned()
            .collect(),
        ..frame.clone()
    };
    let dets = detections
        .iter()
        .filter(|d| in_range(&ego, d.state.center, max_range))
        .cloned()
        .collect();
    (kept, dets)
}

pub fn select_class(frame: &Frame, detections: &[Detection], class_name: &str) -> (Frame, Vec<Detection>) {
    debug_assert!(!class_name.is_empty());
    let kept = Frame {
        ground_truth: frame
            .ground_truth
            .iter()
            .filter(|o| o.class_name == class_name)
            .cloned()
            .collect(),
        ..frame.clone()
    };
    let dets = detections
        .iter()
        .filter(|d| d.state.class_name == class_name)
        .cloned()
        .collect();
    (kept, dets)
}

// ---------------------------------------------------------------------------
// JSON schema

fn parse_json<T: serde::de::DeserializeOwned>(text: &str, origin: &Path) -> Result<T> {
    let text = sanitize_non_finite(text);
    let mut de = serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(&mut de).map_err(|err| Error::Parse {
        path: origin.to_path_buf(),
        field: err.path().to_string(),
        message: err.inner().to_string(),
    })
}

/// Replaces the bare `NaN`, `Infinity` and `-Infinity` tokens emitted by
/// Python's `json` module with `null`. String contents are left alone.
fn sanitize_non_finite(text: &str) -> Cow<'_, str> {
    if !text.contains("NaN") && !text.contains("Infinity") {
        return Cow::Borrowed(text);
    }
    let bytes = text.as_bytes();
    let mut out = String::with_capacity(text.len());
    let mut in_string = false;
    let mut escaped = false;
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
            }
        } else if b == b'"' {
            in_string = true;
        } else {
            let rest = &text[i..];
            let token = ["-Infinity", "Infinity", "-NaN", "NaN"]
                .into_iter()
                .find(|t| rest.starts_with(t));
            if let Some(token) = token {
                out.push_str("null");
                i += token.len();
                continue;
            }
        }
        // Copy whole UTF-8 sequences so multi-byte characters survive.
        let len = utf8_len(b);
        out.push_str(&text[i..i + len]);
        i += len;
    }
    Cow::Owned(out)
}

fn utf8_len(first: u8) -> usize {
    match first {
        0x00..=0x7f => 1,
        0xc0..=0xdf => 2,
        0xe0..=0xef => 3,
        _ => 4,
    }
}

#[derive(Serialize, Deserialize)]
struct RawGroundTruth {
    frames: Vec<RawFrame>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    meta: BTreeMap<String, Value>,
}

#[derive(Serialize, Deserialize)]
struct RawFrame {
    frame_id: String,
    timestamp: f64,
    ego: RawEgo,
    #[serde(default)]
    objects: Vec<RawObject>,
}

#[derive(Serialize, Deserialize)]
struct RawEgo {
    #[serde(alias = "translation")]
    center: Vec<f64>,
    velocity: Option<Vec<Option<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    yaw: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawObject {
    id: String,
    #[serde(rename = "class", alias = "detection_name", alias = "category_name")]
    class_name: String,
    #[serde(alias = "translation")]
    center: Vec<f64>,
    velocity: Option<Vec<Option<f64>>>,
    size: Vec<f64>,
    yaw: f64,
}

#[derive(Serialize, Deserialize)]
struct RawResults {
    results: BTreeMap<String, Vec<RawDetection>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    meta: BTreeMap<String, Value>,
}

#[derive(Serialize, Deserialize)]
struct RawDetection {
    #[serde(rename = "class", alias = "detection_name")]
    class_name: String,
    #[serde(alias = "translation")]
    center: Vec<f64>,
    velocity: Option<Vec<Option<f64>>>,
    size: Vec<f64>,
    yaw: f64,
    #[serde(alias = "detection_score")]
    confidence: f64,
}

fn xy(values: &[f64], at: &str) -> Result<Vec2> {
    match values {
        [x, y, ..] => Ok(Vec2::new(*x, *y)),
        _ => Err(Error::invariant(format!(
            "{at} needs at least 2 components, got {}",
            values.len()
        ))),
    }
}

fn size(values: &[f64], at: &str) -> Result<Size> {
    xy(values, at).map(|v| Size {
        width: v.x,
        length: v.y,
    })
}

/// `null`, a null component or a non-finite component all mean "missing".
fn velocity(values: &Option<Vec<Option<f64>>>, at: &str) -> Result<Option<Vec2>> {
    let Some(values) = values else {
        return Ok(None);
    };
    match values.as_slice() {
        [Some(x), Some(y), ..] => Ok(Some(Vec2::new(*x, *y)).filter(|v| v.is_finite())),
        [_, _, ..] => Ok(None),
        _ => Err(Error::invariant(format!(
            "{at} needs at least 2 components, got {}",
            values.len()
        ))),
    }
}

fn raw_velocity(v: Option<Vec2>) -> Option<Vec<Option<f64>>> {
    v.map(|v| vec![Some(v.x), Some(v.y)])
}

impl RawFrame {
    fn from_frame(frame: &Frame) -> Self {
        RawFrame {
            frame_id: frame.frame_id.clone(),
            timestamp: frame.timestamp,
            ego: RawEgo {
                center: vec![frame.ego.center.x, frame.ego.center.y],
                velocity: raw_velocity(Some(frame.ego.velocity)),
                yaw: frame.ego.yaw,
            },
            objects: frame
                .ground_truth
                .iter()
                .map(|o| RawObject {
                    id: o.id.clone(),
                    class_name: o.class_name.clone(),
                    center: vec![o.center.x, o.center.y],
                    velocity: raw_velocity(o.velocity),
                    size: vec![o.size.width, o.size.length],
                    yaw: o.yaw,
                })
                .collect(),
        }
    }

    fn into_frame(self, at: &str) -> Result<Frame> {
        let ego_velocity = velocity(&self.ego.velocity, &format!("{at}.ego.velocity"))?
            .ok_or_else(|| Error::invariant(format!("{at}.ego.velocity is required")))?;
        let ego = EgoState {
            center: xy(&self.ego.center, &format!("{at}.ego.center"))?,
            velocity: ego_velocity,
            yaw: self.ego.yaw,
        };
        let ground_truth = self
            .objects
            .into_iter()
            .enumerate()
            .map(|(j, o)| {
                let at = format!("{at}.objects[{j}]");
                Ok(ObjectState {
                    center: xy(&o.center, &format!("{at}.center"))?,
                    velocity: velocity(&o.velocity, &format!("{at}.velocity"))?,
                    size: size(&o.size, &format!("{at}.size"))?,
                    id: o.id,
                    class_name: o.class_name,
                    yaw: o.yaw,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Frame {
            frame_id: self.frame_id,
            timestamp: self.timestamp,
            ego,
            ground_truth,
        })
    }
}

impl RawDetection {
    fn from_detection(det: &Detection) -> Self {
        let o = &det.state;
        RawDetection {
            class_name: o.class_name.clone(),
            center: vec![o.center.x, o.center.y],
            velocity: raw_velocity(o.velocity),
            size: vec![o.size.width, o.size.length],
            yaw: o.yaw,
            confidence: det.confidence,
        }
    }

    fn into_detection(self, frame_id: &str, index: usize) -> Result<Detection> {
        let at = format!("results.{frame_id}[{index}]");
        Ok(Detection {
            frame_id: frame_id.to_owned(),
            state: ObjectState {
                id: format!("{frame_id}/{index}"),
                class_name: self.class_name,
                center: xy(&self.center, &format!("{at}.center"))?,
                velocity: velocity(&self.velocity, &format!("{at}.velocity"))?,
                size: size(&self.size, &format!("{at}.size"))?,
                yaw: self.yaw,
            },
            confidence: self.confidence,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"frames": [{"frame_id": "f0", "timestamp": 0.0,
        "ego": {"center": [0, 0], "velocity": [0, 5]},
        "objects": [{"id": "a", "class": "car", "center": [3, 4], "velocity": [1, 0],
                     "size": [1.9, 4.6], "yaw": 0.5}]}]}"#;

    fn gt(text: &str) -> Result<Dataset> {
        Dataset::from_json(text, Path::new("gt.json"))
    }

    fn dets(text: &str) -> Result<DetectionSet> {
        DetectionSet::from_json(text, Path::new("det.json"))
    }

    fn car(id: &str, x: f64, y: f64) -> ObjectState {
        ObjectState {
            id: id.into(),
            class_name: "car".into(),
            center: Vec2::new(x, y),
            velocity: Some(Vec2::ZERO),
            size: Size::CAR,
            yaw: 0.0,
        }
    }

    fn detection(x: f64, y: f64) -> Detection {
        Detection {
            frame_id: "f".into(),
            state: car("d", x, y),
            confidence: 0.5,
        }
    }

    fn frame(objects: Vec<ObjectState>) -> Frame {
        Frame {
            frame_id: "f".into(),
            timestamp: 0.0,
            ego: EgoState {
                center: Vec2::ZERO,
                velocity: Vec2::ZERO,
                yaw: None,
            },
            ground_truth: objects,
        }
    }

    #[test]
    fn minimal_ground_truth() {
        let ds = gt(MINIMAL).unwrap();
        assert_eq!(ds.frames.len(), 1);
        let obj = &ds.frames[0].ground_truth[0];
        assert_eq!(obj.center, Vec2::new(3.0, 4.0));
        assert_eq!(obj.velocity, Some(Vec2::new(1.0, 0.0)));
        assert_eq!(ds.frames[0].ego.velocity, Vec2::new(0.0, 5.0));
    }

    #[test]
    fn nan_velocity_is_missing() {
        let text = MINIMAL.replace(r#""velocity": [1, 0]"#, r#""velocity": [NaN, NaN]"#);
        let ds = gt(&text).unwrap();
        assert_eq!(ds.frames[0].ground_truth[0].velocity, None);

        let text = MINIMAL.replace(r#""velocity": [1, 0]"#, r#""velocity": null"#);
        assert_eq!(gt(&text).unwrap().frames[0].ground_truth[0].velocity, None);
    }

    #[test]
    fn nan_inside_strings_is_untouched() {
        let text = MINIMAL.replace(r#""id": "a""#, r#""id": "NaN-Infinity""#);
        assert_eq!(gt(&text).unwrap().frames[0].ground_truth[0].id, "NaN-Infinity");
    }

    #[test]
    fn duplicate_frame_id_is_named() {
        let text = r#"{"frames": [
            {"frame_id": "dup", "timestamp": 0, "ego": {"center": [0,0], "velocity": [0,0]}},
            {"frame_id": "dup", "timestamp": 1, "ego": {"center": [0,0], "velocity": [0,0]}}]}"#;
        let err = gt(text).unwrap_err().to_string();
        assert!(err.contains("duplicate frame_id `dup`"), "{err}");
    }

    #[test]
    fn missing_field_reports_path() {
        let text = MINIMAL.replace(r#""yaw": 0.5"#, r#""yew": 0.5"#);
        match gt(&text).unwrap_err() {
            Error::Parse { field, message, .. } => {
                assert_eq!(field, "frames[0].objects[0]");
                assert!(message.contains("yaw"), "{message}");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn nan_center_is_a_parse_error() {
        let text = MINIMAL.replace(r#""center": [3, 4]"#, r#""center": [NaN, 4]"#);
        match gt(&text).unwrap_err() {
            Error::Parse { field, .. } => assert_eq!(field, "frames[0].objects[0].center[0]"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn invariant_violations() {
        let text = MINIMAL.replace("[1.9, 4.6]", "[0, 4.6]");
        assert!(matches!(gt(&text), Err(Error::Invariant(_))));

        let text = MINIMAL.replace(r#""velocity": [0, 5]"#, r#""velocity": null"#);
        assert!(gt(&text).unwrap_err().to_string().contains("ego.velocity"));
    }

    #[test]
    fn z_components_are_ignored() {
        let text = MINIMAL
            .replace("[3, 4]", "[3, 4, 1.7]")
            .replace("[1.9, 4.6]", "[1.9, 4.6, 1.5]");
        let ds = gt(&text).unwrap();
        assert_eq!(ds, gt(MINIMAL).unwrap());
    }

    #[test]
    fn detections_basic() {
        assert!(dets(r#"{"results": {}}"#).unwrap().is_empty());

        let set = dets(
            r#"{"results": {"f0": [{"class": "car", "center": [5, 5], "velocity": [0, 0],
                "size": [2, 4], "yaw": 0, "confidence": 0.73}]}}"#,
        )
        .unwrap();
        assert_eq!(set.len(), 1);
        let d = &set.for_frame("f0")[0];
        assert_eq!(d.confidence, 0.73);
        assert_eq!(d.state.center, Vec2::new(5.0, 5.0));
        assert!(set.for_frame("other").is_empty());
    }

    #[test]
    fn detection_confidence_bounds() {
        let err = dets(
            r#"{"results": {"f0": [{"class": "car", "center": [5, 5], "velocity": null,
                "size": [2, 4], "yaw": 0, "confidence": 1.2}]}}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("confidence 1.2"), "{err}");
    }

    #[test]
    fn nuscenes_field_names() {
        let set = dets(
            r#"{"results": {"s": [{"detection_name": "car", "translation": [1, 2, 0.5],
                "velocity": [0.1, 0.2], "size": [2, 4, 1.5], "yaw": 0, "detection_score": 0.4}]},
                "meta": {"use_lidar": true}}"#,
        )
        .unwrap();
        assert_eq!(set.for_frame("s")[0].state.center, Vec2::new(1.0, 2.0));
    }

    #[test]
    fn unknown_frames_are_summarised() {
        let ds = gt(MINIMAL).unwrap();
        let set = dets(
            r#"{"results": {"f0": [], "ghost": [{"class": "car", "center": [5, 5],
                "velocity": null, "size": [2, 4], "yaw": 0, "confidence": 0.1}]}}"#,
        )
        .unwrap();
        let summary = IngestSummary::new(&ds, &set);
        assert_eq!(summary.unknown_frames, vec!["ghost".to_string()]);
        assert_eq!(summary.detections_missing_velocity, 1);
    }

    #[test]
    fn range_boundaries() {
        let f = frame(vec![car("in", 49.9, 0.0), car("out", 0.0, 50.1)]);
        let d = [detection(30.0, 40.0), detection(0.0, -50.1)];
        let (kept, kept_dets) = filter_eval_range(&f, &d, 50.0);
        let ids: Vec<_> = kept.ground_truth.iter().map(|o| o.id.as_str()).collect();
        assert_eq!(ids, ["in"]);
        // (30, 40) is exactly 50 m away.
        assert_eq!(kept_dets.len(), 1);
        assert_eq!(kept_dets[0].state.center, Vec2::new(30.0, 40.0));
    }

    #[test]
    fn class_selection() {
        let mut ped = car("p", 1.0, 1.0);
        ped.class_name = "pedestrian".into();
        let f = frame(vec![car("c", 0.0, 1.0), ped]);
        let (cars, _) = select_class(&f, &[], "car");
        assert_eq!(cars.ground_truth.len(), 1);
        let (bikes, dets) = select_class(&f, &[detection(0.0, 0.0)], "bicycle");
        assert!(bikes.ground_truth.is_empty() && dets.is_empty());

        let all_cars = frame(vec![car("a", 0.0, 1.0), car("b", 2.0, 1.0)]);
        assert_eq!(select_class(&all_cars, &[], "car").0, all_cars);
    }

    #[test]
    fn range_filter_idempotent_and_commutes_with_class() {
        let mut ped = car("p", 10.0, 45.0);
        ped.class_name = "pedestrian".into();
        let f = frame(vec![car("a", 0.0, 60.0), car("b", 3.0, 3.0), ped]);
        let d = [detection(0.0, 70.0), detection(1.0, 1.0)];
        let once = filter_eval_range(&f, &d, 50.0);
        assert_eq!(filter_eval_range(&once.0, &once.1, 50.0), once);
        let a = select_class(&once.0, &once.1, "car");
        let c = select_class(&f, &d, "car");
        assert_eq!(filter_eval_range(&c.0, &c.1, 50.0), a);
    }

    #[test]
    fn ego_heading_fallbacks() {
        let mut ego = EgoState {
            center: Vec2::ZERO,
            velocity: Vec2::new(0.0, -3.0),
            yaw: None,
        };
        assert_eq!(ego.heading(), -std::f64::consts::FRAC_PI_2);
        ego.velocity = Vec2::ZERO;
        assert_eq!(ego.heading(), std::f64::consts::FRAC_PI_2);
        ego.yaw = Some(1.0);
        assert_eq!(ego.heading(), 1.0);
    }
}
