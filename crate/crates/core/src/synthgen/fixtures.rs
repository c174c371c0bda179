//! Hand-built scenes used by the test suites and the demo.

use std::collections::BTreeMap;

use crate::error::Result;
use crate::model::{Dataset, Detection, DetectionSet, EgoState, Frame, ObjectState, Size, Vec2};

use super::{corrupt_where, gen_dataset, ConfidenceModel, EgoSpec, ErrorModel, ObjectSpec, ScenarioSpec, SplitMix64};

fn car(id: &str, center: Vec2, velocity: Option<Vec2>) -> ObjectState {
    ObjectState {
        id: id.into(),
        class_name: "car".into(),
        center,
        velocity,
        size: Size::CAR,
        yaw: velocity.filter(|v| !v.is_zero()).map_or(0.0, |v| v.y.atan2(v.x)),
    }
}

/// One frame with a stationary ego at the origin facing +y and:
/// `oncoming` at (6, 8) driving straight at ego with velocity (-3, -4),
/// `parked` at rest (zero relative velocity), and `boundary` exactly 30 m
/// away and driving off. One detection tracks `oncoming`; a second one is
/// spurious.
pub fn head_on() -> Result<(Dataset, DetectionSet)> {
    let frame = Frame {
        frame_id: "head-on-000".into(),
        timestamp: 0.0,
        ego: EgoState {
            center: Vec2::ZERO,
            velocity: Vec2::ZERO,
            yaw: None,
        },
        ground_truth: vec![
            car("oncoming", Vec2::new(6.0, 8.0), Some(Vec2::new(-3.0, -4.0))),
            car("parked", Vec2::new(-9.0, 12.0), Some(Vec2::ZERO)),
            car("boundary", Vec2::new(-30.0, 0.0), Some(Vec2::new(-4.0, 0.0))),
        ],
    };
    let detections = vec![
        Detection {
            frame_id: frame.frame_id.clone(),
            state: car("head-on-000/0", Vec2::new(6.3, 7.8), Some(Vec2::new(-2.8, -4.1))),
            confidence: 0.87,
        },
        Detection {
            frame_id: frame.frame_id.clone(),
            state: car("head-on-000/1", Vec2::new(-4.0, -15.0), Some(Vec2::new(0.0, 2.0))),
            confidence: 0.35,
        },
    ];
    let mut meta = BTreeMap::new();
    meta.insert("fixture".into(), serde_json::json!("head-on"));
    Ok((Dataset::new(vec![frame], meta)?, DetectionSet::new(detections)?))
}

pub const DIVERGENCE_SCENES: usize = 10;
pub const DIVERGENCE_FRAMES_PER_SCENE: usize = 4;

/// Ground truth plus two detectors that disagree on AP versus AP_crit.
///
/// Every scene has ego driving +y at 10 m/s with two oncoming cars ahead
/// (`near-*`), two cars pacing ego 15 m to the side (`side-*`) and four cars
/// at least 30 m behind falling back (`far-*`). Detector `A` drops `far-0`
/// everywhere and `far-1` in every fourth frame; detector `B` drops `near-0`
/// everywhere. `B` misses fewer objects, but the ones it misses are the
/// critical ones.
pub fn ranking_divergence() -> Result<(Dataset, BTreeMap<String, DetectionSet>)> {
    let mut rng = SplitMix64::new(0x5EED_D1F0);
    let mut frames = Vec::new();
    for scene in 0..DIVERGENCE_SCENES {
        let mut objects = Vec::new();
        for i in 0..2 {
            let lateral = rng.uniform(-1.5, 1.5) + if i == 0 { 0.0 } else { 3.5 };
            objects.push(ObjectSpec {
                id: Some(format!("near-{i}")),
                start: Vec2::new(lateral, rng.uniform(30.0, 40.0)),
                velocity: Some(Vec2::new(0.0, -rng.uniform(4.0, 6.0))),
                class_name: "car".into(),
                size: None,
            });
        }
        for (i, side) in [-15.0, 15.0].into_iter().enumerate() {
            objects.push(ObjectSpec {
                id: Some(format!("side-{i}")),
                start: Vec2::new(side, rng.uniform(-3.0, 3.0)),
                velocity: Some(Vec2::new(0.0, 10.0)),
                class_name: "car".into(),
                size: None,
            });
        }
        for i in 0..4 {
            objects.push(ObjectSpec {
                id: Some(format!("far-{i}")),
                start: Vec2::new(rng.uniform(-8.0, 8.0), -rng.uniform(30.0, 36.0)),
                velocity: Some(Vec2::new(0.0, rng.uniform(3.0, 6.0))),
                class_name: "car".into(),
                size: None,
            });
        }
        let spec = ScenarioSpec {
            name: format!("div{scene:02}"),
            n_frames: DIVERGENCE_FRAMES_PER_SCENE,
            frame_interval: super::KEYFRAME_INTERVAL,
            ego: EgoSpec {
                start: Vec2::ZERO,
                velocity: Vec2::new(0.0, 10.0),
            },
            objects,
            random_objects: None,
            seed: rng.next_u64(),
        };
        frames.extend(gen_dataset(&spec)?.frames);
    }
    let mut meta = BTreeMap::new();
    meta.insert("fixture".into(), serde_json::json!("ranking-divergence"));
    let dataset = Dataset::new(frames, meta)?;

    let model = ErrorModel {
        center_noise_sigma: 0.1,
        velocity_noise_sigma: 0.3,
        fp_rate_per_frame: 0.5,
        fp_radius: 45.0,
        tp_confidence: ConfidenceModel { mean: 0.8, sigma: 0.1 },
        fp_confidence: ConfidenceModel { mean: 0.3, sigma: 0.15 },
        ..Default::default()
    };
    let frame_index = |frame: &Frame| {
        frame
            .frame_id
            .rsplit('-')
            .next()
            .and_then(|k| k.parse::<usize>().ok())
            .unwrap_or(0)
    };
    let a = corrupt_where(&dataset, &model, 101, |frame, obj| {
        obj.id == "far-0" || (obj.id == "far-1" && frame_index(frame) == 0)
    })?;
    let b = corrupt_where(&dataset, &model, 202, |_, obj| obj.id == "near-0")?;
    let detectors = BTreeMap::from([("A".to_string(), a), ("B".to_string(), b)]);
    Ok((dataset, detectors))
}
