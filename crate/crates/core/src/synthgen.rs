//! Seeded synthetic scenes, detector error models and a brute-force
//! closest-approach oracle.
//!
//! The random stream is SplitMix64 so that a seed reproduces the same scene
//! in any implementation:
//!
//! ```text
//! state += 0x9E3779B97F4A7C15
//! z = state
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! return z ^ (z >> 31)
//! ```
//!
//! Uniform reals take the top 53 bits; normals use the cosine branch of
//! Box-Muller on two consecutive uniforms.

use std::collections::BTreeMap;

pub mod fixtures;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, Detection, DetectionSet, EgoState, Frame, ObjectState, Size, Vec2};

/// Keyframe spacing of nuScenes, seconds.
pub const KEYFRAME_INTERVAL: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Knuth's multiplication method; fine for the small means used here.
    pub fn poisson(&mut self, mean: f64) -> usize {
        if mean <= 0.0 {
            return 0;
        }
        let limit = (-mean).exp();
        let mut k = 0;
        let mut p = self.next_f64();
        while p > limit {
            k += 1;
            p *= self.next_f64();
        }
        k
    }

    /// Uniform point in a disk.
    pub fn in_disk(&mut self, center: Vec2, radius: f64) -> Vec2 {
        let r = radius * self.next_f64().sqrt();
        let a = self.uniform(0.0, std::f64::consts::TAU);
        center + Vec2::new(r * a.cos(), r * a.sin())
    }

    pub fn heading_vector(&mut self, max_speed: f64) -> Vec2 {
        let speed = self.uniform(0.0, max_speed);
        let a = self.uniform(0.0, std::f64::consts::TAU);
        Vec2::new(speed * a.cos(), speed * a.sin())
    }
}

fn default_name() -> String {
    "scene".into()
}

fn default_interval() -> f64 {
    KEYFRAME_INTERVAL
}

fn default_class() -> String {
    "car".into()
}

fn default_radius() -> f64 {
    50.0
}

fn default_max_speed() -> f64 {
    15.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgoSpec {
    pub start: Vec2,
    pub velocity: Vec2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    #[serde(default)]
    pub id: Option<String>,
    pub start: Vec2,
    /// `null` for an object whose velocity is unknown; it stays in place.
    pub velocity: Option<Vec2>,
    #[serde(rename = "class", default = "default_class")]
    pub class_name: String,
    #[serde(default)]
    pub size: Option<[f64; 2]>,
}

/// Objects spawned uniformly in a disk around ego's start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomObjects {
    pub count: usize,
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_max_speed")]
    pub max_speed: f64,
    #[serde(rename = "class", default = "default_class")]
    pub class_name: String,
    #[serde(default)]
    pub missing_velocity_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    /// Prefix of the generated frame ids.
    #[serde(default = "default_name")]
    pub name: String,
    pub n_frames: usize,
    #[serde(default = "default_interval")]
    pub frame_interval: f64,
    pub ego: EgoSpec,
    #[serde(default)]
    pub objects: Vec<ObjectSpec>,
    #[serde(default)]
    pub random_objects: Option<RandomObjects>,
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.frame_interval.is_finite() && self.frame_interval > 0.0) {
            return Err(Error::config("frame_interval must be positive"));
        }
        if let Some(r) = &self.random_objects {
            if !(r.radius > 0.0 && r.max_speed >= 0.0 && (0.0..=1.0).contains(&r.missing_velocity_prob)) {
                return Err(Error::config("random_objects has an invalid radius, speed or probability"));
            }
        }
        Ok(())
    }
}

struct Track {
    id: String,
    class_name: String,
    start: Vec2,
    velocity: Option<Vec2>,
    size: Size,
}

impl Track {
    fn at(&self, t: f64) -> ObjectState {
        let velocity = self.velocity;
        let center = velocity.map_or(self.start, |v| self.start + v * t);
        let yaw = velocity.filter(|v| !v.is_zero()).map_or(0.0, |v| v.y.atan2(v.x));
        ObjectState {
            id: self.id.clone(),
            class_name: self.class_name.clone(),
            center,
            velocity,
            size: self.size,
            yaw,
        }
    }
}

/// Constant-velocity scene sampled every `frame_interval` seconds.
pub fn gen_dataset(spec: &ScenarioSpec) -> Result<Dataset> {
    spec.validate()?;
    let frames = gen_frames(spec);
    let mut meta = BTreeMap::new();
    meta.insert("generator".into(), serde_json::json!("criteval synthgen"));
    meta.insert("seed".into(), serde_json::json!(spec.seed));
    Dataset::new(frames, meta)
}

fn gen_frames(spec: &ScenarioSpec) -> Vec<Frame> {
    let mut rng = SplitMix64::new(spec.seed);
    let mut tracks: Vec<Track> = spec
        .objects
        .iter()
        .enumerate()
        .map(|(i, o)| Track {
            id: o.id.clone().unwrap_or_else(|| format!("obj-{i}")),
            class_name: o.class_name.clone(),
            start: o.start,
            velocity: o.velocity,
            size: o.size.map_or(Size::CAR, |[width, length]| Size { width, length }),
        })
        .collect();
    if let Some(r) = &spec.random_objects {
        for i in 0..r.count {
            let start = rng.in_disk(spec.ego.start, r.radius);
            let velocity = rng.heading_vector(r.max_speed);
            let missing = rng.next_f64() < r.missing_velocity_prob;
            tracks.push(Track {
                id: format!("rnd-{i}"),
                class_name: r.class_name.clone(),
                start,
                velocity: (!missing).then_some(velocity),
                size: Size::CAR,
            });
        }
    }
    (0..spec.n_frames)
        .map(|k| {
            let t = k as f64 * spec.frame_interval;
            Frame {
                frame_id: format!("{}-{k:03}", spec.name),
                timestamp: t,
                ego: EgoState {
                    center: spec.ego.start + spec.ego.velocity * t,
                    velocity: spec.ego.velocity,
                    yaw: None,
                },
                ground_truth: tracks.iter().map(|tr| tr.at(t)).collect(),
            }
        })
        .collect()
}

/// Several random scenes merged into one dataset. Scene `i` is named
/// `scene{i:03}`; its seed is the `i`-th draw from `seed`.
pub fn gen_batch(seed: u64, n_scenes: usize, frames_per_scene: usize, objects_per_scene: usize) -> Result<Dataset> {
    let mut rng = SplitMix64::new(seed);
    let mut frames = Vec::with_capacity(n_scenes * frames_per_scene);
    for i in 0..n_scenes {
        let scene_seed = rng.next_u64();
        let ego_velocity = rng.heading_vector(15.0);
        let spec = ScenarioSpec {
            name: format!("scene{i:03}"),
            n_frames: frames_per_scene,
            frame_interval: KEYFRAME_INTERVAL,
            ego: EgoSpec {
                start: Vec2::ZERO,
                velocity: ego_velocity,
            },
            objects: Vec::new(),
            random_objects: Some(RandomObjects {
                count: objects_per_scene,
                radius: 50.0,
                max_speed: 15.0,
                class_name: "car".into(),
                missing_velocity_prob: 0.05,
            }),
            seed: scene_seed,
        };
        frames.extend(gen_frames(&spec));
    }
    let mut meta = BTreeMap::new();
    meta.insert("generator".into(), serde_json::json!("criteval synthgen batch"));
    meta.insert("seed".into(), serde_json::json!(seed));
    Dataset::new(frames, meta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceModel {
    pub mean: f64,
    pub sigma: f64,
}

impl ConfidenceModel {
    fn sample(&self, rng: &mut SplitMix64) -> f64 {
        (self.mean + self.sigma * rng.normal()).clamp(0.0, 1.0)
    }
}

fn tp_confidence() -> ConfidenceModel {
    ConfidenceModel { mean: 0.8, sigma: 0.1 }
}

fn fp_confidence() -> ConfidenceModel {
    ConfidenceModel { mean: 0.3, sigma: 0.15 }
}

/// How a simulated detector deviates from ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorModel {
    /// `(distance, probability)` knots, interpolated linearly and held
    /// constant beyond the ends. Empty means no misses.
    #[serde(default)]
    pub miss_prob_by_distance: Vec<[f64; 2]>,
    #[serde(default)]
    pub center_noise_sigma: f64,
    #[serde(default)]
    pub velocity_noise_sigma: f64,
    #[serde(default)]
    pub velocity_missing_prob: f64,
    /// Mean number of spurious detections per frame.
    #[serde(default)]
    pub fp_rate_per_frame: f64,
    #[serde(default = "default_radius")]
    pub fp_radius: f64,
    #[serde(default = "tp_confidence")]
    pub tp_confidence: ConfidenceModel,
    #[serde(default = "fp_confidence")]
    pub fp_confidence: ConfidenceModel,
}

impl Default for ErrorModel {
    fn default() -> Self {
        ErrorModel {
            miss_prob_by_distance: Vec::new(),
            center_noise_sigma: 0.0,
            velocity_noise_sigma: 0.0,
            velocity_missing_prob: 0.0,
            fp_rate_per_frame: 0.0,
            fp_radius: default_radius(),
            tp_confidence: tp_confidence(),
            fp_confidence: fp_confidence(),
        }
    }
}

impl ErrorModel {
    pub fn validate(&self) -> Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        let sigma = |s: f64| s.is_finite() && s >= 0.0;
        let ok = self.miss_prob_by_distance.iter().all(|&[d, p]| d.is_finite() && prob(p))
            && self.miss_prob_by_distance.windows(2).all(|w| w[0][0] < w[1][0])
            && sigma(self.center_noise_sigma)
            && sigma(self.velocity_noise_sigma)
            && prob(self.velocity_missing_prob)
            && sigma(self.fp_rate_per_frame)
            && self.fp_radius > 0.0
            && [self.tp_confidence, self.fp_confidence]
                .iter()
                .all(|c| prob(c.mean) && sigma(c.sigma));
        if ok {
            Ok(())
        } else {
            Err(Error::config("error model has an out-of-range probability or negative sigma"))
        }
    }

    pub fn miss_probability(&self, distance: f64) -> f64 {
        let knots = &self.miss_prob_by_distance;
        let (Some(first), Some(last)) = (knots.first(), knots.last()) else {
            return 0.0;
        };
        if distance <= first[0] {
            return first[1];
        }
        if distance >= last[0] {
            return last[1];
        }
        let i = knots.partition_point(|k| k[0] <= distance);
        let ([d0, p0], [d1, p1]) = (knots[i - 1], knots[i]);
        p0 + (distance - d0) * (p1 - p0) / (d1 - d0)
    }
}

/// Simulated detections derived from ground truth.
pub fn corrupt(dataset: &Dataset, model: &ErrorModel, seed: u64) -> Result<DetectionSet> {
    corrupt_where(dataset, model, seed, |_, _| false)
}

/// Like [`corrupt`], additionally dropping every object for which
/// `force_miss` holds. The random stream is consumed identically either way.
pub fn corrupt_where(
    dataset: &Dataset,
    model: &ErrorModel,
    seed: u64,
    force_miss: impl Fn(&Frame, &ObjectState) -> bool,
) -> Result<DetectionSet> {
    model.validate()?;
    let mut rng = SplitMix64::new(seed);
    let mut out = Vec::new();
    for frame in &dataset.frames {
        for obj in &frame.ground_truth {
            let miss_draw = rng.next_f64();
            let noise = Vec2::new(rng.normal(), rng.normal()) * model.center_noise_sigma;
            let vnoise = Vec2::new(rng.normal(), rng.normal()) * model.velocity_noise_sigma;
            let drop_velocity = rng.next_f64() < model.velocity_missing_prob;
            let confidence = model.tp_confidence.sample(&mut rng);
            let distance = frame.ego.center.distance(obj.center);
            if miss_draw < model.miss_probability(distance) || force_miss(frame, obj) {
                continue;
            }
            out.push(Detection {
                frame_id: frame.frame_id.clone(),
                state: ObjectState {
                    id: format!("{}/{}", frame.frame_id, obj.id),
                    center: obj.center + noise,
                    velocity: obj.velocity.filter(|_| !drop_velocity).map(|v| v + vnoise),
                    ..obj.clone()
                },
                confidence,
            });
        }
        for k in 0..rng.poisson(model.fp_rate_per_frame) {
            let center = rng.in_disk(frame.ego.center, model.fp_radius);
            let velocity = rng.heading_vector(15.0);
            out.push(Detection {
                frame_id: frame.frame_id.clone(),
                state: ObjectState {
                    id: format!("{}/fp-{k}", frame.frame_id),
                    class_name: "car".into(),
                    center,
                    velocity: Some(velocity),
                    size: Size::CAR,
                    yaw: velocity.y.atan2(velocity.x),
                },
                confidence: model.fp_confidence.sample(&mut rng),
            });
        }
    }
    DetectionSet::new(out)
}

/// Oracle horizon: four times the time to cover the current distance at the
/// relative speed, capped at 120 s.
pub fn default_horizon(ego: &EgoState, obj: &ObjectState) -> f64 {
    let v_rel = obj.velocity.unwrap_or(Vec2::ZERO) - ego.velocity;
    (4.0 * ego.center.distance(obj.center) / v_rel.norm()).min(120.0)
}

/// Steps the object along the relative velocity with ego fixed and returns
/// the smallest sampled distance and the time it was reached.
///
/// Panics if the object's velocity is missing.
pub fn brute_force_cpa(ego: &EgoState, obj: &ObjectState, dt: f64, horizon: f64) -> (f64, f64) {
    assert!(dt > 0.0 && horizon > 0.0, "dt and horizon must be positive");
    let v_rel = obj.velocity.expect("oracle needs a known velocity") - ego.velocity;
    let steps = (horizon / dt).ceil() as u64;
    let mut best = (ego.center.distance(obj.center), 0.0);
    for i in 1..=steps {
        let t = i as f64 * dt;
        let d = ego.center.distance(obj.center + v_rel * t);
        if d < best.0 {
            best = (d, t);
        } else if d > best.0 {
            // Distance along a line is convex in time.
            break;
        }
    }
    best
}
