//! Object criticality: three clipped-parabola scores from the current
//! distance, the closest-approach distance and the time to closest approach,
//! combined like independent failure probabilities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, ApproachGeometry, TimeToApproach};
use crate::model::{EgoState, ObjectState, Vec2};

/// `kappa_t` assigned when the time to closest approach is not representable.
pub const NON_FINITE_TIME_SCORE: f64 = 0.1;

/// Caps `(D_max, R_max, T_max)` at which the respective scores reach zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalityConfig {
    pub d_max: f64,
    pub r_max: f64,
    pub t_max: f64,
}

impl CriticalityConfig {
    pub fn new(d_max: f64, r_max: f64, t_max: f64) -> Result<Self> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !(ok(d_max) && ok(r_max) && ok(t_max)) {
            return Err(Error::config(format!(
                "criticality caps must be positive and finite, got ({d_max}, {r_max}, {t_max})"
            )));
        }
        Ok(CriticalityConfig { d_max, r_max, t_max })
    }
}

impl std::fmt::Display for CriticalityConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {})", self.d_max, self.r_max, self.t_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalityWeights {
    pub kappa_d: f64,
    pub kappa_r: f64,
    pub kappa_t: f64,
    pub kappa: f64,
}

/// Which branch of the score computation applies to an object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CornerCase {
    Regular,
    MissingVelocity,
    ZeroRelativeVelocity,
    Receding,
    NonFiniteTime,
}

/// Downward parabola through `(0, 1)` and `(z, 0)`, clipped at zero.
pub fn parabolic_score(x: f64, z: f64) -> f64 {
    debug_assert!(x >= 0.0 && z > 0.0 && z.is_finite(), "parabolic_score({x}, {z})");
    let ratio = x / z;
    (1.0 - ratio * ratio).max(0.0)
}

/// `1 - (1 - kd)(1 - kr)(1 - kt)`.
///
/// Panics if any input is outside `[0, 1]`.
pub fn combine(kd: f64, kr: f64, kt: f64) -> f64 {
    for k in [kd, kr, kt] {
        assert!((0.0..=1.0).contains(&k), "criticality score {k} outside [0, 1]");
    }
    1.0 - (1.0 - kd) * (1.0 - kr) * (1.0 - kt)
}

/// Configuration-independent quantities from which the weights follow.
///
/// Only the parabola caps change across a sweep, so these are computed once
/// per object and re-scored for every configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalityInputs {
    pub case: CornerCase,
    pub ego_to_object: f64,
    /// Set for `Regular` and `NonFiniteTime`.
    pub ego_to_closest: Option<f64>,
    /// Set for `Regular` only.
    pub time_to_closest: Option<f64>,
}

impl CriticalityInputs {
    /// Applies the corner cases in precedence order: missing velocity, zero
    /// relative velocity, receding, non-finite time.
    pub fn from_geometry(geom: &ApproachGeometry, velocity_known: bool) -> Self {
        let mut inputs = CriticalityInputs {
            case: CornerCase::Regular,
            ego_to_object: geom.ego_to_object,
            ego_to_closest: None,
            time_to_closest: None,
        };
        if !velocity_known {
            inputs.case = CornerCase::MissingVelocity;
            return inputs;
        }
        let Some(approach) = geom.approach else {
            inputs.case = CornerCase::ZeroRelativeVelocity;
            return inputs;
        };
        if !approach.approaching {
            inputs.case = CornerCase::Receding;
            return inputs;
        }
        inputs.ego_to_closest = Some(approach.ego_to_closest);
        match approach.time_to_closest {
            TimeToApproach::Finite(t) => inputs.time_to_closest = Some(t),
            TimeToApproach::NonFinite => inputs.case = CornerCase::NonFiniteTime,
        }
        inputs
    }

    pub fn weights(&self, cfg: &CriticalityConfig) -> CriticalityWeights {
        let kappa_d = parabolic_score(self.ego_to_object, cfg.d_max);
        let (kappa_r, kappa_t) = match self.case {
            CornerCase::MissingVelocity => (1.0, 1.0),
            CornerCase::ZeroRelativeVelocity | CornerCase::Receding => (0.0, 0.0),
            CornerCase::NonFiniteTime => {
                let kr = match self.ego_to_closest {
                    Some(r) if r.is_finite() => parabolic_score(r, cfg.r_max),
                    _ => NON_FINITE_TIME_SCORE,
                };
                (kr, NON_FINITE_TIME_SCORE)
            }
            CornerCase::Regular => (
                parabolic_score(self.ego_to_closest.unwrap_or(f64::INFINITY), cfg.r_max),
                parabolic_score(self.time_to_closest.unwrap_or(f64::INFINITY), cfg.t_max),
            ),
        };
        CriticalityWeights {
            kappa_d,
            kappa_r,
            kappa_t,
            kappa: combine(kappa_d, kappa_r, kappa_t),
        }
    }
}

/// Geometry and scoring inputs of one object relative to ego.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Assessment {
    pub relative_velocity: Option<Vec2>,
    pub geometry: ApproachGeometry,
    pub inputs: CriticalityInputs,
}

pub fn assess(ego: &EgoState, center: Vec2, velocity: Option<Vec2>) -> Assessment {
    let v_rel = velocity.map(|v| geometry::relative_velocity(v, ego.velocity));
    let geometry = geometry::closest_approach(ego.center, center, v_rel.unwrap_or(Vec2::ZERO));
    Assessment {
        relative_velocity: v_rel,
        geometry,
        inputs: CriticalityInputs::from_geometry(&geometry, velocity.is_some()),
    }
}

/// Criticality of `object` as seen from `ego`. The same function scores
/// ground-truth states and predicted states; only the state passed differs.
pub fn criticality_components(
    ego: &EgoState,
    object: &ObjectState,
    cfg: &CriticalityConfig,
) -> CriticalityWeights {
    assess(ego, object.center, object.velocity).inputs.weights(cfg)
}

/// Maps an object to the scalar weight used by the weighted metrics.
pub trait CriticalityModel: Sync {
    fn weight(&self, inputs: &CriticalityInputs) -> f64;
}

impl CriticalityModel for CriticalityConfig {
    fn weight(&self, inputs: &CriticalityInputs) -> f64 {
        inputs.weights(self).kappa
    }
}

/// Every object weighs 1; reduces the weighted metrics to the classic ones.
#[derive(Debug, Clone, Copy, Default)]
pub struct UnitWeight;

impl CriticalityModel for UnitWeight {
    fn weight(&self, _: &CriticalityInputs) -> f64 {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Size;
    use approx::assert_abs_diff_eq;

    fn cfg() -> CriticalityConfig {
        CriticalityConfig::new(30.0, 20.0, 8.0).unwrap()
    }

    fn ego(velocity: Vec2) -> EgoState {
        EgoState {
            center: Vec2::ZERO,
            velocity,
            yaw: None,
        }
    }

    fn object(x: f64, y: f64, velocity: Option<Vec2>) -> ObjectState {
        ObjectState {
            id: "b".into(),
            class_name: "car".into(),
            center: Vec2::new(x, y),
            velocity,
            size: Size::CAR,
            yaw: 0.0,
        }
    }

    #[test]
    fn parabola_examples() {
        assert_eq!(parabolic_score(0.0, 20.0), 1.0);
        assert_eq!(parabolic_score(20.0, 20.0), 0.0);
        assert_eq!(parabolic_score(10.0, 20.0), 0.75);
        assert_eq!(parabolic_score(35.0, 20.0), 0.0);
        assert_eq!(parabolic_score(f64::INFINITY, 20.0), 0.0);
    }

    #[test]
    fn combine_examples() {
        assert_eq!(combine(0.0, 0.0, 0.0), 0.0);
        assert_eq!(combine(1.0, 0.2, 0.0), 1.0);
        assert_eq!(combine(0.5, 0.5, 0.5), 0.875);
    }

    #[test]
    #[should_panic(expected = "outside [0, 1]")]
    fn combine_rejects_out_of_range() {
        combine(0.5, 1.5, 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(CriticalityConfig::new(0.0, 1.0, 1.0).is_err());
        assert!(CriticalityConfig::new(1.0, f64::NAN, 1.0).is_err());
        assert!(CriticalityConfig::new(1.0, 1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn head_on_chain() {
        let w = criticality_components(
            &ego(Vec2::ZERO),
            &object(6.0, 8.0, Some(Vec2::new(-3.0, -4.0))),
            &cfg(),
        );
        assert_abs_diff_eq!(w.kappa_d, 1.0 - 100.0 / 900.0, epsilon = 1e-15);
        assert_eq!(w.kappa_r, 1.0);
        assert_eq!(w.kappa_t, 1.0 - 4.0 / 64.0);
        assert_eq!(w.kappa, 1.0);
    }

    #[test]
    fn missing_velocity_is_maximally_critical() {
        let w = criticality_components(&ego(Vec2::new(0.0, 5.0)), &object(0.0, 40.0, None), &cfg());
        assert_eq!((w.kappa_d, w.kappa_r, w.kappa_t, w.kappa), (0.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn zero_relative_velocity() {
        let v = Vec2::new(4.0, 1.0);
        let w = criticality_components(&ego(v), &object(9.0, 12.0, Some(v)), &cfg());
        assert_eq!((w.kappa_r, w.kappa_t), (0.0, 0.0));
        assert_eq!(w.kappa_d, 0.75);
        assert_eq!(w.kappa, 0.75);
    }

    #[test]
    fn non_finite_time_with_non_finite_closest_distance() {
        let inputs = CriticalityInputs {
            case: CornerCase::NonFiniteTime,
            ego_to_object: 1e300,
            ego_to_closest: Some(f64::INFINITY),
            time_to_closest: None,
        };
        let w = inputs.weights(&cfg());
        assert_eq!((w.kappa_r, w.kappa_t), (0.1, 0.1));
    }

    #[test]
    fn size_and_yaw_do_not_matter() {
        let a = object(5.0, -7.0, Some(Vec2::new(1.0, 2.0)));
        let mut b = a.clone();
        b.size = Size {
            width: 0.3,
            length: 17.0,
        };
        b.yaw = -2.4;
        let e = ego(Vec2::new(0.5, 3.0));
        assert_eq!(criticality_components(&e, &a, &cfg()), criticality_components(&e, &b, &cfg()));
    }

    #[test]
    fn unit_weight_ignores_inputs() {
        let inputs = assess(&ego(Vec2::ZERO), Vec2::new(100.0, 0.0), None).inputs;
        assert_eq!(UnitWeight.weight(&inputs), 1.0);
        assert_eq!(cfg().weight(&inputs), 1.0);
    }
}
