//! Closest-approach geometry between ego and another object.
//!
//! Ego is held stationary and the object moves along a straight line with
//! the relative velocity `v_B - v_ego`. The closest point `C` on that line
//! is the foot of the perpendicular dropped from ego.

use crate::model::Vec2;

pub fn relative_velocity(object_velocity: Vec2, ego_velocity: Vec2) -> Vec2 {
    object_velocity - ego_velocity
}

/// Time for the object to reach the closest point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeToApproach {
    Finite(f64),
    /// The division overflowed or produced NaN.
    NonFinite,
}

impl TimeToApproach {
    pub fn seconds(self) -> Option<f64> {
        match self {
            TimeToApproach::Finite(t) => Some(t),
            TimeToApproach::NonFinite => None,
        }
    }
}

/// Quantities that only exist when the relative velocity is nonzero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Approach {
    /// Point `C` on the object's relative trajectory closest to ego.
    pub closest_point: Vec2,
    pub ego_to_closest: f64,
    pub object_to_closest: f64,
    pub time_to_closest: TimeToApproach,
    /// Whether the object moves towards `C` (a zero displacement counts).
    pub approaching: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproachGeometry {
    pub ego_to_object: f64,
    /// `None` exactly when the relative velocity is zero.
    pub approach: Option<Approach>,
}

pub fn closest_approach(ego: Vec2, object: Vec2, v_rel: Vec2) -> ApproachGeometry {
    let offset = ego - object;
    let ego_to_object = offset.norm();
    let speed = v_rel.norm();
    if v_rel.is_zero() {
        return ApproachGeometry {
            ego_to_object,
            approach: None,
        };
    }
    let dir = v_rel * (1.0 / speed);
    // Signed distance travelled along `dir` from the object to C.
    let along = offset.dot(dir);
    let closest_point = object + dir * along;
    let object_to_closest = along.abs();
    // |offset x dir| is the perpendicular distance; clamp guards the last ulp.
    let ego_to_closest = offset.cross(dir).abs().min(ego_to_object);
    ApproachGeometry {
        ego_to_object,
        approach: Some(Approach {
            closest_point,
            ego_to_closest,
            object_to_closest,
            time_to_closest: time_to_closest_approach(object_to_closest, v_rel),
            approaching: along >= 0.0,
        }),
    }
}

pub fn time_to_closest_approach(object_to_closest: f64, v_rel: Vec2) -> TimeToApproach {
    let t = object_to_closest / v_rel.norm();
    if t.is_finite() {
        TimeToApproach::Finite(t)
    } else {
        TimeToApproach::NonFinite
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: f64, y: f64) -> Vec2 {
        Vec2::new(x, y)
    }

    #[test]
    fn relative_velocity_examples() {
        assert_eq!(relative_velocity(v(2.0, 0.0), v(2.0, 0.0)), Vec2::ZERO);
        assert_eq!(relative_velocity(v(0.0, 0.0), v(0.0, 10.0)), v(0.0, -10.0));
        assert_eq!(relative_velocity(v(-3.0, -4.0), Vec2::ZERO), v(-3.0, -4.0));
    }

    #[test]
    fn head_on_along_x() {
        let g = closest_approach(Vec2::ZERO, v(10.0, 0.0), v(-2.0, 0.0));
        assert_eq!(g.ego_to_object, 10.0);
        let a = g.approach.unwrap();
        assert_eq!(a.closest_point, Vec2::ZERO);
        assert_eq!(a.ego_to_closest, 0.0);
        assert_eq!(a.object_to_closest, 10.0);
        assert!(a.approaching);
        assert_eq!(a.time_to_closest, TimeToApproach::Finite(5.0));
    }

    #[test]
    fn vertical_trajectory_receding() {
        let g = closest_approach(Vec2::ZERO, v(3.0, 4.0), v(0.0, 1.0));
        let a = g.approach.unwrap();
        assert_eq!(a.closest_point, v(3.0, 0.0));
        assert_eq!(a.ego_to_closest, 3.0);
        assert_eq!(a.object_to_closest, 4.0);
        assert!(!a.approaching);
    }

    #[test]
    fn zero_relative_velocity_is_undefined() {
        let g = closest_approach(Vec2::ZERO, v(6.0, 8.0), Vec2::ZERO);
        assert_eq!(g.ego_to_object, 10.0);
        assert!(g.approach.is_none());
    }

    #[test]
    fn time_examples() {
        assert_eq!(time_to_closest_approach(10.0, v(-2.0, 0.0)), TimeToApproach::Finite(5.0));
        assert_eq!(time_to_closest_approach(10.0, v(-3.0, -4.0)), TimeToApproach::Finite(2.0));
        assert_eq!(time_to_closest_approach(1e300, v(1e-300, 0.0)), TimeToApproach::NonFinite);
    }

    #[test]
    fn tiny_velocity_does_not_underflow_the_direction() {
        let g = closest_approach(Vec2::ZERO, v(1e300, 5.0), v(-1e-300, 0.0));
        let a = g.approach.unwrap();
        assert!(a.approaching);
        assert!((a.ego_to_closest - 5.0).abs() < 1e-12);
        assert_eq!(a.time_to_closest, TimeToApproach::NonFinite);
    }

    #[test]
    fn object_already_at_closest_point() {
        let a = closest_approach(Vec2::ZERO, v(0.0, 5.0), v(1.0, 0.0))
            .approach
            .unwrap();
        assert!(a.approaching);
        assert_eq!(a.object_to_closest, 0.0);
        assert_eq!(a.time_to_closest, TimeToApproach::Finite(0.0));
    }
}
