use glam::DVec2;
use serde::{Deserialize, Serialize};

/// State of one self-propelled particle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticleState {
    pub position: DVec2,
    pub velocity: DVec2,
    /// Direction of motion in (-pi, pi].
    pub heading: f64,
    pub mass: f64,
    pub diameter: f64,
}

impl ParticleState {
    pub fn new(position: DVec2, velocity: DVec2, mass: f64, diameter: f64) -> Self {
        let mut p = ParticleState {
            position,
            velocity,
            heading: 0.0,
            mass,
            diameter,
        };
        p.sync_heading();
        p
    }

    pub fn with_heading(position: DVec2, heading: f64, speed: f64, mass: f64, diameter: f64) -> Self {
        let heading = wrap_angle(heading);
        ParticleState {
            position,
            velocity: speed * DVec2::from_angle(heading),
            heading,
            mass,
            diameter,
        }
    }

    /// Recomputes the heading from the velocity. A zero velocity keeps the old heading.
    pub fn sync_heading(&mut self) {
        if self.velocity != DVec2::ZERO {
            self.heading = wrap_angle(self.velocity.y.atan2(self.velocity.x));
        }
    }

    pub fn speed(&self) -> f64 {
        self.velocity.length()
    }
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(theta: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    if theta > -PI && theta <= PI {
        return theta;
    }
    let mut t = (theta + PI).rem_euclid(TAU) - PI;
    if t <= -PI {
        t += TAU;
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn wrap_edges() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn wrapped_angle_in_range_and_equivalent(theta in -100.0f64..100.0) {
            let w = wrap_angle(theta);
            prop_assert!(w > -PI && w <= PI);
            prop_assert!((w.cos() - theta.cos()).abs() < 1e-9);
            prop_assert!((w.sin() - theta.sin()).abs() < 1e-9);
        }
    }
}
