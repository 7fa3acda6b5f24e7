//! Corridor geometry and per-axis boundary rules.

use glam::DVec2;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::particle::ParticleState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    Periodic,
    BounceBack,
}

impl Boundary {
    pub fn label(self) -> &'static str {
        match self {
            Boundary::Periodic => "periodic",
            Boundary::BounceBack => "bounce-back",
        }
    }
}

/// Rectangular corridor `[0, lx) x [0, ly]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arena {
    pub lx: f64,
    pub ly: f64,
    pub bc_x: Boundary,
    pub bc_y: Boundary,
}

impl Arena {
    pub fn new(lx: f64, ly: f64, bc_x: Boundary, bc_y: Boundary) -> Result<Self> {
        let arena = Arena { lx, ly, bc_x, bc_y };
        arena.validate()?;
        Ok(arena)
    }

    /// The paper corridor: periodic along x, walls along y.
    pub fn corridor(lx: f64, ly: f64) -> Self {
        Arena {
            lx,
            ly,
            bc_x: Boundary::Periodic,
            bc_y: Boundary::BounceBack,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lx.is_finite() && self.lx > 0.0 && self.ly.is_finite() && self.ly > 0.0) {
            return Err(SimError::InvalidConfig(format!(
                "arena lengths must be positive, got {} x {}",
                self.lx, self.ly
            )));
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    /// Separation vector `a - b` under the minimum-image convention on periodic axes.
    #[inline]
    pub fn separation(&self, a: DVec2, b: DVec2) -> DVec2 {
        let mut d = a - b;
        if self.bc_x == Boundary::Periodic {
            d.x = minimum_image(d.x, self.lx);
        }
        if self.bc_y == Boundary::Periodic {
            d.y = minimum_image(d.y, self.ly);
        }
        d
    }

    #[inline]
    pub fn distance(&self, a: DVec2, b: DVec2) -> f64 {
        self.separation(a, b).length()
    }

    pub fn contains(&self, p: DVec2) -> bool {
        let x_ok = p.x >= 0.0 && p.x < self.lx;
        let y_ok = match self.bc_y {
            Boundary::Periodic => p.y >= 0.0 && p.y < self.ly,
            Boundary::BounceBack => p.y >= 0.0 && p.y <= self.ly,
        };
        x_ok && y_ok
    }

    /// Brings a freshly advanced particle back inside the arena.
    ///
    /// Periodic axes wrap; bounce-back axes reflect the position about the
    /// violated wall and flip the normal velocity component. Displacements of
    /// a full box length or more are rejected.
    pub fn apply_boundary(&self, p: &ParticleState) -> Result<ParticleState> {
        let mut out = *p;
        out.position.x = fold_axis(
            'x',
            self.bc_x,
            self.lx,
            p.position.x,
            &mut out.velocity.x,
        )?;
        out.position.y = fold_axis(
            'y',
            self.bc_y,
            self.ly,
            p.position.y,
            &mut out.velocity.y,
        )?;
        if out.velocity != p.velocity {
            out.sync_heading();
        }
        Ok(out)
    }
}

#[inline]
fn minimum_image(d: f64, length: f64) -> f64 {
    let half = 0.5 * length;
    if d > half {
        // far-out displacements only arise from positions outside the box
        if d - length > half {
            d - length * (d / length).round()
        } else {
            d - length
        }
    } else if d < -half {
        if d + length < -half {
            d - length * (d / length).round()
        } else {
            d + length
        }
    } else {
        d
    }
}

fn fold_axis(axis: char, rule: Boundary, length: f64, coord: f64, vel: &mut f64) -> Result<f64> {
    let overshoot = if coord < 0.0 {
        -coord
    } else if coord > length {
        coord - length
    } else {
        0.0
    };
    if overshoot.is_nan() || overshoot >= length {
        return Err(SimError::StepTooLarge {
            axis,
            displacement: overshoot,
            length,
        });
    }
    Ok(match rule {
        Boundary::Periodic => {
            let mut c = coord.rem_euclid(length);
            // rem_euclid can round a tiny negative value up to `length`
            if c >= length {
                c = 0.0;
            }
            c
        }
        Boundary::BounceBack => {
            if coord < 0.0 {
                *vel = -*vel;
                -coord
            } else if coord > length {
                *vel = -*vel;
                2.0 * length - coord
            } else {
                coord
            }
        }
    })
}
