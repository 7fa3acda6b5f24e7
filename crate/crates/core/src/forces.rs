//! Social force model: desire, social and granular forces, pair and wall terms.

use glam::DVec2;

use crate::config::ModelConfig;
use crate::error::{Result, SimError};
use crate::geometry::{Arena, Boundary};
use crate::neighbor::CellGrid;
use crate::particle::ParticleState;

/// Distance at which coincident centers are evaluated.
pub const COINCIDENT_DISTANCE: f64 = 1e-6;

/// Direction of the desire force in the corridor (towards +x).
pub const CORRIDOR_TARGET: DVec2 = DVec2::X;

/// Relaxation towards the desired velocity `v0 * target_dir`.
pub fn desire_force(p: &ParticleState, cfg: &ModelConfig, target_dir: DVec2) -> DVec2 {
    p.mass * (cfg.v0 * target_dir - p.velocity) / cfg.tau_rt
}

/// Exponential personal-space repulsion acting on `i`; `n_ij` points from `j` to `i`.
pub fn social_force_pair(r_ij: f64, n_ij: DVec2, cfg: &ModelConfig) -> Result<DVec2> {
    if r_ij.is_nan() || r_ij <= 0.0 {
        return Err(SimError::CoincidentCenters);
    }
    Ok(cfg.a_social * ((cfg.diameter - r_ij) / cfg.b_social).exp() * n_ij)
}

/// Overlap function: `x` when positive, zero otherwise.
#[inline]
pub fn overlap(x: f64) -> f64 {
    x.max(0.0)
}

/// Contact compression and sliding friction acting on `i`.
///
/// `dv_t` is `(v_j - v_i) . t_ij`.
pub fn granular_force_pair(r_ij: f64, n_ij: DVec2, t_ij: DVec2, dv_t: f64, cfg: &ModelConfig) -> Result<DVec2> {
    if r_ij.is_nan() || r_ij <= 0.0 {
        return Err(SimError::CoincidentCenters);
    }
    let g = overlap(cfg.diameter - r_ij);
    if g == 0.0 {
        return Ok(DVec2::ZERO);
    }
    Ok((cfg.k_compress * n_ij + cfg.kappa_friction * dv_t * t_ij) * g)
}

/// Resolved contact geometry between `i` and `j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairGeometry {
    pub distance: f64,
    /// Unit vector from `j` to `i`.
    pub normal: DVec2,
    /// `normal` rotated by +90 degrees.
    pub tangent: DVec2,
    pub coincident: bool,
}

impl PairGeometry {
    /// `sep` is `r_i - r_j` (minimum image). Coincident centers get a fixed
    /// normal ordered by particle index and the distance `COINCIDENT_DISTANCE`.
    pub fn resolve(i: usize, j: usize, sep: DVec2) -> PairGeometry {
        let distance = sep.length();
        let (distance, normal, coincident) = if distance > 0.0 {
            (distance, sep / distance, false)
        } else {
            let n = if i < j { DVec2::X } else { -DVec2::X };
            (COINCIDENT_DISTANCE, n, true)
        };
        PairGeometry {
            distance,
            normal,
            tangent: normal.perp(),
            coincident,
        }
    }
}

/// Social plus granular force on `pi` exerted by `pj`.
pub fn pair_force(geom: &PairGeometry, pi: &ParticleState, pj: &ParticleState, cfg: &ModelConfig) -> DVec2 {
    let social = cfg.a_social * ((cfg.diameter - geom.distance) / cfg.b_social).exp() * geom.normal;
    let g = overlap(cfg.diameter - geom.distance);
    if g == 0.0 {
        return social;
    }
    let dv_t = (pj.velocity - pi.velocity).dot(geom.tangent);
    social + (cfg.k_compress * geom.normal + cfg.kappa_friction * dv_t * geom.tangent) * g
}

/// Social and granular forces from the walls at `y = 0` and `y = ly`.
///
/// The granular overlap uses the half diameter, `g(d/2 - r_iW)`, mirroring
/// the social term.
pub fn wall_forces(p: &ParticleState, arena: &Arena, cfg: &ModelConfig) -> Result<DVec2> {
    if arena.bc_y != Boundary::BounceBack {
        return Ok(DVec2::ZERO);
    }
    let y = p.position.y;
    if !(0.0..=arena.ly).contains(&y) {
        return Err(SimError::InvalidState(format!(
            "particle center y = {y} lies outside the corridor [0, {}]",
            arena.ly
        )));
    }
    let half = 0.5 * cfg.diameter;
    let tangent = DVec2::X;
    let heading_dir = p.velocity.normalize_or_zero();
    let mut total = DVec2::ZERO;
    for (r_wall, normal) in [(y, DVec2::Y), (arena.ly - y, -DVec2::Y)] {
        total += cfg.a_social * ((half - r_wall) / cfg.b_social).exp() * normal;
        let g = overlap(half - r_wall);
        if g > 0.0 {
            total += (cfg.k_compress * normal - cfg.kappa_friction * heading_dir.dot(tangent) * tangent) * g;
        }
    }
    Ok(total)
}

/// Per-particle force buffer for the right-hand side of the equation of motion.
#[derive(Debug, Clone, Default)]
pub struct ForceAccumulator {
    pub forces: Vec<DVec2>,
    /// Coincident-center pairs resolved by the tie-breaking rule in the last evaluation.
    pub coincident_pairs: usize,
}

impl ForceAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Total force on every particle. Pair terms beyond the social cutoff are
    /// below 1e-12 N and are skipped via the cell grid.
    pub fn evaluate(&mut self, particles: &[ParticleState], arena: &Arena, cfg: &ModelConfig) -> Result<()> {
        let cutoff = cfg.social_cutoff();
        let grid = CellGrid::build(particles, arena, cutoff);
        self.forces.clear();
        self.forces.resize(particles.len(), DVec2::ZERO);
        self.coincident_pairs = 0;
        for (i, p) in particles.iter().enumerate() {
            self.forces[i] = desire_force(p, cfg, CORRIDOR_TARGET) + wall_forces(p, arena, cfg)?;
        }
        // each pair once; the reaction is the exact negation
        for (i, p) in particles.iter().enumerate() {
            let mut f = DVec2::ZERO;
            let forces = &mut self.forces;
            let coincident = &mut self.coincident_pairs;
            grid.for_each_within(i, cutoff, |j, sep| {
                if j <= i {
                    return;
                }
                let geom = PairGeometry::resolve(i, j, sep);
                if geom.coincident {
                    *coincident += 2;
                }
                let fij = pair_force(&geom, p, &particles[j], cfg);
                f += fij;
                forces[j] -= fij;
            });
            self.forces[i] += f;
        }
        if let Some(i) = self.forces.iter().position(|f| !f.is_finite()) {
            return Err(SimError::InvalidState(format!("non-finite force on particle {i}")));
        }
        if self.coincident_pairs > 0 {
            log::warn!(
                "resolved {} coincident-center pair evaluations by index order",
                self.coincident_pairs
            );
        }
        Ok(())
    }

    pub fn accelerations(&self, particles: &[ParticleState]) -> Vec<DVec2> {
        self.forces
            .iter()
            .zip(particles)
            .map(|(f, p)| *f / p.mass)
            .collect()
    }
}

/// Acceleration of every particle under the social force model.
pub fn sfm_accelerations(particles: &[ParticleState], arena: &Arena, cfg: &ModelConfig) -> Result<Vec<DVec2>> {
    let mut acc = ForceAccumulator::new();
    acc.evaluate(particles, arena, cfg)?;
    Ok(acc.accelerations(particles))
}

/// Acceleration of particle `i` summing pair terms over all `j != i`.
pub fn sfm_acceleration(i: usize, particles: &[ParticleState], arena: &Arena, cfg: &ModelConfig) -> Result<DVec2> {
    let p = &particles[i];
    let mut f = desire_force(p, cfg, CORRIDOR_TARGET) + wall_forces(p, arena, cfg)?;
    for (j, q) in particles.iter().enumerate() {
        if j != i {
            let geom = PairGeometry::resolve(i, j, arena.separation(p.position, q.position));
            f += pair_force(&geom, p, q, cfg);
        }
    }
    Ok(f / p.mass)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ModelKind;

    fn cfg() -> ModelConfig {
        ModelConfig::with_model(ModelKind::Sfm)
    }

    fn at(x: f64, y: f64, vx: f64, vy: f64) -> ParticleState {
        ParticleState::new(DVec2::new(x, y), DVec2::new(vx, vy), 80.0, 0.7)
    }

    #[test]
    fn desire_force_examples() {
        let c = cfg();
        assert_eq!(desire_force(&at(1.0, 1.0, 0.5, 0.0), &c, DVec2::X), DVec2::ZERO);
        assert_eq!(desire_force(&at(1.0, 1.0, 0.0, 0.0), &c, DVec2::X), DVec2::new(80.0, 0.0));
        assert_eq!(desire_force(&at(1.0, 1.0, 0.5, 0.5), &c, DVec2::X), DVec2::new(0.0, -80.0));
    }

    #[test]
    fn social_force_examples() {
        let c = cfg();
        let f = social_force_pair(0.7, DVec2::X, &c).unwrap();
        assert!((f.length() - 2000.0).abs() < 1e-9);
        let f = social_force_pair(0.78, DVec2::X, &c).unwrap();
        assert!((f.length() - 2000.0 / std::f64::consts::E).abs() < 1e-9);
        let f = social_force_pair(1.5, DVec2::X, &c).unwrap();
        assert!((f.length() - 2000.0 * (-10.0f64).exp()).abs() < 1e-12);
        assert!((f.length() - 0.0908).abs() < 1e-4);
        assert!(f.x > 0.0, "social force is repulsive along n_ij");
        assert_eq!(social_force_pair(0.0, DVec2::X, &c), Err(SimError::CoincidentCenters));
    }

    #[test]
    fn granular_force_examples() {
        let c = cfg();
        let (n, t) = (DVec2::X, DVec2::Y);
        assert_eq!(granular_force_pair(0.8, n, t, 1.0, &c).unwrap(), DVec2::ZERO);
        let f = granular_force_pair(0.6, n, t, 0.0, &c).unwrap();
        assert!((f.x - 1.2e4).abs() < 1e-6 && f.y == 0.0);
        let f = granular_force_pair(0.6, n, t, 1.0, &c).unwrap();
        assert!((f.y - 2.4e4).abs() < 1e-6);
    }

    #[test]
    fn wall_force_examples() {
        let c = cfg();
        let arena = Arena::corridor(600.0, 4.5);
        let f = wall_forces(&at(5.0, 0.35, 0.0, 0.0), &arena, &c).unwrap();
        assert!((f.y - 2000.0).abs() < 1e-6, "{f}");
        let f = wall_forces(&at(5.0, 2.25, 0.5, 0.0), &arena, &c).unwrap();
        assert_eq!(f, DVec2::ZERO);
        // static particle overlapping the bottom wall by 0.05
        let f = wall_forces(&at(5.0, 0.3, 0.0, 0.0), &arena, &c).unwrap();
        let social = 2000.0 * (0.05f64 / 0.08).exp();
        assert!((f.y - social - 6000.0).abs() < 1e-6);
        assert!(wall_forces(&at(5.0, -0.1, 0.0, 0.0), &arena, &c).is_err());
    }

    #[test]
    fn cruise_is_force_free() {
        let c = cfg();
        let arena = Arena::corridor(600.0, 4.5);
        let a = sfm_acceleration(0, &[at(10.0, 2.25, 0.5, 0.0)], &arena, &c).unwrap();
        assert!(a.length() * 80.0 < 1e-8);
    }

    #[test]
    fn rest_particle_accelerates_towards_target() {
        let c = cfg();
        let arena = Arena::corridor(600.0, 4.5);
        let a = sfm_acceleration(0, &[at(10.0, 2.25, 0.0, 0.0)], &arena, &c).unwrap();
        assert!((a - DVec2::new(1.0, 0.0)).length() < 1e-9);
    }

    #[test]
    fn touching_pair_repels_symmetrically() {
        let c = cfg();
        let arena = Arena::corridor(600.0, 4.5);
        let ps = [at(10.0, 2.25, 0.0, 0.0), at(10.7, 2.25, 0.0, 0.0)];
        let a0 = sfm_acceleration(0, &ps, &arena, &c).unwrap();
        let a1 = sfm_acceleration(1, &ps, &arena, &c).unwrap();
        // desire term adds +1 m/s^2 to both
        assert!((a0.x - (1.0 - 25.0)).abs() < 1e-9);
        assert!((a1.x - (1.0 + 25.0)).abs() < 1e-9);
    }

    #[test]
    fn coincident_centers_are_resolved() {
        let c = cfg();
        let arena = Arena::corridor(600.0, 4.5);
        let ps = [at(10.0, 2.25, 0.5, 0.0), at(10.0, 2.25, 0.5, 0.0)];
        let mut acc = ForceAccumulator::new();
        acc.evaluate(&ps, &arena, &c).unwrap();
        assert_eq!(acc.coincident_pairs, 2);
        assert!(acc.forces[0].x > 0.0 && acc.forces[1].x < 0.0);
        assert_eq!(acc.forces[0], -acc.forces[1]);
    }

    #[test]
    fn grid_matches_all_pairs() {
        use rand::{Rng, SeedableRng};
        let c = cfg();
        let arena = Arena::corridor(30.0, 4.5);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let ps: Vec<_> = (0..80)
            .map(|_| {
                at(
                    rng.gen_range(0.0..30.0),
                    rng.gen_range(0.0..4.5),
                    rng.gen_range(-0.5..0.5),
                    rng.gen_range(-0.5..0.5),
                )
            })
            .collect();
        let fast = sfm_accelerations(&ps, &arena, &c).unwrap();
        for (i, f) in fast.iter().enumerate() {
            let slow = sfm_acceleration(i, &ps, &arena, &c).unwrap();
            let scale = slow.length().max(1.0);
            assert!((*f - slow).length() <= 1e-9 * scale, "{i}: {f} vs {slow}");
        }
    }
}
