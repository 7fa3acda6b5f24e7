//! Time stepping for the Vicsek, social force and combined models.

use std::f64::consts::PI;

use glam::DVec2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{ModelConfig, ModelKind};
use crate::error::{Result, SimError};
use crate::forces::sfm_accelerations;
use crate::geometry::{Arena, Boundary};
use crate::neighbor::CellGrid;
use crate::particle::{wrap_angle, ParticleState};

/// Circular mean of the neighbours' headings plus `noise_draw`, wrapped to (-pi, pi].
///
/// `neighbors` must include `i` itself.
pub fn vicsek_heading(i: usize, particles: &[ParticleState], neighbors: &[usize], noise_draw: f64) -> f64 {
    debug_assert!(neighbors.contains(&i));
    let sum: DVec2 = neighbors
        .iter()
        .map(|&j| DVec2::from_angle(particles[j].heading))
        .sum();
    wrap_angle(sum.y.atan2(sum.x) + noise_draw)
}

/// Desired-direction transform `(theta - theta_des) / 2`, wrapped.
pub fn apply_desired_direction(theta: f64, theta_des: f64) -> f64 {
    wrap_angle((theta - theta_des) / 2.0)
}

/// One angular-noise draw `eta * xi` per particle, `xi ~ U[-pi, pi]`, in index order.
pub fn draw_noise<R: Rng + ?Sized>(n: usize, eta: f64, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| eta * rng.gen_range(-PI..=PI)).collect()
}

/// Aligned headings for every particle from the time-t state (synchronous update).
fn aligned_headings(particles: &[ParticleState], arena: &Arena, cfg: &ModelConfig, noise: &[f64]) -> Vec<f64> {
    let grid = CellGrid::build(particles, arena, cfg.r0);
    let dirs: Vec<DVec2> = particles.iter().map(|p| DVec2::from_angle(p.heading)).collect();
    let mut sums = vec![DVec2::ZERO; particles.len()];
    grid.for_each_pair_within(cfg.r0, |i, j, _| sums[i] += dirs[j]);
    sums.iter()
        .zip(noise)
        .map(|(sum, eta_xi)| wrap_angle(sum.y.atan2(sum.x) + eta_xi))
        .collect()
}

fn check_noise(particles: &[ParticleState], noise: &[f64]) -> Result<()> {
    if noise.len() != particles.len() {
        return Err(SimError::InvalidState(format!(
            "{} noise draws supplied for {} particles",
            noise.len(),
            particles.len()
        )));
    }
    Ok(())
}

/// Vicsek step: align, add noise, (desired direction), set speed `v0`, forward update.
pub fn step_vm(particles: &[ParticleState], arena: &Arena, cfg: &ModelConfig, noise: &[f64]) -> Result<Vec<ParticleState>> {
    if !cfg.model.is_vicsek() {
        return Err(SimError::InvalidConfig(format!("step_vm called for model {}", cfg.model)));
    }
    check_noise(particles, noise)?;
    let headings = aligned_headings(particles, arena, cfg, noise);
    particles
        .iter()
        .zip(headings)
        .map(|(p, mut theta)| {
            if cfg.model == ModelKind::VmDd {
                theta = apply_desired_direction(theta, cfg.theta_des);
            }
            let mut next = ParticleState::with_heading(p.position, theta, cfg.v0, p.mass, p.diameter);
            next.position += cfg.dt * next.velocity;
            arena.apply_boundary(&next)
        })
        .collect()
}

/// Combined step: the Vicsek velocity plus `dv/dt * dt` from the social forces
/// at time t, renormalised to speed `v0`, then a forward update.
pub fn step_sfm_vm(particles: &[ParticleState], arena: &Arena, cfg: &ModelConfig, noise: &[f64]) -> Result<Vec<ParticleState>> {
    if cfg.model != ModelKind::SfmVm {
        return Err(SimError::InvalidConfig(format!("step_sfm_vm called for model {}", cfg.model)));
    }
    check_noise(particles, noise)?;
    let headings = aligned_headings(particles, arena, cfg, noise);
    let acc = sfm_accelerations(particles, arena, cfg)?;
    particles
        .iter()
        .zip(headings)
        .zip(acc)
        .map(|((p, theta), a)| {
            let combined = cfg.v0 * DVec2::from_angle(theta) + a * cfg.dt;
            let norm = combined.length();
            let mut next = if norm > 0.0 && norm.is_finite() {
                ParticleState::new(p.position, cfg.v0 * combined / norm, p.mass, p.diameter)
            } else {
                ParticleState::with_heading(p.position, p.heading, cfg.v0, p.mass, p.diameter)
            };
            next.position += cfg.dt * next.velocity;
            arena.apply_boundary(&next)
        })
        .collect()
}

/// Pure social force step: `substeps` explicit Euler sub-intervals with the
/// position advanced by the updated velocity.
pub fn step_sfm(particles: &[ParticleState], arena: &Arena, cfg: &ModelConfig) -> Result<Vec<ParticleState>> {
    if cfg.model != ModelKind::Sfm {
        return Err(SimError::InvalidConfig(format!("step_sfm called for model {}", cfg.model)));
    }
    let h = cfg.dt / f64::from(cfg.substeps);
    let mut state = particles.to_vec();
    for _ in 0..cfg.substeps {
        let acc = sfm_accelerations(&state, arena, cfg)?;
        for (p, a) in state.iter_mut().zip(acc) {
            p.velocity += a * h;
            p.position += p.velocity * h;
            p.sync_heading();
            *p = arena.apply_boundary(p)?;
        }
    }
    Ok(state)
}

/// How initial headings are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InitialHeadings {
    /// Uniform in (-pi, pi] for Vicsek models, along +x for force models.
    #[default]
    ModelDefault,
    /// Every heading uniform in (-pi, pi].
    Random,
    /// Every particle starts along +x.
    Aligned,
}

/// Maximum placement attempts per particle for overlap-free insertion.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 100_000;

/// Random insertion in the first half of the corridor.
///
/// Force models get overlap-free positions (particle-particle and
/// particle-wall) by rejection sampling.
pub fn initialize<R: Rng + ?Sized>(
    n: usize,
    arena: &Arena,
    cfg: &ModelConfig,
    headings: InitialHeadings,
    rng: &mut R,
) -> Result<Vec<ParticleState>> {
    cfg.validate_with(arena)?;
    let x_max = 0.5 * arena.lx;
    let density = n as f64 / arena.area();
    let setup_err = |reason: String| SimError::Setup { n, density, reason };
    let (y_lo, y_hi) = if cfg.model.has_forces() {
        (0.5 * cfg.diameter, arena.ly - 0.5 * cfg.diameter)
    } else {
        (0.0, arena.ly)
    };
    let random_heading = match headings {
        InitialHeadings::ModelDefault => cfg.model.is_vicsek(),
        InitialHeadings::Random => true,
        InitialHeadings::Aligned => false,
    };

    let mut positions: Vec<DVec2> = Vec::with_capacity(n);
    for k in 0..n {
        let mut placed = None;
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            let candidate = DVec2::new(rng.gen_range(0.0..x_max), rng.gen_range(y_lo..y_hi));
            let clear = !cfg.model.has_forces()
                || positions
                    .iter()
                    .all(|&q| arena.distance(candidate, q) >= cfg.diameter);
            if clear {
                placed = Some(candidate);
                break;
            }
        }
        match placed {
            Some(p) => positions.push(p),
            None => {
                return Err(setup_err(format!(
                    "no overlap-free position for particle {k} after {MAX_PLACEMENT_ATTEMPTS} attempts"
                )))
            }
        }
    }
    let particles = positions
        .into_iter()
        .map(|pos| {
            let heading = if random_heading {
                // (-pi, pi]
                -rng.gen_range(-PI..PI)
            } else {
                0.0
            };
            ParticleState::with_heading(pos, heading, cfg.v0, cfg.mass, cfg.diameter)
        })
        .collect();
    Ok(particles)
}

/// A running simulation: immutable configuration plus the current snapshot.
#[derive(Debug, Clone)]
pub struct Simulation<R> {
    pub arena: Arena,
    pub config: ModelConfig,
    pub particles: Vec<ParticleState>,
    pub time: u64,
    rng: R,
}

impl<R: Rng> Simulation<R> {
    pub fn new(arena: Arena, config: ModelConfig, particles: Vec<ParticleState>, rng: R) -> Result<Self> {
        config.validate_with(&arena)?;
        if let Some(p) = particles.iter().find(|p| !arena.contains(p.position)) {
            return Err(SimError::InvalidState(format!(
                "initial position {} outside the arena",
                p.position
            )));
        }
        Ok(Simulation {
            arena,
            config,
            particles,
            time: 0,
            rng,
        })
    }

    pub fn step(&mut self) -> Result<()> {
        let next = match self.config.model {
            ModelKind::Vm | ModelKind::VmDd => {
                let noise = draw_noise(self.particles.len(), self.config.eta, &mut self.rng);
                step_vm(&self.particles, &self.arena, &self.config, &noise)?
            }
            ModelKind::SfmVm => {
                let noise = draw_noise(self.particles.len(), self.config.eta, &mut self.rng);
                step_sfm_vm(&self.particles, &self.arena, &self.config, &noise)?
            }
            ModelKind::Sfm => step_sfm(&self.particles, &self.arena, &self.config)?,
        };
        self.particles = next;
        self.time += 1;
        Ok(())
    }

    pub fn has_walls(&self) -> bool {
        self.arena.bc_y == Boundary::BounceBack
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn heading_particle(x: f64, y: f64, heading: f64) -> ParticleState {
        ParticleState::with_heading(DVec2::new(x, y), heading, 0.5, 80.0, 0.7)
    }

    #[test]
    fn vicsek_heading_examples() {
        let ps = [heading_particle(0.0, 0.0, 0.3)];
        assert!((vicsek_heading(0, &ps, &[0], 0.0) - 0.3).abs() < 1e-15);

        let ps = [heading_particle(0.0, 0.0, FRAC_PI_4), heading_particle(0.1, 0.0, -FRAC_PI_4)];
        assert!(vicsek_heading(0, &ps, &[0, 1], 0.0).abs() < 1e-15);

        let ps = [
            heading_particle(0.0, 0.0, 0.0),
            heading_particle(0.1, 0.0, FRAC_PI_2),
            heading_particle(0.2, 0.0, FRAC_PI_2),
        ];
        let got = vicsek_heading(0, &ps, &[0, 1, 2], 0.1);
        assert!((got - (2.0f64.atan2(1.0) + 0.1)).abs() < 1e-12);
        assert!((got - 1.2071).abs() < 1e-4);
    }

    #[test]
    fn desired_direction_examples() {
        assert_eq!(apply_desired_direction(0.0, 0.0), 0.0);
        assert!((apply_desired_direction(FRAC_PI_2, 0.0) - FRAC_PI_4).abs() < 1e-15);
        assert!((apply_desired_direction(-0.6, 0.2) + 0.4).abs() < 1e-15);
    }

    #[test]
    fn ballistic_single_particle() {
        let arena = Arena::corridor(600.0, 4.5);
        let cfg = ModelConfig::default();
        let ps = [heading_particle(10.0, 2.0, 0.0)];
        let next = step_vm(&ps, &arena, &cfg, &[0.0]).unwrap();
        assert!((next[0].position - DVec2::new(10.5, 2.0)).length() < 1e-15);
    }

    #[test]
    fn two_mutual_neighbours_average() {
        let arena = Arena::corridor(600.0, 4.5);
        let cfg = ModelConfig::default();
        let ps = [heading_particle(10.0, 2.0, 0.0), heading_particle(10.5, 2.0, FRAC_PI_2)];
        let next = step_vm(&ps, &arena, &cfg, &[0.0, 0.0]).unwrap();
        for p in &next {
            assert!((p.heading - FRAC_PI_4).abs() < 1e-15);
        }
    }

    #[test]
    fn sfm_vm_reduces_to_vm_without_forces() {
        // single particle cruising along +x at the centerline: dv/dt ~ 0
        let arena = Arena::corridor(600.0, 4.5);
        let cfg = ModelConfig::with_model(ModelKind::SfmVm);
        let ps = [heading_particle(10.0, 2.25, 0.0)];
        let next = step_sfm_vm(&ps, &arena, &cfg, &[0.0]).unwrap();
        assert!((next[0].velocity - DVec2::new(0.5, 0.0)).length() < 1e-9);
    }

    #[test]
    fn sfm_vm_combination_normalises() {
        // v_VM = (0.5, 0), dv/dt dt = (0, 0.5): a particle moving along +y at
        // the centerline has desire acceleration (1, -1) * ... so build the
        // combination by hand through the public pieces instead.
        let v_vm = DVec2::new(0.5, 0.0);
        let kick = DVec2::new(0.0, 0.5);
        let c = v_vm + kick;
        let v = 0.5 * c / c.length();
        let expected = 0.5 * DVec2::new(1.0, 1.0) / 2f64.sqrt();
        assert!((v - expected).length() < 1e-15);
    }

    #[test]
    fn sfm_relaxes_towards_desired_speed() {
        let arena = Arena::corridor(600.0, 4.5);
        let cfg = ModelConfig::with_model(ModelKind::Sfm);
        let ps = [ParticleState::new(DVec2::new(10.0, 2.25), DVec2::ZERO, 80.0, 0.7)];
        let next = step_sfm(&ps, &arena, &cfg).unwrap();
        let expected = 0.5 * (1.0 - (-2.0f64).exp());
        assert!((next[0].speed() - expected).abs() < 0.01 * expected);
    }

    #[test]
    fn sfm_cruise_translates() {
        let arena = Arena::corridor(600.0, 4.5);
        let cfg = ModelConfig::with_model(ModelKind::Sfm);
        let ps = [heading_particle(10.0, 2.25, 0.0)];
        let next = step_sfm(&ps, &arena, &cfg).unwrap();
        assert!((next[0].position - DVec2::new(10.5, 2.25)).length() < 1e-9);
    }

    #[test]
    fn overlapping_pair_separates_with_opposite_momentum() {
        let arena = Arena::corridor(600.0, 4.5);
        let cfg = ModelConfig::with_model(ModelKind::Sfm);
        let ps = [
            ParticleState::new(DVec2::new(10.0, 2.25), DVec2::ZERO, 80.0, 0.7),
            ParticleState::new(DVec2::new(10.5, 2.25), DVec2::ZERO, 80.0, 0.7),
        ];
        let next = step_sfm(&ps, &arena, &cfg).unwrap();
        let gap = next[1].position.x - next[0].position.x;
        assert!(gap > 0.7, "gap {gap}");
        // the desire force adds the same impulse to both; remove it
        let p0 = 80.0 * next[0].velocity.x;
        let p1 = 80.0 * next[1].velocity.x;
        let common = 0.5 * (p0 + p1);
        assert!(p0 - common < 0.0 && p1 - common > 0.0);
        assert!(((p0 - common) + (p1 - common)).abs() < 1e-9);
    }

    #[test]
    fn wrong_model_is_rejected() {
        let arena = Arena::corridor(600.0, 4.5);
        let cfg = ModelConfig::with_model(ModelKind::Sfm);
        assert!(step_vm(&[], &arena, &cfg, &[]).is_err());
    }

    #[test]
    fn initialization_respects_region_and_overlap() {
        use rand::SeedableRng;
        let arena = Arena::corridor(600.0, 4.5);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let cfg = ModelConfig::with_model(ModelKind::SfmVm);
        let ps = initialize(300, &arena, &cfg, InitialHeadings::ModelDefault, &mut rng).unwrap();
        for (i, p) in ps.iter().enumerate() {
            assert!(p.position.x < 300.0);
            assert!(p.position.y >= 0.35 && p.position.y <= 4.15);
            assert_eq!(p.heading, 0.0);
            for q in &ps[i + 1..] {
                assert!(arena.distance(p.position, q.position) >= 0.7);
            }
        }
    }

    #[test]
    fn impossible_packing_reports_density() {
        use rand::SeedableRng;
        let arena = Arena::corridor(4.0, 1.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let cfg = ModelConfig::with_model(ModelKind::SfmVm);
        let err = initialize(50, &arena, &cfg, InitialHeadings::ModelDefault, &mut rng).unwrap_err();
        assert!(matches!(err, SimError::Setup { n: 50, .. }));
        assert!(err.to_string().contains("density"));
    }
}
