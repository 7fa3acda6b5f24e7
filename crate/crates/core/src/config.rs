//! Model parameters. Units: metres, seconds, kilograms, newtons.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::geometry::{Arena, Boundary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// Vicsek alignment with angular noise.
    Vm,
    /// Vicsek with the desired-direction heading transform.
    VmDd,
    /// Social force model (desire, social and granular forces).
    Sfm,
    /// Social forces combined with Vicsek alignment, renormalised to `v0`.
    SfmVm,
}

impl ModelKind {
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Vm => "vm",
            ModelKind::VmDd => "vm-dd",
            ModelKind::Sfm => "sfm",
            ModelKind::SfmVm => "sfm-vm",
        }
    }

    /// Stable small integer used when deriving per-run seeds.
    pub fn id(self) -> u64 {
        match self {
            ModelKind::Vm => 1,
            ModelKind::VmDd => 2,
            ModelKind::Sfm => 3,
            ModelKind::SfmVm => 4,
        }
    }

    pub fn is_vicsek(self) -> bool {
        matches!(self, ModelKind::Vm | ModelKind::VmDd)
    }

    pub fn has_forces(self) -> bool {
        matches!(self, ModelKind::Sfm | ModelKind::SfmVm)
    }

    /// Models whose speed is pinned to `v0` after every step.
    pub fn constant_speed(self) -> bool {
        self != ModelKind::Sfm
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "vm" => Ok(ModelKind::Vm),
            "vm-dd" => Ok(ModelKind::VmDd),
            "sfm" => Ok(ModelKind::Sfm),
            "sfm-vm" | "sfm+vm" => Ok(ModelKind::SfmVm),
            other => Err(SimError::InvalidConfig(format!("unknown model '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub model: ModelKind,
    /// Noise amplitude in [0, 1]. Must be zero for the pure social force model.
    pub eta: f64,
    /// Self-propulsion speed, also the desired speed of the desire force (m/s).
    pub v0: f64,
    /// Alignment radius (m).
    pub r0: f64,
    /// Time step (s).
    pub dt: f64,
    /// Particle mass (kg).
    pub mass: f64,
    /// Particle diameter (m).
    pub diameter: f64,
    /// Social force strength A (N).
    pub a_social: f64,
    /// Social force range B (m).
    pub b_social: f64,
    /// Contact compression constant k (kg/s^2).
    pub k_compress: f64,
    /// Sliding friction constant kappa (kg/(m s)).
    pub kappa_friction: f64,
    /// Velocity relaxation time of the desire force (s).
    pub tau_rt: f64,
    /// Preferred heading of the desired-direction variant (rad).
    pub theta_des: f64,
    /// Explicit Euler sub-intervals per `dt` for the pure social force model.
    pub substeps: u32,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            model: ModelKind::Vm,
            eta: 0.0,
            v0: 0.5,
            r0: 1.0,
            dt: 1.0,
            mass: 80.0,
            diameter: 0.7,
            a_social: 2000.0,
            b_social: 0.08,
            k_compress: 1.2e5,
            kappa_friction: 2.4e5,
            tau_rt: 0.5,
            theta_des: 0.0,
            substeps: 100,
        }
    }
}

impl ModelConfig {
    pub fn with_model(model: ModelKind) -> Self {
        ModelConfig {
            model,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SimError::InvalidConfig(msg));
        if !(0.0..=1.0).contains(&self.eta) {
            return bad(format!("eta must lie in [0, 1], got {}", self.eta));
        }
        if self.model == ModelKind::Sfm && self.eta != 0.0 {
            return bad(format!(
                "eta = {} given for the sfm model, but the external noise eta is not defined in the pure social force model",
                self.eta
            ));
        }
        let positive = [
            ("v0", self.v0),
            ("r0", self.r0),
            ("dt", self.dt),
            ("mass", self.mass),
            ("diameter", self.diameter),
            ("b_social", self.b_social),
            ("tau_rt", self.tau_rt),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return bad(format!("{name} must be positive, got {value}"));
            }
        }
        let non_negative = [
            ("a_social", self.a_social),
            ("k_compress", self.k_compress),
            ("kappa_friction", self.kappa_friction),
        ];
        for (name, value) in non_negative {
            if !(value.is_finite() && value >= 0.0) {
                return bad(format!("{name} must be non-negative, got {value}"));
            }
        }
        if !self.theta_des.is_finite() {
            return bad("theta_des must be finite".into());
        }
        if self.substeps == 0 {
            return bad("substeps must be at least 1".into());
        }
        Ok(())
    }

    /// Checks the model against the arena it will run in.
    pub fn validate_with(&self, arena: &Arena) -> Result<()> {
        self.validate()?;
        arena.validate()?;
        if self.model.has_forces() && arena.bc_y != Boundary::BounceBack {
            return Err(SimError::InvalidConfig(format!(
                "model {} interacts with walls and needs bc_y = bounce-back",
                self.model
            )));
        }
        if self.model.has_forces() && arena.ly <= self.diameter {
            return Err(SimError::InvalidConfig(format!(
                "corridor width {} must exceed the particle diameter {}",
                arena.ly, self.diameter
            )));
        }
        Ok(())
    }

    /// Distance beyond which the social force drops below 1e-12 N.
    pub fn social_cutoff(&self) -> f64 {
        if self.a_social <= 1e-12 {
            return self.diameter;
        }
        self.diameter + self.b_social * (self.a_social / 1e-12).ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        for kind in [ModelKind::Vm, ModelKind::VmDd, ModelKind::Sfm, ModelKind::SfmVm] {
            ModelConfig::with_model(kind).validate().unwrap();
        }
    }

    #[test]
    fn eta_out_of_range() {
        let cfg = ModelConfig {
            eta: 2.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn sfm_rejects_noise() {
        let cfg = ModelConfig {
            model: ModelKind::Sfm,
            eta: 0.3,
            ..Default::default()
        };
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains("external noise eta is not defined"), "{msg}");
    }

    #[test]
    fn force_models_need_walls() {
        let cfg = ModelConfig::with_model(ModelKind::SfmVm);
        let arena = Arena::new(600.0, 4.5, Boundary::Periodic, Boundary::Periodic).unwrap();
        assert!(cfg.validate_with(&arena).is_err());
        assert!(cfg.validate_with(&Arena::corridor(600.0, 4.5)).is_ok());
    }

    #[test]
    fn cutoff_bounds_social_force() {
        let cfg = ModelConfig::default();
        let rc = cfg.social_cutoff();
        let f = cfg.a_social * ((cfg.diameter - rc) / cfg.b_social).exp();
        assert!((f - 1e-12).abs() < 1e-15);
    }

    #[test]
    fn parse_model_names() {
        assert_eq!("sfm+vm".parse::<ModelKind>().unwrap(), ModelKind::SfmVm);
        assert_eq!("VM_DD".parse::<ModelKind>().unwrap(), ModelKind::VmDd);
        assert!("boids".parse::<ModelKind>().is_err());
    }
}
