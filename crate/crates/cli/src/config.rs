//! TOML configuration files.
//!
//! Units: lengths in metres, times in seconds (one step is `dt`), forces in
//! newtons, masses in kilograms. Every key is optional; unknown keys are
//! rejected.
//!
//! ```toml
//! [model]              # model constants, see ModelConfig
//! model = "sfm-vm"     # vm | vm-dd | sfm | sfm-vm
//! eta = 0.5            # noise amplitude in [0, 1]
//! v0 = 0.5             # m/s
//! tau_rt = 0.5         # s
//!
//! [arena]
//! lx = 600.0           # m, always periodic
//! ly = 4.5             # m
//! bc_y = "bounce-back" # or "periodic"
//!
//! [run]
//! n = 300
//! steps = 5000
//! warmup = 2500
//! seed = 0
//! runs = 1
//! init = "model-default"   # model-default | random | aligned
//!
//! [run.record]
//! phi_every = 1
//! width = false
//! profile_every = 100      # optional
//! snapshot_every = 500     # optional
//! profile_dx = 5.0         # m
//!
//! [sweep]                  # only read by `corridor sweep`
//! models = ["vm-pbc", "vm-bbbc"]
//! etas = [0.05, 0.1]
//! v0s = [0.5]              # default: model.v0
//! lys = [2.5, 4.5]         # default: arena.ly, n and lx fixed
//! sizes = [75, 150, 300]   # optional: N at the density of [arena]/[run]
//! runs = 50
//! ```

use std::path::Path;

use anyhow::{bail, Context};
use corridor_core::dynamics::InitialHeadings;
use corridor_core::runner::{self, Geometry, ModelVariant, RecordFlags, RunSpec, SweepSpec};
use corridor_core::{Arena, Boundary, ModelConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArenaSection {
    pub lx: f64,
    pub ly: f64,
    pub bc_y: Boundary,
}

impl Default for ArenaSection {
    fn default() -> Self {
        ArenaSection {
            lx: 600.0,
            ly: 4.5,
            bc_y: Boundary::BounceBack,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub n: usize,
    pub steps: u64,
    pub warmup: u64,
    /// Base seed, at most 2^63 - 1 so it survives TOML integers.
    pub seed: u64,
    pub runs: usize,
    pub init: InitialHeadings,
    pub record: RecordFlags,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            n: 300,
            steps: runner::DEFAULT_STEPS,
            warmup: runner::DEFAULT_WARMUP,
            seed: 0,
            runs: 1,
            init: InitialHeadings::ModelDefault,
            record: RecordFlags::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub models: Vec<String>,
    pub etas: Vec<f64>,
    pub v0s: Option<Vec<f64>>,
    pub lys: Option<Vec<f64>>,
    pub sizes: Option<Vec<usize>>,
    pub runs: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            models: vec!["vm-pbc".into()],
            etas: vec![0.1],
            v0s: None,
            lys: None,
            sizes: None,
            runs: runner::DEFAULT_RUNS,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub model: ModelConfig,
    pub arena: ArenaSection,
    pub run: RunSection,
    pub sweep: Option<SweepSection>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> anyhow::Result<ConfigFile> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> anyhow::Result<ConfigFile> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn run_spec(&self) -> anyhow::Result<RunSpec> {
        if self.run.seed > i64::MAX as u64 {
            bail!("seed {} exceeds 2^63 - 1", self.run.seed);
        }
        let spec = RunSpec {
            config: self.model,
            arena: Arena::new(self.arena.lx, self.arena.ly, Boundary::Periodic, self.arena.bc_y)?,
            n: self.run.n,
            steps: self.run.steps,
            warmup: self.run.warmup,
            seed: self.run.seed,
            init: self.run.init,
            record: self.run.record,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn sweep_spec(&self) -> anyhow::Result<SweepSpec> {
        let Some(sweep) = &self.sweep else {
            bail!("configuration has no [sweep] section");
        };
        let mut base = RunSpec {
            config: self.model,
            arena: Arena::new(self.arena.lx, self.arena.ly, Boundary::Periodic, self.arena.bc_y)?,
            n: self.run.n,
            steps: self.run.steps,
            warmup: self.run.warmup,
            seed: self.run.seed,
            init: self.run.init,
            record: self.run.record,
        };
        // ensemble statistics only need phi
        base.record.width = false;
        base.record.profile_every = None;
        base.record.snapshot_every = None;
        let variants = sweep
            .models
            .iter()
            .map(|m| ModelVariant::parse(m))
            .collect::<Result<Vec<_>, _>>()?;
        let lys = sweep.lys.clone().unwrap_or_else(|| vec![self.arena.ly]);
        let geometries = match &sweep.sizes {
            Some(sizes) => {
                let rho = base.density();
                lys.iter()
                    .flat_map(|&ly| sizes.iter().map(move |&n| Geometry::at_density(n, rho, ly)))
                    .collect()
            }
            None => lys
                .iter()
                .map(|&ly| Geometry {
                    n: self.run.n,
                    lx: self.arena.lx,
                    ly,
                })
                .collect(),
        };
        let spec = SweepSpec {
            base,
            variants,
            etas: sweep.etas.clone(),
            v0s: sweep.v0s.clone().unwrap_or_else(|| vec![self.model.v0]),
            geometries,
            runs: sweep.runs,
            seed: self.run.seed,
        };
        spec.validate()?;
        Ok(spec)
    }
}
