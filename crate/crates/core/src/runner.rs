//! Single runs, seeded ensembles and parameter sweeps.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ModelConfig, ModelKind};
use crate::dynamics::{initialize, InitialHeadings, Simulation};
use crate::error::{Result, SimError};
use crate::geometry::{Arena, Boundary};
use crate::observables::{
    cluster_width, default_width_threshold, density_profile, fit_power_law, growth_fit_window, order_parameter,
    stationary_stats, EnsembleStats, PhiNormalization, PowerLawFit, ProfileHistogram, DEFAULT_PROFILE_DX,
};

/// Default number of steps per run for stationary statistics.
pub const DEFAULT_STEPS: u64 = 5000;
/// Default warmup discarded before averaging.
pub const DEFAULT_WARMUP: u64 = 2500;
/// Default steps recorded for width-growth runs.
pub const DEFAULT_WIDTH_STEPS: u64 = 2000;
/// Default runs per parameter set.
pub const DEFAULT_RUNS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RecordFlags {
    /// Record phi every this many steps (t = 0 included).
    pub phi_every: u64,
    /// Attach the cluster width to every phi record.
    pub width: bool,
    pub profile_every: Option<u64>,
    pub snapshot_every: Option<u64>,
    pub profile_dx: f64,
    /// Occupancy threshold for the width; `1/N` when unset.
    pub width_threshold: Option<f64>,
}

impl Default for RecordFlags {
    fn default() -> Self {
        RecordFlags {
            phi_every: 1,
            width: false,
            profile_every: None,
            snapshot_every: None,
            profile_dx: DEFAULT_PROFILE_DX,
            width_threshold: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub config: ModelConfig,
    pub arena: Arena,
    pub n: usize,
    pub steps: u64,
    pub warmup: u64,
    pub seed: u64,
    pub init: InitialHeadings,
    pub record: RecordFlags,
}

impl RunSpec {
    /// Paper-style corridor run: periodic in x, walls or periodic in y.
    pub fn corridor(model: ModelKind, bc_y: Boundary, eta: f64) -> RunSpec {
        RunSpec {
            config: ModelConfig {
                eta,
                ..ModelConfig::with_model(model)
            },
            arena: Arena {
                lx: 600.0,
                ly: 4.5,
                bc_x: Boundary::Periodic,
                bc_y,
            },
            n: 300,
            steps: DEFAULT_STEPS,
            warmup: DEFAULT_WARMUP,
            seed: 0,
            init: InitialHeadings::ModelDefault,
            record: RecordFlags::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate_with(&self.arena)?;
        if self.n == 0 {
            return Err(SimError::InvalidConfig("particle count must be positive".into()));
        }
        if self.steps <= self.warmup {
            return Err(SimError::InvalidConfig(format!(
                "steps ({}) must exceed warmup ({})",
                self.steps, self.warmup
            )));
        }
        if self.record.phi_every == 0 {
            return Err(SimError::InvalidConfig("phi_every must be at least 1".into()));
        }
        if self.record.profile_every == Some(0) || self.record.snapshot_every == Some(0) {
            return Err(SimError::InvalidConfig("recording intervals must be at least 1".into()));
        }
        Ok(())
    }

    pub fn density(&self) -> f64 {
        self.n as f64 / self.arena.area()
    }

    pub fn normalization(&self) -> PhiNormalization {
        if self.config.model.constant_speed() {
            PhiNormalization::NominalSpeed
        } else {
            PhiNormalization::SpeedSum
        }
    }

    pub fn width_threshold(&self) -> f64 {
        self.record
            .width_threshold
            .unwrap_or_else(|| default_width_threshold(self.n))
    }

    /// Seed of run `index` of an ensemble built on this spec.
    pub fn run_seed(&self, index: usize) -> u64 {
        derive_seed(self.seed, &[self.config.model.id(), index as u64])
    }
}

/// SplitMix64 finaliser.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed from a base seed and a path of coordinates (model id, grid
/// coordinates, run index, ...), folded through `mix64`.
///
/// Each child seed keys its own ChaCha8 generator, so distinct children give
/// unrelated streams rather than offsets into one sequence.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix64(base), |acc, &c| mix64(acc ^ mix64(c)))
}

pub fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesRecord {
    pub t: u64,
    pub phi: f64,
    pub width: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRow {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub heading: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRecord {
    pub t: u64,
    pub particles: Vec<SnapshotRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub seed: u64,
    pub config: ModelConfig,
    pub arena: Arena,
    pub n: usize,
    pub normalization: PhiNormalization,
    pub records: Vec<SeriesRecord>,
    pub profiles: Vec<(u64, ProfileHistogram)>,
    pub snapshots: Vec<SnapshotRecord>,
}

impl TimeSeries {
    pub fn phi(&self) -> Vec<(u64, f64)> {
        self.records.iter().map(|r| (r.t, r.phi)).collect()
    }

    pub fn widths(&self) -> Vec<(u64, f64)> {
        self.records
            .iter()
            .filter_map(|r| r.width.map(|w| (r.t, w)))
            .collect()
    }
}

/// Runs one simulation with the seed in `spec`.
pub fn run_single(spec: &RunSpec) -> Result<TimeSeries> {
    spec.validate()?;
    let mut rng = rng_for(spec.seed);
    let particles = initialize(spec.n, &spec.arena, &spec.config, spec.init, &mut rng)?;
    let mut sim = Simulation::new(spec.arena, spec.config, particles, rng)?;
    let norm = spec.normalization();
    let threshold = spec.width_threshold();

    let mut series = TimeSeries {
        seed: spec.seed,
        config: spec.config,
        arena: spec.arena,
        n: spec.n,
        normalization: norm,
        records: Vec::with_capacity((spec.steps / spec.record.phi_every + 1) as usize),
        profiles: Vec::new(),
        snapshots: Vec::new(),
    };
    loop {
        let t = sim.time;
        let rec = &spec.record;
        if t % rec.phi_every == 0 {
            let phi = order_parameter(&sim.particles, spec.config.v0, norm)?;
            let width = if rec.width {
                let prof = density_profile(&sim.particles, &spec.arena, rec.profile_dx)?;
                Some(cluster_width(&prof, spec.arena.bc_x, threshold).width)
            } else {
                None
            };
            series.records.push(SeriesRecord { t, phi, width });
        }
        if rec.profile_every.is_some_and(|k| t % k == 0) {
            series
                .profiles
                .push((t, density_profile(&sim.particles, &spec.arena, rec.profile_dx)?));
        }
        if rec.snapshot_every.is_some_and(|k| t % k == 0) {
            series.snapshots.push(SnapshotRecord {
                t,
                particles: sim
                    .particles
                    .iter()
                    .enumerate()
                    .map(|(id, p)| SnapshotRow {
                        id,
                        x: p.position.x,
                        y: p.position.y,
                        vx: p.velocity.x,
                        vy: p.velocity.y,
                        heading: p.heading,
                    })
                    .collect(),
            });
        }
        if t >= spec.steps {
            break;
        }
        sim.step()?;
    }
    Ok(series)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleOutcome {
    pub stats: EnsembleStats,
    /// Width fit of the run-averaged `w(t)`, when widths were recorded.
    pub width_fit: Option<PowerLawFit>,
    /// Per-run series, ordered by run index.
    pub series: Vec<TimeSeries>,
}

/// Runs `runs` independent simulations (seeds from `RunSpec::run_seed`) and
/// aggregates them. Runs execute on the current rayon pool; the fold is in
/// run-index order, so the result does not depend on scheduling.
pub fn run_ensemble(spec: &RunSpec, runs: usize) -> Result<EnsembleOutcome> {
    if runs == 0 {
        return Err(SimError::InvalidConfig("an ensemble needs at least one run".into()));
    }
    spec.validate()?;
    let series: Vec<TimeSeries> = (0..runs)
        .into_par_iter()
        .map(|k| {
            let run = RunSpec {
                seed: spec.run_seed(k),
                ..spec.clone()
            };
            run_single(&run)
        })
        .collect::<Result<_>>()?;
    let phis: Vec<Vec<(u64, f64)>> = series.iter().map(TimeSeries::phi).collect();
    let mut stats = stationary_stats(&phis, spec.warmup, spec.arena.area())?;
    let width_fit = if spec.record.width {
        let mean = mean_width(&series);
        let (lo, hi) = growth_fit_window(&mean);
        match fit_power_law(&mean, lo, hi) {
            Ok(fit) => Some(fit),
            Err(e) => {
                log::warn!("width fit failed: {e}");
                None
            }
        }
    } else {
        None
    };
    if let Some(fit) = width_fit {
        stats.alpha = Some(fit.alpha);
        stats.alpha_stderr = Some(fit.stderr);
    }
    Ok(EnsembleOutcome {
        stats,
        width_fit,
        series,
    })
}

/// Run-averaged `w(t)` over the times every run recorded.
pub fn mean_width(series: &[TimeSeries]) -> Vec<(f64, f64)> {
    let mut acc: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for s in series {
        for (t, w) in s.widths() {
            let e = acc.entry(t).or_insert((0.0, 0));
            e.0 += w;
            e.1 += 1;
        }
    }
    acc.into_iter()
        .filter(|(_, (_, c))| *c == series.len())
        .map(|(t, (sum, c))| (t as f64, sum / c as f64))
        .collect()
}

/// A model together with its transverse boundary rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModelVariant {
    pub model: ModelKind,
    pub bc_y: Boundary,
}

impl ModelVariant {
    pub const VM_PBC: ModelVariant = ModelVariant {
        model: ModelKind::Vm,
        bc_y: Boundary::Periodic,
    };
    pub const VM_BBBC: ModelVariant = ModelVariant {
        model: ModelKind::Vm,
        bc_y: Boundary::BounceBack,
    };
    pub const VM_DD: ModelVariant = ModelVariant {
        model: ModelKind::VmDd,
        bc_y: Boundary::BounceBack,
    };
    pub const SFM_VM: ModelVariant = ModelVariant {
        model: ModelKind::SfmVm,
        bc_y: Boundary::BounceBack,
    };
    pub const SFM: ModelVariant = ModelVariant {
        model: ModelKind::Sfm,
        bc_y: Boundary::BounceBack,
    };

    pub fn label(&self) -> String {
        match (self.model, self.bc_y) {
            (ModelKind::Vm, Boundary::Periodic) => "vm-pbc".into(),
            (ModelKind::Vm, Boundary::BounceBack) => "vm-bbbc".into(),
            (ModelKind::VmDd, Boundary::BounceBack) => "vm-dd".into(),
            (ModelKind::VmDd, Boundary::Periodic) => "vm-dd-pbc".into(),
            (m, _) => m.label().into(),
        }
    }

    pub fn parse(label: &str) -> Result<ModelVariant> {
        Ok(match label {
            "vm-pbc" | "vm" => Self::VM_PBC,
            "vm-bbbc" => Self::VM_BBBC,
            "vm-dd" | "vm-dd-bbbc" => Self::VM_DD,
            "vm-dd-pbc" => ModelVariant {
                model: ModelKind::VmDd,
                bc_y: Boundary::Periodic,
            },
            "sfm-vm" | "sfm+vm" => Self::SFM_VM,
            "sfm" => Self::SFM,
            other => return Err(SimError::InvalidConfig(format!("unknown model variant '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub n: usize,
    pub lx: f64,
    pub ly: f64,
}

impl Geometry {
    /// Corridor of width `ly` holding `n` particles at density `rho`.
    pub fn at_density(n: usize, rho: f64, ly: f64) -> Geometry {
        Geometry {
            n,
            lx: n as f64 / (rho * ly),
            ly,
        }
    }

    pub fn density(&self) -> f64 {
        self.n as f64 / (self.lx * self.ly)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    /// Template for every grid point: model constants, steps, warmup, recording.
    pub base: RunSpec,
    pub variants: Vec<ModelVariant>,
    pub etas: Vec<f64>,
    pub v0s: Vec<f64>,
    pub geometries: Vec<Geometry>,
    pub runs: usize,
    pub seed: u64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let empty = |name: &str| Err(SimError::InvalidConfig(format!("sweep axis '{name}' is empty")));
        if self.variants.is_empty() {
            return empty("models");
        }
        if self.etas.is_empty() {
            return empty("eta");
        }
        if self.v0s.is_empty() {
            return empty("v0");
        }
        if self.geometries.is_empty() {
            return empty("geometry");
        }
        if self.runs == 0 {
            return Err(SimError::InvalidConfig("runs per point must be at least 1".into()));
        }
        for point in self.points() {
            point.spec.validate()?;
        }
        Ok(())
    }

    /// Every grid point in table order: model, geometry, v0, eta.
    /// The pure social force model has no noise and is evaluated once at eta = 0.
    pub fn points(&self) -> Vec<SweepPoint> {
        let mut out = Vec::new();
        for variant in &self.variants {
            let etas: Vec<f64> = if variant.model == ModelKind::Sfm {
                vec![0.0]
            } else {
                self.etas.clone()
            };
            for geom in &self.geometries {
                for &v0 in &self.v0s {
                    for &eta in &etas {
                        let key = PointKey::new(variant, eta, v0, geom);
                        let mut spec = self.base.clone();
                        spec.config.model = variant.model;
                        spec.config.eta = eta;
                        spec.config.v0 = v0;
                        spec.arena = Arena {
                            lx: geom.lx,
                            ly: geom.ly,
                            bc_x: Boundary::Periodic,
                            bc_y: variant.bc_y,
                        };
                        spec.n = geom.n;
                        spec.seed = derive_seed(
                            self.seed,
                            &[
                                variant.model.id(),
                                variant.bc_y as u64,
                                geom.n as u64,
                                geom.lx.to_bits(),
                                geom.ly.to_bits(),
                                v0.to_bits(),
                                eta.to_bits(),
                            ],
                        );
                        out.push(SweepPoint {
                            variant: *variant,
                            key,
                            spec,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub variant: ModelVariant,
    pub key: PointKey,
    pub spec: RunSpec,
}

/// Identity of a sweep grid point, exact in the float bit patterns.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PointKey {
    pub model: String,
    pub eta: u64,
    pub v0: u64,
    pub n: usize,
    pub lx: u64,
    pub ly: u64,
}

impl PointKey {
    pub fn new(variant: &ModelVariant, eta: f64, v0: f64, geom: &Geometry) -> PointKey {
        PointKey {
            model: variant.label(),
            eta: eta.to_bits(),
            v0: v0.to_bits(),
            n: geom.n,
            lx: geom.lx.to_bits(),
            ly: geom.ly.to_bits(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub model: String,
    pub eta: f64,
    pub v0: f64,
    pub lx: f64,
    pub ly: f64,
    pub n: usize,
    pub rho: f64,
    pub phi_stat: f64,
    pub var_phi: f64,
    pub susceptibility: f64,
    pub runs: usize,
    pub seed: u64,
    pub spec_hash: u64,
}

impl SweepRow {
    pub fn key(&self) -> PointKey {
        PointKey {
            model: self.model.clone(),
            eta: self.eta.to_bits(),
            v0: self.v0.to_bits(),
            n: self.n,
            lx: self.lx.to_bits(),
            ly: self.ly.to_bits(),
        }
    }
}

/// FNV-1a hash of the spec's debug form, used as a provenance tag.
pub fn spec_hash(spec: &RunSpec) -> u64 {
    format!("{spec:?}").bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Runs every grid point not already in `completed`, calling `on_row` as each
/// new point finishes. Returns the full table in grid order.
///
/// A failing point aborts the sweep; rows already handed to `on_row` stay valid.
pub fn run_sweep<F>(sweep: &SweepSpec, completed: &BTreeMap<PointKey, SweepRow>, mut on_row: F) -> Result<Vec<SweepRow>>
where
    F: FnMut(&SweepRow) -> Result<()>,
{
    sweep.validate()?;
    let mut table = Vec::new();
    for point in sweep.points() {
        if let Some(row) = completed.get(&point.key) {
            table.push(row.clone());
            continue;
        }
        let outcome = run_ensemble(&point.spec, sweep.runs).map_err(|e| match e {
            SimError::Setup { n, density, reason } => SimError::Setup {
                n,
                density,
                reason: format!("{} at eta = {}, v0 = {}: {reason}", point.key.model, point.spec.config.eta, point.spec.config.v0),
            },
            other => other,
        })?;
        let s = outcome.stats;
        let row = SweepRow {
            model: point.key.model.clone(),
            eta: point.spec.config.eta,
            v0: point.spec.config.v0,
            lx: point.spec.arena.lx,
            ly: point.spec.arena.ly,
            n: point.spec.n,
            rho: point.spec.density(),
            phi_stat: s.phi_stat,
            var_phi: s.var_phi,
            susceptibility: s.susceptibility,
            runs: s.runs,
            seed: point.spec.seed,
            spec_hash: spec_hash(&point.spec),
        };
        on_row(&row)?;
        table.push(row);
    }
    Ok(table)
}

/// Which sweep axis forms the rows of a level plot (columns are always eta).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelAxis {
    Ly,
    V0,
}

/// `phi_stat` on an (row axis) x (eta) grid for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelMatrix {
    pub model: String,
    pub axis: LevelAxis,
    /// Value of the axis held fixed (v0 for `Ly` rows, Ly for `V0` rows).
    pub fixed: f64,
    pub rows: Vec<f64>,
    pub etas: Vec<f64>,
    pub values: Vec<Vec<Option<f64>>>,
}

/// Level-plot matrices of `phi_stat` for every model and fixed value found in `table`.
pub fn level_matrices(table: &[SweepRow], axis: LevelAxis) -> Vec<LevelMatrix> {
    let mut groups: BTreeMap<(String, u64), Vec<&SweepRow>> = BTreeMap::new();
    for row in table {
        let fixed = match axis {
            LevelAxis::Ly => row.v0,
            LevelAxis::V0 => row.ly,
        };
        groups.entry((row.model.clone(), fixed.to_bits())).or_default().push(row);
    }
    let sorted_unique = |mut v: Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    groups
        .into_iter()
        .map(|((model, fixed), rows)| {
            let row_value = |r: &SweepRow| match axis {
                LevelAxis::Ly => r.ly,
                LevelAxis::V0 => r.v0,
            };
            let row_axis = sorted_unique(rows.iter().map(|r| row_value(r)).collect());
            let etas = sorted_unique(rows.iter().map(|r| r.eta).collect());
            let mut values = vec![vec![None; etas.len()]; row_axis.len()];
            for r in &rows {
                let i = row_axis.iter().position(|&v| v == row_value(r)).unwrap_or(0);
                let j = etas.iter().position(|&v| v == r.eta).unwrap_or(0);
                values[i][j] = Some(r.phi_stat);
            }
            LevelMatrix {
                model,
                axis,
                fixed: f64::from_bits(fixed),
                rows: row_axis,
                etas,
                values,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_vm(eta: f64) -> RunSpec {
        RunSpec {
            n: 40,
            steps: 60,
            warmup: 30,
            seed: 7,
            arena: Arena {
                lx: 40.0,
                ly: 4.5,
                bc_x: Boundary::Periodic,
                bc_y: Boundary::Periodic,
            },
            ..RunSpec::corridor(ModelKind::Vm, Boundary::Periodic, eta)
        }
    }

    #[test]
    fn seeds_differ_per_run() {
        let spec = small_vm(0.3);
        let seeds: std::collections::BTreeSet<u64> = (0..1000).map(|k| spec.run_seed(k)).collect();
        assert_eq!(seeds.len(), 1000);
    }

    #[test]
    fn aligned_noiseless_run_stays_ordered() {
        let spec = RunSpec {
            steps: 100,
            warmup: 10,
            init: InitialHeadings::Aligned,
            ..small_vm(0.0)
        };
        let series = run_single(&spec).unwrap();
        assert_eq!(series.records.len(), 101);
        for r in &series.records {
            assert!((r.phi - 1.0).abs() < 1e-12, "t = {}: {}", r.t, r.phi);
        }
    }

    #[test]
    fn repeat_is_bit_identical() {
        let spec = small_vm(0.4);
        assert_eq!(run_single(&spec).unwrap(), run_single(&spec).unwrap());
    }

    #[test]
    fn single_run_ensemble_matches_single_run_stats() {
        let spec = small_vm(0.4);
        let ens = run_ensemble(&spec, 1).unwrap();
        let single = run_single(&RunSpec {
            seed: spec.run_seed(0),
            ..spec.clone()
        })
        .unwrap();
        let direct = stationary_stats(&[single.phi()], spec.warmup, spec.arena.area()).unwrap();
        assert_eq!(ens.stats, direct);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = small_vm(0.1);
        spec.warmup = spec.steps;
        assert!(run_single(&spec).is_err());
        let spec = RunSpec { n: 0, ..small_vm(0.1) };
        assert!(run_single(&spec).is_err());
        assert!(run_ensemble(&small_vm(0.1), 0).is_err());
    }

    fn small_sweep() -> SweepSpec {
        SweepSpec {
            base: small_vm(0.0),
            variants: vec![ModelVariant::VM_PBC, ModelVariant::SFM],
            etas: vec![0.1, 0.5],
            v0s: vec![0.5],
            geometries: vec![Geometry { n: 40, lx: 40.0, ly: 4.5 }],
            runs: 2,
            seed: 3,
        }
    }

    #[test]
    fn sfm_collapses_eta_axis() {
        let points = small_sweep().points();
        assert_eq!(points.len(), 3);
        assert_eq!(points[2].spec.config.eta, 0.0);
        assert_eq!(points[2].spec.arena.bc_y, Boundary::BounceBack);
    }

    #[test]
    fn sweep_resume_reproduces_table() {
        let sweep = small_sweep();
        let full = run_sweep(&sweep, &BTreeMap::new(), |_| Ok(())).unwrap();
        let partial: BTreeMap<PointKey, SweepRow> = full[..1].iter().map(|r| (r.key(), r.clone())).collect();
        let mut fresh = 0;
        let resumed = run_sweep(&sweep, &partial, |_| {
            fresh += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(fresh, 2);
        assert_eq!(full, resumed);
    }

    #[test]
    fn level_matrix_layout() {
        let rows: Vec<SweepRow> = [2.5, 4.5]
            .iter()
            .flat_map(|&ly| {
                [0.0, 0.3].into_iter().map(move |eta| SweepRow {
                    model: "vm-bbbc".into(),
                    eta,
                    v0: 0.5,
                    lx: 600.0,
                    ly,
                    n: 300,
                    rho: 300.0 / (600.0 * ly),
                    phi_stat: ly + eta,
                    var_phi: 0.0,
                    susceptibility: 0.0,
                    runs: 1,
                    seed: 0,
                    spec_hash: 0,
                })
            })
            .collect();
        let m = level_matrices(&rows, LevelAxis::Ly);
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].rows, vec![2.5, 4.5]);
        assert_eq!(m[0].etas, vec![0.0, 0.3]);
        assert_eq!(m[0].values[1][1], Some(4.8));
    }

    #[test]
    fn fixed_density_geometry() {
        let g = Geometry::at_density(300, 1.0 / 9.0, 4.5);
        assert!((g.lx - 600.0).abs() < 1e-9);
        assert!((g.density() - 1.0 / 9.0).abs() < 1e-15);
    }
}
