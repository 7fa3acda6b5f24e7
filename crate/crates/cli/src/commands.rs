//! The `simulate`, `sweep` and `analyze` subcommands.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use corridor_core::observables::{fit_power_law, growth_fit_window, stationary_stats, PowerLawFit};
use corridor_core::runner::{
    self, level_matrices, run_ensemble, run_sweep, spec_hash, LevelAxis, ModelVariant, PointKey, SweepRow,
};
use corridor_core::observables::EnsembleStats;
use corridor_core::ModelKind;
use serde::{Deserialize, Serialize};

use crate::config::ConfigFile;
use crate::table::{self, float, Table};

/// Command-line values that replace configuration keys.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub model: Option<String>,
    pub eta: Option<f64>,
    pub v0: Option<f64>,
    pub ly: Option<f64>,
    pub steps: Option<u64>,
    pub warmup: Option<u64>,
    pub runs: Option<usize>,
    pub seed: Option<u64>,
    pub snapshot_every: Option<u64>,
    pub fit_width: bool,
}

impl Overrides {
    /// Applies the overrides to a single-run configuration.
    pub fn apply_run(&self, cfg: &mut ConfigFile) -> anyhow::Result<()> {
        if let Some(label) = &self.model {
            match ModelKind::from_str(label) {
                Ok(kind) => cfg.model.model = kind,
                Err(_) => {
                    let variant = ModelVariant::parse(label)?;
                    cfg.model.model = variant.model;
                    cfg.arena.bc_y = variant.bc_y;
                }
            }
        }
        if let Some(eta) = self.eta {
            cfg.model.eta = eta;
        }
        if let Some(v0) = self.v0 {
            cfg.model.v0 = v0;
        }
        if let Some(ly) = self.ly {
            cfg.arena.ly = ly;
        }
        if let Some(steps) = self.steps {
            cfg.run.steps = steps;
        }
        if let Some(warmup) = self.warmup {
            cfg.run.warmup = warmup;
        }
        if let Some(runs) = self.runs {
            cfg.run.runs = runs;
        }
        if let Some(seed) = self.seed {
            cfg.run.seed = seed;
        }
        if let Some(every) = self.snapshot_every {
            cfg.run.record.snapshot_every = Some(every);
        }
        if self.fit_width {
            cfg.run.record.width = true;
        }
        Ok(())
    }

    /// Applies the overrides to a sweep: axis values collapse the matching
    /// sweep axis to a single point.
    pub fn apply_sweep(&self, cfg: &mut ConfigFile) -> anyhow::Result<()> {
        let Some(mut sweep) = cfg.sweep.clone() else {
            bail!("configuration has no [sweep] section");
        };
        if let Some(label) = &self.model {
            ModelVariant::parse(label)?;
            sweep.models = vec![label.clone()];
        }
        if let Some(eta) = self.eta {
            sweep.etas = vec![eta];
        }
        if let Some(v0) = self.v0 {
            sweep.v0s = Some(vec![v0]);
        }
        if let Some(ly) = self.ly {
            sweep.lys = Some(vec![ly]);
        }
        if let Some(runs) = self.runs {
            sweep.runs = runs;
        }
        let run_only = Overrides {
            steps: self.steps,
            warmup: self.warmup,
            seed: self.seed,
            ..Overrides::default()
        };
        run_only.apply_run(cfg)?;
        cfg.sweep = Some(sweep);
        Ok(())
    }
}

/// Provenance written next to every output set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub created_unix: u64,
    pub command: String,
    /// How phi is normalised, per model.
    pub phi_normalization: BTreeMap<String, String>,
    pub tau_rt: f64,
    pub seed: u64,
    /// Per-run seeds as hex strings (they may exceed TOML's integer range).
    pub run_seeds: Vec<String>,
    pub spec: ConfigFile,
}

impl Manifest {
    fn new(command: &str, cfg: &ConfigFile, models: &[ModelKind], run_seeds: Vec<u64>) -> Manifest {
        let phi_normalization = models
            .iter()
            .map(|&m| {
                let spec = runner::RunSpec::corridor(m, corridor_core::Boundary::BounceBack, 0.0);
                (m.label().to_string(), spec.normalization().label().to_string())
            })
            .collect();
        Manifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            created_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            command: command.to_string(),
            phi_normalization,
            tau_rt: cfg.model.tau_rt,
            seed: cfg.run.seed,
            run_seeds: run_seeds.into_iter().map(|s| format!("{s:#018x}")).collect(),
            spec: cfg.clone(),
        }
    }

    fn write(&self, dir: &Path) -> anyhow::Result<()> {
        write_file(&dir.join("manifest.toml"), &toml::to_string(self)?)
    }

    pub fn read(dir: &Path) -> anyhow::Result<Option<Manifest>> {
        let path = dir.join("manifest.toml");
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let manifest = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok(Some(manifest))
    }
}

fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub const SUMMARY_HEADER: &str = "model,eta,v0,Lx,Ly,N,rho,phi_stat,var_phi,susceptibility,runs,stationary,alpha,alpha_stderr";

fn fit_cells(fit: Option<&PowerLawFit>) -> (String, String) {
    fit.map(|f| (float(f.alpha), float(f.stderr))).unwrap_or_default()
}

/// Runs an ensemble and writes per-run series, optional snapshots and
/// profiles, the mean width, a one-row summary and the manifest.
pub fn simulate(cfg: &ConfigFile, out: &Path) -> anyhow::Result<()> {
    let spec = cfg.run_spec()?;
    if cfg.run.runs == 0 {
        bail!("runs must be at least 1");
    }
    create_dir(out)?;
    log::info!(
        "simulating {} runs of {} (N = {}, eta = {}, {} steps)",
        cfg.run.runs,
        spec.config.model,
        spec.n,
        spec.config.eta,
        spec.steps
    );
    let outcome = run_ensemble(&spec, cfg.run.runs)?;
    for (k, series) in outcome.series.iter().enumerate() {
        write_file(&out.join(format!("series_{k:03}.csv")), &table::series_table(series))?;
        if !series.snapshots.is_empty() {
            write_file(&out.join(format!("snapshots_{k:03}.csv")), &table::snapshot_table(series))?;
        }
        if !series.profiles.is_empty() {
            write_file(&out.join(format!("profiles_{k:03}.csv")), &table::profile_table(&series.profiles))?;
        }
    }
    if spec.record.width {
        let mut text = String::from("t,w\n");
        for (t, w) in runner::mean_width(&outcome.series) {
            text.push_str(&format!("{},{}\n", t as u64, float(w)));
        }
        write_file(&out.join("width.csv"), &text)?;
    }
    let s = &outcome.stats;
    let (alpha, stderr) = fit_cells(outcome.width_fit.as_ref());
    let summary = format!(
        "{SUMMARY_HEADER}\n{},{},{},{},{},{},{},{},{},{},{},{},{alpha},{stderr}\n",
        spec.config.model,
        float(spec.config.eta),
        float(spec.config.v0),
        float(spec.arena.lx),
        float(spec.arena.ly),
        spec.n,
        float(spec.density()),
        float(s.phi_stat),
        float(s.var_phi),
        float(s.susceptibility),
        s.runs,
        s.stationary,
    );
    write_file(&out.join("summary.csv"), &summary)?;
    let seeds = (0..cfg.run.runs).map(|k| spec.run_seed(k)).collect();
    Manifest::new("simulate", cfg, &[spec.config.model], seeds).write(out)?;
    if !s.stationary {
        log::warn!("phi did not pass the stationarity check after warmup {}", spec.warmup);
    }
    Ok(())
}

/// Rows of an earlier `sweep.csv` that still match the sweep's grid, spec and
/// run count. A truncated final line from an interrupted write is dropped.
fn resumable_rows(path: &Path, sweep: &runner::SweepSpec) -> anyhow::Result<BTreeMap<PointKey, SweepRow>> {
    let mut text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if !text.ends_with('\n') {
        let keep = text.rfind('\n').map(|i| i + 1).unwrap_or(0);
        text.truncate(keep);
    }
    let rows = Table::parse(path, &text)?.parse_sweep()?;
    let points: BTreeMap<PointKey, u64> = sweep
        .points()
        .into_iter()
        .map(|p| (p.key, spec_hash(&p.spec)))
        .collect();
    let mut kept = BTreeMap::new();
    for row in rows {
        let key = row.key();
        match points.get(&key) {
            Some(&hash) if hash == row.spec_hash && row.runs == sweep.runs => {
                kept.insert(key, row);
            }
            _ => log::warn!(
                "discarding stale row {} eta = {} v0 = {} Ly = {} from {}",
                row.model,
                row.eta,
                row.v0,
                row.ly,
                path.display()
            ),
        }
    }
    Ok(kept)
}

/// Runs a parameter sweep. Rows are appended to `sweep.csv` as points finish;
/// the file is rewritten in grid order at the end, followed by level-plot
/// matrices and the manifest.
pub fn sweep(cfg: &ConfigFile, out: &Path, resume: bool) -> anyhow::Result<()> {
    let sweep = cfg.sweep_spec()?;
    create_dir(out)?;
    let path = out.join("sweep.csv");
    let completed = if resume && path.exists() {
        resumable_rows(&path, &sweep)?
    } else {
        BTreeMap::new()
    };
    let total = sweep.points().len();
    log::info!("sweep: {total} points, {} already complete", completed.len());

    let order: Vec<PointKey> = sweep.points().into_iter().map(|p| p.key).collect();
    let mut file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    writeln!(file, "{}", table::SWEEP_HEADER)?;
    for key in &order {
        if let Some(row) = completed.get(key) {
            writeln!(file, "{}", table::sweep_line(row))?;
        }
    }
    file.flush()?;
    let mut done = completed.len();
    let rows = run_sweep(&sweep, &completed, |row| {
        done += 1;
        log::info!("[{done}/{total}] {} eta = {} v0 = {} Ly = {} N = {}", row.model, row.eta, row.v0, row.ly, row.n);
        writeln!(file, "{}", table::sweep_line(row))
            .and_then(|_| file.flush())
            .map_err(|e| corridor_core::SimError::InvalidState(format!("writing {}: {e}", path.display())))
    })?;
    drop(file);
    write_file(&path, &table::sweep_table(&rows))?;
    for axis in [LevelAxis::Ly, LevelAxis::V0] {
        for matrix in level_matrices(&rows, axis) {
            let (name, text) = table::level_table(&matrix);
            write_file(&out.join(name), &text)?;
        }
    }
    let models: Vec<ModelKind> = sweep.variants.iter().map(|v| v.model).collect();
    let seeds = sweep.points().iter().map(|p| p.spec.seed).collect();
    Manifest::new("sweep", cfg, &models, seeds).write(out)
}

#[derive(Debug, Clone, Default)]
pub struct AnalyzeOptions {
    /// Fail unless every series carries a width column, and fit it.
    pub fit_width: bool,
    /// Steps discarded before averaging; defaults to the manifest's warmup,
    /// or half the series length without a manifest.
    pub warmup: Option<u64>,
}

pub const ANALYSIS_HEADER: &str = "dir,model,eta,runs,phi_stat,var_phi,susceptibility,alpha,alpha_stderr,prefactor";

struct SeriesFile {
    phi: Vec<(u64, f64)>,
    width: Option<Vec<(u64, f64)>>,
}

fn read_series(path: &Path) -> anyhow::Result<SeriesFile> {
    let table = Table::read(path)?;
    let with_width = match table.header.as_slice() {
        [t, p] if t == "t" && p == "phi" => false,
        [t, p, w] if t == "t" && p == "phi" && w == "w" => true,
        _ => return Err(table.error(1, "expected header 't,phi' or 't,phi,w'").into()),
    };
    let mut phi = Vec::with_capacity(table.rows.len());
    let mut width = Vec::new();
    for (line, cells) in &table.rows {
        let t: u64 = table.get(*line, cells, 0)?;
        phi.push((t, table.get(*line, cells, 1)?));
        if with_width {
            width.push((t, table.get(*line, cells, 2)?));
        }
    }
    if phi.is_empty() {
        return Err(table.error(1, "no data rows").into());
    }
    Ok(SeriesFile {
        phi,
        width: with_width.then_some(width),
    })
}

fn numbered_files(dir: &Path, prefix: &str) -> anyhow::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading directory {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with(prefix) && n.ends_with(".csv"))
        })
        .collect();
    files.sort();
    Ok(files)
}

/// Ensemble-mean width with every run sampled at the same times.
fn mean_series(runs: &[(PathBuf, Vec<(u64, f64)>)]) -> anyhow::Result<Vec<(f64, f64)>> {
    let (first_path, first) = &runs[0];
    let mut sum: Vec<f64> = vec![0.0; first.len()];
    for (path, run) in runs {
        if run.len() != first.len() || run.iter().zip(first).any(|(a, b)| a.0 != b.0) {
            bail!("{}: time column differs from {}", path.display(), first_path.display());
        }
        for (s, (_, w)) in sum.iter_mut().zip(run) {
            *s += w;
        }
    }
    Ok(first
        .iter()
        .zip(sum)
        .map(|(&(t, _), s)| (t as f64, s / runs.len() as f64))
        .collect())
}

/// Mean profile over runs, keyed by (t, x) in file order.
fn mean_profiles(files: &[PathBuf]) -> anyhow::Result<String> {
    let mut acc: Vec<(String, String, f64)> = Vec::new();
    for (k, path) in files.iter().enumerate() {
        let table = Table::read(path)?;
        if table.header.join(",") != table::PROFILE_HEADER {
            return Err(table.error(1, format!("expected header '{}'", table::PROFILE_HEADER)).into());
        }
        if k > 0 && table.rows.len() != acc.len() {
            bail!("{}: {} profile rows, expected {}", path.display(), table.rows.len(), acc.len());
        }
        for (i, (line, cells)) in table.rows.iter().enumerate() {
            let p: f64 = table.get(*line, cells, 2)?;
            let _: u64 = table.get(*line, cells, 0)?;
            let _: f64 = table.get(*line, cells, 1)?;
            if k == 0 {
                acc.push((cells[0].clone(), cells[1].clone(), p));
            } else if acc[i].0 != cells[0] || acc[i].1 != cells[1] {
                return Err(table.error(*line, "time or bin differs from the first profile file").into());
            } else {
                acc[i].2 += p;
            }
        }
    }
    let mut out = format!("{}\n", table::PROFILE_HEADER);
    for (t, x, p) in acc {
        out.push_str(&format!("{t},{x},{}\n", float(p / files.len() as f64)));
    }
    Ok(out)
}

/// Summarises series directories written by `simulate`: stationary
/// statistics, mean width and its power-law fit, and mean profiles.
pub fn analyze(dirs: &[PathBuf], out: &Path, opts: &AnalyzeOptions) -> anyhow::Result<()> {
    if dirs.is_empty() {
        bail!("no series directories given");
    }
    create_dir(out)?;
    let mut summary = format!("{ANALYSIS_HEADER}\n");
    for (k, dir) in dirs.iter().enumerate() {
        let manifest = Manifest::read(dir)?;
        let files = numbered_files(dir, "series_")?;
        if files.is_empty() {
            bail!("{}: no series_*.csv files", dir.display());
        }
        let mut phis = Vec::new();
        let mut widths = Vec::new();
        for path in &files {
            let s = read_series(path)?;
            match s.width {
                Some(w) => widths.push((path.clone(), w)),
                None if opts.fit_width => {
                    bail!("{}: no w column to fit; record it with `simulate --fit-width`", path.display())
                }
                None => {}
            }
            phis.push(s.phi);
        }
        let last_t = phis[0].last().map(|p| p.0).unwrap_or(0);
        let warmup = opts
            .warmup
            .or(manifest.as_ref().map(|m| m.spec.run.warmup))
            .unwrap_or(last_t / 2);
        let area = manifest.as_ref().map(|m| m.spec.arena.lx * m.spec.arena.ly);
        let stats: EnsembleStats = stationary_stats(&phis, warmup, area.unwrap_or(1.0))
            .with_context(|| format!("{}: stationary statistics", dir.display()))?;

        let mut fit = None;
        if !widths.is_empty() && widths.len() == files.len() {
            let mean = mean_series(&widths)?;
            let mut text = String::from("t,w\n");
            for &(t, w) in &mean {
                text.push_str(&format!("{},{}\n", t as u64, float(w)));
            }
            write_file(&out.join(format!("width_{k:03}.csv")), &text)?;
            let (lo, hi) = growth_fit_window(&mean);
            match fit_power_law(&mean, lo, hi) {
                Ok(f) => fit = Some(f),
                Err(e) if opts.fit_width => bail!("{}: width fit failed: {e}", dir.display()),
                Err(e) => log::warn!("{}: width fit skipped: {e}", dir.display()),
            }
        }
        let profiles = numbered_files(dir, "profiles_")?;
        if !profiles.is_empty() {
            write_file(&out.join(format!("profile_{k:03}.csv")), &mean_profiles(&profiles)?)?;
        }

        let (model, eta) = manifest
            .as_ref()
            .map(|m| (m.spec.model.model.to_string(), float(m.spec.model.eta)))
            .unwrap_or_default();
        let susceptibility = area.map(|_| float(stats.susceptibility)).unwrap_or_default();
        let (alpha, stderr) = fit_cells(fit.as_ref());
        let prefactor = fit.map(|f| float(f.prefactor)).unwrap_or_default();
        summary.push_str(&format!(
            "{},{model},{eta},{},{},{},{susceptibility},{alpha},{stderr},{prefactor}\n",
            dir.display(),
            stats.runs,
            float(stats.phi_stat),
            float(stats.var_phi),
        ));
    }
    write_file(&out.join("analysis.csv"), &summary)
}
