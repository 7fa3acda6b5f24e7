//! Order parameter, stationary statistics, density profile, cluster width and
//! power-law fitting.

use glam::DVec2;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::geometry::{Arena, Boundary};
use crate::particle::ParticleState;

/// How the summed velocity is normalised in the order parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhiNormalization {
    /// `|sum v| / (N v0)`, exact for constant-speed models.
    NominalSpeed,
    /// `|sum v| / sum |v|`, used for the pure social force model.
    SpeedSum,
}

impl PhiNormalization {
    pub fn label(self) -> &'static str {
        match self {
            PhiNormalization::NominalSpeed => "nominal-speed",
            PhiNormalization::SpeedSum => "speed-sum",
        }
    }
}

pub fn order_parameter(particles: &[ParticleState], v0: f64, norm: PhiNormalization) -> Result<f64> {
    if particles.is_empty() {
        return Err(SimError::UndefinedInput("order parameter of an empty system".into()));
    }
    let total: DVec2 = particles.iter().map(|p| p.velocity).sum();
    let denom = match norm {
        PhiNormalization::NominalSpeed => particles.len() as f64 * v0,
        PhiNormalization::SpeedSum => particles.iter().map(|p| p.speed()).sum(),
    };
    if denom == 0.0 {
        // all particles at rest
        return Ok(0.0);
    }
    let phi = total.length() / denom;
    // rounding can push a fully aligned state a few ulps above 1
    Ok(if phi > 1.0 && phi - 1.0 < 1e-12 { 1.0 } else { phi })
}

/// Pooled statistics of the order parameter after warmup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub phi_stat: f64,
    pub var_phi: f64,
    /// `var_phi * lx * ly`.
    pub susceptibility: f64,
    pub runs: usize,
    pub samples: usize,
    /// First and second half of the retained window agree within 3 standard errors.
    pub stationary: bool,
    pub alpha: Option<f64>,
    pub alpha_stderr: Option<f64>,
}

/// Pools `phi(t)` for `t > warmup` across runs.
///
/// Each series is a list of `(t, phi)` samples. The variance is the
/// population variance `<phi^2> - <phi>^2` of the pooled sample.
pub fn stationary_stats(series: &[Vec<(u64, f64)>], warmup: u64, area: f64) -> Result<EnsembleStats> {
    let retained: Vec<Vec<f64>> = series
        .iter()
        .map(|s| s.iter().filter(|(t, _)| *t > warmup).map(|&(_, phi)| phi).collect())
        .collect();
    let pooled: Vec<f64> = retained.iter().flatten().copied().collect();
    if pooled.is_empty() {
        return Err(SimError::UndefinedInput(format!(
            "no samples after a warmup of {warmup} steps"
        )));
    }
    let (mean, var) = mean_var(&pooled);

    let mut first = Vec::new();
    let mut second = Vec::new();
    for r in &retained {
        let half = r.len() / 2;
        first.extend_from_slice(&r[..half]);
        second.extend_from_slice(&r[half..]);
    }
    let stationary = if first.is_empty() || second.is_empty() {
        true
    } else {
        let (m1, v1) = mean_var(&first);
        let (m2, v2) = mean_var(&second);
        let se = (v1 / first.len() as f64 + v2 / second.len() as f64).sqrt();
        (m1 - m2).abs() <= 3.0 * se
    };

    Ok(EnsembleStats {
        phi_stat: mean,
        var_phi: var,
        susceptibility: var * area,
        runs: series.len(),
        samples: pooled.len(),
        stationary,
        alpha: None,
        alpha_stderr: None,
    })
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.max(0.0))
}

/// Histogram of particle x-positions, normalised by N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileHistogram {
    pub dx: f64,
    pub counts: Vec<usize>,
    pub n: usize,
}

impl ProfileHistogram {
    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    /// `P(x_b, t)`: fraction of particles in bin `b`.
    pub fn value(&self, bin: usize) -> f64 {
        self.counts[bin] as f64 / self.n as f64
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.bins()).map(|b| self.value(b)).collect()
    }

    /// Same histogram rotated by `shift` bins (a periodic translation).
    pub fn rotated(&self, shift: usize) -> ProfileHistogram {
        let mut counts = self.counts.clone();
        let k = shift % counts.len().max(1);
        counts.rotate_right(k);
        ProfileHistogram { counts, ..*self }
    }
}

/// Default profile bin width (m).
pub const DEFAULT_PROFILE_DX: f64 = 5.0;

/// Density profile along x with half-open bins `[b dx, (b + 1) dx)`.
pub fn density_profile(particles: &[ParticleState], arena: &Arena, dx: f64) -> Result<ProfileHistogram> {
    if dx.is_nan() || dx <= 0.0 {
        return Err(SimError::InvalidConfig(format!("bin width must be positive, got {dx}")));
    }
    let ratio = arena.lx / dx;
    let bins = ratio.round();
    if bins < 1.0 || (ratio - bins).abs() > 1e-9 * ratio.max(1.0) {
        return Err(SimError::InvalidConfig(format!(
            "corridor length {} is not a multiple of the bin width {dx}",
            arena.lx
        )));
    }
    let bins = bins as usize;
    let mut counts = vec![0usize; bins];
    for p in particles {
        let b = ((p.position.x / dx).floor().max(0.0) as usize).min(bins - 1);
        counts[b] += 1;
    }
    Ok(ProfileHistogram {
        dx,
        counts,
        n: particles.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterWidth {
    pub width: f64,
    /// No bin exceeded the threshold; `width` is zero.
    pub empty: bool,
}

/// Extent of the occupied region of a profile.
///
/// Bins with `P > threshold` are occupied (the default threshold `1/N`
/// keeps bins holding at least two particles). On a periodic axis the width
/// is the shortest circular arc covering every occupied bin.
pub fn cluster_width(profile: &ProfileHistogram, bc_x: Boundary, threshold: f64) -> ClusterWidth {
    let occupied: Vec<bool> = (0..profile.bins()).map(|b| profile.value(b) > threshold).collect();
    let nbins = occupied.len();
    let Some(first) = occupied.iter().position(|&o| o) else {
        return ClusterWidth { width: 0.0, empty: true };
    };
    let last = occupied.iter().rposition(|&o| o).unwrap_or(first);
    let span = match bc_x {
        Boundary::BounceBack => last - first + 1,
        Boundary::Periodic => {
            // longest run of empty bins, wrapping around
            let mut longest = 0;
            let mut run = 0;
            for k in 0..nbins {
                let b = (first + 1 + k) % nbins;
                if occupied[b] {
                    longest = longest.max(run);
                    run = 0;
                } else {
                    run += 1;
                }
            }
            nbins - longest.max(run)
        }
    };
    ClusterWidth {
        width: span as f64 * profile.dx,
        empty: false,
    }
}

/// Threshold `1/N` used for the cluster width.
pub fn default_width_threshold(n: usize) -> f64 {
    1.0 / n as f64
}

/// Least-squares fit of `w = prefactor * t^alpha` in log-log space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub alpha: f64,
    pub stderr: f64,
    pub prefactor: f64,
    pub points: usize,
}

/// Ordinary least squares of `ln w` on `ln t` over `t_min <= t <= t_max`.
pub fn fit_power_law(series: &[(f64, f64)], t_min: f64, t_max: f64) -> Result<PowerLawFit> {
    let window: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|&(t, _)| t >= t_min && t <= t_max)
        .collect();
    if window.len() < 5 {
        return Err(SimError::Fit(format!(
            "need at least 5 points in [{t_min}, {t_max}], found {}",
            window.len()
        )));
    }
    if let Some(&(t, w)) = window.iter().find(|&&(t, w)| !(t > 0.0 && w > 0.0)) {
        return Err(SimError::Fit(format!("non-positive sample (t = {t}, w = {w}) in fit window")));
    }
    let xs: Vec<f64> = window.iter().map(|&(t, _)| t.ln()).collect();
    let ys: Vec<f64> = window.iter().map(|&(_, w)| w.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(SimError::Fit("all fit points share the same t".into()));
    }
    let alpha = sxy / sxx;
    let intercept = my - alpha * mx;
    let ssr: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + alpha * x);
            r * r
        })
        .sum();
    let stderr = (ssr / (n - 2.0) / sxx).sqrt();
    Ok(PowerLawFit {
        alpha,
        stderr,
        prefactor: intercept.exp(),
        points: window.len(),
    })
}

/// Steps skipped at the start of a width-growth fit.
pub const FIT_TRANSIENT_STEPS: f64 = 10.0;

/// Default fit window `(t_min, t_max)` for a width series.
///
/// Skips the first `FIT_TRANSIENT_STEPS` steps. If `w` is exactly flat over
/// the last decade of time while it still grew before that, the trailing
/// plateau is cut at the first time `w` reached its final value.
pub fn growth_fit_window(series: &[(f64, f64)]) -> (f64, f64) {
    let t_min = FIT_TRANSIENT_STEPS + 1.0;
    let Some(&(t_end, w_end)) = series.last() else {
        return (t_min, t_min);
    };
    let decade: Vec<&(f64, f64)> = series.iter().filter(|(t, _)| *t >= t_end / 10.0).collect();
    let flat_tail = decade.len() >= 2 && decade.iter().all(|(_, w)| *w == w_end);
    if flat_tail {
        let grew_before = series
            .iter()
            .filter(|(t, _)| *t >= t_min && *t < t_end / 10.0)
            .any(|(_, w)| *w != w_end);
        if grew_before {
            // first sample of the final constant run
            let mut reached = t_end;
            for &(t, w) in series.iter().rev() {
                if w != w_end {
                    break;
                }
                reached = t;
            }
            let kept = series.iter().filter(|(t, _)| *t >= t_min && *t <= reached).count();
            if kept >= 5 {
                return (t_min, reached);
            }
        }
    }
    (t_min, t_end)
}
