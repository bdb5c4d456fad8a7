//! Chain-quality measurements: autocorrelation, integrated autocorrelation
//! time, effective sample size, burn-in detection, acceptance rate, summary
//! statistics and mode occupancy.

use std::fmt::Write as _;

use rustfft::{num_complex::Complex, FftPlanner};
use thiserror::Error;

use crate::samplers::Trace;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosticsError {
    #[error("series has zero variance")]
    Degenerate,
    #[error("log densities never settle into the final-quarter band")]
    NotConverged,
    #[error("{0}")]
    InvalidInput(String),
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample autocorrelations `ρ̂_0..=ρ̂_max_lag`, normalized by the total sum of
/// squares (the biased estimator).
pub fn autocorrelation(series: &[f64], max_lag: usize) -> Result<Vec<f64>, DiagnosticsError> {
    if series.len() <= max_lag {
        return Err(DiagnosticsError::InvalidInput(format!(
            "series of length {} is too short for lag {max_lag}",
            series.len()
        )));
    }
    let m = mean(series);
    let centered: Vec<f64> = series.iter().map(|x| x - m).collect();
    let ss: f64 = centered.iter().map(|x| x * x).sum();
    if !(ss > 0.0) {
        return Err(DiagnosticsError::Degenerate);
    }
    Ok((0..=max_lag)
        .map(|k| centered.iter().zip(&centered[k..]).map(|(a, b)| a * b).sum::<f64>() / ss)
        .collect())
}

/// All autocorrelations `ρ̂_0..ρ̂_{n-1}` via a zero-padded FFT.
pub fn autocorrelation_fft(series: &[f64]) -> Result<Vec<f64>, DiagnosticsError> {
    let n = series.len();
    if n < 2 {
        return Err(DiagnosticsError::InvalidInput("need at least two values".into()));
    }
    let m = mean(series);
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = series
        .iter()
        .map(|x| Complex::new(x - m, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(size)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    let c0 = buf[0].re;
    // Relative to the largest deviation; FFT round-off leaves ~1e-16 residue
    // on constant input.
    let scale = series.iter().map(|x| (x - m).abs()).fold(0.0, f64::max);
    if !(c0 > 0.0) || scale == 0.0 {
        return Err(DiagnosticsError::Degenerate);
    }
    Ok(buf[..n].iter().map(|c| c.re / c0).collect())
}

/// Integrated autocorrelation time with initial-positive-sequence truncation:
/// `τ = -1 + 2 Σ_{m=0}^{M} (ρ̂_{2m} + ρ̂_{2m+1})`, where every paired sum up to
/// `M` is strictly positive. Floored at 1.
pub fn iat(series: &[f64]) -> Result<f64, DiagnosticsError> {
    let rho = autocorrelation_fft(series)?;
    Ok(iat_from_autocorrelation(&rho))
}

pub fn iat_from_autocorrelation(rho: &[f64]) -> f64 {
    let mut total = 0.0;
    for pair in rho.chunks_exact(2) {
        let gamma = pair[0] + pair[1];
        if gamma <= 0.0 {
            break;
        }
        total += gamma;
    }
    (-1.0 + 2.0 * total).max(1.0)
}

/// Per-coordinate IATs of the rows from `burnin` on. Constant coordinates
/// report `None`.
pub fn coordinate_iats(trace: &Trace, burnin: usize) -> Result<Vec<Option<f64>>, DiagnosticsError> {
    if burnin >= trace.len() {
        return Err(DiagnosticsError::InvalidInput(format!(
            "burn-in {burnin} must be smaller than the trace length {}",
            trace.len()
        )));
    }
    (0..trace.dim())
        .map(|j| match iat(&trace.column(j)[burnin..]) {
            Ok(t) => Ok(Some(t)),
            Err(DiagnosticsError::Degenerate) => Ok(None),
            Err(e) => Err(e),
        })
        .collect()
}

/// Coordinate with the largest IAT and that IAT.
pub fn monitored_iat(trace: &Trace, burnin: usize) -> Result<(usize, f64), DiagnosticsError> {
    coordinate_iats(trace, burnin)?
        .into_iter()
        .enumerate()
        .filter_map(|(j, t)| t.map(|t| (j, t)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or(DiagnosticsError::Degenerate)
}

/// `(n - burnin) / max(τ, 1)` for the coordinate with the largest IAT.
pub fn ess(trace: &Trace, burnin: usize) -> Result<f64, DiagnosticsError> {
    if burnin >= trace.len() {
        return Err(DiagnosticsError::InvalidInput(format!(
            "burn-in {burnin} must be smaller than the trace length {}",
            trace.len()
        )));
    }
    let remaining = trace.len() - burnin;
    if remaining < 2 {
        return Ok(remaining as f64);
    }
    let (_, tau) = monitored_iat(trace, burnin)?;
    Ok(ess_from_iat(remaining, tau))
}

pub fn ess_from_iat(remaining: usize, tau: f64) -> f64 {
    remaining as f64 / tau.max(1.0)
}

pub const DEFAULT_BURNIN_WINDOW: usize = 50;
pub const DEFAULT_BURNIN_BAND: f64 = 2.0;

/// First index whose trailing window mean falls inside the band
/// `m* ± c·s*`, where `m*` and `s*` are the mean and standard deviation of
/// the last quarter of the series.
///
/// A series whose last quarter is still trending (least-squares slope above
/// `s*/len` per step) is reported as not converged.
pub fn detect_burnin(log_density: &[f64], window: usize, c: f64) -> Result<usize, DiagnosticsError> {
    if window == 0 || !(c > 0.0) {
        return Err(DiagnosticsError::InvalidInput(
            "window and band width must be positive".into(),
        ));
    }
    let n = log_density.len();
    if n < 4 * window {
        return Err(DiagnosticsError::InvalidInput(format!(
            "series of length {n} is shorter than 4 windows of {window}"
        )));
    }
    let tail = &log_density[n - n / 4..];
    let m_star = mean(tail);
    let s_star = (tail.iter().map(|x| (x - m_star).powi(2)).sum::<f64>() / tail.len() as f64).sqrt();

    let len = tail.len() as f64;
    let t_mean = (len - 1.0) / 2.0;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, y) in tail.iter().enumerate() {
        let dt = t as f64 - t_mean;
        sxy += dt * (y - m_star);
        sxx += dt * dt;
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    if slope > s_star / len {
        return Err(DiagnosticsError::NotConverged);
    }

    let (lo, hi) = (m_star - c * s_star, m_star + c * s_star);
    let w = window as f64;
    let mut sum: f64 = log_density[..window].iter().sum();
    for start in 0..=n - window {
        if start > 0 {
            sum += log_density[start + window - 1] - log_density[start - 1];
        }
        let wm = sum / w;
        if wm >= lo && wm <= hi {
            return Ok(start);
        }
    }
    Err(DiagnosticsError::NotConverged)
}

/// Accepted proposals over proposals made. Traces without proposal
/// counters (for example ones read back from CSV) fall back to the
/// fraction of rows flagged as accepted.
pub fn acceptance_rate(trace: &Trace) -> f64 {
    if trace.proposals > 0 {
        trace.acceptances as f64 / trace.proposals as f64
    } else if trace.is_empty() {
        0.0
    } else {
        flag_acceptance_rate(trace)
    }
}

/// Fraction of rows whose accepted flag is set.
pub fn flag_acceptance_rate(trace: &Trace) -> f64 {
    trace.accepted().iter().filter(|&&a| a).count() as f64 / trace.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct DimSummary {
    pub mean: f64,
    pub variance: f64,
    pub q025: f64,
    pub median: f64,
    pub q975: f64,
}

/// Linear interpolation between order statistics of a sorted slice.
pub fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    let pos = prob * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize_series(xs: &[f64]) -> Result<DimSummary, DiagnosticsError> {
    if xs.len() < 2 {
        return Err(DiagnosticsError::InvalidInput(
            "summary needs at least two states".into(),
        ));
    }
    // Welford
    let (mut m, mut m2) = (0.0, 0.0);
    for (i, &x) in xs.iter().enumerate() {
        let delta = x - m;
        m += delta / (i + 1) as f64;
        m2 += delta * (x - m);
    }
    let variance = m2 / (xs.len() - 1) as f64;
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(DimSummary {
        mean: m,
        variance,
        q025: quantile_sorted(&sorted, 0.025),
        median: quantile_sorted(&sorted, 0.5),
        q975: quantile_sorted(&sorted, 0.975),
    })
}

/// Mean, unbiased variance and 2.5/50/97.5% quantiles per coordinate.
pub fn summarize(trace: &Trace) -> Result<Vec<DimSummary>, DiagnosticsError> {
    (0..trace.dim()).map(|j| summarize_series(&trace.column(j))).collect()
}

/// Fraction of states within Euclidean distance `radius` of each center.
pub fn mode_occupancy(trace: &Trace, centers: &[Vec<f64>], radius: f64) -> Vec<f64> {
    let n = trace.len().max(1) as f64;
    let r2 = radius * radius;
    centers
        .iter()
        .map(|c| {
            trace
                .states()
                .filter(|s| s.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() <= r2)
                .count() as f64
                / n
        })
        .collect()
}

/// Diagnostics for one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    pub model: String,
    pub sampler: String,
    pub n: usize,
    pub acceptance_rate: f64,
    pub burnin: usize,
    pub lag: usize,
    /// Per-coordinate IAT after burn-in; `None` for constant coordinates.
    pub iat: Vec<Option<f64>>,
    pub monitored: usize,
    pub monitored_iat: f64,
    pub ess: f64,
    /// Statistics of the burned-in, thinned sample.
    pub summary: Vec<DimSummary>,
    /// Wall-clock sampling time, when known.
    pub sampling_seconds: Option<f64>,
    pub warnings: Vec<String>,
}

impl DiagnosticsReport {
    pub fn seconds_per_effective_sample(&self) -> Option<f64> {
        self.sampling_seconds.map(|s| s / self.ess)
    }

    pub fn effective_samples_per_second(&self) -> Option<f64> {
        self.sampling_seconds.map(|s| self.ess / s)
    }

    /// One `key = value` line per field.
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |v| v.to_string());
        let _ = writeln!(out, "model = {}", self.model);
        let _ = writeln!(out, "sampler = {}", self.sampler);
        let _ = writeln!(out, "n = {}", self.n);
        let _ = writeln!(out, "acceptance_rate = {}", self.acceptance_rate);
        let _ = writeln!(out, "burnin = {}", self.burnin);
        let _ = writeln!(out, "lag = {}", self.lag);
        let iats: Vec<String> = self.iat.iter().map(|t| opt(*t)).collect();
        let _ = writeln!(out, "iat = {}", iats.join(","));
        let _ = writeln!(out, "monitored = q{}", self.monitored + 1);
        let _ = writeln!(out, "monitored_iat = {}", self.monitored_iat);
        let _ = writeln!(out, "ess = {}", self.ess);
        let _ = writeln!(out, "sampling_seconds = {}", opt(self.sampling_seconds));
        let _ = writeln!(
            out,
            "seconds_per_effective_sample = {}",
            opt(self.seconds_per_effective_sample())
        );
        for (j, s) in self.summary.iter().enumerate() {
            let _ = writeln!(
                out,
                "q{} = mean {} variance {} q025 {} median {} q975 {}",
                j + 1,
                s.mean,
                s.variance,
                s.q025,
                s.median,
                s.q975
            );
        }
        for w in &self.warnings {
            let _ = writeln!(out, "warning = {w}");
        }
        out
    }

    pub const CSV_HEADER: &'static str =
        "model,sampler,n,burnin,lag,iat,acceptance_rate,ess,execution_seconds,seconds_per_effective_sample";

    pub fn to_csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(String::new, |v| format!("{v:.6}"));
        format!(
            "{},{},{},{},{},{:.4},{:.4},{:.1},{},{}",
            self.model,
            self.sampler,
            self.n,
            self.burnin,
            self.lag,
            self.monitored_iat,
            self.acceptance_rate,
            self.ess,
            opt(self.sampling_seconds),
            opt(self.seconds_per_effective_sample())
        )
    }
}
