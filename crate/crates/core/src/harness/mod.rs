//! Experiment runner: wires models, samplers and diagnostics together,
//! persists traces and reports, and builds comparison tables.

mod io;
mod presets;
mod spec;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::diagnostics::{
    acceptance_rate, autocorrelation, coordinate_iats, detect_burnin, ess_from_iat, summarize, DiagnosticsError,
    DiagnosticsReport, DEFAULT_BURNIN_BAND, DEFAULT_BURNIN_WINDOW,
};
use crate::dynamics::{energy_drift, DynamicsError, Integrator, MassMatrix, PhaseState};
use crate::models::{check_gradient, model_by_name, ModelError, TargetModel};
use crate::samplers::{
    hmc_sample, rwmh_sample, thin, twalk_sample, HmcConfig, RwmhConfig, SamplerError, Trace, TwalkConfig,
};

pub use io::{autocorrelation_csv, histogram_csv, parse_trace, read_trace, trace_to_csv, write_trace};
pub use presets::{preset, PRESET_NAMES};
pub use spec::{ExperimentSpec, SamplerKind, Setting};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error in `{field}`: {message}")]
    Config { field: &'static str, message: String },
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("trace file line {line}: {message}")]
    Format { line: usize, message: String },
}

impl HarnessError {
    pub fn config(field: &'static str, message: impl Into<String>) -> Self {
        HarnessError::Config {
            field,
            message: message.into(),
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Name of the offending configuration field, if this is a configuration error.
    pub fn field(&self) -> Option<&'static str> {
        match self {
            HarnessError::Config { field, .. } => Some(field),
            _ => None,
        }
    }

    /// True for errors caused by the chain itself (degenerate or unconverged
    /// diagnostics) rather than by the inputs.
    pub fn is_diagnostic(&self) -> bool {
        matches!(self, HarnessError::Diagnostics(_))
    }
}

/// A finished run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub spec: ExperimentSpec,
    pub trace: Trace,
    pub report: DiagnosticsReport,
    /// Files written, trace first.
    pub files: Vec<PathBuf>,
}

/// Runs the sampler named by `spec` and times it.
pub fn sample(spec: &ExperimentSpec) -> Result<(Trace, f64), HarnessError> {
    spec.validate()?;
    let model = model_by_name(&spec.model)?;
    let start = spec.start()?;
    let timer = Instant::now();
    let trace = match spec.sampler {
        SamplerKind::Hmc => {
            let mut cfg = HmcConfig::new(
                spec.epsilon.expect("validated"),
                spec.steps.expect("validated"),
                spec.n,
                spec.seed,
            );
            cfg.step_jitter = spec.jitter;
            cfg.mass = spec
                .mass
                .clone()
                .map(MassMatrix::new)
                .transpose()
                .map_err(|e| HarnessError::config("mass", e.to_string()))?;
            hmc_sample(model.as_ref(), &cfg, &start)?
        }
        SamplerKind::Rwmh => {
            let cfg = RwmhConfig {
                record_every: spec.record_every,
                ..RwmhConfig::new(spec.sigma.expect("validated"), spec.n, spec.seed)
            };
            rwmh_sample(model.as_ref(), &cfg, &start)?
        }
        SamplerKind::Twalk => {
            let cfg = TwalkConfig {
                record_every: spec.record_every,
                ..TwalkConfig::new(start, spec.second_start()?, spec.n, spec.seed)
            };
            twalk_sample(model.as_ref(), &cfg)?
        }
    };
    Ok((trace, timer.elapsed().as_secs_f64()))
}

/// Computes the report for a trace: burn-in and lag (automatic unless
/// fixed), per-coordinate IAT, ESS and the summary of the burned-in,
/// thinned sample.
pub fn diagnose(
    trace: &Trace,
    burnin: Setting,
    lag: Setting,
    sampling_seconds: Option<f64>,
) -> Result<DiagnosticsReport, HarnessError> {
    let n = trace.len();
    let mut warnings = Vec::new();
    let head = &trace.accepted()[..n.min(1000)];
    if !head.is_empty() && head.iter().all(|&a| !a) {
        warnings.push(format!(
            "no proposal accepted in the first {} iterations; the sampler may be diverging",
            head.len()
        ));
    }
    let burnin = match burnin {
        Setting::Fixed(b) => b,
        Setting::Auto => detect_burnin(trace.log_density(), DEFAULT_BURNIN_WINDOW, DEFAULT_BURNIN_BAND)?,
    };
    if burnin >= n {
        return Err(HarnessError::config(
            "burnin",
            format!("{burnin} is not below the trace length {n}"),
        ));
    }
    let iats = coordinate_iats(trace, burnin)?;
    let (monitored, tau) = iats
        .iter()
        .enumerate()
        .filter_map(|(j, t)| t.map(|t| (j, t)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or(DiagnosticsError::Degenerate)?;
    let lag = match lag {
        Setting::Fixed(l) => l,
        Setting::Auto => tau.ceil() as usize,
    };
    let kept = thin(trace, burnin, lag)?;
    let summary = if kept.len() >= 2 { summarize(&kept)? } else { Vec::new() };
    Ok(DiagnosticsReport {
        model: trace.model_name.clone(),
        sampler: trace.sampler_name.clone(),
        n,
        acceptance_rate: acceptance_rate(trace),
        burnin,
        lag,
        iat: iats,
        monitored,
        monitored_iat: tau,
        ess: ess_from_iat(n - burnin, tau),
        summary,
        sampling_seconds,
        warnings,
    })
}

/// Sibling path sharing the trace file's stem: `runs/x.csv` → `runs/x.<suffix>`.
pub fn sibling(trace_path: &Path, suffix: &str) -> PathBuf {
    let stem = trace_path.file_stem().and_then(|s| s.to_str()).unwrap_or("trace");
    trace_path.with_file_name(format!("{stem}.{suffix}"))
}

/// Samples, diagnoses and, when `spec.out` is set, writes the trace CSV, a
/// key-value report, the monitored coordinate's autocorrelations and a
/// histogram of the kept sample.
///
/// The trace is written before diagnostics run, so it survives a
/// not-converged error.
pub fn run(spec: &ExperimentSpec) -> Result<RunOutcome, HarnessError> {
    let (trace, seconds) = sample(spec)?;
    let mut files = Vec::new();
    if let Some(path) = &spec.out {
        write_trace(path, &trace)?;
        files.push(path.clone());
    }
    let report = diagnose(&trace, spec.burnin, spec.lag, Some(seconds))?;
    if let Some(path) = &spec.out {
        let report_path = sibling(path, "report.txt");
        fs::write(&report_path, report.to_key_value()).map_err(|e| HarnessError::io(&report_path, e))?;
        files.push(report_path);

        let series = &trace.column(report.monitored)[report.burnin..];
        let max_lag = 100.min(series.len().saturating_sub(1));
        if let Ok(rho) = autocorrelation(series, max_lag) {
            let acf_path = sibling(path, "acf.csv");
            fs::write(&acf_path, autocorrelation_csv(&rho)).map_err(|e| HarnessError::io(&acf_path, e))?;
            files.push(acf_path);
        }
        let kept = thin(&trace, report.burnin, report.lag)?;
        let hist_path = sibling(path, "hist.csv");
        fs::write(&hist_path, histogram_csv(&kept.column(report.monitored), 50))
            .map_err(|e| HarnessError::io(&hist_path, e))?;
        files.push(hist_path);
    }
    Ok(RunOutcome {
        spec: spec.clone(),
        trace,
        report,
        files,
    })
}

/// One row per spec; failed runs keep their error and do not stop the others.
#[derive(Debug)]
pub struct ComparisonTable {
    pub rows: Vec<(ExperimentSpec, Result<DiagnosticsReport, HarnessError>)>,
}

impl ComparisonTable {
    pub fn reports(&self) -> impl Iterator<Item = &DiagnosticsReport> {
        self.rows.iter().filter_map(|(_, r)| r.as_ref().ok())
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{},error\n", DiagnosticsReport::CSV_HEADER);
        for (spec, row) in &self.rows {
            match row {
                Ok(r) => {
                    let _ = writeln!(out, "{},", r.to_csv_row());
                }
                Err(e) => {
                    let msg = e.to_string().replace([',', '\n'], ";");
                    let _ = writeln!(out, "{},{},{},,,,,,,,{msg}", spec.model, spec.sampler, spec.n);
                }
            }
        }
        out
    }

    /// Aligned text table with samplers as columns.
    pub fn to_text(&self) -> String {
        let headers: Vec<String> = self
            .rows
            .iter()
            .map(|(s, _)| format!("{}/{}", s.model, s.sampler))
            .collect();
        let metric = |f: &dyn Fn(&DiagnosticsReport) -> String| -> Vec<String> {
            self.rows
                .iter()
                .map(|(_, r)| r.as_ref().map_or_else(|_| "error".to_string(), f))
                .collect()
        };
        let opt = |v: Option<f64>, digits: usize| v.map_or_else(|| "NA".to_string(), |v| format!("{v:.digits$}"));
        let lines: Vec<(&str, Vec<String>)> = vec![
            ("Burn-in", metric(&|r| r.burnin.to_string())),
            ("IAT", metric(&|r| format!("{:.4}", r.monitored_iat))),
            ("Lag", metric(&|r| r.lag.to_string())),
            (
                "Acceptance rate",
                metric(&|r| format!("{:.2}%", 100.0 * r.acceptance_rate)),
            ),
            ("Effective sample", metric(&|r| format!("{:.0}", r.ess))),
            ("Execution time (s)", metric(&|r| opt(r.sampling_seconds, 4))),
            (
                "Seconds per effective sample",
                metric(&|r| opt(r.seconds_per_effective_sample(), 8)),
            ),
        ];
        let label_w = lines.iter().map(|(l, _)| l.len()).max().unwrap_or(0);
        let col_w: Vec<usize> = headers
            .iter()
            .enumerate()
            .map(|(i, h)| {
                lines
                    .iter()
                    .map(|(_, v)| v[i].len())
                    .chain([h.len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut out = String::new();
        let _ = write!(out, "{:label_w$}", "");
        for (h, w) in headers.iter().zip(&col_w) {
            let _ = write!(out, "  {h:>w$}");
        }
        out.push('\n');
        for (label, values) in &lines {
            let _ = write!(out, "{label:label_w$}");
            for (v, w) in values.iter().zip(&col_w) {
                let _ = write!(out, "  {v:>w$}");
            }
            out.push('\n');
        }
        for (spec, row) in &self.rows {
            if let Err(e) = row {
                let _ = writeln!(out, "{}/{}: {e}", spec.model, spec.sampler);
            }
        }
        out
    }
}

/// Runs every spec in order. Runs are sequential so the timings are not
/// skewed by contention between chains.
pub fn compare(specs: &[ExperimentSpec]) -> Result<ComparisonTable, HarnessError> {
    if specs.is_empty() {
        return Err(HarnessError::config("specs", "at least one experiment is required"));
    }
    let rows = specs.iter().map(|s| (s.clone(), run(s).map(|o| o.report))).collect();
    Ok(ComparisonTable { rows })
}

/// Energy drift per (method, step size) and the fitted global order per method.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorStudy {
    pub step_sizes: Vec<f64>,
    pub horizon: f64,
    /// `(method, drifts aligned with step_sizes, fitted slope)`
    pub rows: Vec<(Integrator, Vec<f64>, f64)>,
}

impl IntegratorStudy {
    pub fn slope(&self, method: Integrator) -> Option<f64> {
        self.rows.iter().find(|(m, _, _)| *m == method).map(|(_, _, s)| *s)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:<18}", "method");
        for e in &self.step_sizes {
            let _ = write!(out, " {:>14}", format!("eps={e}"));
        }
        let _ = writeln!(out, " {:>8}", "order");
        for (m, drifts, slope) in &self.rows {
            let _ = write!(out, "{:<18}", m.as_str());
            for d in drifts {
                let _ = write!(out, " {d:>14.6e}");
            }
            let _ = writeln!(out, " {slope:>8.3}");
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,epsilon,steps,energy_drift\n");
        for (m, drifts, _) in &self.rows {
            for (e, d) in self.step_sizes.iter().zip(drifts) {
                let _ = writeln!(out, "{},{e},{},{d:.10e}", m.as_str(), (self.horizon / e).round());
            }
        }
        out
    }
}

/// Least-squares slope of `ln drift` against `ln ε` for each integrator,
/// integrating to the fixed horizon `horizon` with `round(horizon/ε)` steps.
pub fn integrator_study(
    step_sizes: &[f64],
    model: &dyn TargetModel,
    start: &PhaseState,
    mass: &MassMatrix,
    horizon: f64,
) -> Result<IntegratorStudy, HarnessError> {
    if step_sizes.len() < 4 {
        return Err(HarnessError::config(
            "epsilon",
            "need at least four step sizes (three halvings)",
        ));
    }
    if step_sizes.iter().any(|e| !(*e > 0.0)) || step_sizes.windows(2).any(|w| w[1] >= w[0]) {
        return Err(HarnessError::config(
            "epsilon",
            "step sizes must be positive and decreasing",
        ));
    }
    if !(horizon > 0.0) {
        return Err(HarnessError::config("horizon", "must be positive"));
    }
    let mut rows = Vec::new();
    for method in Integrator::ALL {
        let drifts = step_sizes
            .iter()
            .map(|&e| energy_drift(model, start, e, (horizon / e).round() as usize, mass, method))
            .collect::<Result<Vec<_>, _>>()?;
        let first = drifts[0];
        if drifts.iter().any(|d| !(*d > 0.0)) || drifts.iter().all(|d| *d == first) {
            return Err(DiagnosticsError::Degenerate.into());
        }
        let xs: Vec<f64> = step_sizes.iter().map(|e| e.ln()).collect();
        let ys: Vec<f64> = drifts.iter().map(|d| d.ln()).collect();
        rows.push((method, drifts, least_squares_slope(&xs, &ys)));
    }
    Ok(IntegratorStudy {
        step_sizes: step_sizes.to_vec(),
        horizon,
        rows,
    })
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

pub const GRADCHECK_STEP: f64 = 1e-5;
pub const GRADCHECK_POINTS: usize = 100;

/// The fixed, seeded grid of support points used by [`gradcheck`].
pub fn gradcheck_points(model_name: &str) -> Result<Vec<Vec<f64>>, HarnessError> {
    let model = model_by_name(model_name).map_err(|e| HarnessError::config("model", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x6772_6164);
    let n = GRADCHECK_POINTS;
    Ok((0..n)
        .map(|i| match model_name {
            "gamma51" => vec![0.1 + (20.0 - 0.1) * i as f64 / (n - 1) as f64],
            "mixture" => (0..2).map(|_| rng.random_range(-8.0..9.0)).collect(),
            "binormal" => (0..2).map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal)).collect(),
            _ => (0..model.dim())
                .map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal))
                .collect(),
        })
        .collect())
}

/// Maximum relative finite-difference gradient error over the model's grid.
pub fn gradcheck(model_name: &str) -> Result<f64, HarnessError> {
    let model = model_by_name(model_name).map_err(|e| HarnessError::config("model", e.to_string()))?;
    gradcheck_points(model_name)?
        .iter()
        .map(|q| check_gradient(model.as_ref(), q, GRADCHECK_STEP))
        .try_fold(0.0f64, |acc, r| r.map(|e| acc.max(e)))
        .map_err(HarnessError::from)
}
