//! `hmc-bench`: runs sampler experiments and writes traces, reports and
//! comparison tables.
//!
//! Exit status: 0 on success, 1 on a configuration or I/O error, 2 when the
//! chain diagnostics fail (no stable burn-in, degenerate chain).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use hmc_core::harness::{
    self, compare, gradcheck, integrator_study, preset, read_trace, ExperimentSpec, HarnessError, SamplerKind, Setting,
};
use hmc_core::models::{model_by_name, IsotropicGaussian, SharedModel, MODEL_NAMES};
use hmc_core::{MassMatrix, PhaseState};

#[derive(Parser)]
#[command(name = "hmc-bench", version, about = "HMC, RWMH and t-walk benchmark runner")]
struct Cli {
    /// Directory for outputs when no explicit path is given.
    #[arg(long, global = true, env = "HMC_BENCH_OUT", default_value = "runs")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Run one experiment and write its trace, report, autocorrelation and histogram files.
    Run(RunArgs),
    /// Run several experiments and print a comparison table.
    Compare(CompareArgs),
    /// Measure energy drift against step size for each integrator.
    Integrators(IntegratorArgs),
    /// Check analytic gradients against central finite differences.
    Gradcheck(GradcheckArgs),
    /// Compute diagnostics for an existing trace CSV.
    Diagnose(DiagnoseArgs),
}

#[derive(Args, Default)]
struct SpecArgs {
    /// `key = value` spec file; flags override its entries.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    /// hmc, rwmh or twalk
    #[arg(long)]
    sampler: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    steps: Option<String>,
    #[arg(long)]
    sigma: Option<String>,
    /// Diagonal mass matrix, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    mass: Option<String>,
    /// Uniform step-size jitter fraction in [0, 1).
    #[arg(long)]
    jitter: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    record_every: Option<String>,
    /// Integer or `auto`.
    #[arg(long)]
    burnin: Option<String>,
    /// Integer or `auto`.
    #[arg(long)]
    lag: Option<String>,
    /// Starting point, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    init: Option<String>,
    /// Second t-walk starting point.
    #[arg(long, allow_hyphen_values = true)]
    init2: Option<String>,
    /// Trace CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl SpecArgs {
    fn build(&self, out_dir: &Path) -> Result<ExperimentSpec, HarnessError> {
        let mut spec = match &self.spec {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| HarnessError::Io {
                    path: path.clone(),
                    source: e,
                })?;
                ExperimentSpec::parse(&text)?
            }
            None => {
                let model = self
                    .model
                    .clone()
                    .ok_or_else(|| HarnessError::config("model", "missing"))?;
                let sampler: SamplerKind = self
                    .sampler
                    .as_deref()
                    .ok_or_else(|| HarnessError::config("sampler", "missing"))?
                    .parse()?;
                ExperimentSpec::new(model, sampler)
            }
        };
        let overrides = [
            ("model", &self.model),
            ("sampler", &self.sampler),
            ("epsilon", &self.epsilon),
            ("steps", &self.steps),
            ("sigma", &self.sigma),
            ("mass", &self.mass),
            ("jitter", &self.jitter),
            ("n", &self.n),
            ("seed", &self.seed),
            ("record_every", &self.record_every),
            ("burnin", &self.burnin),
            ("lag", &self.lag),
            ("init", &self.init),
            ("init2", &self.init2),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                spec.set(key, v)?;
            }
        }
        if let Some(out) = &self.out {
            spec.out = Some(out.clone());
        }
        if spec.out.is_none() {
            spec.out = Some(out_dir.join(format!("{}.csv", spec.default_stem())));
        }
        Ok(spec)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    spec: SpecArgs,
}

#[derive(Args)]
struct CompareArgs {
    /// Spec files, run in order.
    specs: Vec<PathBuf>,
    /// Named experiment: gamma, binormal, mixture or eightschools.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Override the chain length of every run.
    #[arg(long)]
    n: Option<usize>,
    /// Also write the table as CSV here.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct IntegratorArgs {
    /// `oscillator` (one-dimensional standard Gaussian) or a model name.
    #[arg(long, default_value = "oscillator")]
    model: String,
    /// Decreasing step sizes, comma separated.
    #[arg(long, default_value = "0.2,0.1,0.05,0.025")]
    epsilon: String,
    /// Integration horizon.
    #[arg(long, default_value_t = 5.0)]
    horizon: f64,
    /// Starting position; defaults to 1 in every coordinate.
    #[arg(long, allow_hyphen_values = true)]
    init: Option<String>,
    /// Starting momentum; defaults to 0.
    #[arg(long, allow_hyphen_values = true)]
    momentum: Option<String>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct GradcheckArgs {
    /// Model to check; all models when omitted.
    #[arg(long)]
    model: Option<String>,
}

#[derive(Args)]
struct DiagnoseArgs {
    trace: PathBuf,
    #[arg(long, default_value = "auto")]
    burnin: String,
    #[arg(long, default_value = "auto")]
    lag: String,
}

fn parse_list(field: &'static str, value: &str) -> Result<Vec<f64>, HarnessError> {
    value
        .split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| HarnessError::config(field, format!("cannot parse `{v}`")))
        })
        .collect()
}

fn parse_setting(field: &'static str, value: &str) -> Result<Setting, HarnessError> {
    match value {
        "auto" => Ok(Setting::Auto),
        v => v
            .parse()
            .map(Setting::Fixed)
            .map_err(|_| HarnessError::config(field, format!("expected an integer or `auto`, got `{v}`"))),
    }
}

fn cmd_run(args: &RunArgs, out_dir: &Path) -> anyhow::Result<()> {
    let spec = args.spec.build(out_dir)?;
    let outcome = harness::run(&spec)?;
    print!("{}", outcome.report.to_key_value());
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn cmd_compare(args: &CompareArgs, out_dir: &Path) -> anyhow::Result<()> {
    let mut specs = Vec::new();
    if let Some(name) = &args.preset {
        specs.extend(preset(name, args.seed)?);
    }
    for path in &args.specs {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        specs.push(ExperimentSpec::parse(&text)?);
    }
    let mut seen = std::collections::HashMap::new();
    for spec in &mut specs {
        if let Some(n) = args.n {
            spec.n = n;
        }
        if spec.out.is_none() {
            let stem = spec.default_stem();
            let k = seen.entry(stem.clone()).and_modify(|k| *k += 1).or_insert(0usize);
            let name = if *k == 0 { stem } else { format!("{stem}-{k}") };
            spec.out = Some(out_dir.join(format!("{name}.csv")));
        }
    }
    let table = compare(&specs)?;
    print!("{}", table.to_text());
    if let Some(path) = &args.csv {
        fs::write(path, table.to_csv()).with_context(|| format!("writing {}", path.display()))?;
    }
    // Report the first failure through the exit status.
    if let Some(err) = table.rows.into_iter().find_map(|(_, r)| r.err()) {
        return Err(err.into());
    }
    Ok(())
}

fn cmd_integrators(args: &IntegratorArgs) -> anyhow::Result<()> {
    let model: SharedModel = if args.model == "oscillator" {
        Arc::new(IsotropicGaussian { dim: 1 })
    } else {
        model_by_name(&args.model).map_err(|e| HarnessError::config("model", e.to_string()))?
    };
    let d = model.dim();
    let q = match &args.init {
        Some(v) => parse_list("init", v)?,
        None => vec![1.0; d],
    };
    let p = match &args.momentum {
        Some(v) => parse_list("momentum", v)?,
        None => vec![0.0; d],
    };
    if q.len() != d || p.len() != d {
        return Err(HarnessError::config("init", format!("model has dimension {d}")).into());
    }
    let start = PhaseState::new(q, p).map_err(|e| HarnessError::config("init", e.to_string()))?;
    let eps = parse_list("epsilon", &args.epsilon)?;
    let study = integrator_study(&eps, model.as_ref(), &start, &MassMatrix::identity(d), args.horizon)?;
    print!("{}", study.to_text());
    if let Some(path) = &args.csv {
        fs::write(path, study.to_csv()).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn cmd_gradcheck(args: &GradcheckArgs) -> anyhow::Result<()> {
    let names: Vec<&str> = match &args.model {
        Some(m) => vec![m.as_str()],
        None => MODEL_NAMES.to_vec(),
    };
    for name in names {
        let err = gradcheck(name)?;
        println!("{name:<14} max relative error {err:.3e}");
    }
    Ok(())
}

fn cmd_diagnose(args: &DiagnoseArgs) -> anyhow::Result<()> {
    let trace = read_trace(&args.trace)?;
    let report = harness::diagnose(
        &trace,
        parse_setting("burnin", &args.burnin)?,
        parse_setting("lag", &args.lag)?,
        None,
    )?;
    print!("{}", report.to_key_value());
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<HarnessError>() {
        Some(e) if e.is_diagnostic() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a, &cli.out_dir),
        Command::Compare(a) => cmd_compare(a, &cli.out_dir),
        Command::Integrators(a) => cmd_integrators(a),
        Command::Gradcheck(a) => cmd_gradcheck(a),
        Command::Diagnose(a) => cmd_diagnose(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
