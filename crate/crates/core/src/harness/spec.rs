//! Experiment specifications: a flat `key = value` text format whose keys
//! double as CLI flags.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::models::{model_by_name, MODEL_NAMES};

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SamplerKind {
    Hmc,
    Rwmh,
    Twalk,
}

impl SamplerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SamplerKind::Hmc => "hmc",
            SamplerKind::Rwmh => "rwmh",
            SamplerKind::Twalk => "twalk",
        }
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SamplerKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hmc" => Ok(SamplerKind::Hmc),
            "rwmh" => Ok(SamplerKind::Rwmh),
            "twalk" => Ok(SamplerKind::Twalk),
            other => Err(HarnessError::config(
                "sampler",
                format!("unknown sampler `{other}` (expected hmc, rwmh or twalk)"),
            )),
        }
    }
}

/// A fixed value or `auto`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Setting {
    #[default]
    Auto,
    Fixed(usize),
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Setting::Auto => f.write_str("auto"),
            Setting::Fixed(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub model: String,
    pub sampler: SamplerKind,
    pub epsilon: Option<f64>,
    pub steps: Option<usize>,
    pub sigma: Option<f64>,
    pub mass: Option<Vec<f64>>,
    pub jitter: f64,
    pub init: Option<Vec<f64>>,
    pub init2: Option<Vec<f64>>,
    /// Recorded chain length.
    pub n: usize,
    pub seed: u64,
    /// Iterations per recorded state (RWMH and t-walk).
    pub record_every: usize,
    pub burnin: Setting,
    pub lag: Setting,
    /// Trace CSV destination; sibling report files share its stem.
    pub out: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn new(model: impl Into<String>, sampler: SamplerKind) -> Self {
        Self {
            model: model.into(),
            sampler,
            epsilon: None,
            steps: None,
            sigma: None,
            mass: None,
            jitter: 0.0,
            init: None,
            init2: None,
            n: 10_000,
            seed: 1,
            record_every: 1,
            burnin: Setting::Auto,
            lag: Setting::Auto,
            out: None,
        }
    }

    /// Parses `key = value` lines. Blank lines and `#` comments are ignored.
    /// `model` and `sampler` are required.
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut pairs = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| HarnessError::config("spec", format!("line {}: expected `key = value`", lineno + 1)))?;
            pairs.push((key.trim().to_string(), value.trim().to_string()));
        }
        let find = |k: &str| pairs.iter().rev().find(|(key, _)| key == k).map(|(_, v)| v.clone());
        let model = find("model").ok_or_else(|| HarnessError::config("model", "missing"))?;
        let sampler = find("sampler")
            .ok_or_else(|| HarnessError::config("sampler", "missing"))?
            .parse()?;
        let mut spec = Self::new(model, sampler);
        for (k, v) in &pairs {
            spec.set(k, v)?;
        }
        Ok(spec)
    }

    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        let value = value.trim();
        match key {
            "model" => self.model = value.to_string(),
            "sampler" => self.sampler = value.parse()?,
            "epsilon" => self.epsilon = Some(parse_num("epsilon", value)?),
            "steps" => self.steps = Some(parse_num("steps", value)?),
            "sigma" => self.sigma = Some(parse_num("sigma", value)?),
            "mass" => self.mass = Some(parse_vec("mass", value)?),
            "jitter" => self.jitter = parse_num("jitter", value)?,
            "init" => self.init = Some(parse_vec("init", value)?),
            "init2" => self.init2 = Some(parse_vec("init2", value)?),
            "n" => self.n = parse_num("n", value)?,
            "seed" => self.seed = parse_num("seed", value)?,
            "record_every" => self.record_every = parse_num("record_every", value)?,
            "burnin" => self.burnin = parse_setting("burnin", value)?,
            "lag" => self.lag = parse_setting("lag", value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            other => return Err(HarnessError::config("spec", format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Renders the spec in the `key = value` format accepted by [`ExperimentSpec::parse`].
    pub fn to_text(&self) -> String {
        let mut lines = vec![format!("model = {}", self.model), format!("sampler = {}", self.sampler)];
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        if let Some(e) = self.epsilon {
            lines.push(format!("epsilon = {e}"));
        }
        if let Some(l) = self.steps {
            lines.push(format!("steps = {l}"));
        }
        if let Some(s) = self.sigma {
            lines.push(format!("sigma = {s}"));
        }
        if let Some(m) = &self.mass {
            lines.push(format!("mass = {}", join(m)));
        }
        if self.jitter != 0.0 {
            lines.push(format!("jitter = {}", self.jitter));
        }
        if let Some(q) = &self.init {
            lines.push(format!("init = {}", join(q)));
        }
        if let Some(q) = &self.init2 {
            lines.push(format!("init2 = {}", join(q)));
        }
        lines.push(format!("n = {}", self.n));
        lines.push(format!("seed = {}", self.seed));
        lines.push(format!("record_every = {}", self.record_every));
        lines.push(format!("burnin = {}", self.burnin));
        lines.push(format!("lag = {}", self.lag));
        if let Some(o) = &self.out {
            lines.push(format!("out = {}", o.display()));
        }
        lines.join("\n") + "\n"
    }

    /// Starting point, falling back to the model's default.
    pub fn start(&self) -> Result<Vec<f64>, HarnessError> {
        match &self.init {
            Some(q) => Ok(q.clone()),
            None => default_start(&self.model, false),
        }
    }

    pub fn second_start(&self) -> Result<Vec<f64>, HarnessError> {
        match &self.init2 {
            Some(q) => Ok(q.clone()),
            None => default_start(&self.model, true),
        }
    }

    /// Checks names and the sampler-specific parameters.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let model = model_by_name(&self.model).map_err(|_| {
            HarnessError::config(
                "model",
                format!(
                    "unknown model `{}` (expected one of {})",
                    self.model,
                    MODEL_NAMES.join(", ")
                ),
            )
        })?;
        if self.n == 0 {
            return Err(HarnessError::config("n", "must be at least 1"));
        }
        if self.record_every == 0 {
            return Err(HarnessError::config("record_every", "must be at least 1"));
        }
        if self.lag == Setting::Fixed(0) {
            return Err(HarnessError::config("lag", "must be at least 1"));
        }
        if let Setting::Fixed(b) = self.burnin {
            if b >= self.n {
                return Err(HarnessError::config(
                    "burnin",
                    format!("{b} is not below n = {}", self.n),
                ));
            }
        }
        let dim = model.dim();
        let check_dim = |field: &'static str, v: &[f64]| {
            if v.len() == dim {
                Ok(())
            } else {
                Err(HarnessError::config(
                    field,
                    format!("has {} entries, model `{}` has dimension {dim}", v.len(), self.model),
                ))
            }
        };
        check_dim("init", &self.start()?)?;
        match self.sampler {
            SamplerKind::Hmc => {
                match self.epsilon {
                    Some(e) if e > 0.0 && e.is_finite() => {}
                    Some(e) => return Err(HarnessError::config("epsilon", format!("{e} is not positive"))),
                    None => return Err(HarnessError::config("epsilon", "required for hmc")),
                }
                match self.steps {
                    Some(l) if l >= 1 => {}
                    Some(_) => return Err(HarnessError::config("steps", "must be at least 1")),
                    None => return Err(HarnessError::config("steps", "required for hmc")),
                }
                if let Some(m) = &self.mass {
                    check_dim("mass", m)?;
                    if m.iter().any(|x| !(*x > 0.0)) {
                        return Err(HarnessError::config("mass", "entries must be positive"));
                    }
                }
                if !(0.0..1.0).contains(&self.jitter) {
                    return Err(HarnessError::config("jitter", "must lie in [0, 1)"));
                }
            }
            SamplerKind::Rwmh => match self.sigma {
                Some(s) if s > 0.0 && s.is_finite() => {}
                Some(s) => return Err(HarnessError::config("sigma", format!("{s} is not positive"))),
                None => return Err(HarnessError::config("sigma", "required for rwmh")),
            },
            SamplerKind::Twalk => {
                let second = self.second_start()?;
                check_dim("init2", &second)?;
                if second == self.start()? {
                    return Err(HarnessError::config("init2", "must differ from init"));
                }
            }
        }
        Ok(())
    }

    /// Default file stem, e.g. `gamma51-hmc-seed1`.
    pub fn default_stem(&self) -> String {
        format!("{}-{}-seed{}", self.model, self.sampler, self.seed)
    }
}

fn default_start(model: &str, second: bool) -> Result<Vec<f64>, HarnessError> {
    let (a, b) = match model {
        "gamma51" => (vec![500.0], vec![501.0]),
        "binormal" => (vec![-7.0, -7.0], vec![-6.5, -6.5]),
        "mixture" => (vec![-9.0, -9.0], vec![-8.0, -8.0]),
        "eightschools" => (vec![2.0; 10], vec![3.0; 10]),
        other => {
            return Err(HarnessError::config("model", format!("unknown model `{other}`")));
        }
    };
    Ok(if second { b } else { a })
}

fn parse_num<T: FromStr>(field: &'static str, value: &str) -> Result<T, HarnessError> {
    value
        .parse()
        .map_err(|_| HarnessError::config(field, format!("cannot parse `{value}`")))
}

fn parse_vec(field: &'static str, value: &str) -> Result<Vec<f64>, HarnessError> {
    value.split(',').map(|v| parse_num(field, v.trim())).collect()
}

fn parse_setting(field: &'static str, value: &str) -> Result<Setting, HarnessError> {
    if value == "auto" {
        Ok(Setting::Auto)
    } else {
        parse_num(field, value).map(Setting::Fixed)
    }
}
