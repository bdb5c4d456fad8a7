//! Chain generators: Hamiltonian Monte Carlo, random-walk Metropolis-Hastings
//! and the t-walk.
//!
//! All samplers draw from a `ChaCha8Rng` seeded with `seed`, so a given
//! (model, config, start) triple always produces the same trace within one
//! build. Per-iteration draw order:
//!
//! * HMC: `d` standard normals for the momentum, one uniform for the step
//!   jitter (only when `step_jitter > 0`), one uniform for the accept test.
//! * RWMH: `d` standard normals for the proposal, one uniform for the accept test.
//! * t-walk: one uniform selecting the kernel, one uniform selecting which point
//!   moves, the kernel's own draws, one uniform for the accept test.
//!
//! The accept uniform is always drawn, even when the proposal diverged or left
//! the support, so the stream stays aligned across iterations.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::dynamics::{exact_gaussian_flow, kinetic_energy, Integrator, MassMatrix, PhaseState, Workspace};
use crate::models::TargetModel;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplerError {
    #[error("invalid sampler configuration for `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error("starting point {0:?} is outside the model support")]
    OutOfSupport(Vec<f64>),
    #[error("starting point has dimension {actual}, model expects {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("t-walk needs two distinct starting points")]
    CoincidentStart,
    #[error("burn-in {burnin} must be smaller than the trace length {len}")]
    BurninTooLong { burnin: usize, len: usize },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> SamplerError {
    SamplerError::InvalidConfig {
        field,
        reason: reason.into(),
    }
}

fn check_start(model: &dyn TargetModel, q0: &[f64]) -> Result<(), SamplerError> {
    if q0.len() != model.dim() {
        return Err(SamplerError::DimensionMismatch {
            expected: model.dim(),
            actual: q0.len(),
        });
    }
    if !q0.iter().all(|x| x.is_finite()) || !model.in_support(q0) || !model.potential(q0).is_finite() {
        return Err(SamplerError::OutOfSupport(q0.to_vec()));
    }
    Ok(())
}

/// Recorded chain: one row per retained iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub model_name: String,
    pub sampler_name: String,
    /// Snapshot of the configuration that produced the chain.
    pub settings: Vec<(String, String)>,
    /// `(burnin, lag)` applied by [`thin`], if any.
    pub thinning: Option<(usize, usize)>,
    /// Proposals made over the whole run, including unrecorded iterations.
    pub proposals: u64,
    pub acceptances: u64,
    dim: usize,
    states: Vec<f64>,
    log_density: Vec<f64>,
    accepted: Vec<bool>,
}

impl Trace {
    pub fn new(model_name: impl Into<String>, sampler_name: impl Into<String>, dim: usize) -> Self {
        Self {
            model_name: model_name.into(),
            sampler_name: sampler_name.into(),
            settings: Vec::new(),
            thinning: None,
            proposals: 0,
            acceptances: 0,
            dim,
            states: Vec::new(),
            log_density: Vec::new(),
            accepted: Vec::new(),
        }
    }

    pub fn with_capacity(mut self, rows: usize) -> Self {
        self.states.reserve(rows * self.dim);
        self.log_density.reserve(rows);
        self.accepted.reserve(rows);
        self
    }

    /// Appends a row. `accepted` records whether the state changed since the
    /// previous row.
    pub fn push(&mut self, state: &[f64], log_density: f64, accepted: bool) {
        assert_eq!(state.len(), self.dim, "state dimension");
        self.states.extend_from_slice(state);
        self.log_density.push(log_density);
        self.accepted.push(accepted);
    }

    pub fn len(&self) -> usize {
        self.log_density.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_density.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.states.chunks_exact(self.dim.max(1))
    }

    /// Coordinate `j` across all rows.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.states().map(|s| s[j]).collect()
    }

    pub fn log_density(&self) -> &[f64] {
        &self.log_density
    }

    pub fn accepted(&self) -> &[bool] {
        &self.accepted
    }

    pub fn setting(&self, key: &str) -> Option<&str> {
        self.settings.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn set(&mut self, key: &str, value: impl ToString) {
        self.settings.push((key.to_string(), value.to_string()));
    }
}

/// Keeps rows `burnin, burnin + lag, burnin + 2·lag, …`.
///
/// The accepted flag of a retained row is the OR of the flags it skipped
/// over, so a `false` still means the state did not move.
pub fn thin(trace: &Trace, burnin: usize, lag: usize) -> Result<Trace, SamplerError> {
    if lag == 0 {
        return Err(invalid("lag", "must be at least 1"));
    }
    if burnin >= trace.len() {
        return Err(SamplerError::BurninTooLong {
            burnin,
            len: trace.len(),
        });
    }
    let mut out = Trace {
        states: Vec::new(),
        log_density: Vec::new(),
        accepted: Vec::new(),
        thinning: Some(match trace.thinning {
            Some((b0, l0)) => (b0 + burnin * l0, l0 * lag),
            None => (burnin, lag),
        }),
        ..trace.clone()
    };
    let mut prev: Option<usize> = None;
    for i in (burnin..trace.len()).step_by(lag) {
        let moved = match prev {
            None => trace.accepted[i],
            Some(p) => trace.accepted[p + 1..=i].iter().any(|&a| a),
        };
        out.push(trace.state(i), trace.log_density[i], moved);
        prev = Some(i);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// HMC
// ---------------------------------------------------------------------------

/// How HMC turns `(q, p)` into a proposal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Trajectory {
    /// `steps` applications of a numerical integrator.
    Integrator(Integrator),
    /// Closed-form flow of `|q|²/2` for time `steps · step_size`. Only valid on
    /// an isotropic standard normal target with identity mass.
    ExactGaussian,
    #[default]
    Leapfrog,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HmcConfig {
    pub step_size: f64,
    pub steps: usize,
    /// Defaults to the identity when `None`.
    pub mass: Option<MassMatrix>,
    pub n: usize,
    pub seed: u64,
    /// Each trajectory uses a step size drawn uniformly from
    /// `[ε(1 - jitter), ε(1 + jitter)]`.
    pub step_jitter: f64,
    pub trajectory: Trajectory,
}

impl HmcConfig {
    pub fn new(step_size: f64, steps: usize, n: usize, seed: u64) -> Self {
        Self {
            step_size,
            steps,
            mass: None,
            n,
            seed,
            step_jitter: 0.0,
            trajectory: Trajectory::Leapfrog,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<MassMatrix, SamplerError> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(invalid("epsilon", format!("{} is not positive", self.step_size)));
        }
        if self.steps == 0 {
            return Err(invalid("steps", "must be at least 1"));
        }
        if self.n == 0 {
            return Err(invalid("n", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.step_jitter) {
            return Err(invalid("jitter", format!("{} is outside [0, 1)", self.step_jitter)));
        }
        let mass = self.mass.clone().unwrap_or_else(|| MassMatrix::identity(dim));
        if mass.dim() != dim {
            return Err(invalid(
                "mass",
                format!("has {} entries, model has dimension {dim}", mass.dim()),
            ));
        }
        Ok(mass)
    }
}

/// Hamiltonian Monte Carlo.
///
/// Each iteration draws `p ~ N(0, diag(mass))`, integrates `steps` steps to
/// `(q*, p*)`, and accepts `(q*, -p*)` with probability
/// `min(1, exp(H(q, p) - H(q*, -p*)))`. Diverged trajectories are rejections.
pub fn hmc_sample(model: &dyn TargetModel, cfg: &HmcConfig, q0: &[f64]) -> Result<Trace, SamplerError> {
    let dim = model.dim();
    let mass = cfg.validate(dim)?;
    check_start(model, q0)?;
    let sqrt_mass: Vec<f64> = mass.diag().iter().map(|m| m.sqrt()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut trace = Trace::new(model.name(), "hmc", dim).with_capacity(cfg.n);
    trace.set("epsilon", cfg.step_size);
    trace.set("steps", cfg.steps);
    trace.set("mass", join(mass.diag()));
    trace.set("n", cfg.n);
    trace.set("seed", cfg.seed);
    trace.set("jitter", cfg.step_jitter);
    trace.set("init", join(q0));

    let mut q = q0.to_vec();
    let mut potential = model.potential(&q);
    let mut p = vec![0.0; dim];

    for _ in 0..cfg.n {
        for (pi, s) in p.iter_mut().zip(&sqrt_mass) {
            *pi = s * rng.sample::<f64, _>(StandardNormal);
        }
        let eps = if cfg.step_jitter > 0.0 {
            let u: f64 = rng.random();
            cfg.step_size * (1.0 + cfg.step_jitter * (2.0 * u - 1.0))
        } else {
            cfg.step_size
        };
        let h_current = kinetic_energy(&p, &mass) + potential;

        let mut state = PhaseState {
            q: q.clone(),
            p: p.clone(),
        };
        let proposal = match cfg.trajectory {
            Trajectory::ExactGaussian => Ok(exact_gaussian_flow(&state, eps * cfg.steps as f64)),
            Trajectory::Leapfrog | Trajectory::Integrator(_) => {
                let method = match cfg.trajectory {
                    Trajectory::Integrator(m) => m,
                    _ => Integrator::Leapfrog,
                };
                let mut ws = Workspace::new(model, &state.q);
                (0..cfg.steps)
                    .try_for_each(|_| ws.step(method, model, &mut state, eps, &mass))
                    .map(|_| state)
            }
        };

        let u: f64 = rng.random();
        trace.proposals += 1;
        let mut accepted = false;
        if let Ok(mut proposal) = proposal {
            let k_end = kinetic_energy(&proposal.p, &mass);
            proposal.flip_momentum();
            let k_flipped = kinetic_energy(&proposal.p, &mass);
            debug_assert_eq!(k_end.to_bits(), k_flipped.to_bits(), "K(p) must equal K(-p)");
            if proposal.is_finite() && model.in_support(&proposal.q) {
                let u_new = model.potential(&proposal.q);
                let h_new = k_flipped + u_new;
                let ratio = (h_current - h_new).exp();
                if h_new.is_finite() && u < ratio {
                    q = proposal.q;
                    potential = u_new;
                    accepted = true;
                    trace.acceptances += 1;
                }
            }
        }
        trace.push(&q, -potential, accepted);
    }
    Ok(trace)
}

// ---------------------------------------------------------------------------
// RWMH
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct RwmhConfig {
    /// Isotropic proposal standard deviation.
    pub sigma: f64,
    /// Number of recorded states.
    pub n: usize,
    pub seed: u64,
    /// Iterations per recorded state.
    pub record_every: usize,
}

impl RwmhConfig {
    pub fn new(sigma: f64, n: usize, seed: u64) -> Self {
        Self {
            sigma,
            n,
            seed,
            record_every: 1,
        }
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(invalid("sigma", format!("{} is not positive", self.sigma)));
        }
        if self.n == 0 {
            return Err(invalid("n", "must be at least 1"));
        }
        if self.record_every == 0 {
            return Err(invalid("record_every", "must be at least 1"));
        }
        Ok(())
    }
}

/// Random-walk Metropolis-Hastings with `N(q, σ² I)` proposals.
pub fn rwmh_sample(model: &dyn TargetModel, cfg: &RwmhConfig, q0: &[f64]) -> Result<Trace, SamplerError> {
    cfg.validate()?;
    check_start(model, q0)?;
    let dim = model.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut trace = Trace::new(model.name(), "rwmh", dim).with_capacity(cfg.n);
    trace.set("sigma", cfg.sigma);
    trace.set("n", cfg.n);
    trace.set("seed", cfg.seed);
    trace.set("record_every", cfg.record_every);
    trace.set("init", join(q0));

    let mut q = q0.to_vec();
    let mut potential = model.potential(&q);
    let mut proposal = vec![0.0; dim];

    for _ in 0..cfg.n {
        let mut moved = false;
        for _ in 0..cfg.record_every {
            for (y, x) in proposal.iter_mut().zip(&q) {
                *y = x + cfg.sigma * rng.sample::<f64, _>(StandardNormal);
            }
            let u: f64 = rng.random();
            trace.proposals += 1;
            if model.in_support(&proposal) {
                let u_new = model.potential(&proposal);
                if u_new.is_finite() && u < (potential - u_new).exp() {
                    std::mem::swap(&mut q, &mut proposal);
                    potential = u_new;
                    moved = true;
                    trace.acceptances += 1;
                }
            }
        }
        trace.push(&q, -potential, moved);
    }
    Ok(trace)
}

// ---------------------------------------------------------------------------
// t-walk
// ---------------------------------------------------------------------------

/// Probabilities of the four t-walk kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoveProbs {
    pub walk: f64,
    pub traverse: f64,
    pub hop: f64,
    pub blow: f64,
}

impl Default for MoveProbs {
    fn default() -> Self {
        Self {
            walk: 0.4918,
            traverse: 0.4918,
            hop: 0.0082,
            blow: 0.0082,
        }
    }
}

impl MoveProbs {
    fn as_array(&self) -> [f64; 4] {
        [self.walk, self.traverse, self.hop, self.blow]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwalkConfig {
    pub x0: Vec<f64>,
    pub x0_prime: Vec<f64>,
    /// Number of recorded states.
    pub n: usize,
    pub seed: u64,
    pub move_probs: MoveProbs,
    /// Walk kernel scale.
    pub a_w: f64,
    /// Traverse kernel scale.
    pub a_t: f64,
    /// Expected number of coordinates updated per move.
    pub n1: f64,
    /// Iterations per recorded state.
    pub record_every: usize,
}

impl TwalkConfig {
    pub fn new(x0: Vec<f64>, x0_prime: Vec<f64>, n: usize, seed: u64) -> Self {
        Self {
            x0,
            x0_prime,
            n,
            seed,
            move_probs: MoveProbs::default(),
            a_w: 1.5,
            a_t: 6.0,
            n1: 4.0,
            record_every: 1,
        }
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        let probs = self.move_probs.as_array();
        if probs.iter().any(|&p| !(p >= 0.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(invalid(
                "move_probs",
                format!("{probs:?} must be nonnegative and sum to 1"),
            ));
        }
        if !(self.a_w > 0.0) {
            return Err(invalid("a_w", "must be positive"));
        }
        if !(self.a_t > 1.0) {
            return Err(invalid("a_t", "must exceed 1"));
        }
        if !(self.n1 > 0.0) {
            return Err(invalid("n1", "must be positive"));
        }
        if self.n == 0 {
            return Err(invalid("n", "must be at least 1"));
        }
        if self.record_every == 0 {
            return Err(invalid("record_every", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kernel {
    Walk,
    Traverse,
    Hop,
    Blow,
}

struct TwalkState<'m> {
    model: &'m dyn TargetModel,
    cfg: &'m TwalkConfig,
    /// Probability that a coordinate is selected for update.
    select_prob: f64,
    mask: Vec<bool>,
    proposal: Vec<f64>,
}

impl TwalkState<'_> {
    fn draw_mask(&mut self, rng: &mut ChaCha8Rng) -> usize {
        for m in self.mask.iter_mut() {
            *m = rng.random::<f64>() < self.select_prob;
        }
        self.mask.iter().filter(|&&m| m).count()
    }

    /// `max_{j selected} |a_j - b_j|`
    fn masked_spread(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.mask)
            .filter(|(_, &m)| m)
            .map(|((x, y), _)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    /// Negative log density of an isotropic normal over the selected coordinates.
    fn neg_log_gauss(&self, h: &[f64], center: &[f64], scale: f64, selected: usize) -> f64 {
        let sq: f64 = h
            .iter()
            .zip(center)
            .zip(&self.mask)
            .filter(|(_, &m)| m)
            .map(|((a, c), _)| (a - c) * (a - c))
            .sum();
        let k = selected as f64;
        0.5 * k * (2.0 * PI).ln() + k * scale.ln() + 0.5 * sq / (scale * scale)
    }

    fn traverse_beta(&self, rng: &mut ChaCha8Rng) -> f64 {
        let at = self.cfg.a_t;
        let u: f64 = rng.random();
        let v: f64 = rng.random();
        if u < (at - 1.0) / (2.0 * at) {
            v.powf(1.0 / (at + 1.0))
        } else {
            v.powf(1.0 / (1.0 - at))
        }
    }

    /// Proposes a replacement for `moving` given the fixed `pivot`; leaves it in
    /// `self.proposal` and returns the log of the proposal-density ratio term, or
    /// `None` when the proposal is degenerate.
    fn propose(&mut self, kernel: Kernel, moving: &[f64], pivot: &[f64], rng: &mut ChaCha8Rng) -> Option<ProposalTerm> {
        let selected = self.draw_mask(rng);
        self.proposal.copy_from_slice(moving);
        match kernel {
            Kernel::Walk => {
                let aw = self.cfg.a_w;
                for j in 0..moving.len() {
                    if self.mask[j] {
                        let u: f64 = rng.random();
                        let z = (aw / (1.0 + aw)) * (aw * u * u + 2.0 * u - 1.0);
                        self.proposal[j] = moving[j] + (moving[j] - pivot[j]) * z;
                    }
                }
                if self.proposal.iter().zip(pivot).any(|(a, b)| a == b) {
                    return None;
                }
                Some(ProposalTerm::LogRatio(0.0))
            }
            Kernel::Traverse => {
                let beta = self.traverse_beta(rng);
                for j in 0..moving.len() {
                    if self.mask[j] {
                        self.proposal[j] = pivot[j] + beta * (pivot[j] - moving[j]);
                    }
                }
                if selected == 0 {
                    return Some(ProposalTerm::Identity);
                }
                Some(ProposalTerm::LogRatio((selected as f64 - 2.0) * beta.ln()))
            }
            Kernel::Hop | Kernel::Blow => {
                if selected == 0 {
                    return Some(ProposalTerm::Identity);
                }
                let spread = self.masked_spread(moving, pivot);
                if !(spread > 0.0) {
                    return None;
                }
                let (center, scale) = match kernel {
                    Kernel::Hop => (moving, spread / 3.0),
                    _ => (pivot, spread),
                };
                for ((slot, c), _) in self.proposal.iter_mut().zip(center).zip(&self.mask).filter(|(_, &m)| m) {
                    *slot = c + scale * rng.sample::<f64, _>(StandardNormal);
                }
                let forward = self.neg_log_gauss(&self.proposal, center, scale, selected);
                let new_spread = self.masked_spread(&self.proposal, pivot);
                if !(new_spread > 0.0) {
                    return None;
                }
                let (rev_center, rev_scale): (&[f64], f64) = match kernel {
                    Kernel::Hop => (&self.proposal, new_spread / 3.0),
                    _ => (pivot, new_spread),
                };
                let backward = self.neg_log_gauss(moving, rev_center, rev_scale, selected);
                // ln g(old | new) - ln g(new | old)
                Some(ProposalTerm::LogRatio(forward - backward))
            }
        }
    }
}

enum ProposalTerm {
    /// No coordinate was selected; the move is a no-op.
    Identity,
    LogRatio(f64),
}

/// The t-walk: a two-point sampler mixing walk, traverse, hop and blow moves.
///
/// Each iteration picks a kernel by `move_probs` and, with equal
/// probability, which of the two points moves while the other acts as the
/// pivot. The primary point `x` is recorded.
pub fn twalk_sample(model: &dyn TargetModel, cfg: &TwalkConfig) -> Result<Trace, SamplerError> {
    cfg.validate()?;
    check_start(model, &cfg.x0)?;
    check_start(model, &cfg.x0_prime)?;
    if cfg.x0 == cfg.x0_prime {
        return Err(SamplerError::CoincidentStart);
    }
    let dim = model.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut walker = TwalkState {
        model,
        cfg,
        select_prob: cfg.n1.min(dim as f64) / dim as f64,
        mask: vec![false; dim],
        proposal: vec![0.0; dim],
    };

    let mut trace = Trace::new(model.name(), "twalk", dim).with_capacity(cfg.n);
    trace.set("n", cfg.n);
    trace.set("seed", cfg.seed);
    trace.set("record_every", cfg.record_every);
    trace.set("init", join(&cfg.x0));
    trace.set("init2", join(&cfg.x0_prime));
    trace.set("move_probs", join(&cfg.move_probs.as_array()));
    trace.set("a_w", cfg.a_w);
    trace.set("a_t", cfg.a_t);
    trace.set("n1", cfg.n1);

    let cumulative = {
        let p = cfg.move_probs.as_array();
        [p[0], p[0] + p[1], p[0] + p[1] + p[2]]
    };
    let mut points = [cfg.x0.clone(), cfg.x0_prime.clone()];
    let mut potentials = [model.potential(&points[0]), model.potential(&points[1])];

    for _ in 0..cfg.n {
        let mut primary_moved = false;
        for _ in 0..cfg.record_every {
            let k: f64 = rng.random();
            let kernel = if k < cumulative[0] {
                Kernel::Walk
            } else if k < cumulative[1] {
                Kernel::Traverse
            } else if k < cumulative[2] {
                Kernel::Hop
            } else {
                Kernel::Blow
            };
            let which = usize::from(rng.random::<f64>() >= 0.5);
            let (moving, pivot) = (&points[which], &points[1 - which]);
            let term = walker.propose(kernel, moving, pivot, &mut rng);

            let u: f64 = rng.random();
            trace.proposals += 1;
            let accept = match term {
                None => None,
                Some(ProposalTerm::Identity) => Some(potentials[which]),
                Some(ProposalTerm::LogRatio(log_g)) => {
                    let candidate = &walker.proposal;
                    if candidate.iter().all(|x| x.is_finite()) && walker.model.in_support(candidate) {
                        let u_new = walker.model.potential(candidate);
                        let log_a = (potentials[which] - u_new) + log_g;
                        (u_new.is_finite() && u < log_a.exp()).then_some(u_new)
                    } else {
                        None
                    }
                }
            };
            if let Some(u_new) = accept {
                trace.acceptances += 1;
                points[which].copy_from_slice(&walker.proposal);
                potentials[which] = u_new;
                if which == 0 {
                    primary_moved = true;
                }
            }
        }
        trace.push(&points[0], -potentials[0], primary_moved);
    }
    Ok(trace)
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{BivariateNormal, Gamma51, IsotropicGaussian};

    fn rate(t: &Trace) -> f64 {
        t.acceptances as f64 / t.proposals as f64
    }

    #[test]
    fn hmc_exact_flow_accepts_everything() {
        let mut cfg = HmcConfig::new(0.1, 10, 2000, 3);
        cfg.trajectory = Trajectory::ExactGaussian;
        let t = hmc_sample(&IsotropicGaussian { dim: 2 }, &cfg, &[3.0, -1.0]).unwrap();
        assert_eq!(t.acceptances, 2000);
    }

    #[test]
    fn hmc_rejects_bad_start_and_config() {
        let cfg = HmcConfig::new(0.1, 10, 10, 1);
        assert!(matches!(
            hmc_sample(&Gamma51, &cfg, &[-1.0]),
            Err(SamplerError::OutOfSupport(_))
        ));
        let bad = HmcConfig::new(0.0, 10, 10, 1);
        assert!(matches!(
            hmc_sample(&Gamma51, &bad, &[1.0]),
            Err(SamplerError::InvalidConfig { field: "epsilon", .. })
        ));
        let bad = HmcConfig {
            steps: 0,
            ..cfg.clone()
        };
        assert!(hmc_sample(&Gamma51, &bad, &[1.0]).is_err());
        let bad = HmcConfig {
            step_jitter: 1.0,
            ..cfg
        };
        assert!(hmc_sample(&Gamma51, &bad, &[1.0]).is_err());
    }

    #[test]
    fn hmc_gamma_degenerate_tuning_rejects() {
        let t = hmc_sample(&Gamma51, &HmcConfig::new(5.0, 6, 5000, 11), &[500.0]).unwrap();
        assert!(rate(&t) <= 0.01, "{}", rate(&t));
    }

    #[test]
    fn hmc_jitter_and_mass_run() {
        let mut cfg = HmcConfig::new(0.15, 20, 500, 5);
        cfg.step_jitter = 0.2;
        cfg.mass = Some(MassMatrix::new(vec![2.0, 0.5]).unwrap());
        let t = hmc_sample(&BivariateNormal::benchmark(), &cfg, &[0.0, 0.0]).unwrap();
        assert_eq!(t.len(), 500);
        assert!(rate(&t) > 0.5);
    }

    #[test]
    fn samplers_are_deterministic() {
        let m = BivariateNormal::benchmark();
        let a = hmc_sample(&m, &HmcConfig::new(0.15, 35, 300, 9), &[-7.0, -7.0]).unwrap();
        let b = hmc_sample(&m, &HmcConfig::new(0.15, 35, 300, 9), &[-7.0, -7.0]).unwrap();
        assert_eq!(a, b);
        let a = rwmh_sample(&m, &RwmhConfig::new(0.15, 300, 9), &[-7.0, -7.0]).unwrap();
        let b = rwmh_sample(&m, &RwmhConfig::new(0.15, 300, 9), &[-7.0, -7.0]).unwrap();
        assert_eq!(a, b);
        let cfg = TwalkConfig::new(vec![-7.0, -7.0], vec![-6.5, -6.5], 300, 9);
        assert_eq!(twalk_sample(&m, &cfg).unwrap(), twalk_sample(&m, &cfg).unwrap());
        let c = hmc_sample(&m, &HmcConfig::new(0.15, 35, 300, 10), &[-7.0, -7.0]).unwrap();
        assert_ne!(a.column(0), c.column(0));
    }

    #[test]
    fn rejected_rows_repeat_previous_state() {
        let m = BivariateNormal::benchmark();
        let traces = [
            hmc_sample(&m, &HmcConfig::new(0.9, 10, 500, 2), &[1.0, 1.0]).unwrap(),
            rwmh_sample(
                &m,
                &RwmhConfig {
                    record_every: 3,
                    ..RwmhConfig::new(1.5, 500, 2)
                },
                &[1.0, 1.0],
            )
            .unwrap(),
            twalk_sample(&m, &TwalkConfig::new(vec![1.0, 1.0], vec![0.0, 2.0], 500, 2)).unwrap(),
        ];
        for t in &traces {
            assert!(t.accepted().iter().any(|&a| !a), "{}", t.sampler_name);
            for i in 1..t.len() {
                if !t.accepted()[i] {
                    assert_eq!(t.state(i), t.state(i - 1));
                }
                let expected = -m.potential(t.state(i));
                assert!((t.log_density()[i] - expected).abs() <= 1e-12 * expected.abs().max(1.0));
            }
        }
    }

    #[test]
    fn rwmh_tiny_sigma_accepts() {
        let t = rwmh_sample(
            &BivariateNormal::benchmark(),
            &RwmhConfig::new(1e-4, 20_000, 4),
            &[0.5, 0.2],
        )
        .unwrap();
        assert!(rate(&t) > 0.999);
    }

    #[test]
    fn rwmh_counts_every_iteration() {
        let cfg = RwmhConfig {
            record_every: 7,
            ..RwmhConfig::new(0.5, 100, 1)
        };
        let t = rwmh_sample(&BivariateNormal::benchmark(), &cfg, &[0.0, 0.0]).unwrap();
        assert_eq!(t.len(), 100);
        assert_eq!(t.proposals, 700);
    }

    #[test]
    fn rwmh_rejects_outside_support() {
        let t = rwmh_sample(&Gamma51, &RwmhConfig::new(50.0, 2000, 3), &[1.0]).unwrap();
        assert!(t.states().all(|s| s[0] > 0.0));
    }

    #[test]
    fn twalk_validation() {
        let m = BivariateNormal::benchmark();
        let same = TwalkConfig::new(vec![1.0, 1.0], vec![1.0, 1.0], 10, 1);
        assert_eq!(twalk_sample(&m, &same), Err(SamplerError::CoincidentStart));
        let mut bad = TwalkConfig::new(vec![1.0, 1.0], vec![2.0, 1.0], 10, 1);
        bad.move_probs.hop = 0.5;
        assert!(matches!(
            twalk_sample(&m, &bad),
            Err(SamplerError::InvalidConfig {
                field: "move_probs",
                ..
            })
        ));
        let outside = TwalkConfig::new(vec![1.0], vec![-1.0], 10, 1);
        assert!(matches!(
            twalk_sample(&Gamma51, &outside),
            Err(SamplerError::OutOfSupport(_))
        ));
    }

    #[test]
    fn twalk_recovers_standard_normal_moments() {
        let cfg = TwalkConfig::new(vec![0.5, -0.5, 1.0], vec![-1.0, 0.2, 0.3], 200_000, 17);
        let t = twalk_sample(&IsotropicGaussian { dim: 3 }, &cfg).unwrap();
        for j in 0..3 {
            let col = &t.column(j)[20_000..];
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / col.len() as f64;
            assert!(mean.abs() < 0.1, "mean {mean}");
            assert!((var - 1.0).abs() < 0.15, "var {var}");
        }
    }

    #[test]
    fn thin_examples() {
        let mut t = Trace::new("m", "s", 1);
        for i in 0..10 {
            t.push(&[i as f64], 0.0, true);
        }
        assert_eq!(thin(&t, 0, 1).unwrap().column(0), t.column(0));
        let th = thin(&t, 4, 3).unwrap();
        assert_eq!(th.column(0), vec![4.0, 7.0]);
        assert_eq!(th.thinning, Some((4, 3)));
        assert!(matches!(thin(&t, 10, 1), Err(SamplerError::BurninTooLong { .. })));
        assert!(thin(&t, 0, 0).is_err());
    }

    #[test]
    fn thin_composes() {
        let m = BivariateNormal::benchmark();
        let t = rwmh_sample(&m, &RwmhConfig::new(0.8, 997, 8), &[0.0, 0.0]).unwrap();
        for (a, b) in [(2, 3), (5, 1), (4, 7)] {
            let twice = thin(&thin(&t, 0, a).unwrap(), 0, b).unwrap();
            assert_eq!(twice, thin(&t, 0, a * b).unwrap());
        }
    }
}
