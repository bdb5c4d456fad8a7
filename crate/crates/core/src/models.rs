//! Target distributions expressed as potential energies `U(q) = -ln S(q)`.
//!
//! Every model exposes its potential, the analytic gradient and a support
//! predicate through [`TargetModel`]. The four built-in targets are the
//! Gamma(5,1) density, a correlated bivariate normal, a two-component
//! Gaussian mixture and the eight-schools hierarchical posterior.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("point is outside the support of model `{model}`")]
    OutOfSupport { model: String },
    #[error("perturbing coordinate {coordinate} by {step} leaves the support of model `{model}`")]
    PerturbationOutOfSupport {
        model: String,
        coordinate: usize,
        step: f64,
    },
    #[error("model `{model}` expects dimension {expected}, got {actual}")]
    DimensionMismatch {
        model: String,
        expected: usize,
        actual: usize,
    },
    #[error("unknown model `{0}` (expected one of gamma51, binormal, mixture, eightschools)")]
    UnknownModel(String),
    #[error("invalid model parameters: {0}")]
    InvalidParameters(String),
}

/// A differentiable target density, described by its potential energy.
///
/// `potential` and `gradient` are only required to be meaningful where
/// `in_support` holds; samplers check support before evaluating.
pub trait TargetModel: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    /// `U(q) = -ln S(q)` for an unnormalized density `S`.
    fn potential(&self, q: &[f64]) -> f64;

    /// Writes `∇U(q)` into `grad`, which has length `dim()`.
    fn gradient(&self, q: &[f64], grad: &mut [f64]);

    fn in_support(&self, _q: &[f64]) -> bool {
        true
    }

    /// Log of the unnormalized density, `-U(q)`.
    fn log_density(&self, q: &[f64]) -> f64 {
        -self.potential(q)
    }
}

pub type SharedModel = Arc<dyn TargetModel>;

fn check_dim(model: &dyn TargetModel, q: &[f64]) -> Result<(), ModelError> {
    if q.len() != model.dim() {
        return Err(ModelError::DimensionMismatch {
            model: model.name().to_string(),
            expected: model.dim(),
            actual: q.len(),
        });
    }
    Ok(())
}

/// Potential with dimension and support checks.
pub fn try_potential(model: &dyn TargetModel, q: &[f64]) -> Result<f64, ModelError> {
    check_dim(model, q)?;
    if !model.in_support(q) {
        return Err(ModelError::OutOfSupport {
            model: model.name().to_string(),
        });
    }
    Ok(model.potential(q))
}

/// Gradient with dimension and support checks.
pub fn try_gradient(model: &dyn TargetModel, q: &[f64]) -> Result<Vec<f64>, ModelError> {
    check_dim(model, q)?;
    if !model.in_support(q) {
        return Err(ModelError::OutOfSupport {
            model: model.name().to_string(),
        });
    }
    let mut grad = vec![0.0; q.len()];
    model.gradient(q, &mut grad);
    Ok(grad)
}

/// Maximum relative discrepancy between the analytic gradient and central
/// finite differences of the potential with step `h`:
/// `max_i |g_i - (U(q+h e_i) - U(q-h e_i)) / 2h| / max(1, |g_i|)`.
pub fn check_gradient(model: &dyn TargetModel, q: &[f64], h: f64) -> Result<f64, ModelError> {
    let grad = try_gradient(model, q)?;
    let mut probe = q.to_vec();
    let mut worst: f64 = 0.0;
    for (i, &g) in grad.iter().enumerate() {
        let orig = probe[i];
        probe[i] = orig + h;
        let plus_ok = model.in_support(&probe);
        let up = model.potential(&probe);
        probe[i] = orig - h;
        let minus_ok = model.in_support(&probe);
        let um = model.potential(&probe);
        probe[i] = orig;
        if !(plus_ok && minus_ok) {
            return Err(ModelError::PerturbationOutOfSupport {
                model: model.name().to_string(),
                coordinate: i,
                step: h,
            });
        }
        let fd = (up - um) / (2.0 * h);
        worst = worst.max((g - fd).abs() / g.abs().max(1.0));
    }
    Ok(worst)
}

/// Names accepted by [`model_by_name`].
pub const MODEL_NAMES: [&str; 4] = ["gamma51", "binormal", "mixture", "eightschools"];

/// Builds one of the built-in models from its registry name.
pub fn model_by_name(name: &str) -> Result<SharedModel, ModelError> {
    match name {
        "gamma51" => Ok(Arc::new(Gamma51)),
        "binormal" => Ok(Arc::new(BivariateNormal::benchmark())),
        "mixture" => Ok(Arc::new(GaussianMixture::benchmark())),
        "eightschools" => Ok(Arc::new(EightSchools::new(EightSchoolsData::sat_coaching()))),
        other => Err(ModelError::UnknownModel(other.to_string())),
    }
}

// ---------------------------------------------------------------------------
// Gamma(5, 1)
// ---------------------------------------------------------------------------

/// `U(q) = -4 ln q + q`; the kernel `q^4 e^{-q}` of a Gamma(5,1) density.
pub fn gamma51_potential(q: f64) -> Result<f64, ModelError> {
    if q > 0.0 {
        Ok(-4.0 * q.ln() + q)
    } else {
        Err(ModelError::OutOfSupport {
            model: "gamma51".into(),
        })
    }
}

pub fn gamma51_grad(q: f64) -> Result<f64, ModelError> {
    if q > 0.0 {
        Ok(-4.0 / q + 1.0)
    } else {
        Err(ModelError::OutOfSupport {
            model: "gamma51".into(),
        })
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Gamma51;

impl TargetModel for Gamma51 {
    fn name(&self) -> &str {
        "gamma51"
    }

    fn dim(&self) -> usize {
        1
    }

    fn potential(&self, q: &[f64]) -> f64 {
        -4.0 * q[0].ln() + q[0]
    }

    fn gradient(&self, q: &[f64], grad: &mut [f64]) {
        grad[0] = -4.0 / q[0] + 1.0;
    }

    fn in_support(&self, q: &[f64]) -> bool {
        q[0] > 0.0
    }
}

// ---------------------------------------------------------------------------
// 2x2 helpers
// ---------------------------------------------------------------------------

type Mat2 = [[f64; 2]; 2];

fn det2(m: &Mat2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

fn inverse2(m: &Mat2) -> Result<Mat2, ModelError> {
    let det = det2(m);
    if !(det > 0.0) || m[0][1] != m[1][0] {
        return Err(ModelError::InvalidParameters(format!(
            "covariance {m:?} is not symmetric positive definite"
        )));
    }
    Ok([[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]])
}

fn mat_vec2(m: &Mat2, v: [f64; 2]) -> [f64; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

fn quad_form2(m: &Mat2, v: [f64; 2]) -> f64 {
    let mv = mat_vec2(m, v);
    v[0] * mv[0] + v[1] * mv[1]
}

// ---------------------------------------------------------------------------
// Bivariate normal
// ---------------------------------------------------------------------------

/// Zero-mean bivariate normal, `U(q) = qᵀ Σ⁻¹ q / 2`.
#[derive(Debug, Clone)]
pub struct BivariateNormal {
    covariance: Mat2,
    precision: Mat2,
}

impl BivariateNormal {
    pub fn new(covariance: Mat2) -> Result<Self, ModelError> {
        let precision = inverse2(&covariance)?;
        Ok(Self { covariance, precision })
    }

    /// Unit variances with correlation -0.85.
    pub fn benchmark() -> Self {
        Self::new([[1.0, -0.85], [-0.85, 1.0]]).expect("fixed covariance is positive definite")
    }

    pub fn covariance(&self) -> Mat2 {
        self.covariance
    }

    pub fn precision(&self) -> Mat2 {
        self.precision
    }
}

impl TargetModel for BivariateNormal {
    fn name(&self) -> &str {
        "binormal"
    }

    fn dim(&self) -> usize {
        2
    }

    fn potential(&self, q: &[f64]) -> f64 {
        0.5 * quad_form2(&self.precision, [q[0], q[1]])
    }

    fn gradient(&self, q: &[f64], grad: &mut [f64]) {
        let g = mat_vec2(&self.precision, [q[0], q[1]]);
        grad[0] = g[0];
        grad[1] = g[1];
    }
}

// ---------------------------------------------------------------------------
// Gaussian mixture
// ---------------------------------------------------------------------------

/// One normalized bivariate normal component of a mixture.
#[derive(Debug, Clone)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: [f64; 2],
    pub covariance: Mat2,
    precision: Mat2,
    /// `ln w - ln(2π) - ln(det Σ)/2`
    log_scale: f64,
}

impl MixtureComponent {
    pub fn new(weight: f64, mean: [f64; 2], covariance: Mat2) -> Result<Self, ModelError> {
        if !(weight > 0.0) {
            return Err(ModelError::InvalidParameters(format!(
                "mixture weight {weight} must be positive"
            )));
        }
        let precision = inverse2(&covariance)?;
        let log_scale = weight.ln() - (2.0 * PI).ln() - 0.5 * det2(&covariance).ln();
        Ok(Self {
            weight,
            mean,
            covariance,
            precision,
            log_scale,
        })
    }

    /// `ln(w · f(q | μ, Σ))`
    fn log_weighted_density(&self, q: &[f64]) -> f64 {
        let d = [q[0] - self.mean[0], q[1] - self.mean[1]];
        self.log_scale - 0.5 * quad_form2(&self.precision, d)
    }

    /// Normalized multivariate-normal density, no weight.
    pub fn density(&self, q: &[f64]) -> f64 {
        (self.log_weighted_density(q) - self.weight.ln()).exp()
    }
}

/// `U(q) = -ln Σ_k w_k f(q | μ_k, Σ_k)` evaluated with log-sum-exp.
#[derive(Debug, Clone)]
pub struct GaussianMixture {
    components: Vec<MixtureComponent>,
}

impl GaussianMixture {
    pub fn new(components: Vec<MixtureComponent>) -> Result<Self, ModelError> {
        if components.is_empty() {
            return Err(ModelError::InvalidParameters(
                "mixture needs at least one component".into(),
            ));
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(ModelError::InvalidParameters(format!(
                "mixture weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { components })
    }

    /// `0.4 N((-4,-4), [[1, .5], [.5, 1]]) + 0.6 N((5,5), [[1, -.3], [-.3, 1]])`.
    pub fn benchmark() -> Self {
        let c1 = MixtureComponent::new(0.4, [-4.0, -4.0], [[1.0, 0.5], [0.5, 1.0]]).expect("valid component");
        let c2 = MixtureComponent::new(0.6, [5.0, 5.0], [[1.0, -0.3], [-0.3, 1.0]]).expect("valid component");
        Self::new(vec![c1, c2]).expect("weights sum to one")
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    /// Component log-terms and their log-sum-exp.
    fn log_terms(&self, q: &[f64]) -> (Vec<f64>, f64) {
        let terms: Vec<f64> = self.components.iter().map(|c| c.log_weighted_density(q)).collect();
        let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = terms.iter().map(|t| (t - max).exp()).sum();
        (terms, max + sum.ln())
    }
}

impl TargetModel for GaussianMixture {
    fn name(&self) -> &str {
        "mixture"
    }

    fn dim(&self) -> usize {
        2
    }

    fn potential(&self, q: &[f64]) -> f64 {
        -self.log_terms(q).1
    }

    // ∇U = Σ_k r_k Σ_k⁻¹ (q - μ_k) with responsibilities r_k computed in log space.
    fn gradient(&self, q: &[f64], grad: &mut [f64]) {
        let (terms, lse) = self.log_terms(q);
        grad[0] = 0.0;
        grad[1] = 0.0;
        for (c, t) in self.components.iter().zip(terms) {
            let r = (t - lse).exp();
            let g = mat_vec2(&c.precision, [q[0] - c.mean[0], q[1] - c.mean[1]]);
            grad[0] += r * g[0];
            grad[1] += r * g[1];
        }
    }
}

// ---------------------------------------------------------------------------
// Eight schools
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct EightSchoolsData {
    /// Estimated coaching effects `y_i`.
    pub effects: [f64; 8],
    /// Known standard deviations `κ_i` (not variances).
    pub deviations: [f64; 8],
}

impl EightSchoolsData {
    pub fn new(effects: [f64; 8], deviations: [f64; 8]) -> Result<Self, ModelError> {
        if deviations.iter().any(|&k| !(k > 0.0)) {
            return Err(ModelError::InvalidParameters(
                "all school deviations must be positive".into(),
            ));
        }
        Ok(Self { effects, deviations })
    }

    /// SAT coaching effects, rescaled as in the original comparison.
    pub fn sat_coaching() -> Self {
        Self::new(
            [2.8, 0.8, -0.3, 0.7, -0.1, 0.1, 1.8, 1.2],
            [0.8, 0.5, 0.8, 0.6, 0.5, 0.6, 0.5, 0.4],
        )
        .expect("positive deviations")
    }
}

/// Non-centered eight-schools posterior over `x = (η₁..η₈, μ, τ)` with
/// standard normal priors on every coordinate and `θ_i = μ + τ η_i`.
#[derive(Debug, Clone)]
pub struct EightSchools {
    data: EightSchoolsData,
    inv_var: [f64; 8],
}

impl EightSchools {
    pub const DIM: usize = 10;
    pub const MU: usize = 8;
    pub const TAU: usize = 9;

    pub fn new(data: EightSchoolsData) -> Self {
        let mut inv_var = [0.0; 8];
        for (iv, k) in inv_var.iter_mut().zip(data.deviations) {
            *iv = 1.0 / (k * k);
        }
        Self { data, inv_var }
    }

    pub fn data(&self) -> &EightSchoolsData {
        &self.data
    }
}

impl TargetModel for EightSchools {
    fn name(&self) -> &str {
        "eightschools"
    }

    fn dim(&self) -> usize {
        Self::DIM
    }

    fn potential(&self, x: &[f64]) -> f64 {
        let mu = x[Self::MU];
        let tau = x[Self::TAU];
        let mut u = 0.5 * mu * mu + 0.5 * tau * tau;
        for (i, &eta) in x[..8].iter().enumerate() {
            let resid = self.data.effects[i] - (mu + tau * eta);
            u += 0.5 * eta * eta + 0.5 * resid * resid * self.inv_var[i];
        }
        u
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        let mu = x[Self::MU];
        let tau = x[Self::TAU];
        let mut d_mu = mu;
        let mut d_tau = tau;
        for i in 0..8 {
            let eta = x[i];
            let scaled = (self.data.effects[i] - (mu + tau * eta)) * self.inv_var[i];
            grad[i] = eta - scaled * tau;
            d_mu -= scaled;
            d_tau -= scaled * eta;
        }
        grad[Self::MU] = d_mu;
        grad[Self::TAU] = d_tau;
    }
}

// ---------------------------------------------------------------------------
// Utility models
// ---------------------------------------------------------------------------

/// `U(q) = |q|²/2`: the standard normal, i.e. a unit harmonic oscillator.
#[derive(Debug, Clone, Copy)]
pub struct IsotropicGaussian {
    pub dim: usize,
}

impl TargetModel for IsotropicGaussian {
    fn name(&self) -> &str {
        "isotropic"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn potential(&self, q: &[f64]) -> f64 {
        0.5 * q.iter().map(|x| x * x).sum::<f64>()
    }

    fn gradient(&self, q: &[f64], grad: &mut [f64]) {
        grad.copy_from_slice(q);
    }
}

type PotentialFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradientFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;
type SupportFn = dyn Fn(&[f64]) -> bool + Send + Sync;

/// A model assembled from user-supplied closures.
pub struct FnModel {
    name: String,
    dim: usize,
    potential: Box<PotentialFn>,
    gradient: Box<GradientFn>,
    support: Option<Box<SupportFn>>,
}

impl FnModel {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        potential: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            dim,
            potential: Box::new(potential),
            gradient: Box::new(gradient),
            support: None,
        }
    }

    pub fn with_support(mut self, support: impl Fn(&[f64]) -> bool + Send + Sync + 'static) -> Self {
        self.support = Some(Box::new(support));
        self
    }
}

impl fmt::Debug for FnModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnModel")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .finish_non_exhaustive()
    }
}

impl TargetModel for FnModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn potential(&self, q: &[f64]) -> f64 {
        (self.potential)(q)
    }

    fn gradient(&self, q: &[f64], grad: &mut [f64]) {
        (self.gradient)(q, grad)
    }

    fn in_support(&self, q: &[f64]) -> bool {
        self.support.as_ref().is_none_or(|s| s(q))
    }
}
