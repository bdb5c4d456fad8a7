//! Separable Hamiltonian `H(q, p) = Σ p_i²/(2 m_i) + U(q)` and explicit
//! integrators for Hamilton's equations, plus probes for the properties HMC
//! relies on: reversibility, energy drift and symplecticity.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::models::TargetModel;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    /// Position left the support or a non-finite value appeared mid-trajectory.
    /// Samplers treat this as a rejected proposal.
    #[error("trajectory diverged after {step} step(s)")]
    Diverged { step: usize },
    #[error("starting position is outside the model support")]
    OutOfSupport,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid mass matrix: {0}")]
    InvalidMass(String),
    #[error("unknown integrator `{0}` (expected leapfrog, euler or symplectic-euler)")]
    UnknownIntegrator(String),
}

/// A point `(q, p)` in phase space.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl PhaseState {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Result<Self, DynamicsError> {
        if q.len() != p.len() {
            return Err(DynamicsError::DimensionMismatch {
                expected: q.len(),
                actual: p.len(),
            });
        }
        Ok(Self { q, p })
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(&self.p).all(|x| x.is_finite())
    }

    /// `(q, -p)`
    pub fn flip_momentum(&mut self) {
        self.p.iter_mut().for_each(|x| *x = -*x);
    }

    /// Max-norm distance over both position and momentum.
    pub fn max_distance(&self, other: &PhaseState) -> f64 {
        self.q
            .iter()
            .zip(&other.q)
            .chain(self.p.iter().zip(&other.p))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Diagonal mass matrix; also the covariance of the momentum distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct MassMatrix(Vec<f64>);

impl MassMatrix {
    pub fn new(diag: Vec<f64>) -> Result<Self, DynamicsError> {
        if diag.is_empty() {
            return Err(DynamicsError::InvalidMass("empty diagonal".into()));
        }
        if let Some(m) = diag.iter().find(|m| !(**m > 0.0 && m.is_finite())) {
            return Err(DynamicsError::InvalidMass(format!(
                "entry {m} is not a positive finite number"
            )));
        }
        Ok(Self(diag))
    }

    pub fn identity(dim: usize) -> Self {
        Self(vec![1.0; dim])
    }

    pub fn diag(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().all(|&m| m == 1.0)
    }
}

pub fn kinetic_energy(p: &[f64], mass: &MassMatrix) -> f64 {
    p.iter().zip(mass.diag()).map(|(pi, mi)| pi * pi / (2.0 * mi)).sum()
}

/// `Σ p_i²/(2 m_i) + U(q)`.
pub fn hamiltonian(model: &dyn TargetModel, state: &PhaseState, mass: &MassMatrix) -> Result<f64, DynamicsError> {
    check_dims(model, state, mass)?;
    if !model.in_support(&state.q) {
        return Err(DynamicsError::OutOfSupport);
    }
    Ok(kinetic_energy(&state.p, mass) + model.potential(&state.q))
}

fn check_dims(model: &dyn TargetModel, state: &PhaseState, mass: &MassMatrix) -> Result<(), DynamicsError> {
    let d = model.dim();
    for actual in [state.q.len(), state.p.len(), mass.dim()] {
        if actual != d {
            return Err(DynamicsError::DimensionMismatch { expected: d, actual });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Integrator {
    /// Kick-drift-kick: second order, symplectic and reversible.
    #[default]
    Leapfrog,
    /// Explicit forward Euler; first order and not volume preserving.
    Euler,
    /// Kick then drift with the updated momentum; first order, symplectic.
    SymplecticEuler,
}

impl Integrator {
    pub const ALL: [Integrator; 3] = [Integrator::Leapfrog, Integrator::Euler, Integrator::SymplecticEuler];

    pub fn as_str(self) -> &'static str {
        match self {
            Integrator::Leapfrog => "leapfrog",
            Integrator::Euler => "euler",
            Integrator::SymplecticEuler => "symplectic-euler",
        }
    }

    /// One step of size `eps` applied to `state`.
    pub fn step(
        self,
        model: &dyn TargetModel,
        state: &PhaseState,
        eps: f64,
        mass: &MassMatrix,
    ) -> Result<PhaseState, DynamicsError> {
        self.integrate(model, state, eps, 1, mass)
    }

    /// `steps` composed applications of [`Integrator::step`].
    pub fn integrate(
        self,
        model: &dyn TargetModel,
        state: &PhaseState,
        eps: f64,
        steps: usize,
        mass: &MassMatrix,
    ) -> Result<PhaseState, DynamicsError> {
        check_dims(model, state, mass)?;
        if !model.in_support(&state.q) {
            return Err(DynamicsError::OutOfSupport);
        }
        let mut out = state.clone();
        let mut ws = Workspace::new(model, &out.q);
        for _ in 0..steps {
            ws.step(self, model, &mut out, eps, mass)?;
        }
        Ok(out)
    }
}

impl fmt::Display for Integrator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Integrator {
    type Err = DynamicsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "leapfrog" => Ok(Integrator::Leapfrog),
            "euler" => Ok(Integrator::Euler),
            "symplectic-euler" => Ok(Integrator::SymplecticEuler),
            other => Err(DynamicsError::UnknownIntegrator(other.to_string())),
        }
    }
}

/// Scratch buffers for in-place integration.
///
/// `grad` always holds `∇U` at the current position, so consecutive leapfrog
/// steps reuse the closing half-kick gradient. The values are identical to a
/// fresh evaluation, so composed steps stay bitwise equal to a single call.
#[derive(Debug, Clone)]
pub struct Workspace {
    grad: Vec<f64>,
    scratch: Vec<f64>,
    steps_taken: usize,
}

impl Workspace {
    /// `q` must lie in the model support.
    pub fn new(model: &dyn TargetModel, q: &[f64]) -> Self {
        let mut grad = vec![0.0; q.len()];
        model.gradient(q, &mut grad);
        Self {
            scratch: vec![0.0; q.len()],
            grad,
            steps_taken: 0,
        }
    }

    /// Gradient at the current position.
    pub fn gradient(&self) -> &[f64] {
        &self.grad
    }

    fn refresh(&mut self, model: &dyn TargetModel, q: &[f64]) -> Result<(), DynamicsError> {
        if !q.iter().all(|x| x.is_finite()) || !model.in_support(q) {
            return Err(DynamicsError::Diverged { step: self.steps_taken });
        }
        model.gradient(q, &mut self.grad);
        if !self.grad.iter().all(|g| g.is_finite()) {
            return Err(DynamicsError::Diverged { step: self.steps_taken });
        }
        Ok(())
    }

    pub fn step(
        &mut self,
        method: Integrator,
        model: &dyn TargetModel,
        state: &mut PhaseState,
        eps: f64,
        mass: &MassMatrix,
    ) -> Result<(), DynamicsError> {
        self.steps_taken += 1;
        let m = mass.diag();
        match method {
            Integrator::Leapfrog => {
                let half = 0.5 * eps;
                for ((p, g), (q, mi)) in state.p.iter_mut().zip(&self.grad).zip(state.q.iter_mut().zip(m)) {
                    *p -= half * g;
                    *q += eps * (*p / mi);
                }
                self.refresh(model, &state.q)?;
                for (p, g) in state.p.iter_mut().zip(&self.grad) {
                    *p -= half * g;
                }
            }
            Integrator::Euler => {
                self.scratch.copy_from_slice(&state.p);
                for ((q, p0), mi) in state.q.iter_mut().zip(&self.scratch).zip(m) {
                    *q += eps * (p0 / mi);
                }
                for (p, g) in state.p.iter_mut().zip(&self.grad) {
                    *p -= eps * g;
                }
                self.refresh(model, &state.q)?;
            }
            Integrator::SymplecticEuler => {
                for ((p, g), (q, mi)) in state.p.iter_mut().zip(&self.grad).zip(state.q.iter_mut().zip(m)) {
                    *p -= eps * g;
                    *q += eps * (*p / mi);
                }
                self.refresh(model, &state.q)?;
            }
        }
        if !state.p.iter().all(|x| x.is_finite()) {
            return Err(DynamicsError::Diverged { step: self.steps_taken });
        }
        Ok(())
    }
}

pub fn leapfrog_step(
    model: &dyn TargetModel,
    state: &PhaseState,
    eps: f64,
    mass: &MassMatrix,
) -> Result<PhaseState, DynamicsError> {
    Integrator::Leapfrog.step(model, state, eps, mass)
}

pub fn euler_step(
    model: &dyn TargetModel,
    state: &PhaseState,
    eps: f64,
    mass: &MassMatrix,
) -> Result<PhaseState, DynamicsError> {
    Integrator::Euler.step(model, state, eps, mass)
}

pub fn symplectic_euler_step(
    model: &dyn TargetModel,
    state: &PhaseState,
    eps: f64,
    mass: &MassMatrix,
) -> Result<PhaseState, DynamicsError> {
    Integrator::SymplecticEuler.step(model, state, eps, mass)
}

pub fn integrate(
    model: &dyn TargetModel,
    state: &PhaseState,
    eps: f64,
    steps: usize,
    mass: &MassMatrix,
    method: Integrator,
) -> Result<PhaseState, DynamicsError> {
    method.integrate(model, state, eps, steps, mass)
}

/// Runs `steps` leapfrog steps forward, flips the momentum, runs `steps`
/// more, flips again, and returns the max-norm distance to the start.
pub fn reversibility_defect(
    model: &dyn TargetModel,
    state: &PhaseState,
    eps: f64,
    steps: usize,
    mass: &MassMatrix,
) -> Result<f64, DynamicsError> {
    let mut there = Integrator::Leapfrog.integrate(model, state, eps, steps, mass)?;
    there.flip_momentum();
    let mut back = Integrator::Leapfrog.integrate(model, &there, eps, steps, mass)?;
    back.flip_momentum();
    Ok(back.max_distance(state))
}

/// `|H(end) - H(start)|` after `steps` steps of `method`.
pub fn energy_drift(
    model: &dyn TargetModel,
    state: &PhaseState,
    eps: f64,
    steps: usize,
    mass: &MassMatrix,
    method: Integrator,
) -> Result<f64, DynamicsError> {
    let h0 = hamiltonian(model, state, mass)?;
    let end = method.integrate(model, state, eps, steps, mass)?;
    let h1 = hamiltonian(model, &end, mass)?;
    Ok((h1 - h0).abs())
}

/// Square matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian {
    pub n: usize,
    pub entries: Vec<f64>,
}

impl Jacobian {
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.entries[r * self.n + c]
    }

    /// Determinant by Gaussian elimination with partial pivoting.
    pub fn determinant(&self) -> f64 {
        let n = self.n;
        let mut a = self.entries.clone();
        let mut det = 1.0;
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))
                .unwrap_or(col);
            if a[pivot * n + col] == 0.0 {
                return 0.0;
            }
            if pivot != col {
                for k in 0..n {
                    a.swap(pivot * n + k, col * n + k);
                }
                det = -det;
            }
            let diag = a[col * n + col];
            det *= diag;
            for row in col + 1..n {
                let factor = a[row * n + col] / diag;
                for k in col..n {
                    a[row * n + k] -= factor * a[col * n + k];
                }
            }
        }
        det
    }

    /// Max-abs entry of `MᵀJM - J` with `J = [[0, I], [-I, 0]]`.
    pub fn symplectic_defect(&self) -> f64 {
        let n = self.n;
        let d = n / 2;
        // J M: rows 0..d are M's rows d..n; rows d..n are -M's rows 0..d.
        let jm = |r: usize, c: usize| -> f64 {
            if r < d {
                self.get(r + d, c)
            } else {
                -self.get(r - d, c)
            }
        };
        let j = |r: usize, c: usize| -> f64 {
            if r < d && c == r + d {
                1.0
            } else if r >= d && c + d == r {
                -1.0
            } else {
                0.0
            }
        };
        let mut worst: f64 = 0.0;
        for r in 0..n {
            for c in 0..n {
                let v: f64 = (0..n).map(|k| self.get(k, r) * jm(k, c)).sum();
                worst = worst.max((v - j(r, c)).abs());
            }
        }
        worst
    }
}

/// Central finite-difference Jacobian of one integrator step, with phase
/// coordinates ordered `(q₁..q_d, p₁..p_d)`.
pub fn step_jacobian(
    model: &dyn TargetModel,
    state: &PhaseState,
    eps: f64,
    mass: &MassMatrix,
    method: Integrator,
    h: f64,
) -> Result<Jacobian, DynamicsError> {
    let d = state.dim();
    let n = 2 * d;
    let mut entries = vec![0.0; n * n];
    let flat = |s: &PhaseState| -> Vec<f64> { s.q.iter().chain(&s.p).copied().collect() };
    for c in 0..n {
        let mut plus = state.clone();
        let mut minus = state.clone();
        if c < d {
            plus.q[c] += h;
            minus.q[c] -= h;
        } else {
            plus.p[c - d] += h;
            minus.p[c - d] -= h;
        }
        let fp = flat(&method.step(model, &plus, eps, mass)?);
        let fm = flat(&method.step(model, &minus, eps, mass)?);
        for r in 0..n {
            entries[r * n + c] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
    Ok(Jacobian { n, entries })
}

/// Max-abs entry of `MᵀJM - J` for the finite-difference Jacobian `M` of one step.
pub fn symplectic_defect(
    model: &dyn TargetModel,
    state: &PhaseState,
    eps: f64,
    mass: &MassMatrix,
    method: Integrator,
    h: f64,
) -> Result<f64, DynamicsError> {
    Ok(step_jacobian(model, state, eps, mass, method, h)?.symplectic_defect())
}

/// Closed-form flow of `U(q) = |q|²/2` with unit masses: a rotation of
/// each `(q_i, p_i)` plane by angle `t`.
pub fn exact_gaussian_flow(state: &PhaseState, t: f64) -> PhaseState {
    let (s, c) = t.sin_cos();
    let q = state.q.iter().zip(&state.p).map(|(q, p)| q * c + p * s).collect();
    let p = state.q.iter().zip(&state.p).map(|(q, p)| -q * s + p * c).collect();
    PhaseState { q, p }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{BivariateNormal, FnModel, Gamma51, IsotropicGaussian};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn osc() -> IsotropicGaussian {
        IsotropicGaussian { dim: 1 }
    }

    fn st(q: &[f64], p: &[f64]) -> PhaseState {
        PhaseState::new(q.to_vec(), p.to_vec()).unwrap()
    }

    fn free() -> FnModel {
        FnModel::new("free", 2, |_| 0.0, |_, g| g.fill(0.0))
    }

    #[test]
    fn hamiltonian_examples() {
        let m2 = MassMatrix::identity(2);
        assert_eq!(hamiltonian(&free(), &st(&[0.0, 0.0], &[3.0, 4.0]), &m2).unwrap(), 12.5);
        assert_eq!(
            hamiltonian(&Gamma51, &st(&[1.0], &[0.0]), &MassMatrix::identity(1)).unwrap(),
            1.0
        );
        let h = hamiltonian(&BivariateNormal::benchmark(), &st(&[1.0, 1.0], &[1.0, 0.0]), &m2).unwrap();
        assert_abs_diff_eq!(h, 7.166666666666666, epsilon = 1e-12);
        assert_eq!(
            hamiltonian(&Gamma51, &st(&[-1.0], &[0.0]), &MassMatrix::identity(1)),
            Err(DynamicsError::OutOfSupport)
        );
    }

    #[test]
    fn single_step_examples() {
        let m = MassMatrix::identity(1);
        let s = st(&[1.0], &[0.0]);
        // p½ = -0.05, q' = 0.995, p' = -0.05 - 0.05·0.995
        let lf = leapfrog_step(&osc(), &s, 0.1, &m).unwrap();
        assert_abs_diff_eq!(lf.q[0], 0.995, epsilon = 1e-15);
        assert_abs_diff_eq!(lf.p[0], -0.09975, epsilon = 1e-15);
        let eu = euler_step(&osc(), &s, 0.1, &m).unwrap();
        assert_abs_diff_eq!(eu.q[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(eu.p[0], -0.1, epsilon = 1e-15);
        let se = symplectic_euler_step(&osc(), &s, 0.1, &m).unwrap();
        assert_abs_diff_eq!(se.q[0], 0.99, epsilon = 1e-15);
        assert_abs_diff_eq!(se.p[0], -0.1, epsilon = 1e-15);
    }

    #[test]
    fn free_particle_drifts() {
        let mass = MassMatrix::new(vec![2.0, 0.5]).unwrap();
        let s = st(&[1.0, -1.0], &[3.0, 1.0]);
        for method in Integrator::ALL {
            let out = method.step(&free(), &s, 0.2, &mass).unwrap();
            assert_eq!(out.q, vec![1.0 + 0.2 * (3.0 / 2.0), -1.0 + 0.2 * (1.0 / 0.5)]);
            assert_eq!(out.p, s.p);
        }
    }

    #[test]
    fn zero_step_is_identity() {
        let s = st(&[0.7, -0.2], &[0.1, 0.9]);
        let model = BivariateNormal::benchmark();
        for method in Integrator::ALL {
            assert_eq!(method.step(&model, &s, 0.0, &MassMatrix::identity(2)).unwrap(), s);
        }
        assert_eq!(
            energy_drift(&model, &s, 0.0, 10, &MassMatrix::identity(2), Integrator::Leapfrog).unwrap(),
            0.0
        );
        assert_eq!(
            reversibility_defect(&model, &s, 0.1, 0, &MassMatrix::identity(2)).unwrap(),
            0.0
        );
    }

    #[test]
    fn integrate_composes() {
        let model = BivariateNormal::benchmark();
        let m = MassMatrix::identity(2);
        let s = st(&[0.3, -1.2], &[0.5, 0.25]);
        assert_eq!(
            integrate(&model, &s, 0.1, 1, &m, Integrator::Leapfrog).unwrap(),
            leapfrog_step(&model, &s, 0.1, &m).unwrap()
        );
        let whole = integrate(&model, &s, 0.1, 40, &m, Integrator::Leapfrog).unwrap();
        let half = integrate(&model, &s, 0.1, 20, &m, Integrator::Leapfrog).unwrap();
        let twice = integrate(&model, &half, 0.1, 20, &m, Integrator::Leapfrog).unwrap();
        assert_eq!(whole, twice);
    }

    #[test]
    fn leapfrog_tracks_harmonic_flow() {
        let out = integrate(
            &osc(),
            &st(&[1.0], &[0.0]),
            0.01,
            157,
            &MassMatrix::identity(1),
            Integrator::Leapfrog,
        )
        .unwrap();
        assert!((out.q[0] - 1.57f64.cos()).abs() < 1e-3);
        assert!((out.p[0] + 1.57f64.sin()).abs() < 1e-3);
    }

    #[test]
    fn reversibility_examples() {
        let d = reversibility_defect(&osc(), &st(&[1.0], &[0.5]), 0.1, 100, &MassMatrix::identity(1)).unwrap();
        assert!(d < 1e-10, "{d}");
        let d = reversibility_defect(
            &BivariateNormal::benchmark(),
            &st(&[-1.3, 0.4], &[0.8, -0.6]),
            0.15,
            35,
            &MassMatrix::identity(2),
        )
        .unwrap();
        assert!(d < 1e-9, "{d}");
    }

    #[test]
    fn energy_drift_orders() {
        let s = st(&[1.0], &[0.0]);
        let m = MassMatrix::identity(1);
        let drift = |method, eps: f64| {
            let steps = (5.0 / eps).round() as usize;
            energy_drift(&osc(), &s, eps, steps, &m, method).unwrap()
        };
        // Halving ε shrinks the drift by 2^order.
        let lf = drift(Integrator::Leapfrog, 0.1) / drift(Integrator::Leapfrog, 0.05);
        assert!((3.0..=5.0).contains(&lf), "leapfrog ratio {lf}");
        let eu = drift(Integrator::Euler, 0.1) / drift(Integrator::Euler, 0.05);
        assert!((1.6..=2.6).contains(&eu), "euler ratio {eu}");
    }

    #[test]
    fn symplectic_euler_energy_bounded() {
        let m = MassMatrix::identity(1);
        let mut s = st(&[1.0], &[0.0]);
        let h0 = hamiltonian(&osc(), &s, &m).unwrap();
        let mut worst: f64 = 0.0;
        for _ in 0..10_000 {
            s = symplectic_euler_step(&osc(), &s, 0.1, &m).unwrap();
            worst = worst.max((hamiltonian(&osc(), &s, &m).unwrap() - h0).abs());
        }
        // Modified energy H + ε q p / 2 is conserved exactly, so the excursion is O(ε).
        assert!(worst < 0.1, "{worst}");
    }

    #[test]
    fn symplectic_defect_examples() {
        let m = MassMatrix::identity(1);
        let s = st(&[0.8], &[-0.3]);
        let lf = symplectic_defect(&osc(), &s, 0.1, &m, Integrator::Leapfrog, 1e-6).unwrap();
        let se = symplectic_defect(&osc(), &s, 0.1, &m, Integrator::SymplecticEuler, 1e-6).unwrap();
        let eu = symplectic_defect(&osc(), &s, 0.1, &m, Integrator::Euler, 1e-6).unwrap();
        assert!(lf < 1e-4 && se < 1e-4, "{lf} {se}");
        assert!(eu > 1e-3, "{eu}");
        let det = step_jacobian(&osc(), &s, 0.1, &m, Integrator::Euler, 1e-6)
            .unwrap()
            .determinant();
        assert_abs_diff_eq!(det, 1.01, epsilon = 1e-6);
    }

    #[test]
    fn exact_flow_examples() {
        let s = st(&[1.0, -0.4], &[0.0, 2.0]);
        assert_eq!(exact_gaussian_flow(&s, 0.0), s);
        assert!(exact_gaussian_flow(&s, 2.0 * std::f64::consts::PI).max_distance(&s) < 1e-14);
        let quarter = exact_gaussian_flow(&st(&[1.0], &[0.0]), std::f64::consts::FRAC_PI_2);
        assert!(quarter.max_distance(&st(&[0.0], &[-1.0])) < 1e-15);
    }

    #[test]
    fn divergence_is_reported() {
        // A step that crosses q = 0 leaves the Gamma support.
        let err = leapfrog_step(&Gamma51, &st(&[0.5], &[-10.0]), 0.5, &MassMatrix::identity(1));
        assert!(matches!(err, Err(DynamicsError::Diverged { .. })));
    }

    #[test]
    fn integrator_names_round_trip() {
        for m in Integrator::ALL {
            assert_eq!(m.as_str().parse::<Integrator>().unwrap(), m);
        }
        assert!("rk4".parse::<Integrator>().is_err());
    }

    #[test]
    fn mass_must_be_positive() {
        assert!(MassMatrix::new(vec![1.0, 0.0]).is_err());
        assert!(MassMatrix::new(vec![]).is_err());
    }

    proptest! {
        #[test]
        fn exact_flow_conserves_energy(q in -5.0..5.0f64, p in -5.0..5.0f64, t in -20.0..20.0f64) {
            let model = IsotropicGaussian { dim: 1 };
            let m = MassMatrix::identity(1);
            let s = st(&[q], &[p]);
            let h0 = hamiltonian(&model, &s, &m).unwrap();
            let h1 = hamiltonian(&model, &exact_gaussian_flow(&s, t), &m).unwrap();
            prop_assert!((h0 - h1).abs() <= 1e-12 * h0.max(1.0));
        }

        #[test]
        fn steps_are_deterministic(q in -3.0..3.0f64, p in -3.0..3.0f64) {
            let model = BivariateNormal::benchmark();
            let m = MassMatrix::identity(2);
            let s = st(&[q, -q], &[p, 0.5]);
            for method in Integrator::ALL {
                let a = method.integrate(&model, &s, 0.13, 7, &m).unwrap();
                let b = method.integrate(&model, &s, 0.13, 7, &m).unwrap();
                prop_assert_eq!(a.q.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
                                b.q.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
                prop_assert_eq!(a.p.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
                                b.p.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
            }
        }

        #[test]
        fn leapfrog_preserves_volume(q0 in -2.0..2.0f64, q1 in -2.0..2.0f64, p0 in -2.0..2.0f64, p1 in -2.0..2.0f64) {
            let model = BivariateNormal::benchmark();
            let m = MassMatrix::identity(2);
            let j = step_jacobian(&model, &st(&[q0, q1], &[p0, p1]), 0.15, &m, Integrator::Leapfrog, 1e-6).unwrap();
            prop_assert!((j.determinant() - 1.0).abs() < 1e-4);
            prop_assert!(j.symplectic_defect() < 1e-4);
        }
    }
}
