//! Canonical-form plant abstraction, tracking error and steady-state control.
//!
//! A canonical plant is an order-`p`, `m`-input system `x^(p) = f(X) + g(X) u`
//! whose state stacks the output and its first `p − 1` derivatives,
//! `X = [x; ẋ; …; x^(p−1)]` with `n = m·p`. Dynamics enter only through the
//! highest derivative, so the full state derivative is the companion-form
//! lift `Ẋ = F(X) + G(X) u` where `F(X) = [X[m..n]; f(X)]` and `G = [0; g]`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

type VecMap = Arc<dyn Fn(&DVector<f64>) -> Result<DVector<f64>, PlantError> + Send + Sync>;
type MatMap = Arc<dyn Fn(&DVector<f64>) -> Result<DMatrix<f64>, PlantError> + Send + Sync>;
type PairMap =
    Arc<dyn Fn(&DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>), PlantError> + Send + Sync>;

/// Default bound on the condition estimate of `g(X)` before a state is
/// rejected as singular.
pub const DEFAULT_CONDITION_BOUND: f64 = 1e8;

#[derive(Debug, Error)]
pub enum PlantError {
    #[error("dimension mismatch in {context}: expected length {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("input map g is singular (condition estimate {condition:.3e} exceeds bound {bound:.3e})")]
    SingularInputMap { condition: f64, bound: f64 },
    #[error("state outside plant validity region: {0}")]
    InvalidState(String),
    #[error("invalid cost weights: {0}")]
    InvalidCost(String),
}

/// Order-`p`, `m`-input plant `x^(p) = f(X) + g(X) u`.
///
/// `f` and `g` are stored as shared closures so a plant can be cloned into
/// controllers and parallel workers cheaply. States where the condition
/// estimate of `g(X)` exceeds the configured bound are rejected instead of
/// being silently regularized.
#[derive(Clone)]
pub struct CanonicalPlant {
    order: usize,
    dim_output: usize,
    f: VecMap,
    g: MatMap,
    fused: Option<PairMap>,
    condition_bound: f64,
}

impl CanonicalPlant {
    pub fn new<F, G>(order: usize, dim_output: usize, f: F, g: G) -> Self
    where
        F: Fn(&DVector<f64>) -> Result<DVector<f64>, PlantError> + Send + Sync + 'static,
        G: Fn(&DVector<f64>) -> Result<DMatrix<f64>, PlantError> + Send + Sync + 'static,
    {
        assert!(order > 0 && dim_output > 0, "plant dimensions must be positive");
        Self {
            order,
            dim_output,
            f: Arc::new(f),
            g: Arc::new(g),
            fused: None,
            condition_bound: DEFAULT_CONDITION_BOUND,
        }
    }

    /// Attach a fused `X ↦ (f(X), g(X))` evaluator for plants where the two
    /// maps share expensive intermediate work.
    pub fn with_fused_dynamics<P>(mut self, fused: P) -> Self
    where
        P: Fn(&DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>), PlantError>
            + Send
            + Sync
            + 'static,
    {
        self.fused = Some(Arc::new(fused));
        self
    }

    pub fn with_condition_bound(mut self, bound: f64) -> Self {
        assert!(bound > 1.0, "condition bound must exceed 1");
        self.condition_bound = bound;
        self
    }

    /// Scalar plant `ẋ = a·x + u`.
    pub fn scalar_linear(a: f64) -> Self {
        Self::new(
            1,
            1,
            move |x| Ok(DVector::from_element(1, a * x[0])),
            |_| Ok(DMatrix::identity(1, 1)),
        )
    }

    /// Double integrator `ẍ = u`.
    pub fn double_integrator() -> Self {
        Self::new(
            2,
            1,
            |_| Ok(DVector::zeros(1)),
            |_| Ok(DMatrix::identity(1, 1)),
        )
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim_output(&self) -> usize {
        self.dim_output
    }

    /// Full state length `n = m·p`.
    pub fn dim_state(&self) -> usize {
        self.order * self.dim_output
    }

    pub fn condition_bound(&self) -> f64 {
        self.condition_bound
    }

    fn check_state(&self, x: &DVector<f64>, context: &'static str) -> Result<(), PlantError> {
        if x.len() != self.dim_state() {
            return Err(PlantError::DimensionMismatch {
                context,
                expected: self.dim_state(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    pub fn eval_f(&self, x: &DVector<f64>) -> Result<DVector<f64>, PlantError> {
        self.check_state(x, "f(X)")?;
        let out = (self.f)(x)?;
        debug_assert_eq!(out.len(), self.dim_output);
        Ok(out)
    }

    pub fn eval_g(&self, x: &DVector<f64>) -> Result<DMatrix<f64>, PlantError> {
        self.check_state(x, "g(X)")?;
        let out = (self.g)(x)?;
        debug_assert!(out.is_square() && out.nrows() == self.dim_output);
        Ok(out)
    }

    /// Evaluate `f` and `g` together, using the fused path when available.
    pub fn eval_dynamics(
        &self,
        x: &DVector<f64>,
    ) -> Result<(DVector<f64>, DMatrix<f64>), PlantError> {
        self.check_state(x, "dynamics(X)")?;
        match &self.fused {
            Some(fused) => fused(x),
            None => Ok(((self.f)(x)?, (self.g)(x)?)),
        }
    }

    /// Condition estimate of `g(X)`; errors when it exceeds the bound.
    pub fn check_g_condition(&self, x: &DVector<f64>) -> Result<f64, PlantError> {
        let g = self.eval_g(x)?;
        self.condition_of(&g)
    }

    pub(crate) fn condition_of(&self, g: &DMatrix<f64>) -> Result<f64, PlantError> {
        let cond = condition_estimate(g);
        if !cond.is_finite() || cond > self.condition_bound {
            return Err(PlantError::SingularInputMap {
                condition: cond,
                bound: self.condition_bound,
            });
        }
        Ok(cond)
    }

    /// Solve `g(X)·u = rhs`, rejecting ill-conditioned `g`.
    pub fn solve_g(&self, x: &DVector<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>, PlantError> {
        let g = self.eval_g(x)?;
        self.condition_of(&g)?;
        g.lu().solve(rhs).ok_or(PlantError::SingularInputMap {
            condition: f64::INFINITY,
            bound: self.condition_bound,
        })
    }
}

impl std::fmt::Debug for CanonicalPlant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CanonicalPlant")
            .field("order", &self.order)
            .field("dim_output", &self.dim_output)
            .field("condition_bound", &self.condition_bound)
            .finish()
    }
}

/// Ratio of extreme singular values; infinite when the smallest vanishes.
pub fn condition_estimate(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let smax = sv.max();
    let smin = sv.min();
    if smin <= 0.0 || !smin.is_finite() {
        f64::INFINITY
    } else {
        smax / smin
    }
}

/// Reference state `X_d(t)` plus the loose derivative `x_d^(p)(t)`.
#[derive(Clone, Debug)]
pub struct ReferencePoint {
    /// `X_d = [x_d; ẋ_d; …; x_d^(p−1)]`, length `n`.
    pub state: DVector<f64>,
    /// `x_d^(p)`, length `m`, supplied analytically (never by differencing).
    pub top_derivative: DVector<f64>,
}

/// Reference trajectory evaluable at any `t ≥ 0`.
#[derive(Clone)]
pub struct ReferenceSignal {
    dim_state: usize,
    dim_output: usize,
    eval: Arc<dyn Fn(f64) -> ReferencePoint + Send + Sync>,
}

impl ReferenceSignal {
    pub fn new<F>(dim_state: usize, dim_output: usize, eval: F) -> Self
    where
        F: Fn(f64) -> ReferencePoint + Send + Sync + 'static,
    {
        assert!(dim_output > 0 && dim_state % dim_output == 0);
        Self {
            dim_state,
            dim_output,
            eval: Arc::new(eval),
        }
    }

    /// Constant setpoint: `X_d = [target; 0; …]`, all derivatives zero.
    pub fn constant(order: usize, target: DVector<f64>) -> Self {
        let m = target.len();
        let n = order * m;
        Self::new(n, m, move |_| {
            let mut state = DVector::zeros(n);
            state.rows_mut(0, m).copy_from(&target);
            ReferencePoint {
                state,
                top_derivative: DVector::zeros(m),
            }
        })
    }

    pub fn dim_state(&self) -> usize {
        self.dim_state
    }

    pub fn dim_output(&self) -> usize {
        self.dim_output
    }

    pub fn eval(&self, t: f64) -> ReferencePoint {
        let point = (self.eval)(t);
        debug_assert_eq!(point.state.len(), self.dim_state);
        debug_assert_eq!(point.top_derivative.len(), self.dim_output);
        point
    }
}

impl std::fmt::Debug for ReferenceSignal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ReferenceSignal")
            .field("dim_state", &self.dim_state)
            .field("dim_output", &self.dim_output)
            .finish()
    }
}

/// Tracking error `E = X − X_d`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackingError(DVector<f64>);

impl TrackingError {
    pub fn new(e: DVector<f64>) -> Self {
        Self(e)
    }

    pub fn zero(n: usize) -> Self {
        Self(DVector::zeros(n))
    }

    pub fn between(x: &DVector<f64>, x_d: &DVector<f64>) -> Self {
        assert_eq!(x.len(), x_d.len(), "state and reference lengths differ");
        Self(x - x_d)
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }
}

/// Quadratic running-cost weights: error penalty `Q` (PSD), control penalty
/// `R` (PD) and an optional discount rate `rho` used only by the
/// discounted-cost baseline.
#[derive(Clone, Debug)]
pub struct CostWeights {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    r_inv: DMatrix<f64>,
    rho: f64,
}

impl CostWeights {
    pub fn new(q: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self, PlantError> {
        if !q.is_square() || !r.is_square() {
            return Err(PlantError::InvalidCost("Q and R must be square".into()));
        }
        check_symmetric(&q, "Q")?;
        check_symmetric(&r, "R")?;
        let q_eigs = q.clone().symmetric_eigenvalues();
        let q_scale = q_eigs.iter().fold(0.0_f64, |a, &b| a.max(b.abs())).max(1.0);
        if q_eigs.iter().any(|&l| l < -1e-9 * q_scale) {
            return Err(PlantError::InvalidCost(format!(
                "Q must be positive semidefinite (min eigenvalue {:.3e})",
                q_eigs.min()
            )));
        }
        let r_eigs = r.clone().symmetric_eigenvalues();
        if r_eigs.min() <= 0.0 {
            return Err(PlantError::InvalidCost(format!(
                "R must be positive definite (min eigenvalue {:.3e})",
                r_eigs.min()
            )));
        }
        let r_inv = r
            .clone()
            .cholesky()
            .ok_or_else(|| PlantError::InvalidCost("R is not positive definite".into()))?
            .inverse();
        Ok(Self {
            q,
            r,
            r_inv,
            rho: 0.0,
        })
    }

    pub fn identity(dim_state: usize, dim_output: usize) -> Self {
        Self::new(
            DMatrix::identity(dim_state, dim_state),
            DMatrix::identity(dim_output, dim_output),
        )
        .expect("identity weights are valid")
    }

    pub fn with_discount(mut self, rho: f64) -> Result<Self, PlantError> {
        if rho < 0.0 {
            return Err(PlantError::InvalidCost("discount rate must be >= 0".into()));
        }
        self.rho = rho;
        Ok(self)
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn r_inv(&self) -> &DMatrix<f64> {
        &self.r_inv
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn dim_error(&self) -> usize {
        self.q.nrows()
    }

    pub fn dim_control(&self) -> usize {
        self.r.nrows()
    }

    /// `EᵀQE`.
    pub fn error_cost(&self, e: &DVector<f64>) -> f64 {
        (e.transpose() * &self.q * e)[(0, 0)]
    }

    /// `uᵀRu`.
    pub fn control_cost(&self, u: &DVector<f64>) -> f64 {
        (u.transpose() * &self.r * u)[(0, 0)]
    }

    /// Running cost integrand `EᵀQE + uᵀRu`.
    pub fn running_cost(&self, e: &DVector<f64>, u: &DVector<f64>) -> f64 {
        self.error_cost(e) + self.control_cost(u)
    }
}

fn check_symmetric(m: &DMatrix<f64>, name: &str) -> Result<(), PlantError> {
    let scale = m.amax().max(1.0);
    let asym = (m - m.transpose()).amax();
    if asym > 1e-9 * scale {
        return Err(PlantError::InvalidCost(format!(
            "{name} must be symmetric (max asymmetry {asym:.3e})"
        )));
    }
    Ok(())
}

/// Companion-form state derivative `Ẋ = F(X) + G(X) u`: the first `n − m`
/// entries shift derivatives up, the last `m` equal `f(X) + g(X) u`.
pub fn companion_lift(
    plant: &CanonicalPlant,
    x: &DVector<f64>,
    u: &DVector<f64>,
) -> Result<DVector<f64>, PlantError> {
    let n = plant.dim_state();
    let m = plant.dim_output();
    if x.len() != n {
        return Err(PlantError::DimensionMismatch {
            context: "companion_lift state",
            expected: n,
            actual: x.len(),
        });
    }
    if u.len() != m {
        return Err(PlantError::DimensionMismatch {
            context: "companion_lift control",
            expected: m,
            actual: u.len(),
        });
    }
    let (f, g) = plant.eval_dynamics(x)?;
    plant.condition_of(&g)?;
    let mut xdot = DVector::zeros(n);
    xdot.rows_mut(0, n - m).copy_from(&x.rows(m, n - m));
    xdot.rows_mut(n - m, m).copy_from(&(f + g * u));
    Ok(xdot)
}

/// Error dynamics under an implicit steady-state control:
/// `Ė = F(E + X_d) − F(X_d) + G(E + X_d)·Δu`, with `X_d` given directly.
///
/// Exactly zero at `E = 0, Δu = 0`: the upper block reduces to `E[m..n]`
/// and the `f` terms cancel by evaluation at the identical argument.
pub fn error_derivative_about(
    plant: &CanonicalPlant,
    error: &TrackingError,
    x_d: &DVector<f64>,
    delta_u: &DVector<f64>,
) -> Result<DVector<f64>, PlantError> {
    let n = plant.dim_state();
    let m = plant.dim_output();
    let e = error.as_vector();
    if e.len() != n || x_d.len() != n {
        return Err(PlantError::DimensionMismatch {
            context: "error_derivative state",
            expected: n,
            actual: e.len().max(x_d.len()),
        });
    }
    if delta_u.len() != m {
        return Err(PlantError::DimensionMismatch {
            context: "error_derivative control",
            expected: m,
            actual: delta_u.len(),
        });
    }
    let x = e + x_d;
    let (f, g) = plant.eval_dynamics(&x)?;
    plant.condition_of(&g)?;
    let f_d = plant.eval_f(x_d)?;
    let mut edot = DVector::zeros(n);
    edot.rows_mut(0, n - m).copy_from(&e.rows(m, n - m));
    edot.rows_mut(n - m, m).copy_from(&(f - f_d + g * delta_u));
    Ok(edot)
}

/// [`error_derivative_about`] with `X_d` read off a reference signal at `t`.
pub fn error_derivative(
    plant: &CanonicalPlant,
    error: &TrackingError,
    reference: &ReferenceSignal,
    t: f64,
    delta_u: &DVector<f64>,
) -> Result<DVector<f64>, PlantError> {
    let point = reference.eval(t);
    error_derivative_about(plant, error, &point.state, delta_u)
}

/// Steady-state control `u_s = g(X)⁻¹·(x_d^(p) − f(X_d))` evaluated from an
/// explicit reference point. With `E = 0` this holds the plant on the
/// reference exactly.
pub fn steady_state_control_about(
    plant: &CanonicalPlant,
    x: &DVector<f64>,
    point: &ReferencePoint,
) -> Result<DVector<f64>, PlantError> {
    let f_d = plant.eval_f(&point.state)?;
    let rhs = &point.top_derivative - f_d;
    plant.solve_g(x, &rhs)
}

/// Steady-state control `u_s = g(X)⁻¹·(x_d^(p) − f(X_d))`.
pub fn steady_state_control(
    plant: &CanonicalPlant,
    x: &DVector<f64>,
    reference: &ReferenceSignal,
    t: f64,
) -> Result<DVector<f64>, PlantError> {
    let point = reference.eval(t);
    steady_state_control_about(plant, x, &point)
}

/// Reference-evaluated steady control `u_r = g(X_d)⁻¹·(x_d^(p) − f(X_d))`,
/// the analysis variant used by the optimality diagnostic; coincides with
/// `u_s` exactly when `E = 0`.
pub fn reference_steady_control(
    plant: &CanonicalPlant,
    reference: &ReferenceSignal,
    t: f64,
) -> Result<DVector<f64>, PlantError> {
    let point = reference.eval(t);
    steady_state_control_about(plant, &point.state, &point)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(v)
    }

    #[test]
    fn scalar_lift_matches_closed_form() {
        // f(x) = x, g = 1: X = 1, u = −1 gives Ẋ = 0.
        let plant = CanonicalPlant::scalar_linear(1.0);
        let xdot = companion_lift(&plant, &dv(&[1.0]), &dv(&[-1.0])).unwrap();
        assert_eq!(xdot[0], 0.0);
    }

    #[test]
    fn double_integrator_lift_shifts_derivatives() {
        let plant = CanonicalPlant::double_integrator();
        let xdot = companion_lift(&plant, &dv(&[1.0, 2.0]), &dv(&[3.0])).unwrap();
        assert_eq!(xdot, dv(&[2.0, 3.0]));
    }

    #[test]
    fn lift_rejects_bad_dimensions() {
        let plant = CanonicalPlant::double_integrator();
        assert!(companion_lift(&plant, &dv(&[1.0]), &dv(&[0.0])).is_err());
        assert!(companion_lift(&plant, &dv(&[1.0, 2.0]), &dv(&[0.0, 0.0])).is_err());
    }

    #[test]
    fn lift_rejects_singular_g() {
        let plant = CanonicalPlant::new(
            1,
            2,
            |_| Ok(DVector::zeros(2)),
            |_| Ok(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])),
        );
        let err = companion_lift(&plant, &dv(&[0.0, 0.0]), &dv(&[0.0, 0.0])).unwrap_err();
        assert!(matches!(err, PlantError::SingularInputMap { .. }));
    }

    #[test]
    fn error_dynamics_stationary_at_origin() {
        let plant = CanonicalPlant::scalar_linear(1.0);
        let reference = ReferenceSignal::constant(1, dv(&[2.0]));
        let edot = error_derivative(
            &plant,
            &TrackingError::zero(1),
            &reference,
            0.3,
            &dv(&[0.0]),
        )
        .unwrap();
        assert_eq!(edot[0], 0.0);
    }

    #[test]
    fn error_dynamics_scalar_substitution() {
        // f(x) = x, g = 1: E = 1, X_d = 2, Δu = 0 → Ė = 3 − 2 = 1.
        let plant = CanonicalPlant::scalar_linear(1.0);
        let edot = error_derivative_about(
            &plant,
            &TrackingError::new(dv(&[1.0])),
            &dv(&[2.0]),
            &dv(&[0.0]),
        )
        .unwrap();
        assert_relative_eq!(edot[0], 1.0, max_relative = 1e-14);
    }

    #[test]
    fn error_dynamics_double_integrator_sine_reference() {
        // x_d = sin t at t = 0: X_d = [0, 1]. E = [0.1, 0], Δu = −0.1 → Ė = [0, −0.1].
        let plant = CanonicalPlant::double_integrator();
        let reference = ReferenceSignal::new(2, 1, |t: f64| ReferencePoint {
            state: DVector::from_row_slice(&[t.sin(), t.cos()]),
            top_derivative: DVector::from_element(1, -t.sin()),
        });
        let edot = error_derivative(
            &plant,
            &TrackingError::new(dv(&[0.1, 0.0])),
            &reference,
            0.0,
            &dv(&[-0.1]),
        )
        .unwrap();
        assert_relative_eq!(edot[0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(edot[1], -0.1, max_relative = 1e-14);
    }

    #[test]
    fn steady_state_control_scalar_setpoint() {
        // f(x) = x, g = 1, x_d ≡ 2 → u_s = 0 − f(2) = −2.
        let plant = CanonicalPlant::scalar_linear(1.0);
        let reference = ReferenceSignal::constant(1, dv(&[2.0]));
        let u = steady_state_control(&plant, &dv(&[0.7]), &reference, 1.0).unwrap();
        assert_relative_eq!(u[0], -2.0, max_relative = 1e-14);
    }

    #[test]
    fn steady_state_control_double_integrator_sine() {
        // f = 0, g = 1, x_d = sin t → u_s(t) = −sin t.
        let plant = CanonicalPlant::double_integrator();
        let reference = ReferenceSignal::new(2, 1, |t: f64| ReferencePoint {
            state: DVector::from_row_slice(&[t.sin(), t.cos()]),
            top_derivative: DVector::from_element(1, -t.sin()),
        });
        for &t in &[0.0, 0.4, 1.3, 2.9] {
            let u = steady_state_control(&plant, &dv(&[9.0, -3.0]), &reference, t).unwrap();
            assert_relative_eq!(u[0], -t.sin(), epsilon = 1e-14);
        }
    }

    #[test]
    fn reference_steady_control_agrees_on_trajectory() {
        let plant = CanonicalPlant::scalar_linear(1.0);
        let reference = ReferenceSignal::constant(1, dv(&[2.0]));
        let u_r = reference_steady_control(&plant, &reference, 0.0).unwrap();
        assert_relative_eq!(u_r[0], -2.0, max_relative = 1e-14);
        // With E = 0 the arguments coincide, so u_s = u_r exactly.
        let u_s = steady_state_control(&plant, &dv(&[2.0]), &reference, 0.0).unwrap();
        assert_eq!(u_s[0], u_r[0]);
    }

    /// Eq.-level consistency: `companion_lift(X, u_s + Δu) − Ẋ_d` equals the
    /// reduced error dynamics for random states and references.
    #[test]
    fn lift_and_error_dynamics_agree() {
        let plant = CanonicalPlant::scalar_linear(0.7);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let x_d = dv(&[rng.random_range(-2.0..=2.0)]);
            let xd_dot = dv(&[rng.random_range(-1.0..=1.0)]);
            let e = TrackingError::new(dv(&[rng.random_range(-1.0..=1.0)]));
            let du = dv(&[rng.random_range(-1.0..=1.0)]);
            let x = e.as_vector() + &x_d;

            // u_s for this instantaneous reference point (ẋ_d plays x_d^(p) for p = 1).
            let point = ReferencePoint {
                state: x_d.clone(),
                top_derivative: xd_dot.clone(),
            };
            let u_s = steady_state_control_about(&plant, &x, &point).unwrap();
            let lifted = companion_lift(&plant, &x, &(&u_s + &du)).unwrap();
            let reduced = error_derivative_about(&plant, &e, &x_d, &du).unwrap();
            assert_relative_eq!((lifted - xd_dot - reduced).norm(), 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn cost_weights_reject_indefinite_r() {
        let q = DMatrix::identity(2, 2);
        let r = DMatrix::from_row_slice(1, 1, &[0.0]);
        assert!(CostWeights::new(q, r).is_err());
    }

    #[test]
    fn cost_weights_reject_asymmetric_q() {
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.5, 1.0]);
        let r = DMatrix::identity(1, 1);
        assert!(CostWeights::new(q, r).is_err());
    }

    #[test]
    fn running_cost_quadratics() {
        let cost = CostWeights::identity(2, 1);
        assert_relative_eq!(
            cost.running_cost(&dv(&[1.0, 2.0]), &dv(&[3.0])),
            14.0,
            max_relative = 1e-15
        );
    }

    #[test]
    fn constant_reference_shape() {
        let r = ReferenceSignal::constant(2, dv(&[1.0, 2.0, 3.0]));
        let p = r.eval(4.2);
        assert_eq!(p.state.len(), 6);
        assert_eq!(p.top_derivative.len(), 3);
        assert_eq!(p.state.rows(0, 3), dv(&[1.0, 2.0, 3.0]));
        assert_eq!(p.state.rows(3, 3), DVector::zeros(3));
    }
}
