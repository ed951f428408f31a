//! Executable control laws behind one simulator-facing interface: the
//! decomposed near-optimal tracking controller (steady-state + greedy
//! corrective term), computed torque, sliding mode, and the scalar
//! discounted-cost tracking baseline.

use nalgebra::{DVector, Matrix3, Vector3};
use thiserror::Error;

use crate::basis::{BasisError, ValueFunction};
use crate::delta::{DeltaError, DeltaModel};
use crate::plant::{
    steady_state_control_about, CanonicalPlant, CostWeights, PlantError, ReferenceSignal,
    TrackingError,
};
use crate::train::{transient_control, TrainError};

#[derive(Debug, Error)]
pub enum ControllerError {
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Delta(#[from] DeltaError),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error("controller misconfigured: {0}")]
    Invalid(String),
    #[error("no stabilizing discounted solution for a = {a}, q = {q}, rho = {rho}")]
    Unstabilizable { a: f64, q: f64, rho: f64 },
}

impl From<TrainError> for ControllerError {
    fn from(err: TrainError) -> Self {
        match err {
            TrainError::Plant(e) => ControllerError::Plant(e),
            TrainError::Basis(e) => ControllerError::Basis(e),
            other => ControllerError::Invalid(other.to_string()),
        }
    }
}

/// Saturated actuator command with per-channel clip flags.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlCommand {
    pub u: DVector<f64>,
    pub saturated: Vec<bool>,
    /// Named side-channel samples (e.g. sliding-surface excursion) that the
    /// simulator copies into the log.
    pub extras: Vec<(&'static str, f64)>,
}

impl ControlCommand {
    pub fn any_saturated(&self) -> bool {
        self.saturated.iter().any(|&s| s)
    }
}

/// Clip each channel to `±limit`; `limit = ∞` disables clipping.
pub fn saturate(u: DVector<f64>, limit: f64) -> ControlCommand {
    let saturated: Vec<bool> = u.iter().map(|&v| v.abs() > limit).collect();
    let u = u.map(|v| v.clamp(-limit, limit));
    ControlCommand {
        u,
        saturated,
        extras: Vec::new(),
    }
}

/// Shared controller interface: a pure map from plant state, reference and
/// time to a saturated command.
pub trait Controller: Send + Sync {
    fn label(&self) -> &'static str;
    fn command(
        &self,
        x: &DVector<f64>,
        reference: &ReferenceSignal,
        t: f64,
    ) -> Result<ControlCommand, ControllerError>;
}

/// Computed-torque gains; scalars applied isotropically.
#[derive(Clone, Copy, Debug)]
pub struct CtGains {
    pub kp: f64,
    pub kd: f64,
}

impl CtGains {
    pub fn new(kp: f64, kd: f64) -> Result<Self, ControllerError> {
        if kp <= 0.0 || kd <= 0.0 {
            return Err(ControllerError::Invalid(
                "computed-torque gains must be positive".into(),
            ));
        }
        Ok(Self { kp, kd })
    }
}

/// Sliding-mode gains: switching gain `k`, surface slope `lambda`, boundary
/// layer width `phi`.
#[derive(Clone, Copy, Debug)]
pub struct SmcGains {
    pub k: f64,
    pub lambda: f64,
    pub phi: f64,
}

impl SmcGains {
    pub fn new(k: f64, lambda: f64, phi: f64) -> Result<Self, ControllerError> {
        if k <= 0.0 || lambda <= 0.0 || phi <= 0.0 {
            return Err(ControllerError::Invalid(
                "sliding-mode gains must be strictly positive".into(),
            ));
        }
        Ok(Self { k, lambda, phi })
    }
}

/// Decomposed tracking controller `u = u_s + Δu`, saturated after the sum.
/// Saturation is a run-time actuator limit only; training always sees the
/// unconstrained law.
pub struct AdpController {
    plant: CanonicalPlant,
    value: ValueFunction,
    cost: CostWeights,
    sat_limit: f64,
}

impl AdpController {
    pub fn new(
        plant: CanonicalPlant,
        value: ValueFunction,
        cost: CostWeights,
        sat_limit: f64,
    ) -> Result<Self, ControllerError> {
        if value.dim() != plant.dim_state() {
            return Err(ControllerError::Invalid(format!(
                "value function over {}-vectors cannot drive a plant with state length {}",
                value.dim(),
                plant.dim_state()
            )));
        }
        Ok(Self {
            plant,
            value,
            cost,
            sat_limit,
        })
    }

    pub fn value_function(&self) -> &ValueFunction {
        &self.value
    }
}

impl Controller for AdpController {
    fn label(&self) -> &'static str {
        "adp"
    }

    fn command(
        &self,
        x: &DVector<f64>,
        reference: &ReferenceSignal,
        t: f64,
    ) -> Result<ControlCommand, ControllerError> {
        let point = reference.eval(t);
        let u_s = steady_state_control_about(&self.plant, x, &point)?;
        let error = TrackingError::between(x, &point.state);
        let du = transient_control(&self.value, &self.plant, &self.cost, &error, &point.state)?;
        Ok(saturate(u_s + du, self.sat_limit))
    }
}

/// Inverse-dynamics feedback linearization with PD error terms:
/// `τ = J⁻ᵀ(Cẇ + G + M(ẅ_d − K_d ė − K_p e))`.
pub struct ComputedTorqueController {
    model: DeltaModel,
    gains: CtGains,
    sat_limit: f64,
}

impl ComputedTorqueController {
    pub fn new(model: DeltaModel, gains: CtGains, sat_limit: f64) -> Self {
        Self {
            model,
            gains,
            sat_limit,
        }
    }
}

/// The computed-torque law on explicit dynamics terms; factored out so the
/// law itself is testable on arbitrary matrices.
pub fn computed_torque_law(
    mass: &Matrix3<f64>,
    coriolis: &Matrix3<f64>,
    gravity: &Vector3<f64>,
    jacobian: &Matrix3<f64>,
    w_dot: &Vector3<f64>,
    pos_err: &Vector3<f64>,
    vel_err: &Vector3<f64>,
    accel_ref: &Vector3<f64>,
    gains: CtGains,
) -> Result<Vector3<f64>, ControllerError> {
    let virtual_accel = accel_ref - vel_err * gains.kd - pos_err * gains.kp;
    let force = coriolis * w_dot + gravity + mass * virtual_accel;
    jacobian
        .transpose()
        .lu()
        .solve(&force)
        .ok_or(ControllerError::Delta(DeltaError::SingularConfiguration {
            detail: "Jᵀ not invertible in computed-torque law".into(),
        }))
}

/// Boundary-layer sliding-mode law: `S = ė + λe`,
/// `τ = J⁻ᵀ(Cẇ + G + M(ẅ_d − λė − K·sat(S/φ)))`.
pub fn sliding_mode_law(
    mass: &Matrix3<f64>,
    coriolis: &Matrix3<f64>,
    gravity: &Vector3<f64>,
    jacobian: &Matrix3<f64>,
    w_dot: &Vector3<f64>,
    pos_err: &Vector3<f64>,
    vel_err: &Vector3<f64>,
    accel_ref: &Vector3<f64>,
    gains: SmcGains,
) -> Result<(Vector3<f64>, Vector3<f64>), ControllerError> {
    let surface = vel_err + pos_err * gains.lambda;
    let normalized = surface / gains.phi;
    let switching = normalized.map(|s| s.clamp(-1.0, 1.0));
    let virtual_accel = accel_ref - vel_err * gains.lambda - switching * gains.k;
    let force = coriolis * w_dot + gravity + mass * virtual_accel;
    let tau = jacobian
        .transpose()
        .lu()
        .solve(&force)
        .ok_or(ControllerError::Delta(DeltaError::SingularConfiguration {
            detail: "Jᵀ not invertible in sliding-mode law".into(),
        }))?;
    Ok((tau, normalized))
}

fn split_state(x: &DVector<f64>) -> Result<(Vector3<f64>, Vector3<f64>), ControllerError> {
    if x.len() != 6 {
        return Err(ControllerError::Invalid(format!(
            "robot controllers expect a 6-state [w; ẇ], got length {}",
            x.len()
        )));
    }
    Ok((
        Vector3::new(x[0], x[1], x[2]),
        Vector3::new(x[3], x[4], x[5]),
    ))
}

fn split_reference(
    reference: &ReferenceSignal,
    t: f64,
) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
    let point = reference.eval(t);
    let s = &point.state;
    (
        Vector3::new(s[0], s[1], s[2]),
        Vector3::new(s[3], s[4], s[5]),
        Vector3::new(
            point.top_derivative[0],
            point.top_derivative[1],
            point.top_derivative[2],
        ),
    )
}

impl Controller for ComputedTorqueController {
    fn label(&self) -> &'static str {
        "ct"
    }

    fn command(
        &self,
        x: &DVector<f64>,
        reference: &ReferenceSignal,
        t: f64,
    ) -> Result<ControlCommand, ControllerError> {
        let (w, w_dot) = split_state(x)?;
        let (w_d, wdot_d, wddot_d) = split_reference(reference, t);
        let state = self.model.state_from_workspace(w, w_dot)?;
        let terms = self.model.dynamics_terms(&state)?;
        let tau = computed_torque_law(
            &terms.mass,
            &terms.coriolis,
            &terms.gravity,
            &terms.jacobian,
            &w_dot,
            &(w - w_d),
            &(w_dot - wdot_d),
            &wddot_d,
            self.gains,
        )?;
        Ok(saturate(
            DVector::from_row_slice(tau.as_slice()),
            self.sat_limit,
        ))
    }
}

pub struct SlidingModeController {
    model: DeltaModel,
    gains: SmcGains,
    sat_limit: f64,
}

impl SlidingModeController {
    pub fn new(model: DeltaModel, gains: SmcGains, sat_limit: f64) -> Self {
        Self {
            model,
            gains,
            sat_limit,
        }
    }
}

impl Controller for SlidingModeController {
    fn label(&self) -> &'static str {
        "smc"
    }

    fn command(
        &self,
        x: &DVector<f64>,
        reference: &ReferenceSignal,
        t: f64,
    ) -> Result<ControlCommand, ControllerError> {
        let (w, w_dot) = split_state(x)?;
        let (w_d, wdot_d, wddot_d) = split_reference(reference, t);
        let state = self.model.state_from_workspace(w, w_dot)?;
        let terms = self.model.dynamics_terms(&state)?;
        let (tau, normalized) = sliding_mode_law(
            &terms.mass,
            &terms.coriolis,
            &terms.gravity,
            &terms.jacobian,
            &w_dot,
            &(w - w_d),
            &(w_dot - wdot_d),
            &wddot_d,
            self.gains,
        )?;
        let mut cmd = saturate(DVector::from_row_slice(tau.as_slice()), self.sat_limit);
        cmd.extras = vec![
            ("s_over_phi_x", normalized[0]),
            ("s_over_phi_y", normalized[1]),
            ("s_over_phi_z", normalized[2]),
        ];
        Ok(cmd)
    }
}

/// Exact-total-cost tracking baseline for the scalar plant `ẋ = a·x + u`
/// with cost `∫ e^{−ρt}(q(x − r)² + u²) dt` and piecewise-constant `r`.
///
/// Solved in closed form: with `p` the positive root of
/// `p² − (2a − ρ)p − q = 0` and `s(r) = −q·r/(p − a + ρ)`, the optimal
/// feedback is `u = −(p·x + s)`. `rho = 0` gives the vanishing-discount
/// limit of the total-cost problem, which is the exact baseline anchor; it
/// drives the closed loop to `x_ss = q·r/(q + a²)`, i.e. a steady-state
/// offset unless `q → ∞`.
pub struct DiscountedLqtController {
    drift: f64,
    q: f64,
    gain: f64,
    feedforward_denom: f64,
    sat_limit: f64,
}

impl DiscountedLqtController {
    pub fn new(drift: f64, q: f64, rho: f64, sat_limit: f64) -> Result<Self, ControllerError> {
        if q < 0.0 || rho < 0.0 {
            return Err(ControllerError::Invalid(
                "discounted baseline needs q ≥ 0 and rho ≥ 0".into(),
            ));
        }
        let half = 2.0 * drift - rho;
        let disc = half * half + 4.0 * q;
        if disc < 0.0 {
            return Err(ControllerError::Unstabilizable { a: drift, q, rho });
        }
        let p = 0.5 * (half + disc.sqrt());
        // Closed-loop pole a − p must be strictly stable, and the
        // feedforward denominator p − a + ρ nonzero.
        let denom = p - drift + rho;
        if p <= drift || denom.abs() < 1e-12 {
            return Err(ControllerError::Unstabilizable { a: drift, q, rho });
        }
        Ok(Self {
            drift,
            q,
            gain: p,
            feedforward_denom: denom,
            sat_limit,
        })
    }

    pub fn riccati_gain(&self) -> f64 {
        self.gain
    }

    /// Feedback at state `x` tracking setpoint `r`.
    pub fn control(&self, x: f64, r: f64) -> f64 {
        let s = -self.q * r / self.feedforward_denom;
        -(self.gain * x + s)
    }

    /// Closed-loop stationary state for setpoint `r`.
    pub fn steady_state(&self, r: f64) -> f64 {
        let s = -self.q * r / self.feedforward_denom;
        s / (self.drift - self.gain)
    }
}

impl Controller for DiscountedLqtController {
    fn label(&self) -> &'static str {
        "discounted-lqt"
    }

    fn command(
        &self,
        x: &DVector<f64>,
        reference: &ReferenceSignal,
        t: f64,
    ) -> Result<ControlCommand, ControllerError> {
        if x.len() != 1 {
            return Err(ControllerError::Invalid(
                "discounted baseline is defined for the scalar plant".into(),
            ));
        }
        let r = reference.eval(t).state[0];
        Ok(saturate(
            DVector::from_element(1, self.control(x[0], r)),
            self.sat_limit,
        ))
    }
}
