//! Delta parallel robot: geometry, inertia, kinematics, lumped workspace
//! dynamics and the adapter exposing the robot as a [`CanonicalPlant`] in
//! workspace coordinates.
//!
//! Frame and sign conventions live in [`kinematics`]; in short, +z points
//! from the base toward the platform and gravity acts along +z, so the home
//! pose `[0, 0, 0.5] m` is half a metre below the base plane.

mod dynamics;
mod kinematics;

pub use dynamics::DynamicsTerms;
pub use kinematics::{forward_kinematics, inverse_kinematics};

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use thiserror::Error;

use crate::plant::{CanonicalPlant, PlantError};

#[derive(Debug, Error)]
pub enum DeltaError {
    #[error("pose unreachable for leg {leg}: {detail}")]
    OutOfWorkspace { leg: usize, detail: String },
    #[error("singular configuration: {detail}")]
    SingularConfiguration { detail: String },
    #[error("forward kinematics degenerate: {detail}")]
    SpheresDegenerate { detail: String },
    #[error("joint state inconsistent with workspace position (residual {residual:.3e} m)")]
    InconsistentState { residual: f64 },
    #[error("mass matrix not positive definite")]
    IndefiniteMass,
}

impl From<DeltaError> for PlantError {
    fn from(err: DeltaError) -> Self {
        PlantError::InvalidState(err.to_string())
    }
}

/// Geometric parameters; defaults are the bundled testbed robot.
#[derive(Clone, Debug, PartialEq)]
pub struct DeltaGeometry {
    /// Fixed platform radius r_b, m.
    pub base_radius: f64,
    /// Moving platform radius r_a, m.
    pub platform_radius: f64,
    /// Leg position angles, rad.
    pub leg_angles: [f64; 3],
    /// Motor (upper) leg length l_L, m.
    pub upper_arm_length: f64,
    /// Intermediary (forearm) leg length l_K, m.
    pub forearm_length: f64,
    /// Upper-arm COM position as a fraction of l_L.
    pub upper_arm_com_ratio: f64,
    /// Forearm COM position as a fraction of l_K; also the mass split between
    /// elbow and platform in the lumped model.
    pub forearm_com_ratio: f64,
    /// Spacing of the two rods in one forearm pair, m. The pair moves as a
    /// parallelogram; its rotary effect is carried by the pair inertia.
    pub forearm_spacing: f64,
}

impl Default for DeltaGeometry {
    fn default() -> Self {
        Self {
            base_radius: 0.2,
            platform_radius: 0.05,
            leg_angles: [
                std::f64::consts::PI,
                -std::f64::consts::FRAC_PI_3,
                std::f64::consts::FRAC_PI_3,
            ],
            upper_arm_length: 0.2,
            forearm_length: 0.52,
            upper_arm_com_ratio: 0.3933,
            forearm_com_ratio: 0.5,
            forearm_spacing: 0.08,
        }
    }
}

/// Inertial parameters; defaults are the bundled testbed robot.
#[derive(Clone, Debug, PartialEq)]
pub struct DeltaInertia {
    /// Moving platform mass, kg.
    pub platform_mass: f64,
    /// Motor (rotor + gearbox, reflected) inertia, kg·m².
    pub motor_inertia: f64,
    /// Motor leg mass, kg.
    pub upper_arm_mass: f64,
    /// Mass of one forearm pair (both rods), kg.
    pub forearm_pair_mass: f64,
    /// Motor leg inertia about the motor axis, kg·m².
    pub upper_arm_inertia: f64,
    /// Dominant rotary inertia of one forearm pair, kg·m².
    pub forearm_pair_inertia: f64,
    /// Added end-effector mass, kg. Alters the simulated plant only; the
    /// model-based controllers keep nominal inertia, which is exactly the
    /// model-mismatch experiment.
    pub payload: f64,
}

impl Default for DeltaInertia {
    fn default() -> Self {
        Self {
            platform_mass: 1.055,
            motor_inertia: 0.0465475,
            upper_arm_mass: 0.116,
            forearm_pair_mass: 2.0 * 0.05788,
            upper_arm_inertia: 6.4345319e-4,
            forearm_pair_inertia: 5.74769459e-3,
            payload: 0.0,
        }
    }
}

/// Full robot state; `joints` always satisfies the kinematic constraint for
/// `workspace` (checked on construction to 1e−9 m).
#[derive(Clone, Debug)]
pub struct DeltaState {
    pub workspace: Vector3<f64>,
    pub workspace_vel: Vector3<f64>,
    pub joints: Vector3<f64>,
    pub joint_rates: Vector3<f64>,
}

/// Geometry + inertia + gravity; entry point for all robot operations.
#[derive(Clone, Debug)]
pub struct DeltaModel {
    pub geometry: DeltaGeometry,
    pub inertia: DeltaInertia,
    /// Gravitational acceleration along +z, m/s².
    pub gravity: f64,
}

impl Default for DeltaModel {
    fn default() -> Self {
        Self {
            geometry: DeltaGeometry::default(),
            inertia: DeltaInertia::default(),
            gravity: 9.81,
        }
    }
}

impl DeltaModel {
    pub fn with_payload(mut self, payload: f64) -> Self {
        assert!(payload >= 0.0, "payload must be nonnegative");
        self.inertia.payload = payload;
        self
    }

    pub fn without_gravity(mut self) -> Self {
        self.gravity = 0.0;
        self
    }

    pub fn inverse_kinematics(&self, w: &Vector3<f64>) -> Result<Vector3<f64>, DeltaError> {
        kinematics::inverse_kinematics(&self.geometry, w)
    }

    pub fn forward_kinematics(&self, q: &Vector3<f64>) -> Result<Vector3<f64>, DeltaError> {
        kinematics::forward_kinematics(&self.geometry, q)
    }

    /// Build a consistent state from workspace position and velocity:
    /// `q = IK(w)`, `q̇ = J ẇ`.
    pub fn state_from_workspace(
        &self,
        w: Vector3<f64>,
        w_dot: Vector3<f64>,
    ) -> Result<DeltaState, DeltaError> {
        let joints = self.inverse_kinematics(&w)?;
        let (jac, _) = kinematics::jacobian_from_pose(&self.geometry, &w, &joints)?;
        Ok(DeltaState {
            workspace: w,
            workspace_vel: w_dot,
            joints,
            joint_rates: jac * w_dot,
        })
    }

    /// Validate that a state's joint block matches its workspace block.
    pub fn check_state(&self, state: &DeltaState) -> Result<(), DeltaError> {
        let w = self.forward_kinematics(&state.joints)?;
        let residual = (w - state.workspace).norm();
        if residual > 1e-9 {
            return Err(DeltaError::InconsistentState { residual });
        }
        Ok(())
    }

    /// Loop-closure Jacobian `J` with `q̇ = J ẇ`; torque enters the workspace
    /// dynamics through `Jᵀτ`.
    pub fn jacobian(&self, state: &DeltaState) -> Result<Matrix3<f64>, DeltaError> {
        let (jac, _) =
            kinematics::jacobian_from_pose(&self.geometry, &state.workspace, &state.joints)?;
        Ok(jac)
    }

    /// Workspace dynamics matrices `(M, C, G)`; M is symmetric positive
    /// definite and `Ṁ − 2C` skew-symmetric by the Christoffel construction.
    pub fn dynamics_matrices(
        &self,
        state: &DeltaState,
    ) -> Result<(Matrix3<f64>, Matrix3<f64>, Vector3<f64>), DeltaError> {
        let terms = dynamics::assemble(self, state)?;
        Ok((terms.mass, terms.coriolis, terms.gravity))
    }

    /// All dynamics terms plus the Jacobian in one assembly pass.
    pub fn dynamics_terms(&self, state: &DeltaState) -> Result<DynamicsTerms, DeltaError> {
        dynamics::assemble(self, state)
    }

    /// Inverse dynamics: τ solving `M ẅ + C ẇ + G = Jᵀ τ`.
    pub fn torque_map(
        &self,
        state: &DeltaState,
        w_ddot: &Vector3<f64>,
    ) -> Result<Vector3<f64>, DeltaError> {
        let terms = dynamics::assemble(self, state)?;
        let rhs = terms.mass * w_ddot + terms.coriolis * state.workspace_vel + terms.gravity;
        terms
            .jacobian
            .transpose()
            .lu()
            .solve(&rhs)
            .ok_or(DeltaError::SingularConfiguration {
                detail: "Jᵀ not invertible".into(),
            })
    }

    /// Gravity and kinetic energy for conservation checks.
    pub fn total_energy(&self, state: &DeltaState) -> Result<f64, DeltaError> {
        let terms = dynamics::assemble(self, state)?;
        Ok(dynamics::kinetic_energy(&terms, &state.workspace_vel)
            + dynamics::potential_energy(self, state))
    }

    /// Inelastic stretch-stop projection for the closed-loop simulator.
    ///
    /// Each leg chain cannot extend past `l_L + l_K`; in workspace
    /// coordinates that limit is a singular boundary where the effective
    /// inertia diverges, so trajectories driven into it (hard saturated
    /// slews) park on it closer than f64 can represent and the ODE becomes
    /// unevaluable. Mechanically the limit is a hard stop: this projection
    /// pulls the platform a hair inside the boundary and absorbs the
    /// outward normal velocity, leaving tangential motion untouched.
    /// Returns `None` when the state is already clear of the stop.
    pub fn stretch_stop(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        const MARGIN: f64 = 1e-5;
        if x.len() != 6 {
            return None;
        }
        let mut w = Vector3::new(x[0], x[1], x[2]);
        let mut w_dot = Vector3::new(x[3], x[4], x[5]);
        let c_r = self.geometry.base_radius - self.geometry.platform_radius;
        let l_l = self.geometry.upper_arm_length;
        let l_k = self.geometry.forearm_length;

        // σ = h − ρ per leg; the stretch boundary is σ = 0.
        let sigma_and_normal = |w: &Vector3<f64>, leg: usize| -> (f64, Vector3<f64>) {
            let dir = kinematics::leg_direction(&self.geometry, leg);
            let v = w - dir * c_r;
            let h = (v.norm_squared() + l_l * l_l - l_k * l_k) / (2.0 * l_l);
            let xi = v.dot(&dir);
            let zeta = v.z;
            let rho = xi.hypot(zeta).max(1e-12);
            let grad = v / l_l - (dir * xi + Vector3::z() * zeta) / rho;
            (h - rho, grad)
        };

        let mut touched = false;
        for _ in 0..8 {
            let mut worst: Option<(f64, Vector3<f64>)> = None;
            for leg in 0..3 {
                let (sigma, grad) = sigma_and_normal(&w, leg);
                if sigma > -MARGIN && worst.as_ref().map_or(true, |(s, _)| sigma > *s) {
                    worst = Some((sigma, grad));
                }
            }
            match worst {
                Some((sigma, grad)) if grad.norm_squared() > 1e-12 => {
                    w -= grad * ((sigma + MARGIN) / grad.norm_squared());
                    touched = true;
                }
                _ => break,
            }
        }
        if !touched {
            return None;
        }
        // Absorb outward normal velocity on every active stop.
        for leg in 0..3 {
            let (sigma, grad) = sigma_and_normal(&w, leg);
            if sigma > -2.0 * MARGIN {
                let n = grad.normalize();
                let vn = w_dot.dot(&n);
                if vn > 0.0 {
                    w_dot -= n * vn;
                }
            }
        }
        Some(DVector::from_row_slice(&[
            w[0], w[1], w[2], w_dot[0], w_dot[1], w_dot[2],
        ]))
    }

    /// Expose the robot as a canonical plant in workspace coordinates:
    /// p = 2, m = 3, state `X = [w; ẇ]`, `f(X) = M⁻¹(−Cẇ − G)` and
    /// `g(X) = M⁻¹Jᵀ`.
    pub fn as_canonical_plant(&self) -> CanonicalPlant {
        let model_f = self.clone();
        let model_g = self.clone();
        let model_fused = self.clone();
        CanonicalPlant::new(
            2,
            3,
            move |x| Ok(canonical_dynamics(&model_f, x)?.0),
            move |x| Ok(canonical_dynamics(&model_g, x)?.1),
        )
        .with_fused_dynamics(move |x| canonical_dynamics(&model_fused, x))
    }
}

fn canonical_dynamics(
    model: &DeltaModel,
    x: &DVector<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>), PlantError> {
    let w = Vector3::new(x[0], x[1], x[2]);
    let w_dot = Vector3::new(x[3], x[4], x[5]);
    let state = model.state_from_workspace(w, w_dot)?;
    let terms = model.dynamics_terms(&state)?;
    let chol = terms
        .mass
        .cholesky()
        .ok_or(DeltaError::IndefiniteMass)?;
    let accel_drift = chol.solve(&(-terms.coriolis * w_dot - terms.gravity));
    let gain = chol.solve(&terms.jacobian.transpose());
    let f = DVector::from_row_slice(accel_drift.as_slice());
    let mut g = DMatrix::zeros(3, 3);
    for r in 0..3 {
        for c in 0..3 {
            g[(r, c)] = gain[(r, c)];
        }
    }
    Ok((f, g))
}
