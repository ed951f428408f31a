//! Lumped-parameter workspace dynamics of the Delta robot,
//! `M(w)ẅ + C(w,ẇ)ẇ + G(w) = Jᵀτ`.
//!
//! Lumping: the platform carries its own mass, the payload and the
//! platform-side share `(1 − r_K)` of each forearm pair; the elbow-side share
//! `r_K·m_K` rides the upper-arm tip. Each motor axis carries rotor, upper
//! arm and forearm-pair rotary inertia plus the elbow point mass at radius
//! `l_L`. Kinetic energy is then
//! `T = ½ ẇᵀ (m_t·I + I_ax·JᵀJ) ẇ`, and the Coriolis matrix is built from
//! the Christoffel symbols of `M`, which makes `Ṁ − 2C` skew-symmetric by
//! construction.

use nalgebra::{Matrix3, Vector3};

use super::kinematics::{jacobian_from_pose, jacobian_row_gradient};
use super::{DeltaError, DeltaModel, DeltaState};

/// Workspace-coordinate dynamics terms at one state.
#[derive(Clone, Debug)]
pub struct DynamicsTerms {
    pub mass: Matrix3<f64>,
    pub coriolis: Matrix3<f64>,
    pub gravity: Vector3<f64>,
    pub jacobian: Matrix3<f64>,
}

/// Total translating mass carried by the platform.
pub(crate) fn platform_side_mass(model: &DeltaModel) -> f64 {
    model.inertia.platform_mass
        + model.inertia.payload
        + 3.0 * (1.0 - model.geometry.forearm_com_ratio) * model.inertia.forearm_pair_mass
}

/// Rotary inertia about one motor axis, including the elbow point mass.
pub(crate) fn motor_axis_inertia(model: &DeltaModel) -> f64 {
    let elbow_mass = model.geometry.forearm_com_ratio * model.inertia.forearm_pair_mass;
    model.inertia.motor_inertia
        + model.inertia.upper_arm_inertia
        + model.inertia.forearm_pair_inertia
        + elbow_mass * model.geometry.upper_arm_length.powi(2)
}

/// Gravity moment coefficient of one leg about its motor axis, [kg·m].
fn leg_gravity_moment(model: &DeltaModel) -> f64 {
    let elbow_mass = model.geometry.forearm_com_ratio * model.inertia.forearm_pair_mass;
    (model.inertia.upper_arm_mass * model.geometry.upper_arm_com_ratio + elbow_mass)
        * model.geometry.upper_arm_length
}

pub(crate) fn assemble(model: &DeltaModel, state: &DeltaState) -> Result<DynamicsTerms, DeltaError> {
    let (jacobian, legs) = jacobian_from_pose(&model.geometry, &state.workspace, &state.joints)?;
    let m_t = platform_side_mass(model);
    let i_ax = motor_axis_inertia(model);

    let mut mass = Matrix3::identity() * m_t;
    for leg in &legs {
        mass += i_ax * leg.row * leg.row.transpose();
    }

    // ∂M/∂w_k from the Jacobian row gradients, then Christoffel symbols.
    let row_grads: [Matrix3<f64>; 3] = [
        jacobian_row_gradient(&model.geometry, &legs[0]),
        jacobian_row_gradient(&model.geometry, &legs[1]),
        jacobian_row_gradient(&model.geometry, &legs[2]),
    ];
    let mut dm = [Matrix3::zeros(), Matrix3::zeros(), Matrix3::zeros()];
    for k in 0..3 {
        for (leg, ki) in legs.iter().zip(&row_grads) {
            let outer = ki.column(k) * leg.row.transpose();
            dm[k] += i_ax * (outer + outer.transpose());
        }
    }
    let wdot = state.workspace_vel;
    let mut coriolis = Matrix3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            let mut c = 0.0;
            for k in 0..3 {
                c += 0.5 * (dm[k][(i, j)] + dm[j][(i, k)] - dm[i][(j, k)]) * wdot[k];
            }
            coriolis[(i, j)] = c;
        }
    }

    // U(w) = −g·(m_t·w_z + Σ μ·sinθ_i): gravity loads the platform directly
    // and each leg through its joint angle.
    let mu = leg_gravity_moment(model);
    let mut gravity = Vector3::new(0.0, 0.0, -model.gravity * m_t);
    for leg in &legs {
        gravity -= model.gravity * mu * leg.theta.cos() * leg.row;
    }

    Ok(DynamicsTerms {
        mass,
        coriolis,
        gravity,
        jacobian,
    })
}

/// Potential energy (gravity only); zero at `w_z = 0`, `θ = 0`.
pub(crate) fn potential_energy(model: &DeltaModel, state: &DeltaState) -> f64 {
    let m_t = platform_side_mass(model);
    let mu = leg_gravity_moment(model);
    let theta_sum: f64 = (0..3).map(|i| state.joints[i].sin()).sum();
    -model.gravity * (m_t * state.workspace.z + mu * theta_sum)
}

#[allow(dead_code)]
pub(crate) fn kinetic_energy(terms: &DynamicsTerms, wdot: &Vector3<f64>) -> f64 {
    0.5 * (wdot.transpose() * terms.mass * wdot)[(0, 0)]
}
