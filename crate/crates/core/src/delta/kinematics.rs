//! Closed-form inverse kinematics, numeric forward kinematics and the
//! loop-closure Jacobian of the Delta parallel robot.
//!
//! Conventions (also spelled out in the module README): the base frame sits
//! at the centre of the fixed platform with +z pointing from the base toward
//! the moving platform, so gravity acts along +z. Leg i is attached at
//! azimuth direction `d_i = [−sin φ_i, cos φ_i, 0]`; its upper arm swings in
//! the vertical plane spanned by `d_i` and `z`, with joint angle θ measured
//! from the horizontal (θ > 0 tips the elbow toward the platform). The
//! Jacobian maps workspace to joint rates, `q̇ = J ẇ`, and torque enters the
//! workspace dynamics through `Jᵀτ`.

use nalgebra::{Matrix3, Vector3};

use super::{DeltaError, DeltaGeometry};

/// Joint-angle solution for one leg together with the geometric intermediates
/// reused by the Jacobian and the dynamics assembly.
#[derive(Clone, Debug)]
pub(crate) struct LegSolution {
    pub theta: f64,
    /// Upper-arm direction `u(θ) = cosθ·d + sinθ·ẑ`.
    pub arm: Vector3<f64>,
    /// Forearm vector from elbow to platform attachment, length `l_K`.
    pub forearm: Vector3<f64>,
    /// `e' = l_L·u'(θ)`, the elbow velocity per unit joint rate.
    pub arm_tangent: Vector3<f64>,
    /// Denominator `s·e'` of the Jacobian row; small values flag singularity.
    pub denom: f64,
    /// Jacobian row `J_i = sᵀ / (sᵀe')` as a column vector.
    pub row: Vector3<f64>,
}

pub(crate) fn leg_direction(geometry: &DeltaGeometry, leg: usize) -> Vector3<f64> {
    let phi = geometry.leg_angles[leg];
    Vector3::new(-phi.sin(), phi.cos(), 0.0)
}

/// Closed-form IK for one leg; elbow-out branch.
///
/// Loop closure reduces to `ξ cosθ + ζ sinθ = h` in the leg plane with
/// `ξ = v·d`, `ζ = v_z`, `v = w − (r_b − r_a)·d`. Of the two solutions the
/// elbow-out branch maximizes `cosθ` (elbow radially outward), which keeps a
/// single assembly mode across the workspace.
pub(crate) fn solve_leg(
    geometry: &DeltaGeometry,
    w: &Vector3<f64>,
    leg: usize,
) -> Result<f64, DeltaError> {
    let dir = leg_direction(geometry, leg);
    let v = w - dir * (geometry.base_radius - geometry.platform_radius);
    let xi = v.dot(&dir);
    let zeta = v.z;
    let l_l = geometry.upper_arm_length;
    let l_k = geometry.forearm_length;
    let h = (v.norm_squared() + l_l * l_l - l_k * l_k) / (2.0 * l_l);
    let rho = xi.hypot(zeta);
    if rho < 1e-12 {
        return Err(DeltaError::OutOfWorkspace {
            leg,
            detail: "arm pivot degenerate (platform attachment on the motor axis)".into(),
        });
    }
    let ratio = h / rho;
    if ratio.abs() > 1.0 + 1e-12 {
        return Err(DeltaError::OutOfWorkspace {
            leg,
            detail: format!("loop closure unsatisfiable (|h|/ρ = {:.6})", ratio.abs()),
        });
    }
    let gamma = ratio.clamp(-1.0, 1.0).acos();
    let phi0 = zeta.atan2(xi);
    let (a, b) = (phi0 - gamma, phi0 + gamma);
    Ok(if a.cos() >= b.cos() { a } else { b })
}

pub(crate) fn leg_solution(
    geometry: &DeltaGeometry,
    w: &Vector3<f64>,
    theta: f64,
    leg: usize,
) -> Result<LegSolution, DeltaError> {
    let dir = leg_direction(geometry, leg);
    let v = w - dir * (geometry.base_radius - geometry.platform_radius);
    let l_l = geometry.upper_arm_length;
    let arm = dir * theta.cos() + Vector3::z() * theta.sin();
    let arm_tangent = (dir * -theta.sin() + Vector3::z() * theta.cos()) * l_l;
    let forearm = v - arm * l_l;
    let denom = forearm.dot(&arm_tangent);
    if denom.abs() < 1e-12 {
        return Err(DeltaError::SingularConfiguration {
            detail: format!("leg {leg} forearm orthogonal to elbow motion"),
        });
    }
    let row = forearm / denom;
    Ok(LegSolution {
        theta,
        arm,
        forearm,
        arm_tangent,
        denom,
        row,
    })
}

/// Closed-form inverse kinematics: joint angles for a platform position.
pub fn inverse_kinematics(
    geometry: &DeltaGeometry,
    w: &Vector3<f64>,
) -> Result<Vector3<f64>, DeltaError> {
    let mut q = Vector3::zeros();
    for leg in 0..3 {
        q[leg] = solve_leg(geometry, w, leg)?;
    }
    Ok(q)
}

/// Numeric forward kinematics by three-sphere intersection.
///
/// Each forearm constrains the platform centre to a sphere of radius `l_K`
/// about `elbow_i − r_a·d_i`; the pairwise differences give two planes whose
/// intersection line is cut with the first sphere. Of the two roots the one
/// with larger z (platform side, away from the base) is returned.
pub fn forward_kinematics(
    geometry: &DeltaGeometry,
    q: &Vector3<f64>,
) -> Result<Vector3<f64>, DeltaError> {
    let mut centers = [Vector3::zeros(); 3];
    for leg in 0..3 {
        let dir = leg_direction(geometry, leg);
        let elbow = dir * geometry.base_radius
            + (dir * q[leg].cos() + Vector3::z() * q[leg].sin()) * geometry.upper_arm_length;
        centers[leg] = elbow - dir * geometry.platform_radius;
    }
    let l_k = geometry.forearm_length;

    let d12 = centers[0] - centers[1];
    let d13 = centers[0] - centers[2];
    let line_dir = d12.cross(&d13);
    if line_dir.norm() < 1e-12 {
        return Err(DeltaError::SpheresDegenerate {
            detail: "sphere centres collinear".into(),
        });
    }
    let axis = line_dir.normalize();
    // Particular point on both planes: solve the 2×3 system with the axis
    // pinned to zero, making it square and well conditioned.
    let a = Matrix3::from_rows(&[
        (2.0 * d12).transpose(),
        (2.0 * d13).transpose(),
        axis.transpose(),
    ]);
    let b = Vector3::new(
        centers[0].norm_squared() - centers[1].norm_squared(),
        centers[0].norm_squared() - centers[2].norm_squared(),
        0.0,
    );
    let p0 = a.lu().solve(&b).ok_or_else(|| DeltaError::SpheresDegenerate {
        detail: "plane intersection is rank deficient".into(),
    })?;

    // |p0 + t·axis − c1|² = l_K², with |axis| = 1.
    let rel = p0 - centers[0];
    let half_b = rel.dot(&axis);
    let c = rel.norm_squared() - l_k * l_k;
    let disc = half_b * half_b - c;
    if disc < 0.0 {
        return Err(DeltaError::SpheresDegenerate {
            detail: format!("constraint spheres do not intersect (discriminant {disc:.3e})"),
        });
    }
    let sq = disc.sqrt();
    let t1 = -half_b + sq;
    let t2 = -half_b - sq;
    let p1 = p0 + axis * t1;
    let p2 = p0 + axis * t2;
    Ok(if p1.z >= p2.z { p1 } else { p2 })
}

/// Loop-closure Jacobian `J` with `q̇ = J ẇ` at a pose given by `(w, q)`.
pub(crate) fn jacobian_from_pose(
    geometry: &DeltaGeometry,
    w: &Vector3<f64>,
    q: &Vector3<f64>,
) -> Result<(Matrix3<f64>, [LegSolution; 3]), DeltaError> {
    let legs = [
        leg_solution(geometry, w, q[0], 0)?,
        leg_solution(geometry, w, q[1], 1)?,
        leg_solution(geometry, w, q[2], 2)?,
    ];
    let j = Matrix3::from_rows(&[
        legs[0].row.transpose(),
        legs[1].row.transpose(),
        legs[2].row.transpose(),
    ]);
    Ok((j, legs))
}

/// Gradient of one Jacobian row: `K_i[:,k] = ∂(J_iᵀ)/∂w_k`.
///
/// With `s` the forearm vector, `e' = l_L u'` and `D = sᵀe'`:
/// `∂s/∂w = I − e'·J_i`, `∂e'/∂w = −l_L·u·J_i`, and
/// `∇D = e' − (l_L² + l_L·uᵀs)·J_iᵀ`, giving
/// `K_i = (I − e'·J_i)/D − s·∇Dᵀ/D²`.
pub(crate) fn jacobian_row_gradient(
    geometry: &DeltaGeometry,
    leg: &LegSolution,
) -> Matrix3<f64> {
    let l_l = geometry.upper_arm_length;
    let s = leg.forearm;
    let ep = leg.arm_tangent;
    let d = leg.denom;
    let row_t = leg.row.transpose();
    let ds_dw = Matrix3::identity() - ep * row_t;
    let beta = leg.arm.dot(&s);
    let grad_d = ep - leg.row * (l_l * l_l + l_l * beta);
    ds_dw / d - s * grad_d.transpose() / (d * d)
}
