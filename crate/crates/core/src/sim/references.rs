//! Closed-form reference trajectories for the bundled scenarios. All supply
//! the top derivative analytically; step references keep derivatives zero
//! everywhere and jump in position, like a setpoint command.

use nalgebra::{DVector, Vector3};

use crate::plant::{ReferencePoint, ReferenceSignal};

/// Planar circle at fixed height: `x = radius·cos(ωt)`, `y = radius·sin(ωt)`.
pub fn circle_reference(radius: f64, angular_velocity: f64, z: f64) -> ReferenceSignal {
    ReferenceSignal::new(6, 3, move |t| {
        let (s, c) = (angular_velocity * t).sin_cos();
        let w = angular_velocity;
        ReferencePoint {
            state: DVector::from_row_slice(&[
                radius * c,
                radius * s,
                z,
                -radius * w * s,
                radius * w * c,
                0.0,
            ]),
            top_derivative: DVector::from_row_slice(&[
                -radius * w * w * c,
                -radius * w * w * s,
                0.0,
            ]),
        }
    })
}

/// Sequence of holds: setpoint k applies on `[k·interval, (k+1)·interval)`,
/// the last one indefinitely.
pub fn step_reference(setpoints: Vec<Vector3<f64>>, switch_interval: f64) -> ReferenceSignal {
    assert!(!setpoints.is_empty(), "step reference needs at least one setpoint");
    assert!(switch_interval > 0.0, "switch interval must be positive");
    ReferenceSignal::new(6, 3, move |t| {
        let idx = if t < 0.0 {
            0
        } else {
            ((t / switch_interval) as usize).min(setpoints.len() - 1)
        };
        let p = setpoints[idx];
        ReferencePoint {
            state: DVector::from_row_slice(&[p[0], p[1], p[2], 0.0, 0.0, 0.0]),
            top_derivative: DVector::zeros(3),
        }
    })
}

/// Switch instants of a step reference within `[0, t_final]`.
pub fn step_switch_times(count: usize, switch_interval: f64, t_final: f64) -> Vec<f64> {
    (1..count)
        .map(|k| k as f64 * switch_interval)
        .filter(|&t| t < t_final)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn circle_is_consistent_with_its_derivatives() {
        let r = circle_reference(0.25, std::f64::consts::PI, 0.5);
        let h = 1e-6;
        for &t in &[0.0, 0.3, 1.7, 4.9] {
            let p = r.eval(t);
            let plus = r.eval(t + h);
            let minus = r.eval(t - h);
            for axis in 0..3 {
                let vel_fd = (plus.state[axis] - minus.state[axis]) / (2.0 * h);
                assert_relative_eq!(p.state[3 + axis], vel_fd, epsilon = 1e-6);
                let acc_fd = (plus.state[3 + axis] - minus.state[3 + axis]) / (2.0 * h);
                assert_relative_eq!(p.top_derivative[axis], acc_fd, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn circle_evaluation_is_lipschitz_in_time() {
        let r = circle_reference(0.25, std::f64::consts::PI, 0.5);
        // ‖X_d(t+h) − X_d(t)‖ ≤ C·h with C bounded by the radius and rate.
        let bound = 0.25 * (1.0 + std::f64::consts::PI) * (1.0 + std::f64::consts::PI);
        for k in 0..100 {
            let t = 0.05 * k as f64;
            for h in [1e-3, 1e-4, 1e-5] {
                let d = (r.eval(t + h).state - r.eval(t).state).norm();
                assert!(d <= bound * h * 1.1);
            }
        }
    }

    #[test]
    fn step_reference_holds_and_switches() {
        let points = vec![
            Vector3::new(0.1, 0.1, 0.45),
            Vector3::new(-0.1, -0.1, 0.6),
        ];
        let r = step_reference(points, 5.0);
        let first = r.eval(2.0);
        assert_eq!(first.state[0], 0.1);
        assert_eq!(first.state.rows(3, 3).norm(), 0.0);
        let second = r.eval(7.5);
        assert_eq!(second.state[0], -0.1);
        assert_eq!(second.state[2], 0.6);
        // Derivatives stay zero on both sides of the switch.
        assert_eq!(r.eval(4.999).top_derivative.norm(), 0.0);
        assert_eq!(r.eval(5.001).top_derivative.norm(), 0.0);
        // The last setpoint holds indefinitely.
        assert_eq!(r.eval(100.0).state[2], 0.6);
    }

    #[test]
    fn switch_times_enumerate_interior_switches() {
        assert_eq!(step_switch_times(2, 5.0, 10.0), vec![5.0]);
        assert_eq!(step_switch_times(3, 4.0, 10.0), vec![4.0, 8.0]);
        assert!(step_switch_times(1, 5.0, 10.0).is_empty());
    }
}
