//! End-to-end closed-loop behavior through the public config and simulation
//! surfaces.

use std::path::Path;
use std::sync::Arc;

use nalgebra::DVector;

use adptrack::config::ScenarioFile;
use adptrack::controllers::AdpController;
use adptrack::plant::{CanonicalPlant, CostWeights, ReferenceSignal};
use adptrack::sim::{
    lyapunov_decrease_stats, run_closed_loop, scenario_suite, trajectory_csv, Scenario,
    DEFAULT_BLOWUP_NORM,
};
use adptrack::{QuadraticBasis, ValueFunction};

fn dv(v: &[f64]) -> DVector<f64> {
    DVector::from_row_slice(v)
}

const COUNTEREXAMPLE_LQT: &str = r#"
    [plant]
    kind = "scalar"
    a = 1.0

    [controller]
    kind = "discounted-lqt"
    q = 1.0
    rho = 0.0

    [reference]
    kind = "constant"
    value = [2.0]

    [run]
    t_final = 10.0
    initial_state = [1.0]

    [cost]
    q = [[1.0]]
    r = [[1.0]]
"#;

#[test]
fn exact_cost_baseline_parks_short_of_the_setpoint() {
    let scenario = ScenarioFile::parse(COUNTEREXAMPLE_LQT)
        .unwrap()
        .build(None, Path::new("."))
        .unwrap();
    let result = run_closed_loop(&scenario).unwrap();
    assert!(result.outcome.is_completed());
    assert_eq!(result.log.len(), 5000);
    for (x, u) in result.log.states.iter().zip(&result.log.controls) {
        assert!((x[0] - 1.0).abs() < 1e-6, "state drifted to {}", x[0]);
        assert!((u[0] + 1.0).abs() < 1e-6, "control drifted to {}", u[0]);
    }
}

fn scalar_adp_scenario() -> Scenario {
    // Exact scalar Riccati weights for a = q = r = 1.
    let plant = CanonicalPlant::scalar_linear(1.0);
    let cost = CostWeights::identity(1, 1);
    let vf = ValueFunction::new(
        QuadraticBasis::new(1),
        dv(&[1.0 + 2.0_f64.sqrt()]),
    )
    .unwrap();
    let controller =
        AdpController::new(plant.clone(), vf, cost.clone(), f64::INFINITY).unwrap();
    Scenario {
        label: "adp-counterexample".into(),
        plant,
        controller: Arc::new(controller),
        reference: ReferenceSignal::constant(1, dv(&[2.0])),
        cost,
        initial_state: dv(&[1.0]),
        t_final: 10.0,
        control_rate: 500.0,
        substeps: 4,
        steady_windows: vec![(2.0, 10.0)],
        cost_window: (0.0, 5.0),
        blowup_norm: DEFAULT_BLOWUP_NORM,
        validity_stop: None,
    }
}

#[test]
fn decomposed_controller_closes_the_counterexample_gap() {
    let scenario = scalar_adp_scenario();
    let result = run_closed_loop(&scenario).unwrap();
    assert!(result.outcome.is_completed());
    let last = result.log.states.last().unwrap();
    assert!(
        (last[0] - 2.0).abs() < 1e-3,
        "final state {} still off the setpoint",
        last[0]
    );
}

#[test]
fn value_decreases_strictly_along_the_scalar_run() {
    let scenario = scalar_adp_scenario();
    let result = run_closed_loop(&scenario).unwrap();
    let vf = ValueFunction::new(QuadraticBasis::new(1), dv(&[1.0 + 2.0_f64.sqrt()])).unwrap();
    let stats = lyapunov_decrease_stats(&result.log, &vf, 1e-6);
    assert!(stats.steps_above_floor > 1000);
    assert_eq!(
        stats.decreasing_steps, stats.steps_above_floor,
        "non-strict step with increase {:.3e}",
        stats.max_increase
    );
}

#[test]
fn sliding_mode_log_carries_surface_extras() {
    let text = r#"
        [plant]
        kind = "delta"

        [controller]
        kind = "smc"

        [reference]
        kind = "step"

        [run]
        t_final = 0.5

        [cost]
        d_factor = [
          [20.0, 0.0, 0.0, 1.0, 0.0, 0.0],
          [0.0, 20.0, 0.0, 0.0, 1.0, 0.0],
          [0.0, 0.0, 20.0, 0.0, 0.0, 1.0],
        ]
        r = [[0.001, 0.0, 0.0], [0.0, 0.001, 0.0], [0.0, 0.0, 0.001]]
    "#;
    let scenario = ScenarioFile::parse(text)
        .unwrap()
        .build(None, Path::new("."))
        .unwrap();
    let result = run_closed_loop(&scenario).unwrap();
    assert!(result.outcome.is_completed());
    let names: Vec<&str> = result.log.extras.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["s_over_phi_x", "s_over_phi_y", "s_over_phi_z"]);
    let csv = trajectory_csv(&result.log);
    let header = csv.lines().nth(1).unwrap();
    assert!(header.ends_with("cost_integrand,s_over_phi_x,s_over_phi_y,s_over_phi_z"));
    // Early in the step transient the surface runs outside the boundary
    // layer, so the normalized excursion exceeds one.
    let (_, series) = &result.log.extras[0];
    assert!(series.iter().any(|v| v.abs() > 1.0));
}

#[test]
fn suite_runs_are_reproducible() {
    let scenarios = vec![scalar_adp_scenario(), scalar_adp_scenario()];
    let a = scenario_suite(&scenarios);
    let b = scenario_suite(&scenarios);
    for (ea, eb) in a.iter().zip(&b) {
        let (ma, mb) = (ea.metrics.as_ref().unwrap(), eb.metrics.as_ref().unwrap());
        assert_eq!(ma.mean_abs_e_mm, mb.mean_abs_e_mm);
        assert_eq!(ma.total_cost, mb.total_cost);
    }
}
