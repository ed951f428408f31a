//! Fixed-step closed-loop simulator: zero-order-hold control at a fixed rate
//! with RK4 substeps between ticks, trajectory logging, metrics and the
//! controller-comparison suite.

mod metrics;
mod references;

pub use metrics::{axis_names, compute_metrics, metrics_csv, trajectory_csv, Metrics, METERS_TO_MM};
pub use references::{circle_reference, step_reference, step_switch_times};

use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::ValueFunction;
use crate::controllers::Controller;
use crate::integrate::rk4_span_refining;
use crate::plant::{companion_lift, CanonicalPlant, CostWeights, PlantError, ReferenceSignal};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("trajectory log is empty")]
    EmptyLog,
    #[error("no log samples fall inside the requested window")]
    EmptyWindow,
}

/// Norm guard above which a run is declared divergent and aborted.
pub const DEFAULT_BLOWUP_NORM: f64 = 1e3;

/// Hard-stop projection applied between integrator substeps when the plant
/// has a mechanical validity boundary (e.g. the robot's stretch limit).
/// Returns `None` when the state needs no correction.
pub type ValidityStop = Arc<dyn Fn(&DVector<f64>) -> Option<DVector<f64>> + Send + Sync>;

/// One closed-loop run: plant truth, controller, reference and the loop
/// timing/limits, plus the cost weights used for the logged integrand.
#[derive(Clone)]
pub struct Scenario {
    pub label: String,
    pub plant: CanonicalPlant,
    pub controller: Arc<dyn Controller>,
    pub reference: ReferenceSignal,
    pub cost: CostWeights,
    pub initial_state: DVector<f64>,
    pub t_final: f64,
    /// Controller ticks per second (zero-order hold in between).
    pub control_rate: f64,
    /// RK4 substeps per control period.
    pub substeps: usize,
    /// Windows for steady-state error statistics.
    pub steady_windows: Vec<(f64, f64)>,
    /// Window for the total-cost quadrature.
    pub cost_window: (f64, f64),
    pub blowup_norm: f64,
    /// Mechanical hard-stop projection, when the plant has one.
    pub validity_stop: Option<ValidityStop>,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.t_final > 0.0) || !(self.control_rate > 0.0) || self.substeps == 0 {
            return Err(SimError::InvalidScenario(
                "t_final, control_rate and substeps must be positive".into(),
            ));
        }
        if self.initial_state.len() != self.plant.dim_state() {
            return Err(SimError::InvalidScenario(format!(
                "initial state length {} does not match plant state length {}",
                self.initial_state.len(),
                self.plant.dim_state()
            )));
        }
        if self.reference.dim_state() != self.plant.dim_state() {
            return Err(SimError::InvalidScenario(
                "reference dimension does not match the plant".into(),
            ));
        }
        Ok(())
    }

    pub fn tick_count(&self) -> usize {
        (self.t_final * self.control_rate).round() as usize
    }
}

/// Uniformly sampled closed-loop record at the control rate.
#[derive(Clone, Debug, Default)]
pub struct TrajectoryLog {
    pub control_dt: f64,
    pub time: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub errors: Vec<DVector<f64>>,
    pub controls: Vec<DVector<f64>>,
    pub saturation: Vec<Vec<bool>>,
    /// Instantaneous `EᵀQE + uᵀRu` with the total (saturated) control.
    pub cost_integrand: Vec<f64>,
    /// Controller side channels, one series per named extra.
    pub extras: Vec<(String, Vec<f64>)>,
}

impl TrajectoryLog {
    pub fn empty(control_dt: f64, _dim_state: usize, _dim_control: usize) -> Self {
        Self {
            control_dt,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub enum RunOutcome {
    Completed,
    Aborted { reason: String, time: f64 },
}

impl RunOutcome {
    pub fn is_completed(&self) -> bool {
        matches!(self, RunOutcome::Completed)
    }
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub log: TrajectoryLog,
    pub outcome: RunOutcome,
}

/// Zero-order-hold RK4 propagation of the plant over one control period.
/// A substep that reaches the plant's validity boundary is retried at halved
/// width; trajectories that merely graze the boundary survive, ones that
/// genuinely leave it still abort.
pub fn integrate_step(
    plant: &CanonicalPlant,
    x: &DVector<f64>,
    u_held: &DVector<f64>,
    dt: f64,
    substeps: usize,
) -> Result<DVector<f64>, SimError> {
    if !(dt > 0.0) || substeps == 0 {
        return Err(SimError::InvalidScenario(
            "integration step and substeps must be positive".into(),
        ));
    }
    let mut deriv =
        |state: &DVector<f64>| -> Result<DVector<f64>, PlantError> { companion_lift(plant, state, u_held) };
    Ok(rk4_span_refining(&mut deriv, x, dt, substeps)?)
}

/// One control period with the optional mechanical stop applied between
/// substeps: a hard saturated slew that reaches the stop slides along it
/// instead of stepping outside the model's validity region.
fn propagate(
    plant: &CanonicalPlant,
    stop: Option<&ValidityStop>,
    x: &DVector<f64>,
    u_held: &DVector<f64>,
    dt: f64,
    substeps: usize,
) -> Result<DVector<f64>, SimError> {
    let Some(stop) = stop else {
        return integrate_step(plant, x, u_held, dt, substeps);
    };
    let h = dt / substeps as f64;
    let mut state = x.clone();
    if let Some(projected) = stop(&state) {
        state = projected;
    }
    for _ in 0..substeps {
        state = match integrate_step(plant, &state, u_held, h, 1) {
            Ok(next) => next,
            Err(first_err) => {
                // The substep ran into the validity boundary: park on the
                // stop and retry once from the projected state.
                match stop(&state) {
                    Some(projected) => integrate_step(plant, &projected, u_held, h, 1)
                        .map_err(|_| first_err)?,
                    None => return Err(first_err),
                }
            }
        };
        if let Some(projected) = stop(&state) {
            state = projected;
        }
    }
    Ok(state)
}

/// Run one scenario to completion or abort. Deterministic: the same scenario
/// always produces the identical log.
pub fn run_closed_loop(scenario: &Scenario) -> Result<RunResult, SimError> {
    scenario.validate()?;
    let dt = 1.0 / scenario.control_rate;
    let ticks = scenario.tick_count();
    let mut log = TrajectoryLog::empty(
        dt,
        scenario.plant.dim_state(),
        scenario.plant.dim_output(),
    );
    let mut extra_names: Option<Vec<String>> = None;
    let mut x = scenario.initial_state.clone();

    for k in 0..ticks {
        let t = k as f64 * dt;
        if !x.iter().all(|v| v.is_finite()) || x.norm() > scenario.blowup_norm {
            return Ok(RunResult {
                log,
                outcome: RunOutcome::Aborted {
                    reason: format!("state norm {:.3e} exceeded the divergence guard", x.norm()),
                    time: t,
                },
            });
        }
        let point = scenario.reference.eval(t);
        let command = match scenario.controller.command(&x, &scenario.reference, t) {
            Ok(cmd) => cmd,
            Err(err) => {
                return Ok(RunResult {
                    log,
                    outcome: RunOutcome::Aborted {
                        reason: format!("controller failed: {err}"),
                        time: t,
                    },
                })
            }
        };
        let error = &x - &point.state;
        if extra_names.is_none() {
            let names: Vec<String> = command.extras.iter().map(|(n, _)| n.to_string()).collect();
            log.extras = names.iter().map(|n| (n.clone(), Vec::new())).collect();
            extra_names = Some(names);
        }
        log.time.push(t);
        log.cost_integrand
            .push(scenario.cost.running_cost(&error, &command.u));
        log.states.push(x.clone());
        log.errors.push(error);
        log.saturation.push(command.saturated.clone());
        for (slot, (_, value)) in log.extras.iter_mut().zip(&command.extras) {
            slot.1.push(*value);
        }
        log.controls.push(command.u.clone());

        match propagate(
            &scenario.plant,
            scenario.validity_stop.as_ref(),
            &x,
            &command.u,
            dt,
            scenario.substeps,
        ) {
            Ok(next) => x = next,
            Err(err) => {
                return Ok(RunResult {
                    log,
                    outcome: RunOutcome::Aborted {
                        reason: format!("integration failed: {err}"),
                        time: t,
                    },
                })
            }
        }
    }
    Ok(RunResult {
        log,
        outcome: RunOutcome::Completed,
    })
}

/// One row of a comparison suite.
#[derive(Clone, Debug)]
pub struct SuiteEntry {
    pub label: String,
    pub outcome: RunOutcome,
    pub metrics: Option<Metrics>,
}

/// Run a batch of scenarios in parallel with deterministic ordering;
/// individual failures are recorded and the suite continues.
pub fn scenario_suite(scenarios: &[Scenario]) -> Vec<SuiteEntry> {
    scenarios
        .par_iter()
        .map(|scenario| match run_closed_loop(scenario) {
            Ok(result) => {
                let metrics = if result.outcome.is_completed() {
                    compute_metrics(
                        &result.log,
                        &scenario.cost,
                        &scenario.steady_windows,
                        scenario.cost_window,
                    )
                    .ok()
                } else {
                    None
                };
                SuiteEntry {
                    label: scenario.label.clone(),
                    outcome: result.outcome,
                    metrics,
                }
            }
            Err(err) => SuiteEntry {
                label: scenario.label.clone(),
                outcome: RunOutcome::Aborted {
                    reason: err.to_string(),
                    time: 0.0,
                },
                metrics: None,
            },
        })
        .collect()
}

/// Decrease statistics of `V(E(t))` along a log, ignoring steps whose error
/// norm is below `floor`.
#[derive(Clone, Debug)]
pub struct LyapunovStats {
    pub steps_above_floor: usize,
    pub decreasing_steps: usize,
    pub max_increase: f64,
}

impl LyapunovStats {
    pub fn decrease_fraction(&self) -> f64 {
        if self.steps_above_floor == 0 {
            1.0
        } else {
            self.decreasing_steps as f64 / self.steps_above_floor as f64
        }
    }
}

pub fn lyapunov_decrease_stats(
    log: &TrajectoryLog,
    value: &ValueFunction,
    floor: f64,
) -> LyapunovStats {
    let mut stats = LyapunovStats {
        steps_above_floor: 0,
        decreasing_steps: 0,
        max_increase: 0.0,
    };
    for k in 1..log.errors.len() {
        let prev = &log.errors[k - 1];
        if prev.norm() <= floor {
            continue;
        }
        let v_prev = value.value(prev).expect("log and value dimensions agree");
        let v_next = value
            .value(&log.errors[k])
            .expect("log and value dimensions agree");
        stats.steps_above_floor += 1;
        if v_next < v_prev {
            stats.decreasing_steps += 1;
        } else {
            stats.max_increase = stats.max_increase.max(v_next - v_prev);
        }
    }
    stats
}
