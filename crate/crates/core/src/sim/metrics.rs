//! Tracking metrics over a trajectory log: steady-state error statistics in
//! millimetres, quadratic total cost by trapezoidal quadrature, saturation
//! and settling diagnostics.

use serde::{Deserialize, Serialize};

use crate::plant::CostWeights;

use super::{SimError, TrajectoryLog};

pub const METERS_TO_MM: f64 = 1e3;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Metrics {
    /// Per-axis mean of |e| over the steady-state windows, mm.
    pub mean_abs_e_mm: Vec<f64>,
    /// Per-axis population standard deviation of |e| over the windows, mm.
    pub std_abs_e_mm: Vec<f64>,
    /// `∫ (EᵀQE + uᵀRu) dτ` over the cost window, trapezoidal on the log grid.
    pub total_cost: f64,
    pub max_abs_u: f64,
    pub saturated_steps: usize,
    /// Earliest time after which |e| stays below 2 mm, per axis.
    pub settling_time_s: Vec<Option<f64>>,
    pub steady_windows: Vec<(f64, f64)>,
    pub cost_window: (f64, f64),
}

const SETTLE_TOLERANCE_M: f64 = 2e-3;

/// Steady-state statistics over the half-open `windows` (so a window ending
/// exactly at a setpoint switch excludes the post-switch sample), total cost
/// over `cost_window`.
pub fn compute_metrics(
    log: &TrajectoryLog,
    cost: &CostWeights,
    windows: &[(f64, f64)],
    cost_window: (f64, f64),
) -> Result<Metrics, SimError> {
    if log.time.is_empty() {
        return Err(SimError::EmptyLog);
    }
    let axes = log.errors[0].len();
    let in_windows = |t: f64| windows.iter().any(|&(a, b)| t >= a && t < b);

    let mut count = 0usize;
    let mut sums = vec![0.0; axes];
    for (t, e) in log.time.iter().zip(&log.errors) {
        if in_windows(*t) {
            count += 1;
            for (axis, sum) in sums.iter_mut().enumerate() {
                *sum += e[axis].abs();
            }
        }
    }
    if count == 0 {
        return Err(SimError::EmptyWindow);
    }
    let mean: Vec<f64> = sums.iter().map(|s| s / count as f64).collect();
    let mut sq = vec![0.0; axes];
    for (t, e) in log.time.iter().zip(&log.errors) {
        if in_windows(*t) {
            for (axis, acc) in sq.iter_mut().enumerate() {
                let d = e[axis].abs() - mean[axis];
                *acc += d * d;
            }
        }
    }
    let std: Vec<f64> = sq.iter().map(|s| (s / count as f64).sqrt()).collect();

    // Trapezoid over samples inside the cost window.
    let mut total_cost = 0.0;
    for k in 1..log.time.len() {
        let (t0, t1) = (log.time[k - 1], log.time[k]);
        if t0 < cost_window.0 || t1 > cost_window.1 {
            continue;
        }
        let f0 = cost.running_cost(&log.errors[k - 1], &log.controls[k - 1]);
        let f1 = cost.running_cost(&log.errors[k], &log.controls[k]);
        total_cost += 0.5 * (f0 + f1) * (t1 - t0);
    }

    let max_abs_u = log
        .controls
        .iter()
        .map(|u| u.amax())
        .fold(0.0_f64, f64::max);
    let saturated_steps = log
        .saturation
        .iter()
        .filter(|flags| flags.iter().any(|&f| f))
        .count();

    let settling_time_s = (0..axes)
        .map(|axis| {
            let mut settle = None;
            for (t, e) in log.time.iter().zip(&log.errors) {
                if e[axis].abs() >= SETTLE_TOLERANCE_M {
                    settle = None;
                } else if settle.is_none() {
                    settle = Some(*t);
                }
            }
            settle
        })
        .collect();

    Ok(Metrics {
        mean_abs_e_mm: mean.iter().map(|v| v * METERS_TO_MM).collect(),
        std_abs_e_mm: std.iter().map(|v| v * METERS_TO_MM).collect(),
        total_cost,
        max_abs_u,
        saturated_steps,
        settling_time_s,
        steady_windows: windows.to_vec(),
        cost_window,
    })
}

fn fmt(v: f64) -> String {
    format!("{v:.12e}")
}

/// Versioned CSV render of a trajectory log.
pub fn trajectory_csv(log: &TrajectoryLog) -> String {
    let n = log.states[0].len();
    let m = log.controls[0].len();
    let mut out = String::from("# adptrack trajectory-csv v1\n");
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|k| format!("x{k}")));
    header.extend((1..=n).map(|k| format!("e{k}")));
    header.extend((1..=m).map(|k| format!("u{k}")));
    header.extend((1..=m).map(|k| format!("sat{k}")));
    header.push("cost_integrand".to_string());
    header.extend(log.extras.iter().map(|(name, _)| name.clone()));
    out.push_str(&header.join(","));
    out.push('\n');
    for k in 0..log.time.len() {
        let mut row = vec![fmt(log.time[k])];
        row.extend(log.states[k].iter().map(|&v| fmt(v)));
        row.extend(log.errors[k].iter().map(|&v| fmt(v)));
        row.extend(log.controls[k].iter().map(|&v| fmt(v)));
        row.extend(log.saturation[k].iter().map(|&f| String::from(if f { "1" } else { "0" })));
        row.push(fmt(log.cost_integrand[k]));
        row.extend(log.extras.iter().map(|(_, series)| fmt(series[k])));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Versioned CSV render of per-axis metrics.
pub fn metrics_csv(label: &str, metrics: &Metrics) -> String {
    let mut out = String::from("# adptrack metrics-csv v1\n");
    out.push_str("run,axis,mean_abs_e_mm,std_abs_e_mm,settling_time_s\n");
    let axes = axis_names(metrics.mean_abs_e_mm.len());
    for (k, axis) in axes.iter().enumerate() {
        let settle = metrics.settling_time_s[k]
            .map(fmt)
            .unwrap_or_else(|| "unsettled".to_string());
        out.push_str(&format!(
            "{label},{axis},{},{},{settle}\n",
            fmt(metrics.mean_abs_e_mm[k]),
            fmt(metrics.std_abs_e_mm[k]),
        ));
    }
    out.push_str(&format!(
        "{label},all,total_cost={},max_abs_u={},saturated_steps={}\n",
        fmt(metrics.total_cost),
        fmt(metrics.max_abs_u),
        metrics.saturated_steps
    ));
    out
}

pub fn axis_names(count: usize) -> Vec<String> {
    if count == 3 {
        vec!["x".into(), "y".into(), "z".into()]
    } else {
        (1..=count).map(|k| format!("e{k}")).collect()
    }
}
