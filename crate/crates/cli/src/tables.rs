//! Comparison-table renderers: per-run metrics CSV, steady-state error
//! tables per scenario and payload, and the total-cost table. Failed runs
//! are annotated, never dropped.

use adptrack::config::SuiteCase;
use adptrack::sim::{axis_names, Metrics, RunOutcome, SuiteEntry};

fn fmt(v: f64) -> String {
    format!("{v:.6e}")
}

/// Flat per-run metrics, one row per suite case.
pub fn suite_csv(cases: &[SuiteCase], entries: &[SuiteEntry]) -> String {
    let mut out = String::from("# adptrack suite-metrics-csv v1\n");
    out.push_str("controller,scenario,payload_kg,status,mean_x_mm,mean_y_mm,mean_z_mm,std_x_mm,std_y_mm,std_z_mm,total_cost,max_abs_u,saturated_steps\n");
    for (case, entry) in cases.iter().zip(entries) {
        match (&entry.outcome, &entry.metrics) {
            (RunOutcome::Completed, Some(m)) => {
                out.push_str(&format!(
                    "{},{},{},ok,{},{},{},{},{},{},{},{},{}\n",
                    case.controller,
                    case.scenario,
                    case.payload,
                    fmt(m.mean_abs_e_mm[0]),
                    fmt(m.mean_abs_e_mm[1]),
                    fmt(m.mean_abs_e_mm[2]),
                    fmt(m.std_abs_e_mm[0]),
                    fmt(m.std_abs_e_mm[1]),
                    fmt(m.std_abs_e_mm[2]),
                    fmt(m.total_cost),
                    fmt(m.max_abs_u),
                    m.saturated_steps,
                ));
            }
            (outcome, _) => {
                let reason = match outcome {
                    RunOutcome::Aborted { reason, time } => {
                        format!("aborted at t={time:.3}: {reason}")
                    }
                    RunOutcome::Completed => "metrics unavailable".to_string(),
                };
                out.push_str(&format!(
                    "{},{},{},\"{}\",,,,,,,,,\n",
                    case.controller,
                    case.scenario,
                    case.payload,
                    reason.replace('"', "'"),
                ));
            }
        }
    }
    out
}

fn find_metrics<'a>(
    cases: &'a [SuiteCase],
    entries: &'a [SuiteEntry],
    controller: &str,
    scenario: &str,
    payload_nominal: bool,
) -> Option<&'a Metrics> {
    cases
        .iter()
        .zip(entries)
        .find(|(case, _)| {
            case.controller == controller
                && case.scenario == scenario
                && (case.payload == 0.0) == payload_nominal
        })
        .and_then(|(_, entry)| entry.metrics.as_ref())
}

const CONTROLLER_ORDER: [&str; 3] = ["ct", "adp", "smc"];

/// Steady-state mean/std tables, one pair of files per scenario and payload.
pub fn steady_state_tables(
    cases: &[SuiteCase],
    entries: &[SuiteEntry],
) -> Vec<(String, String)> {
    let mut files = Vec::new();
    let scenarios: Vec<&str> = {
        let mut seen = Vec::new();
        for case in cases {
            if !seen.contains(&case.scenario) {
                seen.push(case.scenario);
            }
        }
        seen
    };
    let payloads = [true, false];
    for scenario in &scenarios {
        for &nominal in &payloads {
            if !cases
                .iter()
                .any(|c| c.scenario == *scenario && (c.payload == 0.0) == nominal)
            {
                continue;
            }
            let tag = if nominal { "nominal" } else { "payload" };
            let axes = axis_names(3);

            let mut csv = String::from("# adptrack steady-state-table v1\n");
            csv.push_str(&format!("# scenario={scenario} variant={tag}\n"));
            csv.push_str("controller,stat,x,y,z\n");
            let mut txt = format!("steady-state |e| — scenario: {scenario}, {tag}\n");
            txt.push_str(&format!(
                "{:<6} {:<14} {:>12} {:>12} {:>12}\n",
                "ctrl", "stat", axes[0], axes[1], axes[2]
            ));
            for stat in ["mean_abs_e_mm", "std_abs_e_mm"] {
                for controller in CONTROLLER_ORDER {
                    match find_metrics(cases, entries, controller, scenario, nominal) {
                        Some(m) => {
                            let values = if stat == "mean_abs_e_mm" {
                                &m.mean_abs_e_mm
                            } else {
                                &m.std_abs_e_mm
                            };
                            csv.push_str(&format!(
                                "{controller},{stat},{},{},{}\n",
                                fmt(values[0]),
                                fmt(values[1]),
                                fmt(values[2])
                            ));
                            txt.push_str(&format!(
                                "{controller:<6} {stat:<14} {:>12.4} {:>12.4} {:>12.4}\n",
                                values[0], values[1], values[2]
                            ));
                        }
                        None => {
                            csv.push_str(&format!("{controller},{stat},failed,failed,failed\n"));
                            txt.push_str(&format!(
                                "{controller:<6} {stat:<14} {:>12} {:>12} {:>12}\n",
                                "failed", "failed", "failed"
                            ));
                        }
                    }
                }
            }
            files.push((format!("table_steady_{scenario}_{tag}.csv"), csv));
            files.push((format!("table_steady_{scenario}_{tag}.txt"), txt));
        }
    }
    files
}

/// Total-cost table over the cost window, controllers as columns.
pub fn total_cost_tables(cases: &[SuiteCase], entries: &[SuiteEntry]) -> (String, String) {
    let mut csv = String::from("# adptrack total-cost-table v1\n");
    csv.push_str("scenario,variant,ct,adp,smc\n");
    let mut txt = String::from("total cost over the cost window\n");
    txt.push_str(&format!(
        "{:<8} {:<8} {:>14} {:>14} {:>14}\n",
        "scenario", "variant", "ct", "adp", "smc"
    ));
    let mut combos: Vec<(&str, bool)> = Vec::new();
    for case in cases {
        let key = (case.scenario, case.payload == 0.0);
        if !combos.contains(&key) {
            combos.push(key);
        }
    }
    for (scenario, nominal) in combos {
        let tag = if nominal { "nominal" } else { "payload" };
        let mut csv_row = vec![scenario.to_string(), tag.to_string()];
        let mut txt_cells = Vec::new();
        for controller in CONTROLLER_ORDER {
            match find_metrics(cases, entries, controller, scenario, nominal) {
                Some(m) => {
                    csv_row.push(fmt(m.total_cost));
                    txt_cells.push(format!("{:>14.4}", m.total_cost));
                }
                None => {
                    csv_row.push("failed".to_string());
                    txt_cells.push(format!("{:>14}", "failed"));
                }
            }
        }
        csv.push_str(&csv_row.join(","));
        csv.push('\n');
        txt.push_str(&format!(
            "{scenario:<8} {tag:<8} {}\n",
            txt_cells.join(" ")
        ));
    }
    (csv, txt)
}

/// Aligned text render of single-run metrics.
pub fn metrics_text(label: &str, metrics: &Metrics) -> String {
    let axes = axis_names(metrics.mean_abs_e_mm.len());
    let mut out = format!("run: {label}\n");
    out.push_str(&format!(
        "{:<6} {:>14} {:>14} {:>12}\n",
        "axis", "mean|e| (mm)", "std|e| (mm)", "settle (s)"
    ));
    for (k, axis) in axes.iter().enumerate() {
        let settle = metrics.settling_time_s[k]
            .map(|t| format!("{t:.3}"))
            .unwrap_or_else(|| "—".to_string());
        out.push_str(&format!(
            "{axis:<6} {:>14.5} {:>14.5} {:>12}\n",
            metrics.mean_abs_e_mm[k], metrics.std_abs_e_mm[k], settle
        ));
    }
    out.push_str(&format!(
        "total_cost = {:.6}   max|u| = {:.4}   saturated steps = {}\n",
        metrics.total_cost, metrics.max_abs_u, metrics.saturated_steps
    ));
    out
}
