//! Declarative TOML configuration for training runs, single scenarios and
//! comparison suites. Values carrying physical units accept either a bare
//! number (SI) or a string with an explicit suffix (`"250 mm"`, `"0.8 m/s"`);
//! everything is stored as SI internally.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Vector3};
use serde::Deserialize;
use thiserror::Error;

use crate::basis::{BasisError, ValueFunction};
use crate::controllers::{
    AdpController, ComputedTorqueController, Controller, CtGains, DiscountedLqtController,
    SlidingModeController, SmcGains,
};
use crate::delta::DeltaModel;
use crate::plant::{CanonicalPlant, CostWeights, PlantError, ReferenceSignal};
use crate::sim::{circle_reference, step_reference, Scenario, ValidityStop, DEFAULT_BLOWUP_NORM};
use crate::train::{Roi, TrainError, TrainingConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("weights: {0}")]
    Weights(#[from] BasisError),
    #[error("controller: {0}")]
    Controller(String),
}

/// SI scalar deserialized from a number or a `"value unit"` string.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quantity(pub f64);

impl<'de> Deserialize<'de> for Quantity {
    fn deserialize<D>(deserializer: D) -> Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Number(v) => Ok(Quantity(v)),
            Raw::Text(text) => parse_quantity(&text).map_err(serde::de::Error::custom),
        }
    }
}

fn unit_factor(unit: &str) -> Option<f64> {
    Some(match unit {
        "m" | "m/s" | "m/s^2" | "rad" | "rad/s" | "s" | "N.m" | "N*m" | "Nm" => 1.0,
        "mm" | "mm/s" => 1e-3,
        "cm" | "cm/s" => 1e-2,
        "deg" => std::f64::consts::PI / 180.0,
        _ => return None,
    })
}

fn parse_quantity(text: &str) -> Result<Quantity, String> {
    let trimmed = text.trim();
    let mut parts = trimmed.split_whitespace();
    let value: f64 = parts
        .next()
        .ok_or_else(|| format!("empty quantity `{text}`"))?
        .parse()
        .map_err(|e| format!("bad quantity `{text}`: {e}"))?;
    match parts.next() {
        None => Ok(Quantity(value)),
        Some(unit) => {
            let factor =
                unit_factor(unit).ok_or_else(|| format!("unknown unit `{unit}` in `{text}`"))?;
            if parts.next().is_some() {
                return Err(format!("trailing tokens in quantity `{text}`"));
            }
            Ok(Quantity(value * factor))
        }
    }
}

fn quantities(values: &[Quantity]) -> DVector<f64> {
    DVector::from_iterator(values.len(), values.iter().map(|q| q.0))
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantConfig {
    pub kind: PlantKind,
    /// Drift coefficient of the scalar plant `ẋ = a·x + u`.
    #[serde(default = "default_drift")]
    pub a: f64,
    /// Added end-effector mass for the Delta plant, kg.
    #[serde(default)]
    pub payload: f64,
}

fn default_drift() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum PlantKind {
    Scalar,
    DoubleIntegrator,
    Delta,
}

impl PlantConfig {
    pub fn dims(&self) -> (usize, usize) {
        match self.kind {
            PlantKind::Scalar => (1, 1),
            PlantKind::DoubleIntegrator => (2, 1),
            PlantKind::Delta => (6, 3),
        }
    }

    pub fn build(&self) -> CanonicalPlant {
        match self.kind {
            PlantKind::Scalar => CanonicalPlant::scalar_linear(self.a),
            PlantKind::DoubleIntegrator => CanonicalPlant::double_integrator(),
            PlantKind::Delta => DeltaModel::default()
                .with_payload(self.payload)
                .as_canonical_plant(),
        }
    }

    /// Mechanical hard stop for plants that have one.
    pub fn validity_stop(&self) -> Option<ValidityStop> {
        match self.kind {
            PlantKind::Delta => {
                let model = DeltaModel::default().with_payload(self.payload);
                Some(Arc::new(move |x: &DVector<f64>| model.stretch_stop(x)) as ValidityStop)
            }
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    /// Full error-penalty matrix Q…
    pub q: Option<Vec<Vec<f64>>>,
    /// …or its factor D with Q = DᵀD.
    pub d_factor: Option<Vec<Vec<f64>>>,
    pub r: Vec<Vec<f64>>,
    #[serde(default)]
    pub rho: f64,
}

fn to_matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>, ConfigError> {
    let nrows = rows.len();
    let ncols = rows.first().map(Vec::len).unwrap_or(0);
    if nrows == 0 || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(ConfigError::Invalid(format!("{what} must be a rectangular matrix")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

impl CostConfig {
    pub fn build(&self, dim_error: usize, dim_control: usize) -> Result<CostWeights, ConfigError> {
        let q = match (&self.q, &self.d_factor) {
            (Some(q), None) => to_matrix(q, "cost.q")?,
            (None, Some(d)) => {
                let d = to_matrix(d, "cost.d_factor")?;
                d.transpose() * d
            }
            (Some(_), Some(_)) => {
                return Err(ConfigError::Invalid(
                    "give either cost.q or cost.d_factor, not both".into(),
                ))
            }
            (None, None) => {
                return Err(ConfigError::Invalid("cost needs q or d_factor".into()))
            }
        };
        let r = to_matrix(&self.r, "cost.r")?;
        if q.nrows() != dim_error || r.nrows() != dim_control {
            return Err(ConfigError::Invalid(format!(
                "cost dimensions ({}, {}) do not match the plant ({dim_error}, {dim_control})",
                q.nrows(),
                r.nrows()
            )));
        }
        Ok(CostWeights::new(q, r)?.with_discount(self.rho)?)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoiConfig {
    pub e_lower: Vec<Quantity>,
    pub e_upper: Vec<Quantity>,
    pub xd_lower: Vec<Quantity>,
    pub xd_upper: Vec<Quantity>,
}

impl RoiConfig {
    pub fn build(&self) -> Result<Roi, ConfigError> {
        Ok(Roi::new(
            quantities(&self.e_lower),
            quantities(&self.e_upper),
            quantities(&self.xd_lower),
            quantities(&self.xd_upper),
        )?)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingParams {
    #[serde(default = "default_delta_t")]
    pub delta_t: f64,
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    #[serde(default = "default_n_runs")]
    pub n_runs: usize,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_regularization")]
    pub ls_regularization: f64,
    #[serde(default = "default_holdout")]
    pub holdout_samples: usize,
    #[serde(default = "default_substeps")]
    pub rollout_substeps: usize,
    pub error_scaling: Option<Vec<f64>>,
}

fn default_delta_t() -> f64 {
    0.01
}
fn default_n_samples() -> usize {
    500
}
fn default_n_runs() -> usize {
    10
}
fn default_threshold() -> f64 {
    1e-5
}
fn default_max_iterations() -> usize {
    2000
}
fn default_regularization() -> f64 {
    1e-10
}
fn default_holdout() -> usize {
    200
}
fn default_substeps() -> usize {
    4
}

/// Top-level schema of a training config file.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainFile {
    pub plant: PlantConfig,
    pub cost: CostConfig,
    pub training: TrainingParams,
    pub roi: RoiConfig,
}

impl TrainFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn build(&self) -> Result<(CanonicalPlant, TrainingConfig), ConfigError> {
        let (n, m) = self.plant.dims();
        let plant = self.plant.build();
        let cost = self.cost.build(n, m)?;
        let roi = self.roi.build()?;
        let mut config = TrainingConfig::new(cost, roi);
        config.delta_t = self.training.delta_t;
        config.n_samples = self.training.n_samples;
        config.n_runs = self.training.n_runs;
        config.threshold = self.training.threshold;
        config.max_iterations = self.training.max_iterations;
        config.rng_seed = self.training.seed;
        config.ls_regularization = self.training.ls_regularization;
        config.holdout_samples = self.training.holdout_samples;
        config.rollout_substeps = self.training.rollout_substeps;
        config.error_scaling = self
            .training
            .error_scaling
            .as_ref()
            .map(|s| DVector::from_vec(s.clone()));
        config.validate(&plant)?;
        Ok((plant, config))
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    pub kind: ControllerKind,
    /// Weight file for the ADP controller, relative to the config file.
    pub weights: Option<PathBuf>,
    #[serde(default = "default_kp")]
    pub kp: f64,
    #[serde(default = "default_kd")]
    pub kd: f64,
    #[serde(default = "default_smc_k")]
    pub k: f64,
    #[serde(default = "default_smc_lambda")]
    pub lambda: f64,
    #[serde(default = "default_smc_phi")]
    pub phi: f64,
    /// Error weight of the scalar discounted baseline.
    #[serde(default = "default_lqt_q")]
    pub q: f64,
    #[serde(default)]
    pub rho: f64,
}

fn default_kp() -> f64 {
    1600.0
}
fn default_kd() -> f64 {
    100.0
}
fn default_smc_k() -> f64 {
    70.0
}
fn default_smc_lambda() -> f64 {
    20.0
}
fn default_smc_phi() -> f64 {
    0.35
}
fn default_lqt_q() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum ControllerKind {
    Adp,
    Ct,
    Smc,
    DiscountedLqt,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    pub kind: ReferenceKind,
    pub radius: Option<Quantity>,
    pub angular_velocity: Option<f64>,
    pub z: Option<Quantity>,
    pub setpoints: Option<Vec<[Quantity; 3]>>,
    pub switch_interval: Option<f64>,
    /// Constant reference output, plant units.
    pub value: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceKind {
    Circle,
    Step,
    Constant,
}

impl ReferenceConfig {
    fn build(&self, order: usize, dim_output: usize) -> Result<ReferenceSignal, ConfigError> {
        match self.kind {
            ReferenceKind::Circle => {
                if dim_output != 3 {
                    return Err(ConfigError::Invalid(
                        "circle reference is defined for the 3-output robot plant".into(),
                    ));
                }
                Ok(circle_reference(
                    self.radius.map(|q| q.0).unwrap_or(0.25),
                    self.angular_velocity.unwrap_or(std::f64::consts::PI),
                    self.z.map(|q| q.0).unwrap_or(0.5),
                ))
            }
            ReferenceKind::Step => {
                if dim_output != 3 {
                    return Err(ConfigError::Invalid(
                        "step reference is defined for the 3-output robot plant".into(),
                    ));
                }
                let setpoints = self
                    .setpoints
                    .clone()
                    .unwrap_or_else(default_step_setpoints)
                    .iter()
                    .map(|p| Vector3::new(p[0].0, p[1].0, p[2].0))
                    .collect::<Vec<_>>();
                Ok(step_reference(
                    setpoints,
                    self.switch_interval.unwrap_or(5.0),
                ))
            }
            ReferenceKind::Constant => {
                let value = self
                    .value
                    .as_ref()
                    .ok_or_else(|| ConfigError::Invalid("constant reference needs `value`".into()))?;
                if value.len() != dim_output {
                    return Err(ConfigError::Invalid(format!(
                        "constant reference has {} components, plant outputs {dim_output}",
                        value.len()
                    )));
                }
                Ok(ReferenceSignal::constant(
                    order,
                    DVector::from_vec(value.clone()),
                ))
            }
        }
    }

    fn step_segments(&self, t_final: f64) -> Vec<(f64, f64)> {
        let count = self.setpoints.as_ref().map(Vec::len).unwrap_or(2);
        let interval = self.switch_interval.unwrap_or(5.0);
        let mut segments = Vec::new();
        for k in 0..count {
            let start = k as f64 * interval;
            let end = ((k + 1) as f64 * interval).min(t_final);
            if start >= t_final {
                break;
            }
            segments.push((start, end));
            if k == count - 1 {
                // Last setpoint holds to the end of the run.
                let last = segments.last_mut().unwrap();
                last.1 = t_final;
            }
        }
        segments
    }
}

fn default_step_setpoints() -> Vec<[Quantity; 3]> {
    vec![
        [Quantity(0.1), Quantity(0.1), Quantity(0.45)],
        [Quantity(-0.1), Quantity(-0.1), Quantity(0.6)],
    ]
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunParams {
    #[serde(default = "default_t_final")]
    pub t_final: f64,
    #[serde(default = "default_control_rate")]
    pub control_rate: f64,
    #[serde(default = "default_substeps")]
    pub substeps: usize,
    /// Per-channel actuator limit; omit for an unsaturated run.
    pub sat_limit: Option<f64>,
    /// Full initial state; defaults to rest at the home pose (robot) or the
    /// origin (test plants).
    pub initial_state: Option<Vec<Quantity>>,
    /// Steady-state statistics window; derived from the reference if absent.
    pub steady_window: Option<[f64; 2]>,
    #[serde(default = "default_cost_window")]
    pub cost_window: [f64; 2],
}

fn default_t_final() -> f64 {
    10.0
}
fn default_control_rate() -> f64 {
    500.0
}
fn default_cost_window() -> [f64; 2] {
    [0.0, 5.0]
}

/// Time after a setpoint change before samples count as steady state.
pub const STEADY_SETTLE_OFFSET: f64 = 2.0;

/// Top-level schema of a single-run scenario file.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub plant: PlantConfig,
    pub controller: ControllerConfig,
    pub reference: ReferenceConfig,
    #[serde(default = "default_run_params")]
    pub run: RunParams,
    pub cost: CostConfig,
}

fn default_run_params() -> RunParams {
    RunParams {
        t_final: default_t_final(),
        control_rate: default_control_rate(),
        substeps: default_substeps(),
        sat_limit: None,
        initial_state: None,
        steady_window: None,
        cost_window: default_cost_window(),
    }
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn requires_weights(&self) -> bool {
        self.controller.kind == ControllerKind::Adp && self.controller.weights.is_none()
    }

    /// Assemble the runnable scenario. `weights_override` takes precedence
    /// over the file's own weights path; relative paths resolve against
    /// `base_dir`.
    pub fn build(
        &self,
        weights_override: Option<&Path>,
        base_dir: &Path,
    ) -> Result<Scenario, ConfigError> {
        let (n, m) = self.plant.dims();
        let plant = self.plant.build();
        // Controllers always run on the nominal model; payload alters only
        // the simulated plant truth.
        let nominal = PlantConfig {
            payload: 0.0,
            ..self.plant.clone()
        };
        let cost = self.cost.build(n, m)?;
        let reference = self.reference.build(n / m, m)?;
        let sat_limit = self.run.sat_limit.unwrap_or(f64::INFINITY);
        let controller = build_controller(
            &self.controller,
            &nominal,
            &nominal.build(),
            &cost,
            sat_limit,
            weights_override,
            base_dir,
        )?;
        let initial_state = match &self.run.initial_state {
            Some(values) => {
                if values.len() != n {
                    return Err(ConfigError::Invalid(format!(
                        "initial_state has {} entries, plant state length is {n}",
                        values.len()
                    )));
                }
                quantities(values)
            }
            None => default_initial_state(self.plant.kind),
        };
        let steady_windows = match self.run.steady_window {
            Some([a, b]) => vec![(a, b)],
            None => derived_steady_windows(&self.reference, self.run.t_final),
        };
        let scenario = Scenario {
            label: format!("{:?}", self.controller.kind).to_lowercase(),
            plant,
            controller,
            reference,
            cost,
            initial_state,
            t_final: self.run.t_final,
            control_rate: self.run.control_rate,
            substeps: self.run.substeps,
            steady_windows,
            cost_window: (self.run.cost_window[0], self.run.cost_window[1]),
            blowup_norm: DEFAULT_BLOWUP_NORM,
            validity_stop: self.plant.validity_stop(),
        };
        scenario
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(scenario)
    }
}

fn default_initial_state(kind: PlantKind) -> DVector<f64> {
    match kind {
        PlantKind::Scalar => DVector::zeros(1),
        PlantKind::DoubleIntegrator => DVector::zeros(2),
        PlantKind::Delta => DVector::from_row_slice(&[0.0, 0.0, 0.5, 0.0, 0.0, 0.0]),
    }
}

fn derived_steady_windows(reference: &ReferenceConfig, t_final: f64) -> Vec<(f64, f64)> {
    let clip = |start: f64, end: f64| -> Option<(f64, f64)> {
        let s = start.min(t_final);
        if end > s {
            Some((s, end))
        } else {
            None
        }
    };
    match reference.kind {
        ReferenceKind::Step => reference
            .step_segments(t_final)
            .into_iter()
            .filter_map(|(start, end)| clip(start + STEADY_SETTLE_OFFSET, end))
            .collect(),
        _ => clip(STEADY_SETTLE_OFFSET.min(t_final * 0.5), t_final)
            .into_iter()
            .collect(),
    }
}

fn build_controller(
    config: &ControllerConfig,
    plant_config: &PlantConfig,
    plant: &CanonicalPlant,
    cost: &CostWeights,
    sat_limit: f64,
    weights_override: Option<&Path>,
    base_dir: &Path,
) -> Result<Arc<dyn Controller>, ConfigError> {
    match config.kind {
        ControllerKind::Adp => {
            let path = weights_override
                .map(Path::to_path_buf)
                .or_else(|| config.weights.clone())
                .ok_or_else(|| {
                    ConfigError::Invalid(
                        "controller kind `adp` needs a weights file (config `weights` or --weights)"
                            .into(),
                    )
                })?;
            let resolved = if path.is_absolute() {
                path
            } else {
                base_dir.join(path)
            };
            let value = ValueFunction::load(&resolved)?;
            let controller = AdpController::new(plant.clone(), value, cost.clone(), sat_limit)
                .map_err(|e| ConfigError::Controller(e.to_string()))?;
            Ok(Arc::new(controller))
        }
        ControllerKind::Ct => {
            require_delta(plant_config, "ct")?;
            let gains = CtGains::new(config.kp, config.kd)
                .map_err(|e| ConfigError::Controller(e.to_string()))?;
            Ok(Arc::new(ComputedTorqueController::new(
                DeltaModel::default(),
                gains,
                sat_limit,
            )))
        }
        ControllerKind::Smc => {
            require_delta(plant_config, "smc")?;
            let gains = SmcGains::new(config.k, config.lambda, config.phi)
                .map_err(|e| ConfigError::Controller(e.to_string()))?;
            Ok(Arc::new(SlidingModeController::new(
                DeltaModel::default(),
                gains,
                sat_limit,
            )))
        }
        ControllerKind::DiscountedLqt => {
            if plant_config.kind != PlantKind::Scalar {
                return Err(ConfigError::Invalid(
                    "the discounted baseline runs on the scalar plant".into(),
                ));
            }
            let controller =
                DiscountedLqtController::new(plant_config.a, config.q, config.rho, sat_limit)
                    .map_err(|e| ConfigError::Controller(e.to_string()))?;
            Ok(Arc::new(controller))
        }
    }
}

fn require_delta(plant: &PlantConfig, kind: &str) -> Result<(), ConfigError> {
    if plant.kind != PlantKind::Delta {
        return Err(ConfigError::Invalid(format!(
            "controller kind `{kind}` is model-based and needs the delta plant"
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteParams {
    /// ADP weight file, relative to the config.
    pub weights: PathBuf,
    #[serde(default = "default_payloads")]
    pub payloads: Vec<f64>,
    #[serde(default = "default_suite_t_final")]
    pub t_final: f64,
    #[serde(default = "default_control_rate")]
    pub control_rate: f64,
    #[serde(default = "default_substeps")]
    pub substeps: usize,
    #[serde(default = "default_sat_limit")]
    pub sat_limit: f64,
    #[serde(default = "default_cost_window")]
    pub cost_window: [f64; 2],
}

fn default_payloads() -> Vec<f64> {
    vec![0.0, 1.0]
}
fn default_suite_t_final() -> f64 {
    10.0
}
fn default_sat_limit() -> f64 {
    5.0
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsConfig {
    #[serde(default = "default_kp")]
    pub kp: f64,
    #[serde(default = "default_kd")]
    pub kd: f64,
    #[serde(default = "default_smc_k")]
    pub smc_k: f64,
    #[serde(default = "default_smc_lambda")]
    pub smc_lambda: f64,
    #[serde(default = "default_smc_phi")]
    pub smc_phi: f64,
}

fn default_gains() -> GainsConfig {
    GainsConfig {
        kp: default_kp(),
        kd: default_kd(),
        smc_k: default_smc_k(),
        smc_lambda: default_smc_lambda(),
        smc_phi: default_smc_phi(),
    }
}

/// Top-level schema of a comparison-suite file: the controller cross product
/// over circle/step scenarios and payload variants.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteFile {
    pub suite: SuiteParams,
    pub cost: CostConfig,
    #[serde(default = "default_gains")]
    pub gains: GainsConfig,
    pub circle: Option<ReferenceConfig>,
    pub step: Option<ReferenceConfig>,
}

/// One materialized suite run with its grouping keys.
pub struct SuiteCase {
    pub controller: &'static str,
    pub scenario: &'static str,
    pub payload: f64,
    pub run: Scenario,
}

impl SuiteFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let file: SuiteFile = toml::from_str(text)?;
        if let Some(circle) = &file.circle {
            if circle.kind != ReferenceKind::Circle {
                return Err(ConfigError::Invalid("suite [circle] must have kind = \"circle\"".into()));
            }
        }
        if let Some(step) = &file.step {
            if step.kind != ReferenceKind::Step {
                return Err(ConfigError::Invalid("suite [step] must have kind = \"step\"".into()));
            }
        }
        Ok(file)
    }

    pub fn build(&self, base_dir: &Path) -> Result<Vec<SuiteCase>, ConfigError> {
        let weights_path = if self.suite.weights.is_absolute() {
            self.suite.weights.clone()
        } else {
            base_dir.join(&self.suite.weights)
        };
        let value = ValueFunction::load(&weights_path)?;
        let cost = self.cost.build(6, 3)?;
        let circle = self.circle.clone().unwrap_or(ReferenceConfig {
            kind: ReferenceKind::Circle,
            radius: None,
            angular_velocity: None,
            z: None,
            setpoints: None,
            switch_interval: None,
            value: None,
        });
        let step = self.step.clone().unwrap_or(ReferenceConfig {
            kind: ReferenceKind::Step,
            radius: None,
            angular_velocity: None,
            z: None,
            setpoints: None,
            switch_interval: None,
            value: None,
        });

        let mut cases = Vec::new();
        for &payload in &self.suite.payloads {
            for (scenario_name, reference_config) in [("circle", &circle), ("step", &step)] {
                for controller_name in ["adp", "ct", "smc"] {
                    let plant_config = PlantConfig {
                        kind: PlantKind::Delta,
                        a: default_drift(),
                        payload,
                    };
                    let plant = plant_config.build();
                    let nominal_plant = DeltaModel::default().as_canonical_plant();
                    let reference = reference_config.build(2, 3)?;
                    let controller: Arc<dyn Controller> = match controller_name {
                        "adp" => Arc::new(
                            AdpController::new(
                                nominal_plant,
                                value.clone(),
                                cost.clone(),
                                self.suite.sat_limit,
                            )
                            .map_err(|e| ConfigError::Controller(e.to_string()))?,
                        ),
                        "ct" => Arc::new(ComputedTorqueController::new(
                            DeltaModel::default(),
                            CtGains::new(self.gains.kp, self.gains.kd)
                                .map_err(|e| ConfigError::Controller(e.to_string()))?,
                            self.suite.sat_limit,
                        )),
                        _ => Arc::new(SlidingModeController::new(
                            DeltaModel::default(),
                            SmcGains::new(self.gains.smc_k, self.gains.smc_lambda, self.gains.smc_phi)
                                .map_err(|e| ConfigError::Controller(e.to_string()))?,
                            self.suite.sat_limit,
                        )),
                    };
                    let payload_tag = if payload == 0.0 { "nominal" } else { "payload" };
                    let scenario = Scenario {
                        label: format!("{controller_name}-{scenario_name}-{payload_tag}"),
                        plant,
                        controller,
                        reference,
                        cost: cost.clone(),
                        initial_state: default_initial_state(PlantKind::Delta),
                        t_final: self.suite.t_final,
                        control_rate: self.suite.control_rate,
                        substeps: self.suite.substeps,
                        steady_windows: derived_steady_windows(reference_config, self.suite.t_final),
                        cost_window: (self.suite.cost_window[0], self.suite.cost_window[1]),
                        blowup_norm: DEFAULT_BLOWUP_NORM,
                        validity_stop: plant_config.validity_stop(),
                    };
                    cases.push(SuiteCase {
                        controller: controller_name,
                        scenario: scenario_name,
                        payload,
                        run: scenario,
                    });
                }
            }
        }
        Ok(cases)
    }
}
