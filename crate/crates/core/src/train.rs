//! Integral value iteration over the expectation of the modified total cost.
//!
//! The learned object is a value function over tracking errors only; the
//! reference dependence is averaged out by sampling `(E, X_d)` pairs
//! uniformly from a region of interest. Each iteration rolls every sample a
//! short horizon `ΔT` forward under the current greedy corrective control,
//! forms the Bellman target
//! `∫ (EᵀQE + ΔuᵀRΔu) dτ + V_i(E(ΔT))`, and refits the weights by least
//! squares; iteration stops when the max-abs weight change drops below the
//! threshold.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::{BasisError, QuadraticBasis, ValueFunction, TERM_ORDERING_VERSION};
use crate::integrate::rk4_span;
use crate::plant::{error_derivative_about, CanonicalPlant, CostWeights, PlantError, TrackingError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("ROI sampling exhausted after {attempts} attempts ({accepted} of {wanted} accepted); the region is singular-heavy or empty")]
    SamplingExhausted {
        attempts: usize,
        accepted: usize,
        wanted: usize,
    },
    #[error("least-squares normal system ill-conditioned (condition {condition:.3e} exceeds 1e12); add regularization or rebalance the ROI")]
    IllConditioned { condition: f64 },
    #[error("weight averaging requires runs over an identical basis")]
    BasisMismatch,
}

/// Axis-aligned sampling region for errors and reference states.
#[derive(Clone, Debug)]
pub struct Roi {
    e_lower: DVector<f64>,
    e_upper: DVector<f64>,
    xd_lower: DVector<f64>,
    xd_upper: DVector<f64>,
}

impl Roi {
    pub fn new(
        e_lower: DVector<f64>,
        e_upper: DVector<f64>,
        xd_lower: DVector<f64>,
        xd_upper: DVector<f64>,
    ) -> Result<Self, TrainError> {
        let n = e_lower.len();
        if e_upper.len() != n || xd_lower.len() != n || xd_upper.len() != n {
            return Err(TrainError::InvalidConfig(
                "ROI bound vectors must share one length".into(),
            ));
        }
        for k in 0..n {
            let ok = e_lower[k].is_finite()
                && e_upper[k].is_finite()
                && xd_lower[k].is_finite()
                && xd_upper[k].is_finite()
                && e_lower[k] <= e_upper[k]
                && xd_lower[k] <= xd_upper[k];
            if !ok {
                return Err(TrainError::InvalidConfig(format!(
                    "ROI bounds must be finite and ordered (component {k})"
                )));
            }
        }
        Ok(Self {
            e_lower,
            e_upper,
            xd_lower,
            xd_upper,
        })
    }

    /// Symmetric error box `±e_span` with reference box `[xd_lower, xd_upper]`.
    pub fn symmetric(e_span: DVector<f64>, xd_lower: DVector<f64>, xd_upper: DVector<f64>) -> Result<Self, TrainError> {
        Self::new(-e_span.clone(), e_span, xd_lower, xd_upper)
    }

    pub fn dim(&self) -> usize {
        self.e_lower.len()
    }

    pub fn e_bounds(&self) -> (&DVector<f64>, &DVector<f64>) {
        (&self.e_lower, &self.e_upper)
    }

    pub fn xd_bounds(&self) -> (&DVector<f64>, &DVector<f64>) {
        (&self.xd_lower, &self.xd_upper)
    }

    pub fn contains(&self, e: &DVector<f64>, x_d: &DVector<f64>) -> bool {
        (0..self.dim()).all(|k| {
            e[k] >= self.e_lower[k]
                && e[k] <= self.e_upper[k]
                && x_d[k] >= self.xd_lower[k]
                && x_d[k] <= self.xd_upper[k]
        })
    }
}

/// Everything the trainer needs besides the plant itself.
#[derive(Clone, Debug)]
pub struct TrainingConfig {
    pub cost: CostWeights,
    pub roi: Roi,
    /// Bellman horizon ΔT, s.
    pub delta_t: f64,
    pub n_samples: usize,
    /// Independent trainings whose weights are averaged.
    pub n_runs: usize,
    /// Convergence bound on max|W_{i+1} − W_i|.
    pub threshold: f64,
    pub max_iterations: usize,
    pub rng_seed: u64,
    pub ls_regularization: f64,
    /// Optional diagonal scaling of the error before the monomials.
    pub error_scaling: Option<DVector<f64>>,
    /// Fresh pairs drawn for the post-training residual diagnostics.
    pub holdout_samples: usize,
    /// RK4 substeps spanning ΔT in target rollouts.
    pub rollout_substeps: usize,
}

impl TrainingConfig {
    pub fn new(cost: CostWeights, roi: Roi) -> Self {
        Self {
            cost,
            roi,
            delta_t: 0.01,
            n_samples: 500,
            n_runs: 10,
            threshold: 1e-5,
            max_iterations: 2000,
            rng_seed: 0,
            ls_regularization: 1e-10,
            error_scaling: None,
            holdout_samples: 200,
            rollout_substeps: 4,
        }
    }

    pub fn basis(&self) -> QuadraticBasis {
        match &self.error_scaling {
            Some(scale) => QuadraticBasis::scaled(self.roi.dim(), scale.clone()),
            None => QuadraticBasis::new(self.roi.dim()),
        }
    }

    pub fn validate(&self, plant: &CanonicalPlant) -> Result<(), TrainError> {
        let n = plant.dim_state();
        let m = plant.dim_output();
        if self.roi.dim() != n {
            return Err(TrainError::InvalidConfig(format!(
                "ROI dimension {} does not match plant state length {n}",
                self.roi.dim()
            )));
        }
        if self.cost.dim_error() != n || self.cost.dim_control() != m {
            return Err(TrainError::InvalidConfig(
                "cost weight dimensions do not match the plant".into(),
            ));
        }
        if !(self.delta_t > 0.0) {
            return Err(TrainError::InvalidConfig("delta_t must be positive".into()));
        }
        if !(self.threshold > 0.0) {
            return Err(TrainError::InvalidConfig("threshold must be positive".into()));
        }
        if self.max_iterations == 0 || self.n_runs == 0 || self.rollout_substeps == 0 {
            return Err(TrainError::InvalidConfig(
                "iteration, run and substep counts must be positive".into(),
            ));
        }
        if self.ls_regularization < 0.0 {
            return Err(TrainError::InvalidConfig(
                "ls_regularization must be nonnegative".into(),
            ));
        }
        let basis = self.basis();
        if self.n_samples < basis.len() {
            return Err(TrainError::InvalidConfig(format!(
                "n_samples = {} is below the basis term count {}; least squares would be underdetermined",
                self.n_samples,
                basis.len()
            )));
        }
        if let Some(scale) = &self.error_scaling {
            if scale.len() != n {
                return Err(TrainError::InvalidConfig(
                    "error_scaling length must equal the state length".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Fixed training set of `(E, X_d)` pairs with cached features `φ(E)`.
#[derive(Clone, Debug)]
pub struct SampleSet {
    pairs: Vec<(DVector<f64>, DVector<f64>)>,
    features: Vec<DVector<f64>>,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(DVector<f64>, DVector<f64>)] {
        &self.pairs
    }

    pub fn features(&self) -> &[DVector<f64>] {
        &self.features
    }
}

/// Draw `config.n_samples` pairs uniformly from the ROI, rejecting pairs
/// whose combined state `E + X_d` fails the plant's g-conditioning screen.
/// Deterministic under a fixed seed.
pub fn sample_roi(
    config: &TrainingConfig,
    plant: &CanonicalPlant,
) -> Result<SampleSet, TrainError> {
    sample_roi_seeded(config, plant, config.rng_seed, config.n_samples)
}

fn sample_roi_seeded(
    config: &TrainingConfig,
    plant: &CanonicalPlant,
    seed: u64,
    count: usize,
) -> Result<SampleSet, TrainError> {
    let basis = config.basis();
    let n = config.roi.dim();
    let (e_lo, e_hi) = config.roi.e_bounds();
    let (xd_lo, xd_hi) = config.roi.xd_bounds();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(count);
    let mut features = Vec::with_capacity(count);
    let max_attempts = count.saturating_mul(1000).max(1000);
    let mut attempts = 0;
    while pairs.len() < count {
        if attempts >= max_attempts {
            return Err(TrainError::SamplingExhausted {
                attempts,
                accepted: pairs.len(),
                wanted: count,
            });
        }
        attempts += 1;
        let e = DVector::from_fn(n, |k, _| rng.random_range(e_lo[k]..=e_hi[k]));
        let x_d = DVector::from_fn(n, |k, _| rng.random_range(xd_lo[k]..=xd_hi[k]));
        let x = &e + &x_d;
        if plant.check_g_condition(&x).is_err() {
            continue;
        }
        features.push(basis.eval(&e)?);
        pairs.push((e, x_d));
    }
    Ok(SampleSet { pairs, features })
}

/// Greedy corrective control `Δu = −½ R⁻¹ Gᵀ ∇V(E)`; only the last `m`
/// gradient rows enter, through `g(E + X_d)ᵀ`.
pub fn transient_control(
    vf: &ValueFunction,
    plant: &CanonicalPlant,
    cost: &CostWeights,
    error: &TrackingError,
    x_d: &DVector<f64>,
) -> Result<DVector<f64>, TrainError> {
    let x = error.as_vector() + x_d;
    let g = plant.eval_g(&x)?;
    plant.condition_of(&g)?;
    let grad = vf.gradient(error.as_vector())?;
    Ok(greedy_control(&g, &grad, cost, plant.dim_output()))
}

fn greedy_control(
    g: &DMatrix<f64>,
    value_grad: &DVector<f64>,
    cost: &CostWeights,
    m: usize,
) -> DVector<f64> {
    let n = value_grad.len();
    let tail = value_grad.rows(n - m, m);
    -0.5 * cost.r_inv() * (g.transpose() * tail)
}

/// Bellman target for one `(E, X_d)` pair under the greedy control induced
/// by `vf`: the running cost is accumulated as an extra integrated state so
/// quadrature and rollout share the same fourth-order scheme. `X_d` is held
/// frozen over ΔT and the control law is re-evaluated at every stage.
pub fn vi_target(
    vf: &ValueFunction,
    plant: &CanonicalPlant,
    pair: (&DVector<f64>, &DVector<f64>),
    config: &TrainingConfig,
) -> Result<f64, TrainError> {
    vi_target_inner(vf, plant, pair.0, pair.1, config, None)
}

fn vi_target_inner(
    vf: &ValueFunction,
    plant: &CanonicalPlant,
    e0: &DVector<f64>,
    x_d: &DVector<f64>,
    config: &TrainingConfig,
    control_offset: Option<&DVector<f64>>,
) -> Result<f64, TrainError> {
    let n = plant.dim_state();
    let m = plant.dim_output();
    let cost = &config.cost;
    let f_d = plant.eval_f(x_d)?;

    // Augmented state [E; c] with ċ = EᵀQE + ΔuᵀRΔu.
    let mut aug0 = DVector::zeros(n + 1);
    aug0.rows_mut(0, n).copy_from(e0);
    let mut deriv = |aug: &DVector<f64>| -> Result<DVector<f64>, TrainError> {
        let e = aug.rows(0, n).into_owned();
        let x = &e + x_d;
        let (f, g) = plant.eval_dynamics(&x)?;
        plant.condition_of(&g)?;
        let grad = vf.gradient(&e)?;
        let mut du = greedy_control(&g, &grad, cost, m);
        if let Some(offset) = control_offset {
            du += offset;
        }
        let mut out = DVector::zeros(n + 1);
        out.rows_mut(0, n - m).copy_from(&e.rows(m, n - m));
        out.rows_mut(n - m, m).copy_from(&(&f - &f_d + &g * &du));
        out[n] = cost.running_cost(&e, &du);
        Ok(out)
    };
    let aug = rk4_span(&mut deriv, &aug0, config.delta_t, config.rollout_substeps)?;
    let e_end = aug.rows(0, n).into_owned();
    Ok(aug[n] + vf.value(&e_end)?)
}

/// Ridge-regularized least squares on cached features:
/// `W = argmin Σ(Wᵀφ_k − y_k)² + reg·‖W‖²` via the normal equations.
/// Errors out when the normal system's condition exceeds 1e12.
pub fn least_squares_update(
    samples: &SampleSet,
    targets: &[f64],
    basis: &QuadraticBasis,
    regularization: f64,
) -> Result<DVector<f64>, TrainError> {
    if samples.len() != targets.len() {
        return Err(TrainError::InvalidConfig(
            "sample and target counts differ".into(),
        ));
    }
    if samples.len() < basis.len() {
        return Err(TrainError::InvalidConfig(
            "fewer samples than basis terms".into(),
        ));
    }
    let terms = basis.len();
    let mut normal = DMatrix::zeros(terms, terms);
    let mut rhs = DVector::zeros(terms);
    for (phi, &y) in samples.features().iter().zip(targets) {
        normal.ger(1.0, phi, phi, 1.0);
        rhs.axpy(y, phi, 1.0);
    }
    for k in 0..terms {
        normal[(k, k)] += regularization;
    }
    let eigs = normal.clone().symmetric_eigenvalues();
    let lam_max = eigs.max();
    let lam_min = eigs.min();
    let condition = if lam_min <= 0.0 {
        f64::INFINITY
    } else {
        lam_max / lam_min
    };
    if condition > 1e12 {
        return Err(TrainError::IllConditioned { condition });
    }
    normal
        .cholesky()
        .map(|chol| chol.solve(&rhs))
        .ok_or(TrainError::IllConditioned { condition })
}

/// Outcome of one training run; serializable as a plain-text artifact.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainingReport {
    /// Error dimension.
    pub n: usize,
    pub term_count: usize,
    pub ordering: String,
    /// Diagonal error scaling when non-unit.
    pub scale: Option<Vec<f64>>,
    pub final_weights: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Per-iteration max-abs weight change.
    pub weight_deltas: Vec<f64>,
    /// Max-abs fit residual of the final least-squares solve.
    pub ls_residual_max: f64,
    /// Sampled points where the fitted value sequence decreased by more than
    /// the least-squares residual allowance.
    pub monotonicity_violations: usize,
    pub hjb_mean_abs_residual: f64,
    pub hjb_max_abs_residual: f64,
    /// Mean running cost over the holdout, the natural residual scale.
    pub holdout_mean_running_cost: f64,
    pub seed: u64,
    pub n_samples: usize,
}

impl TrainingReport {
    pub fn basis(&self) -> QuadraticBasis {
        match &self.scale {
            Some(s) => QuadraticBasis::scaled(self.n, DVector::from_vec(s.clone())),
            None => QuadraticBasis::new(self.n),
        }
    }

    pub fn value_function(&self) -> ValueFunction {
        ValueFunction::new(self.basis(), DVector::from_vec(self.final_weights.clone()))
            .expect("report weights match its basis")
    }
}

/// One integral-value-iteration training run (steps: sample, iterate greedy
/// targets + least squares to convergence, then holdout diagnostics).
pub fn train(plant: &CanonicalPlant, config: &TrainingConfig) -> Result<TrainingReport, TrainError> {
    train_seeded(plant, config, config.rng_seed)
}

fn train_seeded(
    plant: &CanonicalPlant,
    config: &TrainingConfig,
    seed: u64,
) -> Result<TrainingReport, TrainError> {
    config.validate(plant)?;
    let basis = config.basis();
    let samples = sample_roi_seeded(config, plant, seed, config.n_samples)?;

    let mut vf = ValueFunction::zero(basis.clone());
    let mut weight_deltas = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut monotonicity_violations = 0;
    let mut prev_fit_residual = 0.0_f64;
    let mut ls_residual_max = 0.0_f64;

    while iterations < config.max_iterations {
        iterations += 1;
        let targets: Vec<f64> = samples
            .pairs()
            .par_iter()
            .map(|(e, x_d)| vi_target(&vf, plant, (e, x_d), config))
            .collect::<Result<_, _>>()?;
        let new_weights = least_squares_update(&samples, &targets, &basis, config.ls_regularization)?;
        let new_vf = ValueFunction::new(basis.clone(), new_weights)?;

        let fit_residual = samples
            .features()
            .iter()
            .zip(&targets)
            .map(|(phi, &y)| (new_vf.weights().dot(phi) - y).abs())
            .fold(0.0_f64, f64::max);
        // Monotonicity allowance: the fit errors of both iterates plus a
        // floating-point floor.
        let eps = fit_residual + prev_fit_residual + 1e-10;
        for (phi, _) in samples.features().iter().zip(&targets) {
            let v_new = new_vf.weights().dot(phi);
            let v_old = vf.weights().dot(phi);
            if v_new < v_old - eps {
                monotonicity_violations += 1;
            }
        }

        let delta = (new_vf.weights() - vf.weights()).amax();
        weight_deltas.push(delta);
        vf = new_vf;
        prev_fit_residual = fit_residual;
        ls_residual_max = fit_residual;
        if delta < config.threshold {
            converged = true;
            break;
        }
    }

    // Holdout diagnostics on fresh pairs.
    let holdout_seed = seed ^ 0x9e37_79b9_7f4a_7c15;
    let holdout = sample_roi_seeded(config, plant, holdout_seed, config.holdout_samples.max(1))?;
    let mut abs_sum = 0.0;
    let mut abs_max = 0.0_f64;
    let mut cost_sum = 0.0;
    for (e, x_d) in holdout.pairs() {
        let err = TrackingError::new(e.clone());
        let residual = hjb_residual(&vf, plant, (&err, x_d), &config.cost)?;
        let du = transient_control(&vf, plant, &config.cost, &err, x_d)?;
        abs_sum += residual.abs();
        abs_max = abs_max.max(residual.abs());
        cost_sum += config.cost.running_cost(e, &du);
    }
    let count = holdout.len() as f64;

    Ok(TrainingReport {
        n: plant.dim_state(),
        term_count: basis.len(),
        ordering: TERM_ORDERING_VERSION.to_string(),
        scale: if basis.has_unit_scale() {
            None
        } else {
            Some(basis.scale().iter().copied().collect())
        },
        final_weights: vf.weights().iter().copied().collect(),
        iterations,
        converged,
        weight_deltas,
        ls_residual_max,
        monotonicity_violations,
        hjb_mean_abs_residual: abs_sum / count,
        hjb_max_abs_residual: abs_max,
        holdout_mean_running_cost: cost_sum / count,
        seed,
        n_samples: config.n_samples,
    })
}

/// `config.n_runs` independent trainings with consecutive derived seeds;
/// each run redraws its own sample set.
pub fn train_runs(
    plant: &CanonicalPlant,
    config: &TrainingConfig,
) -> Result<Vec<TrainingReport>, TrainError> {
    (0..config.n_runs)
        .map(|k| train_seeded(plant, config, config.rng_seed.wrapping_add(k as u64)))
        .collect()
}

/// Elementwise mean and population standard deviation of run weights.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeightStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub runs: usize,
}

pub fn average_weights(runs: &[TrainingReport]) -> Result<WeightStats, TrainError> {
    let first = runs.first().ok_or(TrainError::BasisMismatch)?;
    let dim = first.final_weights.len();
    let consistent = runs.iter().all(|r| {
        r.n == first.n
            && r.term_count == first.term_count
            && r.ordering == first.ordering
            && r.scale == first.scale
            && r.final_weights.len() == dim
    });
    if !consistent {
        return Err(TrainError::BasisMismatch);
    }
    let count = runs.len() as f64;
    let mut mean = vec![0.0; dim];
    for run in runs {
        for (m, w) in mean.iter_mut().zip(&run.final_weights) {
            *m += w / count;
        }
    }
    let mut std = vec![0.0; dim];
    for run in runs {
        for ((s, w), m) in std.iter_mut().zip(&run.final_weights).zip(&mean) {
            *s += (w - m) * (w - m) / count;
        }
    }
    for s in std.iter_mut() {
        *s = s.sqrt();
    }
    Ok(WeightStats {
        mean,
        std,
        runs: runs.len(),
    })
}

impl WeightStats {
    pub fn value_function(&self, template: &TrainingReport) -> ValueFunction {
        ValueFunction::new(template.basis(), DVector::from_vec(self.mean.clone()))
            .expect("averaged weights match the shared basis")
    }
}

/// Pointwise residual of the stationary Bellman relation at `(E, X_d)`:
/// `∇VᵀĖ + EᵀQE + Δu*ᵀRΔu*` with `Ė` the reduced error dynamics under the
/// greedy `Δu*`. Zero everywhere for the exact value function.
pub fn hjb_residual(
    vf: &ValueFunction,
    plant: &CanonicalPlant,
    pair: (&TrackingError, &DVector<f64>),
    cost: &CostWeights,
) -> Result<f64, TrainError> {
    let (error, x_d) = pair;
    let du = transient_control(vf, plant, cost, error, x_d)?;
    let edot = error_derivative_about(plant, error, x_d, &du)?;
    let grad = vf.gradient(error.as_vector())?;
    Ok(grad.dot(&edot) + cost.running_cost(error.as_vector(), &du))
}
