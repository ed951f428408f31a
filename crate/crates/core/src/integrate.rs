//! Fixed-step fourth-order integration used by the Bellman rollout and the
//! closed-loop simulator. All integrated systems here are autonomous over a
//! step (controls held, references frozen), so the stage times drop out.

use nalgebra::DVector;

/// One classical RK4 step of size `h` for `ẋ = f(x)`.
pub(crate) fn rk4_step<E>(
    f: &mut impl FnMut(&DVector<f64>) -> Result<DVector<f64>, E>,
    x: &DVector<f64>,
    h: f64,
) -> Result<DVector<f64>, E> {
    let k1 = f(x)?;
    let k2 = f(&(x + &k1 * (h / 2.0)))?;
    let k3 = f(&(x + &k2 * (h / 2.0)))?;
    let k4 = f(&(x + &k3 * h))?;
    Ok(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

/// `substeps` RK4 steps spanning `dt`.
pub(crate) fn rk4_span<E>(
    f: &mut impl FnMut(&DVector<f64>) -> Result<DVector<f64>, E>,
    x: &DVector<f64>,
    dt: f64,
    substeps: usize,
) -> Result<DVector<f64>, E> {
    debug_assert!(substeps > 0);
    let h = dt / substeps as f64;
    let mut state = x.clone();
    for _ in 0..substeps {
        state = rk4_step(f, &state, h)?;
    }
    Ok(state)
}

/// Maximum halvings of a failing substep before the failure propagates.
const MAX_REFINEMENTS: u32 = 24;

/// Like [`rk4_span`], but a substep that fails (the state grazes the plant's
/// validity boundary, where the dynamics stiffen sharply) is retried as two
/// half steps, recursively. The exact flow of the plants modeled here cannot
/// cross such boundaries — effective inertia diverges there — so failures of
/// a coarse step are discretization artifacts; refinement resolves the
/// boundary layer deterministically.
pub(crate) fn rk4_span_refining<E>(
    f: &mut impl FnMut(&DVector<f64>) -> Result<DVector<f64>, E>,
    x: &DVector<f64>,
    dt: f64,
    substeps: usize,
) -> Result<DVector<f64>, E> {
    fn refine<E>(
        f: &mut impl FnMut(&DVector<f64>) -> Result<DVector<f64>, E>,
        x: &DVector<f64>,
        h: f64,
        budget: u32,
    ) -> Result<DVector<f64>, E> {
        match rk4_step(f, x, h) {
            Ok(next) if next.iter().all(|v| v.is_finite()) => Ok(next),
            Ok(_) | Err(_) if budget > 0 => {
                let mid = refine(f, x, h / 2.0, budget - 1)?;
                refine(f, &mid, h / 2.0, budget - 1)
            }
            other => other,
        }
    }
    debug_assert!(substeps > 0);
    let h = dt / substeps as f64;
    let mut state = x.clone();
    for _ in 0..substeps {
        state = refine(f, &state, h, MAX_REFINEMENTS)?;
    }
    Ok(state)
}
