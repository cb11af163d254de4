//! Ground truth #1: the backward system is block-diagonal over modes, so the
//! solution is a matrix exponential per wavevector. No time stepping, hence
//! no solver error entering the convergence measurements.

use nalgebra::{DMatrix, DVector};

use crate::chain::ChainModel;
use crate::error::{Error, Result};
use crate::grid::{ModeGrid, StateField, TestFunction};
use crate::linalg::complexify;
use crate::operators::advection_diagonal;
use crate::scalar::{lift, Real, C};

/// Exact (to matrix-exponential accuracy) solution of the singularly
/// perturbed backward system at time `t`, starting from equal components
/// `f * ones`.
pub fn exact_solution<T: Real>(
    model: &ChainModel<T>,
    f: &TestFunction<T>,
    grid: &ModeGrid,
    eps: T,
    t: T,
) -> Result<StateField<T>> {
    assert!(eps > T::zero(), "eps must be positive");
    assert!(t >= T::zero(), "time must be nonnegative");
    let n = model.n_states();

    let mut values = Vec::with_capacity(grid.len());
    for (mode, k) in grid.modes().iter().enumerate() {
        let fk = f.coeff(mode);
        if fk.norm_sqr() == T::zero() {
            values.push(DVector::zeros(n));
            continue;
        }
        let block = mode_block(model, *k, eps);
        let propagator = (block * lift(t)).exp();
        if propagator
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::Overflow {
                mode,
                exponent: (t / (eps * eps)).to_f64().unwrap_or(f64::NAN),
            });
        }
        let init = DVector::from_element(n, fk);
        values.push(propagator * init);
    }
    Ok(StateField { time: t, values })
}

/// Per-mode evolution block `eps^-2 Q + eps^-1 G(k)`.
pub fn mode_block<T: Real>(model: &ChainModel<T>, k: crate::grid::Wave, eps: T) -> DMatrix<C<T>> {
    let n = model.n_states();
    let inv_eps = T::one() / eps;
    let inv_eps2 = inv_eps * inv_eps;
    let mut block = complexify(model.generator()) * lift(inv_eps2);
    let adv = advection_diagonal(model, k);
    for s in 0..n {
        block[(s, s)] += adv[s] * lift(inv_eps);
    }
    block
}
