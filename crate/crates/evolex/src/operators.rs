//! Per-mode frequency-domain operators: after the spatial transform every
//! differential operator becomes a small complex matrix per wavevector.

use nalgebra::{DMatrix, DVector};

use crate::chain::{ChainAlgebra, ChainModel};
use crate::ep::EpProfile;
use crate::grid::Wave;
use crate::linalg::complexify;
use crate::scalar::{imag, real, Real, C};

/// The advection operator `diag(i * a(s) . k)` at one wavevector, as a full
/// matrix.
pub fn gradient_operator<T: Real>(model: &ChainModel<T>, k: Wave) -> DMatrix<C<T>> {
    DMatrix::from_diagonal(&advection_diagonal(model, k))
}

/// Diagonal of the advection operator.
pub fn advection_diagonal<T: Real>(model: &ChainModel<T>, k: Wave) -> DVector<C<T>> {
    let n = model.n_states();
    DVector::from_fn(n, |s, _| {
        let mut dot = T::zero();
        #[allow(clippy::needless_range_loop)]
        for a in 0..model.dim() {
            dot += model.velocities()[(a, s)] * real::<T>(k[a] as f64);
        }
        imag(dot)
    })
}

/// Everything the recursion needs at one wavevector.
#[derive(Debug, Clone)]
pub struct ModeOps<T: Real> {
    pub wave: Wave,
    /// `G`: advection symbol.
    pub adv: DMatrix<C<T>>,
    /// `R G` with `R` the deviation matrix.
    pub dev_adv: DMatrix<C<T>>,
    /// `G R`.
    pub adv_dev: DMatrix<C<T>>,
    /// `G R G`: the unprojected second-order transport operator.
    pub adv_dev_adv: DMatrix<C<T>>,
    /// Complexified deviation matrix.
    pub deviation: DMatrix<C<T>>,
    /// Complexified equilibrium projector.
    pub projector: DMatrix<C<T>>,
    /// Stationary row as a complex functional.
    pub stationary: DVector<C<T>>,
    /// All-ones direction spanning the constant subspace.
    pub ones: DVector<C<T>>,
    /// Heat decay rate `k^T a_hat k` of this mode.
    pub heat_rate: T,
}

impl<T: Real> ModeOps<T> {
    pub fn new(algebra: &ChainAlgebra<T>, a_hat: &DMatrix<T>, k: Wave) -> Self {
        let model = algebra.model();
        let n = model.n_states();
        let adv = gradient_operator(model, k);
        let deviation = complexify(algebra.deviation());
        let projector = complexify(algebra.projector());
        let dev_adv = &deviation * &adv;
        let adv_dev = &adv * &deviation;
        let adv_dev_adv = &adv_dev * &adv;

        let mut heat_rate = T::zero();
        for a in 0..model.dim() {
            for b in 0..model.dim() {
                heat_rate += a_hat[(a, b)] * real::<T>(k[a] as f64) * real::<T>(k[b] as f64);
            }
        }

        Self {
            wave: k,
            adv,
            dev_adv,
            adv_dev,
            adv_dev_adv,
            deviation,
            projector,
            stationary: algebra.stationary().map(crate::scalar::lift),
            ones: DVector::from_element(n, C::new(T::one(), T::zero())),
            heat_rate,
        }
    }

    /// Stationary average of a complex state vector.
    pub fn mean(&self, v: &DVector<C<T>>) -> C<T> {
        // The stationary row is real; a plain dot keeps it un-conjugated.
        self.stationary.dot(v)
    }

    /// Equilibrium projection of a profile.
    pub fn project_mean(&self, f: &EpProfile<T>) -> EpProfile<T> {
        f.map_matrix(&self.projector)
    }

    /// Hierarchy right-hand side `Phi[prev2, prev] = d/dt prev2 - G prev`.
    pub fn hierarchy_rhs(&self, prev2: &EpProfile<T>, prev: &EpProfile<T>) -> EpProfile<T> {
        prev2.derivative().sub(&prev.map_matrix(&self.adv))
    }

    /// `(-1)^{n+1} (G R)^n (d/dt - G R G)` applied to a profile; kept for
    /// diagnostics that compare recursion routes.
    pub fn iterated_transport(&self, n: usize, f: &EpProfile<T>) -> EpProfile<T> {
        let mut out = f.derivative().sub(&f.map_matrix(&self.adv_dev_adv));
        for _ in 0..n {
            out = out.map_matrix(&self.adv_dev);
        }
        let sign = if n.is_multiple_of(2) {
            -T::one()
        } else {
            T::one()
        };
        out.scale(C::new(sign, T::zero()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tol::Tolerances;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix as M;

    fn telegraph() -> ChainModel<f64> {
        ChainModel::new(
            M::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]),
            M::from_row_slice(1, 2, &[1.0, -1.0]),
            &Tolerances::default(),
        )
        .unwrap()
    }

    #[test]
    fn gradient_operator_examples() {
        let m = telegraph();
        let zero = gradient_operator(&m, [0, 0, 0]);
        assert!(zero.iter().all(|z| z.norm() == 0.0));

        let one = gradient_operator(&m, [1, 0, 0]);
        assert_relative_eq!(one[(0, 0)].im, 1.0, epsilon = 1e-15);
        assert_relative_eq!(one[(1, 1)].im, -1.0, epsilon = 1e-15);

        let two = gradient_operator(&m, [2, 0, 0]);
        assert_relative_eq!(two[(0, 0)].im, 2.0, epsilon = 1e-15);
        assert_relative_eq!(two[(1, 1)].im, -2.0, epsilon = 1e-15);
    }

    #[test]
    fn heat_rate_follows_the_quadratic_form() {
        let tol = Tolerances::default();
        let algebra = ChainAlgebra::new(telegraph(), &tol).unwrap();
        let a_hat = algebra.diffusion_tensor().unwrap();
        let ops0 = ModeOps::new(&algebra, &a_hat, [0, 0, 0]);
        assert_eq!(ops0.heat_rate, 0.0);
        let ops2 = ModeOps::new(&algebra, &a_hat, [2, 0, 0]);
        assert_relative_eq!(ops2.heat_rate, 2.0, epsilon = 1e-13); // 0.5 * 2^2
        assert!(ops2.heat_rate > 0.0);
    }

    #[test]
    fn transport_operator_at_zero_mode_vanishes() {
        let tol = Tolerances::default();
        let algebra = ChainAlgebra::new(telegraph(), &tol).unwrap();
        let a_hat = algebra.diffusion_tensor().unwrap();
        let ops = ModeOps::new(&algebra, &a_hat, [0, 0, 0]);
        assert!(ops.adv_dev_adv.iter().all(|z| z.norm() == 0.0));
    }
}
