//! Small dense linear-algebra helpers on top of nalgebra.
//!
//! Matrices here are tiny (state counts up to 8, mode blocks of the same
//! size), so everything favours robustness over asymptotic speed.

use nalgebra::{ComplexField, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::{lift, real, Real, C};

/// One spectral component of a diagonalizable matrix: an eigenvalue cluster
/// together with the projector onto the sum of its eigenspaces.
#[derive(Debug, Clone)]
pub struct SpectralPart<T: Real> {
    pub value: C<T>,
    pub multiplicity: usize,
    pub projector: DMatrix<C<T>>,
}

fn schur_eps<T: Real>() -> T {
    T::default_epsilon() * real(16.0)
}

/// Eigenvalues of a complex square matrix via its Schur form.
pub fn complex_eigenvalues<T: Real>(m: &DMatrix<C<T>>) -> Result<Vec<C<T>>> {
    let schur = m
        .clone()
        .try_schur(schur_eps::<T>(), 10_000)
        .ok_or(Error::SingularSystem {
            context: "Schur iteration did not converge",
            value: f64::NAN,
        })?;
    Ok(schur.unpack().1.diagonal().iter().copied().collect())
}

/// Group eigenvalues that agree within `rel_tol * max|mu|` into clusters and
/// return the cluster means with multiplicities.
pub fn cluster_eigenvalues<T: Real>(values: &[C<T>], rel_tol: f64) -> Vec<(C<T>, usize)> {
    let scale = values
        .iter()
        .map(|z| z.modulus())
        .fold(T::zero(), |a, b| if b > a { b } else { a });
    let tol = real::<T>(rel_tol) * if scale > T::zero() { scale } else { T::one() };

    let mut clusters: Vec<(C<T>, usize)> = Vec::new();
    for &z in values {
        match clusters.iter_mut().find(|(c, _)| (*c - z).modulus() <= tol) {
            Some((c, count)) => {
                // Running mean keeps the representative centred.
                let n = real::<T>(*count as f64);
                *c = (*c * n + z) / (n + T::one());
                *count += 1;
            }
            None => clusters.push((z, 1)),
        }
    }
    clusters
}

/// Full spectral decomposition of a (numerically) diagonalizable complex
/// matrix: per eigenvalue cluster, the projector `P` with `sum P = I` and
/// `M P = value * P`.
///
/// Null spaces are extracted per cluster with an SVD of `M - value * I`; the
/// projectors come from the inverse of the assembled eigenvector basis.
/// A defective matrix surfaces either as a singular basis or later as a
/// reconstruction failure at the caller.
pub fn spectral_decomposition<T: Real>(
    m: &DMatrix<C<T>>,
    rel_tol: f64,
) -> Result<Vec<SpectralPart<T>>> {
    let n = m.nrows();
    let values = complex_eigenvalues(m)?;
    let clusters = cluster_eigenvalues(&values, rel_tol);

    let mut basis = DMatrix::<C<T>>::zeros(n, n);
    let mut columns: Vec<(usize, usize)> = Vec::new(); // (start, len) per cluster
    let mut col = 0usize;
    for (value, mult) in &clusters {
        let shifted = m - DMatrix::<C<T>>::identity(n, n) * *value;
        let svd = shifted
            .try_svd(false, true, schur_eps::<T>(), 10_000)
            .ok_or(Error::SingularSystem {
                context: "SVD of shifted matrix did not converge",
                value: f64::NAN,
            })?;
        let v_t = svd.v_t.as_ref().expect("requested V^H");
        // Rows of V^H for the `mult` smallest singular values span the
        // numerical null space; do not assume any ordering.
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| {
            svd.singular_values[a]
                .partial_cmp(&svd.singular_values[b])
                .unwrap()
        });
        for &row in order.iter().take(*mult) {
            for i in 0..n {
                basis[(i, col)] = v_t[(row, i)].conj();
            }
            col += 1;
        }
        columns.push((col - *mult, *mult));
    }

    let inverse = basis
        .clone()
        .lu()
        .try_inverse()
        .ok_or(Error::DefectiveGenerator {
            error: f64::INFINITY,
        })?;

    let mut parts = Vec::with_capacity(clusters.len());
    for ((value, mult), (start, len)) in clusters.into_iter().zip(columns) {
        let cols = basis.columns(start, len);
        let rows = inverse.rows(start, len);
        parts.push(SpectralPart {
            value,
            multiplicity: mult,
            projector: cols * rows,
        });
    }
    Ok(parts)
}

/// Largest singular value of a complex matrix.
pub fn spectral_norm<T: Real>(m: &DMatrix<C<T>>) -> T {
    if m.iter().all(|z| z.modulus_squared() == T::zero()) {
        return T::zero();
    }
    let svd = m
        .clone()
        .try_svd(false, false, schur_eps::<T>(), 10_000)
        .expect("SVD of a finite matrix");
    svd.singular_values
        .iter()
        .fold(T::zero(), |a, &b| if b > a { b } else { a })
}

/// Smallest singular value of a complex matrix.
pub fn smallest_singular_value<T: Real>(m: &DMatrix<C<T>>) -> T {
    let svd = m
        .clone()
        .try_svd(false, false, schur_eps::<T>(), 10_000)
        .expect("SVD of a finite matrix");
    svd.singular_values
        .iter()
        .fold(T::max_value().unwrap(), |a, &b| if b < a { b } else { a })
}

/// Two-norm condition estimate of a real matrix.
pub fn condition_estimate<T: Real>(m: &DMatrix<T>) -> T {
    let svd = m
        .clone()
        .try_svd(false, false, T::default_epsilon() * real(16.0), 10_000)
        .expect("SVD of a finite matrix");
    let max = svd
        .singular_values
        .iter()
        .fold(T::zero(), |a, &b| if b > a { b } else { a });
    let min = svd
        .singular_values
        .iter()
        .fold(T::max_value().unwrap(), |a, &b| if b < a { b } else { a });
    if min <= T::zero() {
        T::max_value().unwrap()
    } else {
        max / min
    }
}

/// Minimum-norm least-squares solution of `a x = b`.
pub fn least_squares<T: Real>(a: &DMatrix<T>, b: &DVector<T>) -> Result<DVector<T>> {
    let svd = a
        .clone()
        .try_svd(true, true, T::default_epsilon() * real(16.0), 10_000)
        .ok_or(Error::SingularSystem {
            context: "least-squares SVD did not converge",
            value: f64::NAN,
        })?;
    svd.solve(b, T::default_epsilon() * real(64.0))
        .map_err(|_| Error::SingularSystem {
            context: "least-squares solve",
            value: f64::NAN,
        })
}

/// Lift a real matrix into the complex plane.
pub fn complexify<T: Real>(m: &DMatrix<T>) -> DMatrix<C<T>> {
    m.map(lift)
}

/// Entry-wise maximum modulus of a complex matrix.
pub fn max_abs<T: Real>(m: &DMatrix<C<T>>) -> T {
    m.iter()
        .map(|z| z.modulus())
        .fold(T::zero(), |a, b| if b > a { b } else { a })
}

/// Entry-wise maximum modulus of a complex vector.
pub fn max_abs_vec<T: Real>(v: &DVector<C<T>>) -> T {
    v.iter()
        .map(|z| z.modulus())
        .fold(T::zero(), |a, b| if b > a { b } else { a })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_state() -> DMatrix<C<f64>> {
        complexify(&DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]))
    }

    #[test]
    fn spectral_parts_reconstruct_symmetric_generator() {
        let m = two_state();
        let parts = spectral_decomposition(&m, 1e-9).unwrap();
        assert_eq!(parts.len(), 2);
        let rebuilt: DMatrix<C<f64>> = parts
            .iter()
            .map(|p| &p.projector * p.value)
            .fold(DMatrix::zeros(2, 2), |a, b| a + b);
        assert!(max_abs(&(rebuilt - m)) < 1e-12);
    }

    #[test]
    fn spectral_parts_handle_complex_spectrum() {
        // Cyclic three-state generator has one real and two conjugate
        // eigenvalues.
        let m = complexify(&DMatrix::from_row_slice(
            3,
            3,
            &[-1.0, 1.0, 0.0, 0.0, -1.0, 1.0, 1.0, 0.0, -1.0],
        ));
        let parts = spectral_decomposition(&m, 1e-9).unwrap();
        assert_eq!(parts.len(), 3);
        let sum: DMatrix<C<f64>> = parts
            .iter()
            .map(|p| p.projector.clone())
            .fold(DMatrix::zeros(3, 3), |a, b| a + b);
        assert!(max_abs(&(sum - DMatrix::identity(3, 3))) < 1e-12);
        let rebuilt: DMatrix<C<f64>> = parts
            .iter()
            .map(|p| &p.projector * p.value)
            .fold(DMatrix::zeros(3, 3), |a, b| a + b);
        assert!(max_abs(&(rebuilt - m)) < 1e-12);
    }

    #[test]
    fn repeated_eigenvalues_cluster() {
        // Uniform-change generator on 3 states: eigenvalue -3/2 is double.
        let m = complexify(&DMatrix::from_row_slice(
            3,
            3,
            &[-1.0, 0.5, 0.5, 0.5, -1.0, 0.5, 0.5, 0.5, -1.0],
        ));
        let parts = spectral_decomposition(&m, 1e-9).unwrap();
        assert_eq!(parts.len(), 2);
        let double = parts.iter().find(|p| p.multiplicity == 2).unwrap();
        assert_relative_eq!(double.value.re, -1.5, epsilon = 1e-12);
    }

    #[test]
    fn least_squares_recovers_stationary_vector() {
        let q = DMatrix::from_row_slice(2, 2, &[-2.0, 2.0, 1.0, -1.0]);
        let mut a = DMatrix::zeros(3, 2);
        a.view_mut((0, 0), (2, 2)).copy_from(&q.transpose());
        a[(2, 0)] = 1.0;
        a[(2, 1)] = 1.0;
        let b = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        let pi = least_squares(&a, &b).unwrap();
        assert_relative_eq!(pi[0], 1.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(pi[1], 2.0 / 3.0, epsilon = 1e-12);
    }
}
