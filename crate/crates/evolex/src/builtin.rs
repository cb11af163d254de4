//! Built-in example models: the two-state telegraph and the cyclic/uniform
//! direction-switching families with regular-simplex velocities.

use nalgebra::DMatrix;

use crate::chain::ChainModel;
use crate::error::{Error, Result};
use crate::scalar::{real, Real};
use crate::tol::Tolerances;

/// Names and one-line descriptions of the built-in models.
pub fn catalog() -> Vec<(&'static str, &'static str)> {
    vec![
        (
            "two_state_telegraph",
            "two states, symmetric unit switching, velocities +1/-1 on the line",
        ),
        (
            "cyclic(n)",
            "n+1 states switched in a fixed cycle at unit rate, simplex directions in dimension n (n = 2 or 3)",
        ),
        (
            "uniform(n)",
            "n+1 states resampled uniformly at unit rate, simplex directions in dimension n (n = 2 or 3)",
        ),
    ]
}

/// Build a named model. Accepts `two_state_telegraph`, `cyclic(n)` and
/// `uniform(n)`.
pub fn builtin_model<T: Real>(name: &str, tol: &Tolerances) -> Result<ChainModel<T>> {
    let trimmed = name.trim();
    if trimmed == "two_state_telegraph" {
        return two_state_telegraph(tol);
    }
    if let Some(n) = parse_family(trimmed, "cyclic") {
        return cyclic(n?, tol);
    }
    if let Some(n) = parse_family(trimmed, "uniform") {
        return uniform(n?, tol);
    }
    Err(Error::UnknownModel {
        name: trimmed.to_string(),
    })
}

fn parse_family(name: &str, family: &str) -> Option<Result<usize>> {
    let rest = name.strip_prefix(family)?;
    let inner = rest.strip_prefix('(')?.strip_suffix(')')?;
    Some(
        inner
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::UnknownModel {
                name: name.to_string(),
            }),
    )
}

/// Canonical telegraph model: `Q = [[-1, 1], [1, -1]]`, velocities `(+1, -1)`.
pub fn two_state_telegraph<T: Real>(tol: &Tolerances) -> Result<ChainModel<T>> {
    let q = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]).map(real::<T>);
    let a = DMatrix::from_row_slice(1, 2, &[1.0, -1.0]).map(real::<T>);
    ChainModel::new(q, a, tol)
}

/// Cyclic direction change on `n + 1` states: each state hands over to the
/// next at unit rate.
pub fn cyclic<T: Real>(n: usize, tol: &Tolerances) -> Result<ChainModel<T>> {
    check_family_size(n)?;
    let states = n + 1;
    let mut q = DMatrix::<T>::zeros(states, states);
    for i in 0..states {
        q[(i, i)] = -T::one();
        q[(i, (i + 1) % states)] = T::one();
    }
    ChainModel::new(q, simplex_directions::<T>(n), tol)
}

/// Uniform direction change on `n + 1` states: jump to any other state with
/// rate `1/n`.
pub fn uniform<T: Real>(n: usize, tol: &Tolerances) -> Result<ChainModel<T>> {
    check_family_size(n)?;
    let states = n + 1;
    let off = real::<T>(1.0 / n as f64);
    let mut q = DMatrix::from_element(states, states, off);
    for i in 0..states {
        q[(i, i)] = -T::one();
    }
    ChainModel::new(q, simplex_directions::<T>(n), tol)
}

fn check_family_size(n: usize) -> Result<()> {
    if !(2..=3).contains(&n) {
        return Err(Error::Config(format!(
            "direction-switching families need n in 2..=3 (spatial dimension), got {n}"
        )));
    }
    Ok(())
}

/// The `n + 1` vertices of the regular unit simplex in dimension `n`:
/// unit-norm direction vectors summing to zero, the symmetric balanced
/// choice. Rows of the Helmert matrix provide an orthonormal basis of the
/// hyperplane orthogonal to the all-ones vector.
pub fn simplex_directions<T: Real>(n: usize) -> DMatrix<T> {
    let states = n + 1;
    // Helmert rows: h_j = (1, ..., 1, -j, 0, ..., 0) / sqrt(j (j + 1)).
    let mut helmert = DMatrix::<T>::zeros(n, states);
    for j in 1..=n {
        let scale = real::<T>(1.0 / ((j * (j + 1)) as f64).sqrt());
        for c in 0..j {
            helmert[(j - 1, c)] = scale;
        }
        helmert[(j - 1, j)] = -scale * real::<T>(j as f64);
    }
    // Vertex i: basis image of e_i - centroid, rescaled to unit length.
    let norm = real::<T>((n as f64 / (n as f64 + 1.0)).sqrt());
    let mut dirs = DMatrix::<T>::zeros(n, states);
    for i in 0..states {
        for r in 0..n {
            // The centroid is orthogonal to every Helmert row, so the image
            // of e_i - centroid is just column i of the Helmert matrix.
            dirs[(r, i)] = helmert[(r, i)] / norm;
        }
    }
    dirs
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn telegraph_structure() {
        let m = two_state_telegraph::<f64>(&tol()).unwrap();
        assert_eq!(m.n_states(), 2);
        assert_eq!(m.dim(), 1);
        assert_eq!(m.generator()[(0, 1)], 1.0);
        assert_eq!(m.velocities()[(0, 0)], 1.0);
        assert_eq!(m.velocities()[(0, 1)], -1.0);
    }

    #[test]
    fn cyclic_generator_pattern() {
        let m = builtin_model::<f64>("cyclic(2)", &tol()).unwrap();
        assert_eq!(m.n_states(), 3);
        for i in 0..3 {
            assert_eq!(m.generator()[(i, i)], -1.0);
            assert_eq!(m.generator()[(i, (i + 1) % 3)], 1.0);
        }
        assert_eq!(m.generator()[(0, 2)], 0.0);
    }

    #[test]
    fn uniform_generator_pattern() {
        let m = builtin_model::<f64>("uniform(2)", &tol()).unwrap();
        assert_eq!(m.n_states(), 3);
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { -1.0 } else { 0.5 };
                assert_relative_eq!(m.generator()[(i, j)], expected, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn simplex_directions_are_balanced_unit_vectors() {
        for n in 2..=3usize {
            let dirs = simplex_directions::<f64>(n);
            for i in 0..=n {
                let len: f64 = (0..n).map(|r| dirs[(r, i)] * dirs[(r, i)]).sum();
                assert_relative_eq!(len, 1.0, epsilon = 1e-13);
            }
            for r in 0..n {
                let sum: f64 = (0..=n).map(|i| dirs[(r, i)]).sum();
                assert!(sum.abs() < 1e-13);
            }
            // Pairwise angles all equal: v_i . v_j = -1/n off the diagonal.
            for i in 0..=n {
                for j in 0..i {
                    let dot: f64 = (0..n).map(|r| dirs[(r, i)] * dirs[(r, j)]).sum();
                    assert_relative_eq!(dot, -1.0 / n as f64, epsilon = 1e-13);
                }
            }
        }
    }

    #[test]
    fn built_in_models_are_balanced() {
        use crate::chain::ChainAlgebra;
        for name in [
            "two_state_telegraph",
            "cyclic(2)",
            "uniform(2)",
            "cyclic(3)",
        ] {
            let m = builtin_model::<f64>(name, &tol()).unwrap();
            let alg = ChainAlgebra::new(m, &tol()).unwrap();
            assert!(alg.is_balanced(), "{name} unbalanced");
        }
    }

    #[test]
    fn unknown_names_are_rejected() {
        assert!(matches!(
            builtin_model::<f64>("nope", &tol()),
            Err(Error::UnknownModel { .. })
        ));
        assert!(matches!(
            builtin_model::<f64>("cyclic(9)", &tol()),
            Err(Error::Config(_))
        ));
    }
}
