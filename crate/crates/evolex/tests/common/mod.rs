//! Shared oracles for the integration suites: quadrature references and a
//! seeded generator of random ergodic models. Everything here is deliberately
//! independent of the library's computational paths.

#![allow(dead_code)]

use evolex::chain::ChainModel;
use evolex::Tolerances;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Composite Simpson rule for a vector-valued integrand.
pub fn simpson<F>(a: f64, b: f64, panels: usize, mut f: F) -> DVector<f64>
where
    F: FnMut(f64) -> DVector<f64>,
{
    assert!(panels >= 2 && panels.is_multiple_of(2));
    let h = (b - a) / panels as f64;
    let mut acc = f(a) + f(b);
    for j in 1..panels {
        let w = if j % 2 == 1 { 4.0 } else { 2.0 };
        acc += f(a + h * j as f64) * w;
    }
    acc * (h / 3.0)
}

/// Scalar Simpson rule.
pub fn simpson_scalar<F>(a: f64, b: f64, panels: usize, mut f: F) -> f64
where
    F: FnMut(f64) -> f64,
{
    simpson(a, b, panels, |t| DVector::from_element(1, f(t)))[0]
}

/// Matrix-valued Simpson rule.
pub fn simpson_matrix<F>(a: f64, b: f64, panels: usize, mut f: F) -> DMatrix<f64>
where
    F: FnMut(f64) -> DMatrix<f64>,
{
    assert!(panels >= 2 && panels.is_multiple_of(2));
    let h = (b - a) / panels as f64;
    let mut acc = f(a) + f(b);
    for j in 1..panels {
        let w = if j % 2 == 1 { 4.0 } else { 2.0 };
        acc += f(a + h * j as f64) * w;
    }
    acc * (h / 3.0)
}

/// Random ergodic model: `N` uniform in 2..=8, off-diagonal intensities
/// `0.1 + Exp(1)` (so the chain is irreducible by construction), spatial
/// dimension uniform in 1..=3, velocities standard normal. With `balanced`
/// set, the stationary mean of each velocity row is subtracted.
pub fn random_model(seed: u64, balanced: bool) -> ChainModel<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=8usize);
    let dim = rng.gen_range(1..=3usize);

    let mut q = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            if i == j {
                continue;
            }
            let u: f64 = rng.gen();
            let rate = 0.1 - (1.0 - u).ln();
            q[(i, j)] = rate;
            row += rate;
        }
        q[(i, i)] = -row;
    }

    let mut a = DMatrix::<f64>::zeros(dim, n);
    for r in 0..dim {
        for c in 0..n {
            // Box-Muller normal draw.
            let u1: f64 = rng.gen_range(1e-12..1.0);
            let u2: f64 = rng.gen();
            a[(r, c)] = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        }
    }

    let tol = Tolerances::default();
    let model = ChainModel::new(q.clone(), a.clone(), &tol).expect("random model is valid");

    if balanced {
        let pi = evolex::chain::stationary_distribution(&model, &tol).unwrap();
        for r in 0..dim {
            let mean: f64 = (0..n).map(|c| pi[c] * a[(r, c)]).sum();
            for c in 0..n {
                a[(r, c)] -= mean;
            }
        }
        ChainModel::new(q, a, &tol).expect("balanced model is valid")
    } else {
        model
    }
}

/// Entry-wise max-abs of a real matrix difference.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max()
}
