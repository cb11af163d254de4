//! Finite-state switching chains and their derived algebra: stationary
//! distribution, equilibrium projector, deviation matrix, spectral
//! decomposition, resolvent, balance check and diffusion tensor.

use nalgebra::{ComplexField, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{
    complexify, condition_estimate, least_squares, max_abs, spectral_decomposition, SpectralPart,
};
use crate::scalar::{real, Real, C};
use crate::tol::Tolerances;

/// Problem statement: a generator `Q` on `N` states and a velocity attached
/// to each state.
#[derive(Debug, Clone)]
pub struct ChainModel<T: Real> {
    n_states: usize,
    dim: usize,
    generator: DMatrix<T>,
    /// `dim x n_states`; column `i` is the velocity of state `i`.
    velocities: DMatrix<T>,
}

impl<T: Real> ChainModel<T> {
    /// Validate and build a model. Checks shapes, nonnegative off-diagonal
    /// intensities, zero row sums and irreducibility.
    pub fn new(generator: DMatrix<T>, velocities: DMatrix<T>, tol: &Tolerances) -> Result<Self> {
        let n = generator.nrows();
        if generator.ncols() != n {
            return Err(Error::Shape {
                context: "generator must be square",
                expected: n,
                got: generator.ncols(),
            });
        }
        if n < 2 {
            return Err(Error::Shape {
                context: "state count must be at least 2",
                expected: 2,
                got: n,
            });
        }
        let dim = velocities.nrows();
        if !(1..=3).contains(&dim) {
            return Err(Error::Shape {
                context: "spatial dimension must be 1..=3",
                expected: 3,
                got: dim,
            });
        }
        if velocities.ncols() != n {
            return Err(Error::Shape {
                context: "velocity matrix must have one column per state",
                expected: n,
                got: velocities.ncols(),
            });
        }
        if generator.iter().any(|x| !x.is_finite()) || velocities.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config(
                "model matrices contain non-finite entries".into(),
            ));
        }

        let row_tol = real::<T>(tol.row_sum);
        for i in 0..n {
            let mut sum = T::zero();
            for j in 0..n {
                let q = generator[(i, j)];
                if i != j && q < T::zero() {
                    return Err(Error::NegativeIntensity {
                        row: i,
                        col: j,
                        value: q.to_f64().unwrap_or(f64::NAN),
                    });
                }
                sum += q;
            }
            if sum.abs() > row_tol {
                return Err(Error::RowSum {
                    row: i,
                    sum: sum.to_f64().unwrap_or(f64::NAN),
                });
            }
        }

        check_irreducible(&generator)?;

        Ok(Self {
            n_states: n,
            dim,
            generator,
            velocities,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn generator(&self) -> &DMatrix<T> {
        &self.generator
    }

    pub fn velocities(&self) -> &DMatrix<T> {
        &self.velocities
    }

    /// Velocity vector of one state.
    pub fn velocity(&self, state: usize) -> DVector<T> {
        self.velocities.column(state).into_owned()
    }

    /// Total exit rate of one state.
    pub fn exit_rate(&self, state: usize) -> T {
        -self.generator[(state, state)]
    }
}

/// Strong connectivity of the directed graph of positive intensities;
/// irreducible means every state communicates with state 0 both ways.
fn check_irreducible<T: Real>(q: &DMatrix<T>) -> Result<()> {
    let n = q.nrows();
    let forward = reachable(q, false);
    let backward = reachable(q, true);
    for s in 0..n {
        if !forward[s] || !backward[s] {
            return Err(Error::ReducibleChain { state: s });
        }
    }
    Ok(())
}

fn reachable<T: Real>(q: &DMatrix<T>, transpose: bool) -> Vec<bool> {
    let n = q.nrows();
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for j in 0..n {
            let w = if transpose { q[(j, i)] } else { q[(i, j)] };
            if i != j && w > T::zero() && !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen
}

/// Time-independent algebra derived from a validated chain: everything the
/// expansion machinery needs about the switching process alone.
#[derive(Debug, Clone)]
pub struct ChainAlgebra<T: Real> {
    model: ChainModel<T>,
    stationary: DVector<T>,
    /// Rank-one equilibrium projector `1 * pi^T`.
    projector: DMatrix<T>,
    /// Deviation matrix: integral of the centered semigroup. Satisfies
    /// `Q R = R Q = P - I` and `P R = R P = 0` with `P` the projector.
    deviation: DMatrix<T>,
    /// Spectral parts of the generator; the zero cluster carries the exact
    /// equilibrium projector.
    spectrum: Vec<SpectralPart<T>>,
    balance_residual: DVector<T>,
    tol: Tolerances,
}

impl<T: Real> ChainAlgebra<T> {
    pub fn new(model: ChainModel<T>, tol: &Tolerances) -> Result<Self> {
        let stationary = stationary_distribution(&model, tol)?;
        let n = model.n_states();

        let mut projector = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                projector[(i, j)] = stationary[j];
            }
        }

        let deviation = deviation_matrix(&model, &projector, tol)?;
        let spectrum = generator_spectrum(&model, &projector, tol)?;

        let balance_residual = model.velocities() * &stationary;

        Ok(Self {
            model,
            stationary,
            projector,
            deviation,
            spectrum,
            balance_residual,
            tol: tol.clone(),
        })
    }

    pub fn model(&self) -> &ChainModel<T> {
        &self.model
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    pub fn stationary(&self) -> &DVector<T> {
        &self.stationary
    }

    pub fn projector(&self) -> &DMatrix<T> {
        &self.projector
    }

    pub fn deviation(&self) -> &DMatrix<T> {
        &self.deviation
    }

    pub fn spectrum(&self) -> &[SpectralPart<T>] {
        &self.spectrum
    }

    /// Spectral parts with strictly negative real part, i.e. everything the
    /// centered semigroup is made of.
    pub fn decaying_spectrum(&self) -> impl Iterator<Item = &SpectralPart<T>> {
        self.spectrum
            .iter()
            .filter(|p| p.value.modulus() > T::zero())
    }

    /// Eigenvalues of the generator (cluster representatives, zero first).
    pub fn eigenvalues(&self) -> Vec<C<T>> {
        self.spectrum.iter().map(|p| p.value).collect()
    }

    /// Distance from zero to the nearest nonzero eigenvalue.
    pub fn spectral_gap(&self) -> T {
        self.decaying_spectrum()
            .map(|p| -p.value.re)
            .fold(T::max_value().unwrap(), |a, b| if b < a { b } else { a })
    }

    /// Stationary mean velocity, one entry per space axis.
    pub fn balance_residual(&self) -> &DVector<T> {
        &self.balance_residual
    }

    pub fn is_balanced(&self) -> bool {
        self.balance_residual
            .iter()
            .all(|r| r.abs() <= real(self.tol.balance))
    }

    /// Centered semigroup `exp(Qt) - P`, summed over the decaying spectral
    /// parts so the ergodic decay is exact instead of hitting the rounding
    /// floor of `expm(Qt) - P`. Agreement with the matrix exponential is
    /// enforced by the reconstruction gate at construction time.
    pub fn exp_centered(&self, t: T) -> DMatrix<T> {
        assert!(t >= T::zero(), "centered semigroup needs t >= 0");
        let n = self.model.n_states();
        let mut acc = DMatrix::<C<T>>::zeros(n, n);
        for part in self.decaying_spectrum() {
            acc += &part.projector * ComplexField::exp(part.value * t);
        }
        // Conjugate eigenvalue pairs cancel the imaginary parts.
        acc.map(|z| z.re)
    }

    /// Resolvent `(lambda I - P + (R + P)^{-1})^{-1}` of the generator, in
    /// the closed form built from the projector and deviation matrix.
    pub fn resolvent(&self, lambda: T) -> Result<DMatrix<T>> {
        let n = self.model.n_states();
        let shifted = &self.deviation + &self.projector;
        let cond = condition_estimate(&shifted);
        if cond > real(self.tol.condition_limit) {
            return Err(Error::SingularSystem {
                context: "deviation plus projector",
                value: cond.to_f64().unwrap_or(f64::NAN),
            });
        }
        let inner = shifted.lu().try_inverse().ok_or(Error::SingularSystem {
            context: "deviation plus projector",
            value: f64::INFINITY,
        })?;
        let outer = DMatrix::identity(n, n) * lambda - &self.projector + inner;
        let cond = condition_estimate(&outer);
        if cond > real(self.tol.condition_limit) {
            return Err(Error::SingularSystem {
                context: "resolvent",
                value: cond.to_f64().unwrap_or(f64::NAN),
            });
        }
        outer.lu().try_inverse().ok_or(Error::SingularSystem {
            context: "resolvent",
            value: f64::INFINITY,
        })
    }

    /// Diffusion tensor: symmetrized `A diag(pi) R A^T`. Fails on unbalanced
    /// models and on tensors that are not positive definite.
    pub fn diffusion_tensor(&self) -> Result<DMatrix<T>> {
        if !self.is_balanced() {
            let worst = self
                .balance_residual
                .iter()
                .map(|r| r.abs())
                .fold(T::zero(), |a, b| if b > a { b } else { a });
            return Err(Error::BalanceViolation {
                residual: worst.to_f64().unwrap_or(f64::NAN),
            });
        }
        let raw = self.diffusion_form(false);
        let sym = (&raw + raw.transpose()) * real::<T>(0.5);
        let eigen = sym.clone().symmetric_eigen();
        let min = eigen
            .eigenvalues
            .iter()
            .fold(T::max_value().unwrap(), |a, &b| if b < a { b } else { a });
        if min <= real(self.tol.diffusion_min_eig) {
            return Err(Error::NonPositiveDiffusion {
                min_eigenvalue: min.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(sym)
    }

    /// The same bilinear form with a trailing stationary weight on the second
    /// index. Reported for comparison, never used in the construction.
    pub fn diffusion_tensor_weighted_variant(&self) -> DMatrix<T> {
        self.diffusion_form(true)
    }

    fn diffusion_form(&self, trailing_weight: bool) -> DMatrix<T> {
        let a = self.model.velocities();
        let pi = DMatrix::from_diagonal(&self.stationary);
        let mut m = &pi * &self.deviation;
        if trailing_weight {
            m *= pi;
        }
        a * m * a.transpose()
    }

    /// Off-equilibrium distance of the symmetrized diffusion tensor from a
    /// multiple of the identity; zero means isotropic.
    pub fn diffusion_anisotropy(&self) -> Result<T> {
        let a_hat = self.diffusion_tensor()?;
        let d = a_hat.nrows();
        let mean = a_hat.trace() / real(d as f64);
        let dev = &a_hat - DMatrix::identity(d, d) * mean;
        Ok(max_abs(&complexify(&dev)))
    }
}

/// Solve the stationary equations `pi^T Q = 0`, `sum pi = 1` in the
/// least-squares sense and verify the residual.
pub fn stationary_distribution<T: Real>(
    model: &ChainModel<T>,
    tol: &Tolerances,
) -> Result<DVector<T>> {
    let n = model.n_states();
    let q = model.generator();
    let mut a = DMatrix::zeros(n + 1, n);
    a.view_mut((0, 0), (n, n)).copy_from(&q.transpose());
    for j in 0..n {
        a[(n, j)] = T::one();
    }
    let mut b = DVector::zeros(n + 1);
    b[n] = T::one();

    let pi = least_squares(&a, &b)?;

    let q_norm = q.iter().fold(T::zero(), |acc, x| acc + *x * *x).sqrt();
    let residual = (&a * &pi - &b).norm();
    if residual > real::<T>(tol.stationary_residual) * q_norm {
        return Err(Error::SingularSystem {
            context: "stationary distribution",
            value: residual.to_f64().unwrap_or(f64::NAN),
        });
    }
    if pi.iter().any(|&p| p <= real(tol.algebra_identity)) {
        return Err(Error::SingularSystem {
            context: "stationary distribution has a non-positive entry",
            value: pi
                .iter()
                .fold(T::max_value().unwrap(), |a, &b| if b < a { b } else { a })
                .to_f64()
                .unwrap_or(f64::NAN),
        });
    }
    // Renormalize so the mass is exactly one.
    let mass = pi.sum();
    Ok(pi / mass)
}

/// Deviation matrix through the closed form `(P - Q)^{-1} - P`; its defining
/// relations are checked by the test suite rather than re-derived here.
fn deviation_matrix<T: Real>(
    model: &ChainModel<T>,
    projector: &DMatrix<T>,
    tol: &Tolerances,
) -> Result<DMatrix<T>> {
    let shifted = projector - model.generator();
    let cond = condition_estimate(&shifted);
    if cond > real(tol.condition_limit) {
        return Err(Error::SingularSystem {
            context: "projector minus generator",
            value: cond.to_f64().unwrap_or(f64::NAN),
        });
    }
    let inv = shifted.lu().try_inverse().ok_or(Error::SingularSystem {
        context: "projector minus generator",
        value: f64::INFINITY,
    })?;
    Ok(inv - projector)
}

/// Spectral parts of the generator with the diagonalizability gate: the
/// semigroup rebuilt from eigenvalue clusters must match the matrix
/// exponential, otherwise the generator is rejected as defective.
fn generator_spectrum<T: Real>(
    model: &ChainModel<T>,
    projector: &DMatrix<T>,
    tol: &Tolerances,
) -> Result<Vec<SpectralPart<T>>> {
    let qc = complexify(model.generator());
    let mut parts = spectral_decomposition(&qc, tol.resonance)?;

    let zero_tol = real::<T>(tol.zero_eigenvalue);
    let zero_count = parts
        .iter()
        .filter(|p| p.value.modulus() < zero_tol)
        .map(|p| p.multiplicity)
        .sum::<usize>();
    if zero_count != 1 {
        return Err(Error::DefectiveGenerator {
            error: zero_count as f64,
        });
    }
    for p in &mut parts {
        if p.value.modulus() < zero_tol {
            // Pin the equilibrium part exactly.
            p.value = C::new(T::zero(), T::zero());
            p.projector = complexify(projector);
        } else if p.value.re >= T::zero() {
            return Err(Error::DefectiveGenerator {
                error: p.value.re.to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    // Zero cluster first, then by descending real part.
    parts.sort_by(|a, b| b.value.re.partial_cmp(&a.value.re).unwrap());

    // A defective generator can still reconstruct the semigroup at coarse
    // tolerance through a split eigenvalue pair with huge cancelling
    // projectors, which would wreck the downstream profile calculus; bound
    // the projector norms directly.
    for p in &parts {
        let norm = p
            .projector
            .iter()
            .fold(T::zero(), |acc, z| acc + z.modulus_squared())
            .sqrt();
        if norm > real(tol.projector_norm_limit) {
            return Err(Error::DefectiveGenerator {
                error: norm.to_f64().unwrap_or(f64::NAN),
            });
        }
    }

    let mut worst = T::zero();
    for &t in &[0.0, 0.5, 1.0, 5.0] {
        let ts = real::<T>(t);
        let direct = complexify(&(model.generator() * ts).exp());
        let rebuilt: DMatrix<C<T>> = parts
            .iter()
            .map(|p| &p.projector * ComplexField::exp(p.value * ts))
            .fold(
                DMatrix::zeros(model.n_states(), model.n_states()),
                |a, b| a + b,
            );
        let err = max_abs(&(direct - rebuilt));
        if err > worst {
            worst = err;
        }
    }
    if worst > real(tol.spectral_reconstruction) {
        return Err(Error::DefectiveGenerator {
            error: worst.to_f64().unwrap_or(f64::NAN),
        });
    }

    Ok(parts)
}
