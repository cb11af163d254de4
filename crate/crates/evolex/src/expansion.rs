//! Construction of the two-scale expansion: regular terms in slow time,
//! boundary-layer terms in fast time, and the equilibrium-component dynamics
//! that make the hierarchy solvable order by order.
//!
//! Per mode the recursion is
//!
//! * `u_0`: heat decay `exp(-rate t) f_k * ones`,
//! * `u_n = -R Phi_n + gamma_n * ones` with `Phi_n = d/dt u_{n-2} - G u_{n-1}`
//!   (and `Phi_1 = -G u_0`),
//! * `gamma_n` solving the scalar relaxation equation
//!   `gamma' = -rate * gamma + s_n`,
//!   `s_n = -pi . (G R (d/dt u_{n-1} + G R Phi_n))`,
//!   which is exactly the solvability condition of the next order,
//! * `v_n` from the layer recursion driven by `G v_{n-1}` with initial value
//!   `-u_n(0)`, its equilibrium component pinned by the tail integral so the
//!   profile decays.

use nalgebra::{DMatrix, DVector};

use crate::chain::ChainAlgebra;
use crate::ep::{apply_centered_exp, convolve_centered_exp, relax_solve, EpProfile};
use crate::error::{Error, Result};
use crate::grid::{ModeGrid, StateField, TestFunction};
use crate::linalg::{complexify, SpectralPart};
use crate::operators::ModeOps;
use crate::scalar::{lift, Real, C};
use crate::tol::Tolerances;

/// Regular-term recursion. It consumes layer data only through the scalar
/// initial values handed to [`RegularPipeline::advance`], so the regular part
/// of the expansion can be driven with externally supplied tail constants.
pub struct RegularPipeline<'a, T: Real> {
    ops: &'a [ModeOps<T>],
    tol: &'a Tolerances,
    /// `regular[n][mode]`, slow time.
    regular: Vec<Vec<EpProfile<T>>>,
    /// Scalar equilibrium components `mean[n][mode]`, slow time.
    mean: Vec<Vec<EpProfile<T>>>,
}

impl<'a, T: Real> RegularPipeline<'a, T> {
    /// Start the recursion with the heat-decay leading term.
    pub fn new(ops: &'a [ModeOps<T>], f: &TestFunction<T>, tol: &'a Tolerances) -> Self {
        let mut u0 = Vec::with_capacity(ops.len());
        let mut c0 = Vec::with_capacity(ops.len());
        for (m, op) in ops.iter().enumerate() {
            let decay = C::new(-op.heat_rate, T::zero());
            let fk = f.coeff(m);
            u0.push(EpProfile::from_term(0, decay, &op.ones * fk));
            c0.push(EpProfile::from_term(0, decay, DVector::from_element(1, fk)));
        }
        Self {
            ops,
            tol,
            regular: vec![u0],
            mean: vec![c0],
        }
    }

    pub fn order(&self) -> usize {
        self.regular.len() - 1
    }

    pub fn regular_terms(&self) -> &[Vec<EpProfile<T>>] {
        &self.regular
    }

    pub fn mean_terms(&self) -> &[Vec<EpProfile<T>>] {
        &self.mean
    }

    /// Hierarchy right-hand side for the next order at one mode.
    fn rhs(&self, n: usize, mode: usize) -> EpProfile<T> {
        let op = &self.ops[mode];
        if n == 1 {
            self.regular[0][mode]
                .map_matrix(&op.adv)
                .scale(lift(-T::one()))
        } else {
            op.hierarchy_rhs(&self.regular[n - 2][mode], &self.regular[n - 1][mode])
        }
    }

    /// Append order `n = order() + 1` given the equilibrium initial value per
    /// mode (zero at order one, tail data above).
    pub fn advance(&mut self, mean_inits: &[C<T>]) -> Result<()> {
        let n = self.order() + 1;
        if mean_inits.len() != self.ops.len() {
            return Err(Error::Shape {
                context: "one equilibrium initial value per mode",
                expected: self.ops.len(),
                got: mean_inits.len(),
            });
        }
        let resonance = self.tol.resonance;
        let mut us = Vec::with_capacity(self.ops.len());
        let mut cs = Vec::with_capacity(self.ops.len());
        for (mode, op) in self.ops.iter().enumerate() {
            let phi = self.rhs(n, mode);
            // Solvability source: -pi . (G R (d/dt u_{n-1} + G R Phi_n)).
            let inner = self.regular[n - 1][mode]
                .derivative()
                .add(&phi.map_matrix(&op.adv_dev));
            let source = inner
                .map_matrix(&op.adv_dev)
                .dot_left(&op.stationary)
                .scale(lift(-T::one()))
                .normalize(resonance);
            let gamma = relax_solve(op.heat_rate, mean_inits[mode], &source, resonance);
            let u_n = phi
                .map_matrix(&op.deviation)
                .scale(lift(-T::one()))
                .add(&gamma.broadcast(&op.ones))
                .normalize(resonance);
            us.push(u_n);
            cs.push(gamma);
        }
        self.regular.push(us);
        self.mean.push(cs);
        Ok(())
    }
}

/// The assembled expansion through a fixed order.
pub struct ExpansionSet<T: Real> {
    grid: ModeGrid,
    order: usize,
    n_states: usize,
    diffusion: DMatrix<T>,
    ops: Vec<ModeOps<T>>,
    /// `regular[n][mode]`: terms of the slow part, orders `0..=order`.
    regular: Vec<Vec<EpProfile<T>>>,
    /// `mean[n][mode]`: scalar equilibrium components, orders `0..=order`.
    mean: Vec<Vec<EpProfile<T>>>,
    /// `layer[n-1][mode]`: boundary-layer terms, orders `1..=order`.
    layer: Vec<Vec<EpProfile<T>>>,
    /// Tail integrals of the layer terms, same indexing as `layer`.
    layer_tails: Vec<Vec<DVector<C<T>>>>,
    tol: Tolerances,
}

impl<T: Real> ExpansionSet<T> {
    /// Build regular, equilibrium and layer terms through `order`.
    pub fn build(
        algebra: &ChainAlgebra<T>,
        grid: &ModeGrid,
        f: &TestFunction<T>,
        order: usize,
        tol: &Tolerances,
    ) -> Result<Self> {
        if order > 8 {
            return Err(Error::Config(format!(
                "expansion order {order} exceeds the hard cap of 8"
            )));
        }
        let a_hat = algebra.diffusion_tensor()?;
        let ops: Vec<ModeOps<T>> = grid
            .modes()
            .iter()
            .map(|&k| ModeOps::new(algebra, &a_hat, k))
            .collect();
        let decaying: Vec<&SpectralPart<T>> = algebra.decaying_spectrum().collect();
        let n_states = algebra.model().n_states();

        let mut pipeline = RegularPipeline::new(&ops, f, tol);
        let mut layer: Vec<Vec<EpProfile<T>>> = Vec::new();
        let mut layer_tails: Vec<Vec<DVector<C<T>>>> = Vec::new();

        for n in 1..=order {
            // Equilibrium initial values: zero at first order, then the
            // stationary average of the advected layer tail.
            let inits: Vec<C<T>> = if n == 1 {
                vec![C::new(T::zero(), T::zero()); ops.len()]
            } else {
                let tails = &layer_tails[n - 2];
                ops.iter()
                    .zip(tails)
                    .map(|(op, tail)| op.mean(&(&op.adv * tail)))
                    .collect()
            };
            pipeline.advance(&inits)?;

            let mut v_terms = Vec::with_capacity(ops.len());
            let mut v_tails = Vec::with_capacity(ops.len());
            for (mode, op) in ops.iter().enumerate() {
                let u_n0 = pipeline.regular_terms()[n][mode]
                    .evaluate(T::zero(), tol.overflow_exponent)
                    .map_err(|e| at_mode(e, mode))?;
                let init = -u_n0;
                let v_n = if n == 1 {
                    apply_centered_exp(&decaying, &init, tol.resonance)
                } else {
                    let driver = layer[n - 2][mode].map_matrix(&op.adv);
                    let conv = convolve_centered_exp(&decaying, &driver, tol.resonance);
                    let tail_part = driver
                        .complement_integral(tol.resonance, tol.decay_margin, tol.negligible_coeff)
                        .map_err(|e| at_mode(e, mode))?
                        .map_matrix(&op.projector);
                    apply_centered_exp(&decaying, &init, tol.resonance)
                        .add(&conv)
                        .sub(&tail_part)
                        .normalize(tol.resonance)
                };
                if !v_n.is_decaying(tol.decay_margin, tol.negligible_coeff) {
                    return Err(Error::NonDecaying { mode, re_mu: 0.0 });
                }
                let tail = v_n
                    .tail_integral(tol.decay_margin, tol.negligible_coeff)
                    .map_err(|e| at_mode(e, mode))?;
                v_terms.push(v_n);
                v_tails.push(tail);
            }
            layer.push(v_terms);
            layer_tails.push(v_tails);
        }

        let regular = pipeline.regular.clone();
        let mean = pipeline.mean.clone();
        Ok(Self {
            grid: grid.clone(),
            order,
            n_states,
            diffusion: a_hat,
            ops,
            regular,
            mean,
            layer,
            layer_tails,
            tol: tol.clone(),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn grid(&self) -> &ModeGrid {
        &self.grid
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn diffusion_tensor(&self) -> &DMatrix<T> {
        &self.diffusion
    }

    pub fn mode_ops(&self) -> &[ModeOps<T>] {
        &self.ops
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    /// Regular term of one order: profiles per mode in slow time.
    pub fn regular_term(&self, n: usize) -> Result<&[EpProfile<T>]> {
        self.regular
            .get(n)
            .map(|v| v.as_slice())
            .ok_or(Error::MissingInitialCondition { order: n })
    }

    /// Boundary-layer term of one order (`n >= 1`), fast time.
    pub fn layer_term(&self, n: usize) -> Result<&[EpProfile<T>]> {
        if n == 0 {
            return Err(Error::MissingInitialCondition { order: 0 });
        }
        self.layer
            .get(n - 1)
            .map(|v| v.as_slice())
            .ok_or(Error::MissingInitialCondition { order: n })
    }

    /// Scalar equilibrium component of one order.
    pub fn mean_term(&self, n: usize) -> Result<&[EpProfile<T>]> {
        self.mean
            .get(n)
            .map(|v| v.as_slice())
            .ok_or(Error::MissingInitialCondition { order: n })
    }

    /// Tail integrals of one layer order.
    pub fn layer_tail(&self, n: usize) -> Result<&[DVector<C<T>>]> {
        if n == 0 {
            return Err(Error::MissingInitialCondition { order: 0 });
        }
        self.layer_tails
            .get(n - 1)
            .map(|v| v.as_slice())
            .ok_or(Error::MissingInitialCondition { order: n })
    }

    /// Evaluate a regular term as a state field at slow time `t`.
    pub fn evaluate_regular(&self, n: usize, t: T) -> Result<StateField<T>> {
        let profs = self.regular_term(n)?;
        let values = profs
            .iter()
            .enumerate()
            .map(|(mode, p)| {
                p.evaluate(t, self.tol.overflow_exponent)
                    .map_err(|e| at_mode(e, mode))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(StateField { time: t, values })
    }

    /// Evaluate a layer term as a state field at fast time `tau`.
    pub fn evaluate_layer(&self, n: usize, tau: T) -> Result<StateField<T>> {
        let profs = self.layer_term(n)?;
        let values = profs
            .iter()
            .enumerate()
            .map(|(mode, p)| {
                p.evaluate(tau, self.tol.overflow_exponent)
                    .map_err(|e| at_mode(e, mode))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(StateField { time: tau, values })
    }

    /// The truncation `u_0(t) + sum_{n<=upto} eps^n (u_n(t) + v_n(t/eps^2))`.
    pub fn truncated_solution(&self, upto: usize, eps: T, t: T) -> Result<StateField<T>> {
        if upto > self.order {
            return Err(Error::MissingInitialCondition { order: upto });
        }
        assert!(eps > T::zero() && eps <= T::one(), "eps must be in (0, 1]");
        assert!(t >= T::zero(), "time must be nonnegative");
        let tau = t / (eps * eps);
        let mut field = self.evaluate_regular(0, t)?;
        let mut weight = T::one();
        for n in 1..=upto {
            weight *= eps;
            let reg = self.evaluate_regular(n, t)?;
            let lay = self.evaluate_layer(n, tau)?;
            for (mode, value) in field.values.iter_mut().enumerate() {
                *value += (&reg.values[mode] + &lay.values[mode]) * lift(weight);
            }
        }
        Ok(field)
    }

    /// Transform-domain evaluation of a layer term through the resolvent
    /// recursion (an independent route from the time-domain profiles):
    ///
    /// `V_n(lambda) = G0(lambda) (I - P) v_n(0) + G0(lambda) G V_{n-1}(lambda)
    ///  + (1/lambda) P G (V_{n-1}(lambda) - tail_{n-1})`
    ///
    /// with `G0(lambda)` the resolvent minus its equilibrium pole `P/lambda`.
    pub fn layer_transform(
        &self,
        algebra: &ChainAlgebra<T>,
        n: usize,
        lambda: T,
    ) -> Result<Vec<DVector<C<T>>>> {
        assert!(lambda > T::zero(), "transform variable must be positive");
        if n == 0 || n > self.order {
            return Err(Error::MissingInitialCondition { order: n });
        }
        let resolvent = complexify(&algebra.resolvent(lambda)?);
        let inv_lambda = lift(T::one() / lambda);

        let mut current: Vec<DVector<C<T>>> = Vec::with_capacity(self.ops.len());
        for stage in 1..=n {
            let mut next = Vec::with_capacity(self.ops.len());
            for (mode, op) in self.ops.iter().enumerate() {
                let centered_resolvent = &resolvent - &op.projector * inv_lambda;
                let u_n0 = self.regular[stage][mode]
                    .evaluate(T::zero(), self.tol.overflow_exponent)
                    .map_err(|e| at_mode(e, mode))?;
                let init = -u_n0;
                let off_mean = &init - &op.projector * &init;
                let mut value = &centered_resolvent * off_mean;
                if stage > 1 {
                    let prev: &DVector<C<T>> = &current[mode];
                    let tail = &self.layer_tails[stage - 2][mode];
                    value += &centered_resolvent * (&op.adv * prev);
                    value += &op.projector * (&op.adv * (prev - tail)) * inv_lambda;
                }
                next.push(value);
            }
            current = next;
        }
        Ok(current)
    }

    /// Term-wise transform of the stored time-domain layer profile; the
    /// reference side of the cross-check.
    pub fn layer_transform_termwise(&self, n: usize, lambda: T) -> Result<Vec<DVector<C<T>>>> {
        let profs = self.layer_term(n)?;
        Ok(profs.iter().map(|p| p.laplace(lambda)).collect())
    }

    /// Residual profiles of the truncation at one mode: the regular part in
    /// slow time plus the layer part in fast time, so callers can evaluate
    /// `d/dt u_trunc - (eps^-2 Q + eps^-1 G) u_trunc` exactly.
    pub fn residual_profiles(
        &self,
        algebra: &ChainAlgebra<T>,
        upto: usize,
        eps: T,
        mode: usize,
    ) -> Result<(EpProfile<T>, EpProfile<T>)> {
        if upto > self.order {
            return Err(Error::MissingInitialCondition { order: upto });
        }
        let op = &self.ops[mode];
        let q = complexify(algebra.model().generator());
        let inv_eps = T::one() / eps;
        let inv_eps2 = inv_eps * inv_eps;

        let mut slow = EpProfile::zero(self.n_states);
        let mut weight = T::one();
        for n in 0..=upto {
            let u = &self.regular[n][mode];
            let defect = u
                .derivative()
                .sub(&u.map_matrix(&q).scale(lift(inv_eps2)))
                .sub(&u.map_matrix(&op.adv).scale(lift(inv_eps)));
            slow = slow.add(&defect.scale(lift(weight)));
            weight *= eps;
        }
        slow = slow.normalize(self.tol.resonance);

        let mut fast = EpProfile::zero(self.n_states);
        let mut weight = eps;
        for n in 1..=upto {
            let v = &self.layer[n - 1][mode];
            let defect = v
                .derivative()
                .scale(lift(inv_eps2))
                .sub(&v.map_matrix(&q).scale(lift(inv_eps2)))
                .sub(&v.map_matrix(&op.adv).scale(lift(inv_eps)));
            fast = fast.add(&defect.scale(lift(weight)));
            weight *= eps;
        }
        fast = fast.normalize(self.tol.resonance);

        Ok((slow, fast))
    }
}

fn at_mode(e: Error, mode: usize) -> Error {
    match e {
        Error::Overflow { exponent, .. } => Error::Overflow { mode, exponent },
        Error::NonDecaying { re_mu, .. } => Error::NonDecaying { mode, re_mu },
        other => other,
    }
}
