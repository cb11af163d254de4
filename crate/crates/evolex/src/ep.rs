//! Exponential-polynomial profiles: finite sums of `t^m * exp(mu t) * C`
//! with complex vector coefficients. Closed under differentiation,
//! integration, tail integrals and the layer convolutions, which keeps every
//! time dependence in the expansion exact.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::SpectralPart;
use nalgebra::ComplexField;

use crate::scalar::{lift, real, Real, C};

/// One term `t^power * exp(exponent * t) * coeff`.
#[derive(Debug, Clone)]
pub struct EpTerm<T: Real> {
    pub power: u32,
    pub exponent: C<T>,
    pub coeff: DVector<C<T>>,
}

/// A finite exponential-polynomial with fixed coefficient width.
#[derive(Debug, Clone)]
pub struct EpProfile<T: Real> {
    width: usize,
    terms: Vec<EpTerm<T>>,
}

fn factorial<T: Real>(m: u32) -> T {
    let mut acc = 1.0f64;
    for j in 2..=m as u64 {
        acc *= j as f64;
    }
    real(acc)
}

impl<T: Real> EpProfile<T> {
    pub fn zero(width: usize) -> Self {
        Self {
            width,
            terms: Vec::new(),
        }
    }

    /// A single constant term.
    pub fn constant(coeff: DVector<C<T>>) -> Self {
        Self::from_term(0, C::new(T::zero(), T::zero()), coeff)
    }

    pub fn from_term(power: u32, exponent: C<T>, coeff: DVector<C<T>>) -> Self {
        let width = coeff.len();
        Self {
            width,
            terms: vec![EpTerm {
                power,
                exponent,
                coeff,
            }],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn terms(&self) -> &[EpTerm<T>] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Largest exponent modulus; used to scale resonance comparisons.
    pub fn exponent_scale(&self) -> T {
        self.terms
            .iter()
            .map(|t| t.exponent.modulus())
            .fold(T::zero(), |a, b| if b > a { b } else { a })
    }

    /// Largest coefficient modulus.
    pub fn coeff_sup(&self) -> T {
        self.terms
            .iter()
            .flat_map(|t| t.coeff.iter())
            .map(|z| z.modulus())
            .fold(T::zero(), |a, b| if b > a { b } else { a })
    }

    fn push(&mut self, term: EpTerm<T>) {
        debug_assert_eq!(term.coeff.len(), self.width);
        self.terms.push(term);
    }

    /// Merge terms whose `(power, exponent)` keys agree within the relative
    /// resonance tolerance and drop exact-zero coefficients.
    pub fn normalize(mut self, resonance: f64) -> Self {
        let scale = self.exponent_scale();
        let tol = real::<T>(resonance) * if scale > T::zero() { scale } else { T::one() };
        let mut merged: Vec<EpTerm<T>> = Vec::with_capacity(self.terms.len());
        for term in self.terms.drain(..) {
            match merged
                .iter_mut()
                .find(|t| t.power == term.power && (t.exponent - term.exponent).modulus() <= tol)
            {
                Some(t) => t.coeff += term.coeff,
                None => merged.push(term),
            }
        }
        merged.retain(|t| t.coeff.iter().any(|z| z.modulus_squared() > T::zero()));
        merged.sort_by(|a, b| {
            (
                a.power,
                a.exponent.re.to_f64().unwrap_or(0.0),
                a.exponent.im.to_f64().unwrap_or(0.0),
            )
                .partial_cmp(&(
                    b.power,
                    b.exponent.re.to_f64().unwrap_or(0.0),
                    b.exponent.im.to_f64().unwrap_or(0.0),
                ))
                .unwrap()
        });
        self.terms = merged;
        self
    }

    #[allow(clippy::should_implement_trait)] // by-reference rhs, unlike std::ops
    pub fn add(mut self, other: &Self) -> Self {
        assert_eq!(self.width, other.width, "profile widths must agree");
        self.terms.extend(other.terms.iter().cloned());
        self
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(self, other: &Self) -> Self {
        self.add(&other.clone().scale(lift(-T::one())))
    }

    pub fn scale(mut self, factor: C<T>) -> Self {
        for t in &mut self.terms {
            t.coeff *= factor;
        }
        self
    }

    /// Apply a matrix to every coefficient vector.
    pub fn map_matrix(&self, m: &DMatrix<C<T>>) -> Self {
        Self {
            width: m.nrows(),
            terms: self
                .terms
                .iter()
                .map(|t| EpTerm {
                    power: t.power,
                    exponent: t.exponent,
                    coeff: m * &t.coeff,
                })
                .collect(),
        }
    }

    /// Contract against a row functional, producing a scalar-width profile.
    pub fn dot_left(&self, row: &DVector<C<T>>) -> Self {
        Self {
            width: 1,
            terms: self
                .terms
                .iter()
                .map(|t| EpTerm {
                    power: t.power,
                    exponent: t.exponent,
                    coeff: DVector::from_element(1, row.dotc(&t.coeff)),
                })
                .collect(),
        }
    }

    /// Tensor a scalar-width profile with a fixed direction vector.
    pub fn broadcast(&self, direction: &DVector<C<T>>) -> Self {
        assert_eq!(self.width, 1, "broadcast needs a scalar profile");
        Self {
            width: direction.len(),
            terms: self
                .terms
                .iter()
                .map(|t| EpTerm {
                    power: t.power,
                    exponent: t.exponent,
                    coeff: direction * t.coeff[0],
                })
                .collect(),
        }
    }

    /// Multiply by `exp(delta * t)`.
    pub fn shift_exponent(mut self, delta: C<T>) -> Self {
        for t in &mut self.terms {
            t.exponent += delta;
        }
        self
    }

    /// Term-wise time derivative.
    pub fn derivative(&self) -> Self {
        let mut out = Self::zero(self.width);
        for t in &self.terms {
            if t.power > 0 {
                out.push(EpTerm {
                    power: t.power - 1,
                    exponent: t.exponent,
                    coeff: &t.coeff * lift(real::<T>(t.power as f64)),
                });
            }
            if t.exponent.modulus_squared() > T::zero() {
                out.push(EpTerm {
                    power: t.power,
                    exponent: t.exponent,
                    coeff: &t.coeff * t.exponent,
                });
            }
        }
        out
    }

    /// Exact antiderivative vanishing at `t = 0`. Exponents within the
    /// resonance tolerance of zero integrate along the polynomial branch.
    pub fn integrate_from_zero(&self, resonance: f64) -> Self {
        let scale = self.exponent_scale();
        let zero_tol = real::<T>(resonance) * if scale > T::zero() { scale } else { T::one() };
        let mut out = Self::zero(self.width);
        for t in &self.terms {
            if t.exponent.modulus() <= zero_tol {
                out.push(EpTerm {
                    power: t.power + 1,
                    exponent: C::new(T::zero(), T::zero()),
                    coeff: &t.coeff / lift(real::<T>((t.power + 1) as f64)),
                });
                continue;
            }
            // Antiderivative e^{mu t} sum_j c_j t^j with c_m = 1/mu and
            // c_{j} = -(j+1) c_{j+1} / mu, minus its value at zero.
            let mut cj = C::new(T::one(), T::zero()) / t.exponent;
            out.push(EpTerm {
                power: t.power,
                exponent: t.exponent,
                coeff: &t.coeff * cj,
            });
            for j in (0..t.power).rev() {
                cj = -cj * lift(real::<T>((j + 1) as f64)) / t.exponent;
                out.push(EpTerm {
                    power: j,
                    exponent: t.exponent,
                    coeff: &t.coeff * cj,
                });
            }
            out.push(EpTerm {
                power: 0,
                exponent: C::new(T::zero(), T::zero()),
                coeff: &t.coeff * (-cj),
            });
        }
        out.normalize(resonance)
    }

    /// True when every non-negligible term decays.
    pub fn is_decaying(&self, decay_margin: f64, negligible: f64) -> bool {
        self.offending_exponent(decay_margin, negligible).is_none()
    }

    fn offending_exponent(&self, decay_margin: f64, negligible: f64) -> Option<C<T>> {
        let margin = real::<T>(decay_margin);
        let floor = real::<T>(negligible);
        self.terms
            .iter()
            .find(|t| t.exponent.re >= -margin && t.coeff.iter().any(|z| z.modulus() > floor))
            .map(|t| t.exponent)
    }

    /// Exact integral over `[0, inf)`: `sum C * m! / (-mu)^(m+1)`.
    pub fn tail_integral(&self, decay_margin: f64, negligible: f64) -> Result<DVector<C<T>>> {
        if let Some(mu) = self.offending_exponent(decay_margin, negligible) {
            return Err(Error::NonDecaying {
                mode: 0,
                re_mu: mu.re.to_f64().unwrap_or(f64::NAN),
            });
        }
        let mut acc = DVector::zeros(self.width);
        let floor = real::<T>(negligible);
        for t in &self.terms {
            if t.exponent.re >= -real::<T>(decay_margin) {
                // Negligible non-decaying noise; checked above.
                let _ = floor;
                continue;
            }
            let denom = ComplexField::powi(-t.exponent, t.power as i32 + 1);
            acc += &t.coeff * (lift(factorial::<T>(t.power)) / denom);
        }
        Ok(acc)
    }

    /// The decaying function `t -> integral_t^inf f(s) ds`, built by dropping
    /// the constant part of the antiderivative and negating the rest.
    pub fn complement_integral(
        &self,
        resonance: f64,
        decay_margin: f64,
        negligible: f64,
    ) -> Result<Self> {
        if let Some(mu) = self.offending_exponent(decay_margin, negligible) {
            return Err(Error::NonDecaying {
                mode: 0,
                re_mu: mu.re.to_f64().unwrap_or(f64::NAN),
            });
        }
        let integ = self.integrate_from_zero(resonance);
        let scale = integ.exponent_scale();
        let zero_tol = real::<T>(resonance) * if scale > T::zero() { scale } else { T::one() };
        let terms = integ
            .terms
            .into_iter()
            .filter(|t| !(t.power == 0 && t.exponent.modulus() <= zero_tol))
            .map(|t| EpTerm {
                power: t.power,
                exponent: t.exponent,
                coeff: -t.coeff,
            })
            .collect();
        Ok(Self {
            width: self.width,
            terms,
        })
    }

    /// Point evaluation, guarding against exponential overflow.
    pub fn evaluate(&self, t: T, overflow_exponent: f64) -> Result<DVector<C<T>>> {
        let mut acc = DVector::zeros(self.width);
        let guard = real::<T>(overflow_exponent);
        for term in &self.terms {
            let arg = term.exponent.re * t;
            if arg > guard {
                return Err(Error::Overflow {
                    mode: 0,
                    exponent: arg.to_f64().unwrap_or(f64::NAN),
                });
            }
            let phase = term.exponent.im * t;
            let radial = arg.exp();
            let osc = C::new(phase.cos() * radial, phase.sin() * radial);
            let poly = t.powi(term.power as i32);
            acc += &term.coeff * (osc * lift(poly));
        }
        Ok(acc)
    }

    /// Term-wise one-sided transform `integral_0^inf e^{-lambda t} f(t) dt`
    /// evaluated at real `lambda` large enough that every term converges.
    pub fn laplace(&self, lambda: T) -> DVector<C<T>> {
        let mut acc = DVector::zeros(self.width);
        for t in &self.terms {
            let denom = ComplexField::powi(lift(lambda) - t.exponent, t.power as i32 + 1);
            acc += &t.coeff * (lift(factorial::<T>(t.power)) / denom);
        }
        acc
    }
}

/// Convolution with the centered semigroup: given the decaying spectral parts
/// `(mu_j, P_j)` of the generator and a decaying driver `g`, returns
/// `t -> integral_0^t sum_j e^{mu_j (t-s)} P_j g(s) ds` exactly. Resonances
/// between driver exponents and eigenvalues produce the extra power of `t`
/// inside the shifted antiderivative.
pub fn convolve_centered_exp<T: Real>(
    decaying: &[&SpectralPart<T>],
    g: &EpProfile<T>,
    resonance: f64,
) -> EpProfile<T> {
    let mut out = EpProfile::zero(g.width());
    for part in decaying {
        let contribution = g
            .map_matrix(&part.projector)
            .shift_exponent(-part.value)
            .integrate_from_zero(resonance)
            .shift_exponent(part.value);
        out = out.add(&contribution);
    }
    out.normalize(resonance)
}

/// Apply the centered semigroup to a constant vector as an exact profile:
/// `t -> (e^{Qt} - P) w = sum_j e^{mu_j t} P_j w` over the decaying parts.
pub fn apply_centered_exp<T: Real>(
    decaying: &[&SpectralPart<T>],
    w: &DVector<C<T>>,
    resonance: f64,
) -> EpProfile<T> {
    let mut out = EpProfile::zero(w.len());
    for part in decaying {
        out = out.add(&EpProfile::from_term(0, part.value, &part.projector * w));
    }
    out.normalize(resonance)
}

/// Exact solution profile of the scalar relaxation equation
/// `gamma' = -rate * gamma + source(t)`, `gamma(0) = init`.
pub fn relax_solve<T: Real>(
    rate: T,
    init: C<T>,
    source: &EpProfile<T>,
    resonance: f64,
) -> EpProfile<T> {
    assert_eq!(source.width(), 1, "relaxation source must be scalar");
    let lambda = C::new(-rate, T::zero());
    let driven = source
        .clone()
        .shift_exponent(-lambda)
        .integrate_from_zero(resonance)
        .shift_exponent(lambda);
    let free = EpProfile::from_term(0, lambda, DVector::from_element(1, init));
    driven.add(&free).normalize(resonance)
}
