//! Periodic spatial discretization: wavevector grids on the torus
//! `[0, 2*pi)^d`, forward/inverse transforms, test functions and sampled
//! state fields.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use nalgebra::ComplexField;

use crate::scalar::{cplx, imag, lift, real, Real, C};

/// A wavevector; unused trailing axes stay zero.
pub type Wave = [i64; 3];

/// Finite, symmetric mode set: every axis carries integer frequencies in
/// `-(m-1)/2 ..= (m-1)/2` with `m` odd.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeGrid {
    dim: usize,
    modes_per_axis: usize,
}

impl ModeGrid {
    pub fn new(dim: usize, modes_per_axis: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Shape {
                context: "grid dimension must be 1..=3",
                expected: 3,
                got: dim,
            });
        }
        if modes_per_axis.is_multiple_of(2) || modes_per_axis == 0 {
            return Err(Error::Shape {
                context: "modes per axis must be odd",
                expected: modes_per_axis + 1,
                got: modes_per_axis,
            });
        }
        Ok(Self {
            dim,
            modes_per_axis,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn modes_per_axis(&self) -> usize {
        self.modes_per_axis
    }

    pub fn half(&self) -> i64 {
        (self.modes_per_axis as i64 - 1) / 2
    }

    /// Total number of modes (= number of grid points).
    pub fn len(&self) -> usize {
        self.modes_per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Wavevectors in storage order (first axis slowest).
    pub fn modes(&self) -> Vec<Wave> {
        let mut out = Vec::with_capacity(self.len());
        let h = self.half();
        let m = self.modes_per_axis as i64;
        for idx in 0..self.len() {
            let mut rem = idx as i64;
            let mut k = [0i64; 3];
            for a in (0..self.dim).rev() {
                k[a] = rem % m - h;
                rem /= m;
            }
            out.push(k);
        }
        out
    }

    pub fn mode_at(&self, index: usize) -> Wave {
        let h = self.half();
        let m = self.modes_per_axis as i64;
        let mut rem = index as i64;
        let mut k = [0i64; 3];
        for a in (0..self.dim).rev() {
            k[a] = rem % m - h;
            rem /= m;
        }
        k
    }

    pub fn index_of(&self, k: Wave) -> Option<usize> {
        let h = self.half();
        let m = self.modes_per_axis as i64;
        let mut idx = 0i64;
        #[allow(clippy::needless_range_loop)]
        for a in 0..self.dim {
            if k[a].abs() > h {
                return None;
            }
            idx = idx * m + (k[a] + h);
        }
        Some(idx as usize)
    }

    /// Index of the reflected wavevector `-k`.
    pub fn conjugate_index(&self, index: usize) -> usize {
        let k = self.mode_at(index);
        self.index_of([-k[0], -k[1], -k[2]]).unwrap()
    }

    pub fn zero_index(&self) -> usize {
        self.index_of([0, 0, 0]).unwrap()
    }

    /// Uniform sample points in storage order.
    pub fn points<T: Real>(&self) -> Vec<Vec<T>> {
        let m = self.modes_per_axis;
        let step = real::<T>(2.0 * std::f64::consts::PI / m as f64);
        (0..self.len())
            .map(|idx| {
                let mut rem = idx;
                let mut x = vec![T::zero(); self.dim];
                for a in (0..self.dim).rev() {
                    x[a] = real::<T>((rem % m) as f64) * step;
                    rem /= m;
                }
                x
            })
            .collect()
    }

    /// Discrete analysis transform of real samples given in storage order.
    /// Round-trips with [`ModeGrid::synthesize`] to machine precision.
    pub fn analyze<T: Real>(&self, samples: &[T]) -> Result<Vec<C<T>>> {
        if samples.len() != self.len() {
            return Err(Error::Shape {
                context: "sample count must equal grid size",
                expected: self.len(),
                got: samples.len(),
            });
        }
        let mut data: Vec<C<T>> = samples.iter().map(|&x| lift(x)).collect();
        for axis in 0..self.dim {
            self.transform_axis(&mut data, axis, true);
        }
        Ok(data)
    }

    /// Synthesis transform: mode coefficients to complex grid samples.
    pub fn synthesize<T: Real>(&self, coeffs: &[C<T>]) -> Result<Vec<C<T>>> {
        if coeffs.len() != self.len() {
            return Err(Error::Shape {
                context: "coefficient count must equal grid size",
                expected: self.len(),
                got: coeffs.len(),
            });
        }
        let mut data = coeffs.to_vec();
        for axis in 0..self.dim {
            self.transform_axis(&mut data, axis, false);
        }
        Ok(data)
    }

    /// Synthesis restricted to the real part, reporting the largest leaked
    /// imaginary component (a Hermitian-symmetry diagnostic).
    pub fn synthesize_real<T: Real>(&self, coeffs: &[C<T>]) -> Result<(Vec<T>, T)> {
        let full = self.synthesize(coeffs)?;
        let mut worst = T::zero();
        let samples = full
            .iter()
            .map(|z| {
                if z.im.abs() > worst {
                    worst = z.im.abs();
                }
                z.re
            })
            .collect();
        Ok((samples, worst))
    }

    /// Separable one-axis transform; `analysis` applies the `1/m` weight and
    /// the negative twiddle sign.
    fn transform_axis<T: Real>(&self, data: &mut [C<T>], axis: usize, analysis: bool) {
        let m = self.modes_per_axis;
        let h = self.half();
        let total = self.len();
        let stride = m.pow((self.dim - 1 - axis) as u32);
        let sign = if analysis { -1.0 } else { 1.0 };
        let weight = if analysis {
            real::<T>(1.0 / m as f64)
        } else {
            T::one()
        };

        // Twiddle table on exact angles; indices are reduced mod m so the
        // table stays small and the transform deterministic.
        let mut twiddle = Vec::with_capacity(m);
        for r in 0..m {
            let angle = sign * 2.0 * std::f64::consts::PI * r as f64 / m as f64;
            twiddle.push(cplx::<T>(angle.cos(), angle.sin()));
        }

        let mut line = vec![C::new(T::zero(), T::zero()); m];
        let blocks = total / (m * stride);
        for block in 0..blocks {
            for offset in 0..stride {
                let base = block * m * stride + offset;
                for (j, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + j * stride];
                }
                for out_idx in 0..m {
                    // Analysis: output slots are modes, inputs are samples.
                    // Synthesis: output slots are samples, inputs are modes.
                    let mut acc = C::new(T::zero(), T::zero());
                    for (in_idx, &value) in line.iter().enumerate() {
                        let jk = if analysis {
                            in_idx as i64 * (out_idx as i64 - h)
                        } else {
                            out_idx as i64 * (in_idx as i64 - h)
                        };
                        let r = jk.rem_euclid(m as i64) as usize;
                        acc += value * twiddle[r];
                    }
                    data[base + out_idx * stride] = acc * weight;
                }
            }
        }
        // Analysis leaves coefficients already indexed by k + h; nothing to
        // reorder thanks to the mode-value loop above.
    }

    /// Evaluate a coefficient set at an arbitrary point by direct summation.
    pub fn evaluate_at<T: Real>(&self, coeffs: &[C<T>], x: &[T]) -> C<T> {
        let mut acc = C::new(T::zero(), T::zero());
        for (idx, k) in self.modes().iter().enumerate() {
            let mut phase = T::zero();
            for a in 0..self.dim {
                phase += real::<T>(k[a] as f64) * x[a];
            }
            acc += coeffs[idx] * C::new(phase.cos(), phase.sin());
        }
        acc
    }
}

/// A smooth real test function stored by its mode coefficients.
#[derive(Debug, Clone)]
pub struct TestFunction<T: Real> {
    name: String,
    coeffs: Vec<C<T>>,
}

impl<T: Real> TestFunction<T> {
    /// Build from raw coefficients, enforcing Hermitian symmetry by pairwise
    /// averaging so the represented function is exactly real.
    pub fn from_coeffs(
        name: impl Into<String>,
        grid: &ModeGrid,
        coeffs: Vec<C<T>>,
    ) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::Shape {
                context: "test-function coefficients must match the grid",
                expected: grid.len(),
                got: coeffs.len(),
            });
        }
        let mut sym = coeffs.clone();
        for idx in 0..coeffs.len() {
            let conj_idx = grid.conjugate_index(idx);
            let avg = (coeffs[idx] + coeffs[conj_idx].conj()) * real::<T>(0.5);
            sym[idx] = avg;
        }
        Ok(Self {
            name: name.into(),
            coeffs: sym,
        })
    }

    /// Transform real grid samples (storage order).
    pub fn from_samples(name: impl Into<String>, grid: &ModeGrid, samples: &[T]) -> Result<Self> {
        let coeffs = grid.analyze(samples)?;
        Self::from_coeffs(name, grid, coeffs)
    }

    /// `f = c` everywhere.
    pub fn constant(grid: &ModeGrid, c: T) -> Self {
        let mut coeffs = vec![C::new(T::zero(), T::zero()); grid.len()];
        coeffs[grid.zero_index()] = lift(c);
        Self {
            name: format!("const({})", c.to_f64().unwrap_or(f64::NAN)),
            coeffs,
        }
    }

    /// `f(x) = sin(k . x)` for a wavevector inside the grid.
    pub fn sine(grid: &ModeGrid, k: Wave) -> Result<Self> {
        let plus = grid.index_of(k).ok_or(Error::Shape {
            context: "sine wavevector outside grid",
            expected: grid.modes_per_axis(),
            got: 0,
        })?;
        let minus = grid.conjugate_index(plus);
        let mut coeffs = vec![C::new(T::zero(), T::zero()); grid.len()];
        coeffs[plus] = imag(real(-0.5));
        coeffs[minus] = imag(real(0.5));
        Ok(Self {
            name: format!("sin({:?})", &k[..grid.dim()]),
            coeffs,
        })
    }

    /// `f(x) = cos(k . x)`.
    pub fn cosine(grid: &ModeGrid, k: Wave) -> Result<Self> {
        let plus = grid.index_of(k).ok_or(Error::Shape {
            context: "cosine wavevector outside grid",
            expected: grid.modes_per_axis(),
            got: 0,
        })?;
        let minus = grid.conjugate_index(plus);
        let mut coeffs = vec![C::new(T::zero(), T::zero()); grid.len()];
        coeffs[plus] = cplx(0.5, 0.0);
        coeffs[minus] = cplx(0.5, 0.0);
        Ok(Self {
            name: format!("cos({:?})", &k[..grid.dim()]),
            coeffs,
        })
    }

    /// Smooth periodic bump centred at `x = pi` on every axis, truncated to
    /// the grid by sampling.
    pub fn gaussian_bump(grid: &ModeGrid, width: T) -> Result<Self> {
        let points = grid.points::<T>();
        let w2 = width * width;
        let samples: Vec<T> = points
            .iter()
            .map(|x| {
                let mut arg = T::zero();
                for &xa in x {
                    arg += ((xa - T::pi()).cos() - T::one()) / w2;
                }
                arg.exp()
            })
            .collect();
        Self::from_samples(
            format!("gaussian_bump({})", width.to_f64().unwrap_or(f64::NAN)),
            grid,
            &samples,
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn coeffs(&self) -> &[C<T>] {
        &self.coeffs
    }

    pub fn coeff(&self, index: usize) -> C<T> {
        self.coeffs[index]
    }

    /// Evaluate the function at an arbitrary point.
    pub fn value_at(&self, grid: &ModeGrid, x: &[T]) -> T {
        grid.evaluate_at(&self.coeffs, x).re
    }

    /// Sum of coefficient moduli: a rigorous sup-norm bound.
    pub fn coeff_mass(&self) -> T {
        self.coeffs
            .iter()
            .fold(T::zero(), |acc, z| acc + z.modulus())
    }
}

/// Per-mode state vectors at a fixed time: the spectral representation of a
/// vector-valued field on the torus.
#[derive(Debug, Clone)]
pub struct StateField<T: Real> {
    pub time: T,
    /// One complex `N`-vector per mode, in grid storage order.
    pub values: Vec<DVector<C<T>>>,
}

impl<T: Real> StateField<T> {
    pub fn zero(grid: &ModeGrid, n_states: usize, time: T) -> Self {
        Self {
            time,
            values: vec![DVector::zeros(n_states); grid.len()],
        }
    }

    pub fn n_states(&self) -> usize {
        self.values.first().map_or(0, |v| v.len())
    }

    /// Real grid samples per state (rows: states, inner: grid order) plus the
    /// worst leaked imaginary part across states.
    pub fn to_grid(&self, grid: &ModeGrid) -> Result<(Vec<Vec<T>>, T)> {
        let n = self.n_states();
        let mut out = Vec::with_capacity(n);
        let mut worst = T::zero();
        for s in 0..n {
            let coeffs: Vec<C<T>> = self.values.iter().map(|v| v[s]).collect();
            let (samples, leak) = grid.synthesize_real(&coeffs)?;
            if leak > worst {
                worst = leak;
            }
            out.push(samples);
        }
        Ok((out, worst))
    }

    /// Max modulus over modes and states of the coefficients.
    pub fn coeff_sup(&self) -> T {
        self.values
            .iter()
            .flat_map(|v| v.iter())
            .map(|z| z.modulus())
            .fold(T::zero(), |a, b| if b > a { b } else { a })
    }

    /// Subtract another field of identical layout.
    pub fn difference(&self, other: &Self) -> Self {
        assert_eq!(self.values.len(), other.values.len());
        Self {
            time: self.time,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// Sup norm over grid points and states of the real-space field.
    pub fn sup_norm(&self, grid: &ModeGrid) -> Result<T> {
        let (samples, _) = self.to_grid(grid)?;
        Ok(samples
            .iter()
            .flat_map(|row| row.iter())
            .map(|x| x.abs())
            .fold(T::zero(), |a, b| if b > a { b } else { a }))
    }

    /// Euclidean norm over all grid samples and states.
    pub fn l2_norm(&self, grid: &ModeGrid) -> Result<T> {
        let (samples, _) = self.to_grid(grid)?;
        Ok(samples
            .iter()
            .flat_map(|row| row.iter())
            .fold(T::zero(), |acc, &x| acc + x * x)
            .sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn mode_grid_shape_invariants() {
        for (d, m) in [(1usize, 5usize), (2, 5), (3, 3)] {
            let grid = ModeGrid::new(d, m).unwrap();
            let modes = grid.modes();
            assert_eq!(modes.len(), m.pow(d as u32));
            let mut sorted = modes.clone();
            sorted.sort();
            sorted.dedup();
            assert_eq!(sorted.len(), modes.len(), "duplicate wavevectors");
            assert!(modes.contains(&[0, 0, 0]));
            for (i, k) in modes.iter().enumerate() {
                assert_eq!(grid.index_of(*k), Some(i));
            }
        }
        assert!(ModeGrid::new(1, 4).is_err());
        assert!(ModeGrid::new(4, 5).is_err());
    }

    #[test]
    fn sine_coefficients_match_euler_formula() {
        let grid = ModeGrid::new(1, 5).unwrap();
        let f = TestFunction::<f64>::sine(&grid, [1, 0, 0]).unwrap();
        let plus = grid.index_of([1, 0, 0]).unwrap();
        let minus = grid.index_of([-1, 0, 0]).unwrap();
        assert_relative_eq!(f.coeff(plus).im, -0.5, epsilon = 1e-15);
        assert_relative_eq!(f.coeff(minus).im, 0.5, epsilon = 1e-15);
        for (idx, c) in f.coeffs().iter().enumerate() {
            if idx != plus && idx != minus {
                assert!(c.norm() < 1e-15);
            }
        }
    }

    #[test]
    fn constant_transforms_to_zero_mode() {
        let grid = ModeGrid::new(1, 5).unwrap();
        let samples = vec![1.0f64; grid.len()];
        let f = TestFunction::from_samples("one", &grid, &samples).unwrap();
        assert_relative_eq!(f.coeff(grid.zero_index()).re, 1.0, epsilon = 1e-14);
        let rest: f64 = f
            .coeffs()
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != grid.zero_index())
            .map(|(_, c)| c.norm())
            .sum();
        assert!(rest < 1e-13);
    }

    #[test]
    fn sine_samples_analyze_to_sine_modes() {
        let grid = ModeGrid::new(1, 5).unwrap();
        let samples: Vec<f64> = grid.points::<f64>().iter().map(|x| x[0].sin()).collect();
        let f = TestFunction::from_samples("sin", &grid, &samples).unwrap();
        let direct = TestFunction::<f64>::sine(&grid, [1, 0, 0]).unwrap();
        for (a, b) in f.coeffs().iter().zip(direct.coeffs()) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn two_dimensional_round_trip() {
        let grid = ModeGrid::new(2, 5).unwrap();
        let samples: Vec<f64> = grid
            .points::<f64>()
            .iter()
            .map(|x| (x[0]).sin() + 0.3 * (2.0 * x[1]).cos())
            .collect();
        let coeffs = grid.analyze(&samples).unwrap();
        let (back, leak) = grid.synthesize_real(&coeffs).unwrap();
        assert!(leak < 1e-13);
        for (a, b) in samples.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn evaluate_at_matches_grid_samples() {
        let grid = ModeGrid::new(1, 9).unwrap();
        let f = TestFunction::<f64>::sine(&grid, [2, 0, 0]).unwrap();
        for x in [0.3, 1.7, 4.4] {
            assert_relative_eq!(f.value_at(&grid, &[x]), (2.0 * x).sin(), epsilon = 1e-12);
        }
    }

    #[test]
    fn gaussian_bump_is_real_and_peaked_at_pi() {
        let grid = ModeGrid::new(1, 33).unwrap();
        let f = TestFunction::<f64>::gaussian_bump(&grid, 0.8).unwrap();
        let peak = f.value_at(&grid, &[std::f64::consts::PI]);
        let off = f.value_at(&grid, &[0.1]);
        assert!(peak > 0.99 && peak < 1.01);
        assert!(off < peak);
    }

    proptest! {
        #[test]
        fn analysis_synthesis_round_trip(values in proptest::collection::vec(-10.0f64..10.0, 9)) {
            let grid = ModeGrid::new(1, 9).unwrap();
            let coeffs = grid.analyze(&values).unwrap();
            let (back, leak) = grid.synthesize_real(&coeffs).unwrap();
            prop_assert!(leak < 1e-12);
            for (a, b) in values.iter().zip(&back) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}
