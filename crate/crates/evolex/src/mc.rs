//! Ground truth #2: Monte Carlo simulation of the switched evolution on the
//! fast clock. Paths are independent work items with their own counter-based
//! RNG streams, and the reduction is a fixed-order pairwise sum, so results
//! are bit-identical for a given `(seed, paths)` regardless of scheduling.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::chain::ChainModel;
use crate::error::{Error, Result};
use crate::grid::{ModeGrid, TestFunction};
use crate::scalar::{real, Real};

/// Sample statistics of `f(x(t))` per start state.
#[derive(Debug, Clone)]
pub struct McEstimate<T: Real> {
    pub mean: DVector<T>,
    pub std_error: DVector<T>,
    pub paths: usize,
    pub seed: u64,
}

/// One simulated trajectory on the fast clock.
#[derive(Debug, Clone)]
pub struct Trajectory<T: Real> {
    pub start_state: usize,
    pub jump_times: Vec<T>,
    pub visited: Vec<usize>,
    pub terminal: Vec<T>,
}

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Simulate one path of the evolution started at `(x, state)` over fast-clock
/// horizon `t / eps^2`, accumulating displacement exactly along the piecewise
/// constant velocity, and return the terminal torus position.
pub fn simulate_path<T: Real>(
    model: &ChainModel<T>,
    x: &[T],
    state0: usize,
    horizon: T,
    eps: T,
    rng: &mut ChaCha8Rng,
    record: Option<&mut Trajectory<T>>,
) -> Vec<T> {
    let dim = model.dim();
    let mut pos: Vec<T> = x.to_vec();
    let mut state = state0;
    let mut clock = T::zero();
    let mut trace = record;

    loop {
        let rate = model.exit_rate(state);
        // Inverse-CDF exponential holding time on the fast clock; the
        // complemented uniform keeps the argument inside (0, 1].
        let u: f64 = rng.gen::<f64>();
        let hold = -real::<T>((1.0 - u).ln()) / rate;
        let duration = if clock + hold >= horizon {
            horizon - clock
        } else {
            hold
        };
        #[allow(clippy::needless_range_loop)]
        for a in 0..dim {
            pos[a] += eps * duration * model.velocities()[(a, state)];
        }
        clock += duration;
        if clock >= horizon {
            break;
        }
        // Embedded jump: pick the target with probability q_ij / q_i.
        let draw: f64 = rng.gen::<f64>();
        let mut threshold = real::<T>(draw) * rate;
        let mut next = state;
        for j in 0..model.n_states() {
            if j == state {
                continue;
            }
            let q = model.generator()[(state, j)];
            if q <= T::zero() {
                continue;
            }
            if threshold < q {
                next = j;
                break;
            }
            threshold -= q;
        }
        state = next;
        if let Some(tr) = trace.as_deref_mut() {
            tr.jump_times.push(clock);
            tr.visited.push(state);
        }
    }

    let wrapped: Vec<T> = pos
        .iter()
        .map(|&p| {
            let twopi = real::<T>(TWO_PI);
            let mut w = p % twopi;
            if w < T::zero() {
                w += twopi;
            }
            w
        })
        .collect();
    if let Some(tr) = trace {
        tr.terminal = wrapped.clone();
    }
    wrapped
}

/// Monte Carlo estimate of the functional `E_i f(x(t))` for every start
/// state `i`, with `paths` trajectories per start state.
#[allow(clippy::too_many_arguments)]
pub fn mc_estimate<T: Real>(
    model: &ChainModel<T>,
    f: &TestFunction<T>,
    grid: &ModeGrid,
    x: &[T],
    t: T,
    eps: T,
    paths: usize,
    seed: u64,
) -> Result<McEstimate<T>> {
    if t <= T::zero() {
        return Err(Error::InvalidHorizon {
            t: t.to_f64().unwrap_or(f64::NAN),
        });
    }
    if paths < 100 {
        return Err(Error::Config(format!(
            "at least 100 paths are required, got {paths}"
        )));
    }
    if x.len() != model.dim() {
        return Err(Error::Shape {
            context: "query point dimension",
            expected: model.dim(),
            got: x.len(),
        });
    }
    let horizon = t / (eps * eps);
    let n = model.n_states();

    let mut mean = DVector::zeros(n);
    let mut std_error = DVector::zeros(n);
    for state in 0..n {
        // Independent streams per (start state, path index).
        let base = state as u64 * paths as u64;
        let values: Vec<T> = (0..paths)
            .into_par_iter()
            .map(|p| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(base + p as u64);
                let terminal = simulate_path(model, x, state, horizon, eps, &mut rng, None);
                f.value_at(grid, &terminal)
            })
            .collect();
        let m = pairwise_sum(&values) / real(paths as f64);
        let deviations: Vec<T> = values.iter().map(|&v| (v - m) * (v - m)).collect();
        let var = pairwise_sum(&deviations) / real((paths - 1) as f64);
        mean[state] = m;
        std_error[state] = (var / real(paths as f64)).sqrt();
    }

    Ok(McEstimate {
        mean,
        std_error,
        paths,
        seed,
    })
}

/// Fixed-order pairwise reduction; deterministic and more accurate than a
/// running sum.
pub fn pairwise_sum<T: Real>(values: &[T]) -> T {
    match values.len() {
        0 => T::zero(),
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let (a, b) = values.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}
