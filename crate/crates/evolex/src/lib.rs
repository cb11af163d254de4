//! Two-scale analysis of switched-velocity Markov evolutions on the torus.
//!
//! The library builds the diffusion-limit expansion of the backward system
//! for a random evolution whose velocity switches along a finite ergodic
//! chain, and validates it against two independent ground truths: an exact
//! per-mode solver and a Monte Carlo trajectory simulator.
//!
//! Everything is generic over the working scalar (`f32` or `f64`) through
//! the [`Real`] trait; concrete aliases for the common `f64` instantiation
//! live at the crate root.
//!
//! ```
//! use evolex::{builtin, exact, ChainAlgebra64, ExpansionSet64, ModeGrid, Tolerances};
//! use evolex::grid::TestFunction;
//!
//! let tol = Tolerances::default();
//! let model = builtin::builtin_model::<f64>("two_state_telegraph", &tol)?;
//! let algebra = ChainAlgebra64::new(model.clone(), &tol)?;
//! let grid = ModeGrid::new(1, 9)?;
//! let f = TestFunction::sine(&grid, [1, 0, 0])?;
//!
//! // Expansion through second order vs the exact solution at eps = 0.1.
//! let set = ExpansionSet64::build(&algebra, &grid, &f, 2, &tol)?;
//! let truncated = set.truncated_solution(2, 0.1, 1.0)?;
//! let reference = exact::exact_solution(&model, &f, &grid, 0.1, 1.0)?;
//! let gap = reference.difference(&truncated).sup_norm(&grid)?;
//! assert!(gap < 1e-3); // next omitted term is O(eps^3)
//! # Ok::<(), evolex::Error>(())
//! ```

pub mod builtin;
pub mod chain;
pub mod config;
pub mod ep;
pub mod error;
pub mod exact;
pub mod expansion;
pub mod grid;
pub mod linalg;
pub mod mc;
pub mod operators;
pub mod report;
pub mod residual;
pub mod scalar;
pub mod sweep;
pub mod tol;

pub use chain::{ChainAlgebra, ChainModel};
pub use error::{Error, Result};
pub use expansion::{ExpansionSet, RegularPipeline};
pub use grid::{ModeGrid, StateField, TestFunction};
pub use scalar::{Real, C};
pub use tol::Tolerances;

/// Crate version embedded into every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// `f64` instantiations of the core types.
pub type ChainModel64 = chain::ChainModel<f64>;
pub type ChainAlgebra64 = chain::ChainAlgebra<f64>;
pub type TestFunction64 = grid::TestFunction<f64>;
pub type StateField64 = grid::StateField<f64>;
pub type EpProfile64 = ep::EpProfile<f64>;
pub type ExpansionSet64 = expansion::ExpansionSet<f64>;

/// `f32` instantiations for callers that trade accuracy for footprint.
pub type ChainModel32 = chain::ChainModel<f32>;
pub type ChainAlgebra32 = chain::ChainAlgebra<f32>;
pub type ExpansionSet32 = expansion::ExpansionSet<f32>;
