//! Numerical tolerances, fixed here and overridable through the config file.

use serde::{Deserialize, Serialize};

/// All thresholds used by validation gates and internal branch decisions.
///
/// Values are stated in `f64` and converted to the working scalar on use.
/// Every report embeds the resolved set for provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Maximum allowed absolute row sum of the generator.
    pub row_sum: f64,
    /// Stationary-solve residual bound, relative to the generator norm.
    pub stationary_residual: f64,
    /// Entry-wise bound for the algebraic identities of the chain algebra.
    pub algebra_identity: f64,
    /// An eigenvalue with modulus below this counts as the zero eigenvalue.
    pub zero_eigenvalue: f64,
    /// Bound on the spectral reconstruction error of the semigroup.
    pub spectral_reconstruction: f64,
    /// Ceiling on spectral projector norms; near-defective generators show
    /// up as huge cancelling projectors long before reconstruction fails.
    pub projector_norm_limit: f64,
    /// Maximum stationary mean velocity for a model to count as balanced.
    pub balance: f64,
    /// Smallest admissible eigenvalue of the diffusion tensor.
    pub diffusion_min_eig: f64,
    /// Condition-number ceiling before a linear system counts as singular.
    pub condition_limit: f64,
    /// Relative tolerance for treating two exponents as equal (resonant).
    pub resonance: f64,
    /// A decaying profile may not contain exponents with real part above
    /// minus this margin.
    pub decay_margin: f64,
    /// Coefficient norms below this are treated as zero in decay checks.
    pub negligible_coeff: f64,
    /// Guard on `Re(exponent) * t` before evaluating an exponential.
    pub overflow_exponent: f64,
    /// Per-mode bound for the hierarchy and layer residuals.
    pub hierarchy_residual: f64,
    /// Relative tolerance of the transform-domain cross-check.
    pub laplace_crosscheck: f64,
    /// Errors at or below this are treated as exactly converged in sweeps.
    pub degenerate_error: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            row_sum: 1e-12,
            stationary_residual: 1e-12,
            algebra_identity: 1e-10,
            zero_eigenvalue: 1e-9,
            spectral_reconstruction: 1e-8,
            projector_norm_limit: 1e4,
            balance: 1e-12,
            diffusion_min_eig: 1e-12,
            condition_limit: 1e14,
            resonance: 1e-9,
            decay_margin: 1e-12,
            negligible_coeff: 1e-12,
            overflow_exponent: 700.0,
            hierarchy_residual: 1e-9,
            laplace_crosscheck: 1e-6,
            degenerate_error: 1e-12,
        }
    }
}

impl Tolerances {
    /// Apply a `key = value` override coming from the `[tolerances]` config
    /// section. Unknown keys are rejected so typos do not silently pass.
    pub fn set(&mut self, key: &str, value: f64) -> Result<(), String> {
        match key {
            "row_sum" => self.row_sum = value,
            "stationary_residual" => self.stationary_residual = value,
            "algebra_identity" => self.algebra_identity = value,
            "zero_eigenvalue" => self.zero_eigenvalue = value,
            "spectral_reconstruction" => self.spectral_reconstruction = value,
            "projector_norm_limit" => self.projector_norm_limit = value,
            "balance" => self.balance = value,
            "diffusion_min_eig" => self.diffusion_min_eig = value,
            "condition_limit" => self.condition_limit = value,
            "resonance" => self.resonance = value,
            "decay_margin" => self.decay_margin = value,
            "negligible_coeff" => self.negligible_coeff = value,
            "overflow_exponent" => self.overflow_exponent = value,
            "hierarchy_residual" => self.hierarchy_residual = value,
            "laplace_crosscheck" => self.laplace_crosscheck = value,
            "degenerate_error" => self.degenerate_error = value,
            other => return Err(format!("unknown tolerance `{other}`")),
        }
        Ok(())
    }
}
