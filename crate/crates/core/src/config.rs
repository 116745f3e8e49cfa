//! Default tolerances and solver limits.
//!
//! Every check reads its thresholds from a [`Tolerances`] record so that the
//! command line can override them in one place.

use serde::{Deserialize, Serialize};

/// Default time grid for semigroup checks.
pub const DEFAULT_T_GRID: [f64; 4] = [0.01, 0.1, 1.0, 10.0];

/// Largest operator dimension handled by dense eigendecomposition.
pub const DEFAULT_DENSE_LIMIT: usize = 2000;

/// Largest Krylov subspace built per time step.
pub const DEFAULT_KRYLOV_MAX_DIM: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Allowed excess of `|e^{-tA}ξ|` over `e^{-tB}|ξ|`.
    pub domination: f64,
    /// Allowed negativity of `e^{-tB} f` for `f ≥ 0`.
    pub positivity: f64,
    /// Slack for form inequalities (Beurling-Deny, lattice, Kato).
    pub form: f64,
    /// Slack for the fiberwise vector inequality.
    pub vector: f64,
    /// Unitarity residual accepted as is.
    pub unitarity: f64,
    /// Unitarity residual up to which a transport is re-orthonormalized.
    pub unitarity_repair: f64,
    /// Hermiticity residual for assembled matrices and endomorphisms.
    pub hermitian: f64,
    /// Lowest admissible eigenvalue of a pointwise positive endomorphism.
    pub psd: f64,
    /// Pairing tolerance for `⟨u(x), v(x)⟩ = |u(x)||v(x)|`.
    pub pairing: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            domination: 1e-10,
            positivity: 1e-12,
            form: 1e-10,
            vector: 1e-12,
            unitarity: 1e-12,
            unitarity_repair: 1e-8,
            hermitian: 1e-12,
            psd: 1e-12,
            pairing: 1e-12,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> crate::Result<()> {
        let all = [
            self.domination,
            self.positivity,
            self.form,
            self.vector,
            self.unitarity,
            self.unitarity_repair,
            self.hermitian,
            self.psd,
            self.pairing,
        ];
        if all.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(crate::Error::InvalidParameter(
                "tolerances must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }
}
