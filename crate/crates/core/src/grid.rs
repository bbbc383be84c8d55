use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Geometric wavenumber ladder k_n = k0 * lambda^n shared by both shell models.
///
/// Immutable after construction; `new` rejects grids that would break the
/// monotonicity invariant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellGrid {
    k0: f64,
    lambda: f64,
    n_shells: usize,
}

impl ShellGrid {
    pub fn new(k0: f64, lambda: f64, n_shells: usize) -> Result<Self> {
        let grid = Self { k0, lambda, n_shells };
        let violations = grid.violations();
        if violations.is_empty() {
            Ok(grid)
        } else {
            Err(Error::Validation(violations.join("; ")))
        }
    }

    /// Constraint check used both by `new` and by config validation.
    pub(crate) fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.k0 > 0.0) || !self.k0.is_finite() {
            v.push("grid.k0 must be positive".to_string());
        }
        if !(self.lambda > 1.0) || !self.lambda.is_finite() {
            v.push("grid.lambda must exceed 1".to_string());
        }
        if self.n_shells < 1 {
            v.push("grid.n_shells must be at least 1".to_string());
        }
        v
    }

    pub fn k0(&self) -> f64 {
        self.k0
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn n_shells(&self) -> usize {
        self.n_shells
    }

    /// k_n for a single shell index.
    pub fn wavenumber(&self, n: usize) -> f64 {
        debug_assert!(n < self.n_shells);
        // Iterated multiplication keeps consecutive ratios within one ulp of
        // lambda, which powi does not guarantee.
        let mut k = self.k0;
        for _ in 0..n {
            k *= self.lambda;
        }
        k
    }

    /// All shell wavenumbers [k0 * lambda^n for n = 0..n_shells-1], strictly increasing.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_shells);
        let mut k = self.k0;
        for _ in 0..self.n_shells {
            out.push(k);
            k *= self.lambda;
        }
        out
    }
}
