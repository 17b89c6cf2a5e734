//! The stiff linear model problem `u' = λu, u(0) = u0` on `[0, x_end]` and
//! the uniform training grid.

use crate::{Error, Result};

/// First-order linear initial-value problem with exact solution
/// `u(x) = u0·e^{λx}`. Negative `λ` models damping; the more negative, the
/// stiffer the problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StiffLinearIvp {
    lambda: f64,
    u0: f64,
    x_end: f64,
}

impl StiffLinearIvp {
    pub fn new(lambda: f64, u0: f64, x_end: f64) -> Result<Self> {
        if !lambda.is_finite() {
            return Err(Error::config("lambda", "must be finite"));
        }
        if !u0.is_finite() {
            return Err(Error::config("u0", "must be finite"));
        }
        if !(x_end > 0.0) || !x_end.is_finite() {
            return Err(Error::config("xend", "must be positive and finite"));
        }
        Ok(Self { lambda, u0, x_end })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn u0(&self) -> f64 {
        self.u0
    }

    pub fn x_end(&self) -> f64 {
        self.x_end
    }

    /// Exact solution `u0·e^{λx}`.
    pub fn exact_solution(&self, x: f64) -> f64 {
        self.u0 * (self.lambda * x).exp()
    }
}

/// Strictly increasing evaluation points.
///
/// Training grids come from [`Grid::uniform`] and always start at 0;
/// [`Grid::from_points`] admits arbitrary increasing points for evaluation
/// and plotting.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points: Vec<f64>,
}

impl Grid {
    /// Uniform grid of `n` points covering `[0, x_end]`, endpoints included.
    pub fn uniform(x_end: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 grid points, got {n}"
            )));
        }
        if !(x_end > 0.0) || !x_end.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "domain end must be positive and finite, got {x_end}"
            )));
        }
        let steps = (n - 1) as f64;
        // i/steps hits 0 and 1 exactly, so both endpoints are exact
        let points = (0..n).map(|i| x_end * (i as f64 / steps)).collect();
        Ok(Self { points })
    }

    /// Wraps explicit points; they must be finite and strictly increasing.
    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidGrid("grid must not be empty".into()));
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidGrid("grid points must be finite".into()));
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGrid(
                "grid points must be strictly increasing".into(),
            ));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}
