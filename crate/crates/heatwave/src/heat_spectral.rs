//! Eigendata of the heat operator `z ↦ z_xx` on (0,1) with `z_x(0) = 0` and the
//! Robin condition `z_x(1) = -α z(1)` (Neumann for `α = 0`).
//!
//! Eigenvalues `λ_j`, `j = 1, 2, ...`, are the roots of
//! `-√λ sin √λ + α cos √λ = 0` with `√λ ∈ ((j-1)π, (j-1/2)π)`. The
//! normalized eigenfunction is `e_j(x) = c_j cos(√λ_j x)`.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use crate::error::{invalid, Error, Result};

/// Bisection stops once the bracket is this narrow; Newton finishes.
const BISECTION_WIDTH: f64 = 1e-10;
const NEWTON_STEPS: usize = 8;

/// A Robin eigenvalue with its branch-shifted residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobinRoot {
    pub lambda: f64,
    pub sqrt_lambda: f64,
    /// `|tan y - α/√λ|` with `y = √λ - (j-1)π`.
    pub residual: f64,
}

fn check_args(j: usize, alpha: f64) -> Result<()> {
    if j < 1 {
        return invalid("heat eigenvalue index j must be >= 1");
    }
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return invalid(format!("Robin parameter must be finite and >= 0, got {alpha}"));
    }
    Ok(())
}

/// Solves for `λ_{j,α}`. `α = 0` returns `((j-1)π)²` without iteration.
pub fn robin_root(j: usize, alpha: f64) -> Result<RobinRoot> {
    check_args(j, alpha)?;
    let shift = (j - 1) as f64 * PI;
    if alpha == 0.0 {
        return Ok(RobinRoot {
            lambda: shift * shift,
            sqrt_lambda: shift,
            residual: 0.0,
        });
    }
    // h(y) = (y + shift) sin y - α cos y is increasing on [0, π/2],
    // h(0) = -α < 0 and h(π/2) = π/2 + shift > 0.
    let h = |y: f64| (y + shift) * y.sin() - alpha * y.cos();
    let dh = |y: f64| (1.0 + alpha) * y.sin() + (y + shift) * y.cos();
    let (mut lo, mut hi) = (0.0, FRAC_PI_2);
    while hi - lo > BISECTION_WIDTH {
        let mid = 0.5 * (lo + hi);
        if h(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut y = 0.5 * (lo + hi);
    for _ in 0..NEWTON_STEPS {
        let step = h(y) / dh(y);
        let next = y - step;
        if !(next > lo - BISECTION_WIDTH && next < hi + BISECTION_WIDTH) {
            break;
        }
        y = next;
        if step.abs() <= 1e-17 * y.max(1.0) {
            break;
        }
    }
    let x = y + shift;
    if !(x > shift && x < shift + FRAC_PI_2) {
        return Err(Error::Numerical(format!(
            "Robin root for j={j}, alpha={alpha} left its bracket"
        )));
    }
    Ok(RobinRoot {
        lambda: x * x,
        sqrt_lambda: x,
        residual: (y.tan() - alpha / x).abs(),
    })
}

/// `λ_{j,α}`.
pub fn solve_robin_eigenvalue(j: usize, alpha: f64) -> Result<f64> {
    Ok(robin_root(j, alpha)?.lambda)
}

/// Small-α approximation of `√λ_{j,α}`.
///
/// `j = 1`: `√α - α^{3/2}/6 + 2α^{5/2}/45`;
/// `j ≥ 2`: `s + α/s - α²/s³` with `s = (j-1)π`.
pub fn eigenvalue_expansion(j: usize, alpha: f64) -> Result<f64> {
    check_args(j, alpha)?;
    if !(alpha > 0.0) {
        return invalid("expansion requires alpha > 0");
    }
    if j == 1 {
        let r = alpha.sqrt();
        Ok(r - alpha * r / 6.0 + 2.0 * alpha * alpha * r / 45.0)
    } else {
        let s = (j - 1) as f64 * PI;
        Ok(s + alpha / s - alpha * alpha / (s * s * s))
    }
}

/// Normalization and boundary traces of `e_j = c cos(√λ x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub c: f64,
    /// `e_j(0)`
    pub trace0: f64,
    /// `e_j(1)`
    pub trace1: f64,
}

/// `c² = 2 / (1 + sin²√λ / α)`; Neumann closed form when `α = 0`.
pub fn normalization(j: usize, alpha: f64, lambda: f64) -> Result<Normalization> {
    check_args(j, alpha)?;
    if !(lambda >= 0.0) {
        return invalid("eigenvalue must be >= 0");
    }
    let s = lambda.sqrt();
    if alpha == 0.0 {
        let c = if j == 1 { 1.0 } else { SQRT_2 };
        let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
        return Ok(Normalization {
            c,
            trace0: c,
            trace1: sign * c,
        });
    }
    let sn = s.sin();
    let c = (2.0 / (1.0 + sn * sn / alpha)).sqrt();
    Ok(Normalization {
        c,
        trace0: c,
        trace1: c * s.cos(),
    })
}

/// Truncated heat eigendata, `j = 1..=n` (stored at index `j - 1`).
#[derive(Debug, Clone)]
pub struct HeatSpectrum {
    pub alpha: f64,
    pub eigenvalues: Vec<f64>,
    pub sqrt_eigenvalues: Vec<f64>,
    pub normalizations: Vec<f64>,
    pub trace0: Vec<f64>,
    pub trace1: Vec<f64>,
    pub residuals: Vec<f64>,
}

impl HeatSpectrum {
    pub fn build(alpha: f64, n: usize) -> Result<Self> {
        if n < 1 {
            return invalid("heat truncation N must be >= 1");
        }
        let mut out = HeatSpectrum {
            alpha,
            eigenvalues: Vec::with_capacity(n),
            sqrt_eigenvalues: Vec::with_capacity(n),
            normalizations: Vec::with_capacity(n),
            trace0: Vec::with_capacity(n),
            trace1: Vec::with_capacity(n),
            residuals: Vec::with_capacity(n),
        };
        for j in 1..=n {
            let root = robin_root(j, alpha)?;
            let nz = normalization(j, alpha, root.lambda)?;
            out.eigenvalues.push(root.lambda);
            out.sqrt_eigenvalues.push(root.sqrt_lambda);
            out.normalizations.push(nz.c);
            out.trace0.push(nz.trace0);
            out.trace1.push(nz.trace1);
            out.residuals.push(root.residual);
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `e_j(x)` for the 0-based index `i = j - 1`.
    pub fn eval(&self, i: usize, x: f64) -> f64 {
        self.normalizations[i] * (self.sqrt_eigenvalues[i] * x).cos()
    }

    /// `e_j'(x)`.
    pub fn eval_dx(&self, i: usize, x: f64) -> f64 {
        let s = self.sqrt_eigenvalues[i];
        -self.normalizations[i] * s * (s * x).sin()
    }

    /// Checks strict interlacing (α > 0), monotonicity and root residuals.
    pub fn check_invariants(&self, residual_tol: f64) -> std::result::Result<(), String> {
        for (i, (&lam, &res)) in self.eigenvalues.iter().zip(&self.residuals).enumerate() {
            let j = i + 1;
            let lo = ((j - 1) as f64 * PI).powi(2);
            let hi = ((j as f64 - 0.5) * PI).powi(2);
            if self.alpha > 0.0 && !(lam > lo && lam < hi) {
                return Err(format!("j={j}: {lam} not in ({lo}, {hi})"));
            }
            if self.alpha == 0.0 && lam != lo {
                return Err(format!("j={j}: Neumann eigenvalue {lam} != {lo}"));
            }
            if res > residual_tol {
                return Err(format!("j={j}: residual {res:e} > {residual_tol:e}"));
            }
            if i > 0 && !(lam > self.eigenvalues[i - 1]) {
                return Err(format!("j={j}: eigenvalues not increasing"));
            }
        }
        Ok(())
    }

    /// CSV rows `j, lambda, sqrt_lambda, c, trace0, trace1`.
    pub fn csv_rows(&self) -> Vec<[f64; 6]> {
        (0..self.len())
            .map(|i| {
                [
                    (i + 1) as f64,
                    self.eigenvalues[i],
                    self.sqrt_eigenvalues[i],
                    self.normalizations[i],
                    self.trace0[i],
                    self.trace1[i],
                ]
            })
            .collect()
    }
}
