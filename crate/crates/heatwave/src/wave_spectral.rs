//! Wave subsystem on `H¹_(1)(0,1) × L²(0,1)` with generator
//! `E(w, w̃) = (w̃, w_xx)`, `w(1) = 0`, `w_x(0) = 0`, and observation
//! `F*(ψ, ψ̃) = -ψ̃(0)`.
//!
//! Eigenvalues are `iμ_k`, `μ_k = π(k + 1/2)`, with eigenvectors
//! `f_k = (√2/μ_k)(cos μ_k x, iμ_k cos μ_k x)`. Under the energy pairing
//! `⟨(w,w̃),(v,ṽ)⟩_W = ∫ w_x v̄_x + w̃ ṽ̄` these have `‖f_k‖_W = √2`; the unit
//! vectors `f̂_k = f_k/√2` are the coordinates used for states.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64 as C64;

use crate::error::{invalid, Error, Result};

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// `‖f_k‖_W` for the closed-form eigenvectors.
pub const MODE_NORM: f64 = SQRT_2;

pub fn mu(k: i64) -> f64 {
    PI * (k as f64 + 0.5)
}

/// `(μ_k, F* f_k)`; the observation is `-i√2` for every `k`.
pub fn wave_eigendata(k: i64) -> (f64, C64) {
    let (_, second) = eval_wave_eigenvector(k, 0.0);
    (mu(k), -second)
}

/// `f_k(x) = ((√2/μ_k) cos μ_k x, i√2 cos μ_k x)`.
pub fn eval_wave_eigenvector(k: i64, x: f64) -> (C64, C64) {
    let m = mu(k);
    let c = (m * x).cos();
    (C64::new(SQRT_2 / m * c, 0.0), I * (SQRT_2 * c))
}

/// `∂_x` of the first component of `f_k`.
pub fn eval_wave_eigenvector_dx(k: i64, x: f64) -> C64 {
    C64::new(-SQRT_2 * (mu(k) * x).sin(), 0.0)
}

/// Symmetric window `k = -K..=K-1` so modes pair as `±μ`.
#[derive(Debug, Clone)]
pub struct WaveSpectrum {
    pub half_width: usize,
    pub ks: Vec<i64>,
    pub mu: Vec<f64>,
    pub fstar: Vec<C64>,
}

impl WaveSpectrum {
    pub fn new(half_width: usize) -> Result<Self> {
        if half_width < 1 {
            return invalid("wave truncation K must be >= 1");
        }
        let kk = half_width as i64;
        let ks: Vec<i64> = (-kk..kk).collect();
        let mu = ks.iter().map(|&k| mu(k)).collect();
        let fstar = ks.iter().map(|&k| wave_eigendata(k).1).collect();
        Ok(Self {
            half_width,
            ks,
            mu,
            fstar,
        })
    }

    pub fn len(&self) -> usize {
        self.ks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ks.is_empty()
    }

    pub fn index_of(&self, k: i64) -> Option<usize> {
        let i = k + self.half_width as i64;
        (i >= 0 && (i as usize) < self.len()).then_some(i as usize)
    }

    /// Index of the partner mode `-k-1` (`μ_{-k-1} = -μ_k`).
    pub fn partner(&self, i: usize) -> usize {
        self.len() - 1 - i
    }

    /// Unit eigenvector `f̂_k(x)` and the derivative of its first component.
    /// Returns `(w, w̃, w_x)`.
    pub fn unit_mode(&self, i: usize, x: f64) -> (C64, C64, C64) {
        let m = self.mu[i];
        let c = (m * x).cos();
        (
            C64::new(c / m, 0.0),
            I * c,
            C64::new(-(m * x).sin(), 0.0),
        )
    }

    /// CSV rows `k, mu, Re fstar, Im fstar`.
    pub fn csv_rows(&self) -> Vec<[f64; 4]> {
        (0..self.len())
            .map(|i| [self.ks[i] as f64, self.mu[i], self.fstar[i].re, self.fstar[i].im])
            .collect()
    }
}

/// `Σ |p_k|²` for coefficients in the unit eigenbasis.
pub fn free_wave_energy(coeffs: &[C64]) -> f64 {
    coeffs.iter().map(|p| p.norm_sqr()).sum()
}

/// Uncontrolled evolution `p_k(t) = e^{iμ_k t} p_k(0)`.
pub fn free_wave_propagate(wave: &WaveSpectrum, coeffs: &[C64], t: f64) -> Result<Vec<C64>> {
    if coeffs.len() != wave.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} coefficients for {} modes",
            coeffs.len(),
            wave.len()
        )));
    }
    Ok(coeffs
        .iter()
        .zip(&wave.mu)
        .map(|(p, &m)| p * C64::from_polar(1.0, m * t))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `(w, w̃) ↦ (f, g)`
    Forward,
    /// `(f, g) ↦ (w, w̃)`
    Inverse,
}

/// Second-order finite-difference derivative on a nonuniform grid.
fn derivative(x: &[f64], y: &[C64]) -> Vec<C64> {
    let n = x.len();
    let mut d = vec![C64::new(0.0, 0.0); n];
    if n == 2 {
        let s = (y[1] - y[0]) / (x[1] - x[0]);
        return vec![s, s];
    }
    for i in 0..n {
        let (a, b, c) = if i == 0 {
            (0, 1, 2)
        } else if i == n - 1 {
            (n - 3, n - 2, n - 1)
        } else {
            (i - 1, i, i + 1)
        };
        // derivative of the quadratic interpolant through a, b, c at x[i]
        let (xa, xb, xc, t) = (x[a], x[b], x[c], x[i]);
        let la = (2.0 * t - xb - xc) / ((xa - xb) * (xa - xc));
        let lb = (2.0 * t - xa - xc) / ((xb - xa) * (xb - xc));
        let lc = (2.0 * t - xa - xb) / ((xc - xa) * (xc - xb));
        d[i] = y[a] * la + y[b] * lb + y[c] * lc;
    }
    d
}

/// Riemann coordinates `f = (w̃ + w_x)/2`, `g = (w̃ - w_x)/2` on samples.
///
/// Forward differentiates `w` on the grid. Inverse recovers `w_x = f - g`,
/// `w̃ = f + g` and integrates `w` from `w(1) = 0` with the trapezoidal rule.
/// The grid must be increasing and end at `x = 1` for the inverse.
pub fn riemann_transform(
    x: &[f64],
    a: &[C64],
    b: &[C64],
    direction: Direction,
) -> Result<(Vec<C64>, Vec<C64>)> {
    if x.len() != a.len() || x.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "grid {} vs samples {} / {}",
            x.len(),
            a.len(),
            b.len()
        )));
    }
    if x.len() < 2 || x.windows(2).any(|w| !(w[1] > w[0])) {
        return invalid("Riemann transform needs an increasing grid of >= 2 points");
    }
    match direction {
        Direction::Forward => {
            let wx = derivative(x, a);
            let f = b.iter().zip(&wx).map(|(wt, d)| 0.5 * (wt + d)).collect();
            let g = b.iter().zip(&wx).map(|(wt, d)| 0.5 * (wt - d)).collect();
            Ok((f, g))
        }
        Direction::Inverse => {
            let (wx, wt) = riemann_components(a, b);
            let n = x.len();
            let mut w = vec![C64::new(0.0, 0.0); n];
            for i in (0..n - 1).rev() {
                w[i] = w[i + 1] - (wx[i] + wx[i + 1]) * (0.5 * (x[i + 1] - x[i]));
            }
            Ok((w, wt))
        }
    }
}

/// `(w_x, w̃)` from Riemann coordinates.
pub fn riemann_components(f: &[C64], g: &[C64]) -> (Vec<C64>, Vec<C64>) {
    let wx = f.iter().zip(g).map(|(f, g)| f - g).collect();
    let wt = f.iter().zip(g).map(|(f, g)| f + g).collect();
    (wx, wt)
}
