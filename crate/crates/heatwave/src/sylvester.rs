//! Sylvester (forwarding) operator `Π` between the heat controller and the
//! wave plant, in eigencoordinates, and the feedback coefficients
//! `b_k = √2 Σ_j e_j(1) e_j(0) / (iμ_k - λ_j)`.
//!
//! Conventions: inner products are conjugate-linear in the second slot.
//! `π_kj = ⟨Π e_j, f_k⟩_W = e_j(0) conj(F* f_k) / (λ_j + iμ_k)`.
//! In the unit wave basis `f̂_k = f_k/√2` the feedback functional is
//! `g_k = (ΠB)* f̂_k = i b_k / √2`, and the closed-loop input column is `conj(g)`.

use std::f64::consts::{PI, SQRT_2};

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::error::{invalid, Result};
use crate::heat_spectral::HeatSpectrum;
use crate::series::{alternating_sum, SeriesSum};
use crate::wave_spectral::WaveSpectrum;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Default number of heat modes in the `b_k` series.
pub const DEFAULT_N_SERIES: usize = 100_000;

/// `⟨Π e_j, f_k⟩_W` for the 0-based heat index `i`.
pub fn pi_matrix_element(i: usize, k_index: usize, heat: &HeatSpectrum, wave: &WaveSpectrum) -> Result<C64> {
    if !(heat.alpha > 0.0) {
        return invalid("the Sylvester integral diverges for alpha = 0");
    }
    Ok(pi_entry(heat.trace0[i], heat.eigenvalues[i], wave.mu[k_index], wave.fstar[k_index]))
}

fn pi_entry(trace0: f64, lambda: f64, mu: f64, fstar: C64) -> C64 {
    fstar.conj() * trace0 / C64::new(lambda, mu)
}

/// `Π̂_kj = ⟨Π e_j, f̂_k⟩ = i e_j(0) / (λ_j + iμ_k)`, the algebraic solution of
/// the truncated Sylvester equation. Defined for any `α ≥ 0`.
pub fn unit_sylvester_matrix(heat: &HeatSpectrum, wave: &WaveSpectrum) -> Array2<C64> {
    Array2::from_shape_fn((wave.len(), heat.len()), |(k, j)| {
        I * heat.trace0[j] / C64::new(heat.eigenvalues[j], wave.mu[k])
    })
}

/// A feedback coefficient with its truncation diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct PibCoefficient {
    pub value: C64,
    pub partial: C64,
    pub tail_bound: f64,
    pub n_series: usize,
    /// Tail bound exceeds 1% of `|b_k|`.
    pub tail_warning: bool,
}

/// `b_k` from the heat series over the first `series_heat.len()` modes.
pub fn pib_coefficient(mu: f64, series_heat: &HeatSpectrum) -> Result<PibCoefficient> {
    if !(series_heat.alpha > 0.0) {
        return invalid("b_k requires alpha > 0");
    }
    if series_heat.len() < 2 {
        return invalid("series needs at least two heat modes");
    }
    let s: SeriesSum = alternating_sum(
        |j| {
            let i = j - 1;
            let num = SQRT_2 * series_heat.trace1[i] * series_heat.trace0[i];
            num / C64::new(-series_heat.eigenvalues[i], mu)
        },
        series_heat.len(),
    );
    Ok(PibCoefficient {
        value: s.value,
        partial: s.partial,
        tail_bound: s.tail_bound,
        n_series: s.n,
        tail_warning: s.tail_bound > 0.01 * s.value.norm(),
    })
}

/// Closed form of the `b_k` series: `-√2 / (ω sinh ω + α cosh ω)` with `ω = √(-iμ)`,
/// from the heat Green's function between `x = 1` and `x = 0`.
pub fn pib_closed_form(mu: f64, alpha: f64) -> C64 {
    let w = C64::new(0.0, -mu).sqrt();
    let e = (-2.0 * w).exp();
    let denom = w * (1.0 - e) + alpha * (1.0 + e);
    -SQRT_2 * 2.0 * (-w).exp() / denom
}

/// The small-α leading term `-√2 α² / (72 i μ)`.
pub fn asymptotic_b(mu: f64, alpha: f64) -> C64 {
    -SQRT_2 * alpha * alpha / (72.0 * I * mu)
}

/// `Σ_{j≠0} (-1)^j / (jπ)²` and `Σ_{j≠0} (-1)^j / (jπ)⁴`.
pub fn alternating_sum_identities(n_terms: usize) -> (f64, f64) {
    let sign = |j: usize| if j.is_multiple_of(2) { 1.0 } else { -1.0 };
    let s2 = alternating_sum(|j| C64::new(2.0 * sign(j) / (j as f64 * PI).powi(2), 0.0), n_terms);
    let s4 = alternating_sum(|j| C64::new(2.0 * sign(j) / (j as f64 * PI).powi(4), 0.0), n_terms);
    (s2.value.re, s4.value.re)
}

/// `Σ_{j∈ℤ} (-1)^j / (iμ - (jπ)²)` by direct (accelerated) summation.
pub fn residue_sum(mu: f64, n_terms: usize) -> Result<C64> {
    if mu == 0.0 {
        return invalid("residue sum needs mu != 0");
    }
    let z = C64::new(0.0, mu);
    let s = alternating_sum(
        |j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            2.0 * sign / (z - (j as f64 * PI).powi(2))
        },
        n_terms,
    );
    Ok(1.0 / z + s.value)
}

/// `1/(ζ sin ζ)` with `ζ² = iμ`, the closed form of [`residue_sum`].
pub fn residue_closed_form(mu: f64) -> C64 {
    let zeta = C64::new(0.0, mu).sqrt();
    1.0 / (zeta * zeta.sin())
}

/// Fitted rate `ε` in `|R(4μ)| / |R(μ)| = exp(-ε √μ)`.
pub fn residue_decay_rate(mu: f64, n_terms: usize) -> Result<f64> {
    let a = residue_sum(mu, n_terms)?.norm();
    let b = residue_sum(4.0 * mu, n_terms)?.norm();
    Ok(-(b / a).ln() / mu.abs().sqrt())
}

/// Forwarding data over a heat truncation and a wave window.
#[derive(Debug, Clone)]
pub struct SylvesterData {
    pub alpha: f64,
    /// `[2K × N]`, entries `⟨Π e_j, f_k⟩_W`.
    pub pi_matrix: Array2<C64>,
    pub b: Vec<C64>,
    pub b_tail: Vec<f64>,
    pub n_series: usize,
    pub asymptotic_b: Vec<C64>,
    /// `1 / (1 + √λ_j)`.
    pub extrapolation_weights: Vec<f64>,
    pub mu: Vec<f64>,
    pub ks: Vec<i64>,
}

impl SylvesterData {
    pub fn build(heat: &HeatSpectrum, wave: &WaveSpectrum, n_series: usize) -> Result<Self> {
        if !(heat.alpha > 0.0) {
            return invalid("SylvesterData requires alpha > 0");
        }
        let series_heat = HeatSpectrum::build(heat.alpha, n_series)?;
        Self::build_with_series(heat, wave, &series_heat)
    }

    /// Reuses an already computed long heat spectrum for the `b_k` series.
    pub fn build_with_series(heat: &HeatSpectrum, wave: &WaveSpectrum, series_heat: &HeatSpectrum) -> Result<Self> {
        if series_heat.alpha != heat.alpha {
            return invalid("series spectrum built for a different alpha");
        }
        let mut pi_matrix = Array2::from_elem((wave.len(), heat.len()), C64::new(0.0, 0.0));
        for k in 0..wave.len() {
            for j in 0..heat.len() {
                pi_matrix[[k, j]] = pi_matrix_element(j, k, heat, wave)?;
            }
        }
        let mut b = Vec::with_capacity(wave.len());
        let mut b_tail = Vec::with_capacity(wave.len());
        for &m in &wave.mu {
            let c = pib_coefficient(m, series_heat)?;
            b.push(c.value);
            b_tail.push(c.tail_bound);
        }
        Ok(Self {
            alpha: heat.alpha,
            pi_matrix,
            b,
            b_tail,
            n_series: series_heat.len(),
            asymptotic_b: wave.mu.iter().map(|&m| asymptotic_b(m, heat.alpha)).collect(),
            extrapolation_weights: heat.sqrt_eigenvalues.iter().map(|s| 1.0 / (1.0 + s)).collect(),
            mu: wave.mu.clone(),
            ks: wave.ks.clone(),
        })
    }

    /// `g_k = (ΠB)* f̂_k = i b_k / √2`.
    pub fn feedback_row(&self) -> Vec<C64> {
        self.b.iter().map(|b| I * b / SQRT_2).collect()
    }

    /// `ΠB` in unit wave coordinates, `conj(g_k)`.
    pub fn input_column(&self) -> Vec<C64> {
        self.feedback_row().iter().map(|g| g.conj()).collect()
    }

    /// `Π̂ = pi_matrix / √2` (unit wave coordinates).
    pub fn unit_pi(&self) -> Array2<C64> {
        self.pi_matrix.mapv(|v| v / SQRT_2)
    }

    /// Bound on `‖Π̂ z‖_W` through the weights `1/(1+√λ_j)`:
    /// `‖Π̂ z‖ ≤ M Σ_j |z_j| / (1 + √λ_j)` with `M = max_j (1+√λ_j) ‖Π̂ e_j‖`.
    pub fn extrapolation_bound(&self, z: &[C64]) -> f64 {
        let pi = self.unit_pi();
        let m = (0..pi.ncols())
            .map(|j| {
                let col: f64 = pi.column(j).iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
                col / self.extrapolation_weights[j]
            })
            .fold(0.0, f64::max);
        m * z
            .iter()
            .zip(&self.extrapolation_weights)
            .map(|(zj, w)| zj.norm() * w)
            .sum::<f64>()
    }

    /// CSV rows `k, Re b, Im b, |b|·|μ|, |asymptotic|·|μ|`.
    pub fn csv_rows(&self) -> Vec<[f64; 5]> {
        (0..self.b.len())
            .map(|i| {
                let m = self.mu[i].abs();
                [
                    self.ks[i] as f64,
                    self.b[i].re,
                    self.b[i].im,
                    self.b[i].norm() * m,
                    self.asymptotic_b[i].norm() * m,
                ]
            })
            .collect()
    }
}

/// Residual of the weak Sylvester identity for `z = e_j`, `w = f_k`:
/// `⟨Πe_j, E f_k⟩ + ⟨Π A e_j, f_k⟩ + ⟨C e_j, F* f_k⟩`.
pub fn sylvester_weak_residual(
    s: &SylvesterData,
    heat: &HeatSpectrum,
    wave: &WaveSpectrum,
    j: usize,
    k: usize,
) -> f64 {
    let pi = s.pi_matrix[[k, j]];
    let e_term = C64::new(0.0, wave.mu[k]).conj() * pi;
    let a_term = -heat.eigenvalues[j] * pi;
    let c_term = heat.trace0[j] * wave.fstar[k].conj();
    (e_term + a_term + c_term).norm()
}
