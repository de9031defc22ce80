//! Eigenvectors of the coupled generator on `𝒳 = L² × H¹_(1) × L²` and the
//! biorthogonal family.
//!
//! Parabolic modes (eigenvalue `-λ_j`): `Z_j^p = (e_j, w, -λ_j w)` with
//! `w = e_j(0) sinh(λ_j(x-1)) / (λ_j cosh λ_j)` (linear profile `e_j(0)(x-1)`
//! when `λ_j = 0`). Hyperbolic modes (eigenvalue `iμ_k`): `Z_k^h = (0, f̂_k)`.
//!
//! Biorthogonals: `Φ_j^p = (e_j, 0, 0)` and
//! `Φ_k^h = c_k(φ_k, -i cos(μ_k x)/μ_k, cos(μ_k x))` where
//! `φ'' = -iμ_k φ`, `φ'(0) = 1`, `φ'(1) = -α φ(1)`.
//!
//! The pairing is `⟨(z,w,w̃), (φ,ψ,ψ̃)⟩ = ∫ z φ̄ + ∫ w_x ψ̄_x + ∫ w̃ ψ̃̄`.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::error::{invalid, Result};
use crate::heat_spectral::HeatSpectrum;
use crate::quadrature::GaussGrid;
use crate::wave_spectral::WaveSpectrum;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// `(1 - e^{-2λ}) / (2λ)`, equal to 1 at `λ = 0`.
fn decay_integral(lambda: f64) -> f64 {
    if lambda == 0.0 {
        1.0
    } else {
        -(-2.0 * lambda).exp_m1() / (2.0 * lambda)
    }
}

/// Riemann-coordinate profiles `f^p(x) = e^{λx}/(1+e^{2λ})`,
/// `g^p(x) = -e^{2λ}e^{-λx}/(1+e^{2λ})`, evaluated without overflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParabolicBranch {
    pub lambda: f64,
    /// `∫|f^p|²`
    pub f_norm_sq: f64,
    /// `∫|g^p|²`
    pub g_norm_sq: f64,
}

impl ParabolicBranch {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return invalid("parabolic branch needs a finite lambda >= 0");
        }
        let e = (-2.0 * lambda).exp();
        let d = decay_integral(lambda) / (1.0 + e).powi(2);
        Ok(Self {
            lambda,
            f_norm_sq: e * d,
            g_norm_sq: d,
        })
    }

    pub fn f(&self, x: f64) -> f64 {
        let l = self.lambda;
        (l * (x - 2.0)).exp() / (1.0 + (-2.0 * l).exp())
    }

    pub fn g(&self, x: f64) -> f64 {
        let l = self.lambda;
        -(-l * x).exp() / (1.0 + (-2.0 * l).exp())
    }

    /// Closeness term `∫|f^p|² + ∫|g^p|²`.
    pub fn term(&self) -> f64 {
        self.f_norm_sq + self.g_norm_sq
    }
}

/// Branch for the Neumann eigenvalue `λ_j = ((j-1)π)²`.
pub fn parabolic_branch(j: usize) -> Result<ParabolicBranch> {
    if j < 1 {
        return invalid("parabolic index j must be >= 1");
    }
    ParabolicBranch::new(((j - 1) as f64 * PI).powi(2))
}

/// `Σ_{j=2}^{J} (∫|f_j^p|² + ∫|g_j^p|²)` over the Neumann spectrum.
pub fn quadratic_closeness(big_j: usize) -> Result<f64> {
    if big_j < 2 {
        return invalid("closeness sum needs J >= 2");
    }
    let mut s = 0.0;
    for j in 2..=big_j {
        s += parabolic_branch(j)?.term();
    }
    Ok(s)
}

/// Bound on `Σ_{j>J}` of the closeness terms: each is at most
/// `(1 + e^{-2π²}) / (2λ_j)` and `Σ_{m≥J} 1/m² < 1/(J - 1/2)`.
pub fn closeness_tail_bound(big_j: usize) -> f64 {
    (1.0 + (-2.0 * PI * PI).exp()) / (2.0 * PI * PI * (big_j as f64 - 0.5))
}

/// Hyperbolic biorthogonal data `φ = A e^{rx} + B e^{-rx}`, `r = √(-iμ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperbolicBiorth {
    pub k: i64,
    pub mu: f64,
    pub alpha: f64,
    pub r: C64,
    pub a: C64,
    pub b: C64,
    /// `c_k`, fixed by `⟨Z_k^h, Φ_k^h⟩ = 1`.
    pub c: C64,
    /// `𝔅*Φ_k^h = c_k φ_k(1)`.
    pub observation: C64,
    pub phi_l2: f64,
}

impl HyperbolicBiorth {
    /// Coefficients of `φ_k` for the Robin parameter `α ≥ 0` (Neumann at `α = 0`).
    /// `c_k` is set from the pairing computed on `grid`.
    pub fn new(k: i64, alpha: f64, grid: &GaussGrid) -> Result<Self> {
        if !(alpha >= 0.0) {
            return invalid("alpha must be >= 0");
        }
        let mu = crate::wave_spectral::mu(k);
        let r = C64::new(0.0, -mu).sqrt();
        let e2 = (-2.0 * r).exp();
        let rho = (r - alpha) / (r + alpha);
        let b = 1.0 / (r * (rho * e2 - 1.0));
        let a = b * rho * e2;
        let mut out = Self {
            k,
            mu,
            alpha,
            r,
            a,
            b,
            c: C64::new(1.0, 0.0),
            observation: C64::new(0.0, 0.0),
            phi_l2: 0.0,
        };
        let pairing = grid.integrate_c(|x| {
            let (_, wx, wt) = hyperbolic_mode(mu, x);
            let (_, psi_x, psi_t) = out.adjoint_unscaled(x);
            wx * psi_x.conj() + wt * psi_t.conj()
        });
        out.c = 1.0 / pairing.conj();
        out.observation = out.c * out.phi(1.0);
        out.phi_l2 = grid.integrate(|x| out.phi(x).norm_sqr()).sqrt();
        Ok(out)
    }

    /// `φ_k(x)`; `A` carries the factor `e^{-2r}`, so nothing overflows.
    pub fn phi(&self, x: f64) -> C64 {
        self.a * (self.r * x).exp() + self.b * (-self.r * x).exp()
    }

    pub fn phi_dx(&self, x: f64) -> C64 {
        self.r * (self.a * (self.r * x).exp() - self.b * (-self.r * x).exp())
    }

    /// `(φ, ψ_x, ψ̃)` of `Φ_k^h / c_k`.
    fn adjoint_unscaled(&self, x: f64) -> (C64, C64, C64) {
        let m = self.mu;
        (self.phi(x), I * (m * x).sin(), C64::new((m * x).cos(), 0.0))
    }

    /// `(φ, ψ_x, ψ̃)` of `Φ_k^h`.
    pub fn adjoint_components(&self, x: f64) -> (C64, C64, C64) {
        let (p, px, pt) = self.adjoint_unscaled(x);
        (self.c * p, self.c * px, self.c * pt)
    }

    /// `(φ, ψ, ψ̃)` of `Φ_k^h`.
    pub fn adjoint_values(&self, x: f64) -> (C64, C64, C64) {
        let m = self.mu;
        let c = (m * x).cos();
        (self.c * self.phi(x), self.c * (-I * c / m), self.c * c)
    }
}

/// `(z, w_x, w̃)` of `Z_k^h = (0, f̂_k)`.
fn hyperbolic_mode(mu: f64, x: f64) -> (C64, C64, C64) {
    (
        C64::new(0.0, 0.0),
        C64::new(-(mu * x).sin(), 0.0),
        I * (mu * x).cos(),
    )
}

/// `φ_k` with the normalization fixed on a default grid.
pub fn hyperbolic_biorthogonal(k: i64, alpha: f64) -> Result<HyperbolicBiorth> {
    let mu = crate::wave_spectral::mu(k);
    let grid = GaussGrid::graded_unit(mu.abs().sqrt(), mu.abs())?;
    HyperbolicBiorth::new(k, alpha, &grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Parabolic,
    Hyperbolic,
}

/// Boundary conditions of an eigenvector (primal domain) and of its
/// biorthogonal (adjoint domain), as absolute values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryResiduals {
    /// `z_x(0)`, `z_x(1) + αz(1)`, `w(1)`, `w̃(1)`, `w_x(0) - z(0)`.
    pub primal: [f64; 5],
    /// `ψ(1)`, `ψ̃(1)`, `ψ_x(0)`, `φ_x(1) + αφ(1)`, `φ_x(0) - ψ̃(0)`.
    pub adjoint: [f64; 5],
}

impl BoundaryResiduals {
    pub fn max(&self) -> f64 {
        self.primal.iter().chain(&self.adjoint).fold(0.0, |a, &b| a.max(b))
    }
}

/// Per-mode record of the parabolic wave profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParabolicRecord {
    pub j: usize,
    pub branch: ParabolicBranch,
    /// `‖Z_j^p‖²_𝒳 = 1 + 2 e_j(0)² (∫|f^p|² + ∫|g^p|²)`.
    pub norm_sq: f64,
}

/// Coupled eigenvectors, biorthogonals and closeness data over a truncation.
#[derive(Debug, Clone)]
pub struct CoupledBasis {
    pub heat: HeatSpectrum,
    pub wave: WaveSpectrum,
    pub parabolic_tail: Vec<ParabolicRecord>,
    pub hyperbolic_biorth: Vec<HyperbolicBiorth>,
    /// `(J, Σ_{j=2}^{J})` for `J = 2..=N`.
    pub closeness_partial_sums: Vec<(usize, f64)>,
    pub grid: GaussGrid,
}

impl CoupledBasis {
    pub fn build(heat: HeatSpectrum, wave: WaveSpectrum) -> Result<Self> {
        let lam_max = heat.eigenvalues.iter().cloned().fold(0.0, f64::max);
        let mu_max = wave.mu.iter().map(|m| m.abs()).fold(0.0, f64::max);
        let grid = GaussGrid::graded_unit(lam_max.max(mu_max.sqrt()), mu_max.max(lam_max.sqrt()))?;
        let mut parabolic_tail = Vec::with_capacity(heat.len());
        for i in 0..heat.len() {
            let branch = ParabolicBranch::new(heat.eigenvalues[i])?;
            let t0 = heat.trace0[i];
            parabolic_tail.push(ParabolicRecord {
                j: i + 1,
                branch,
                norm_sq: 1.0 + 2.0 * t0 * t0 * branch.term(),
            });
        }
        let mut hyperbolic_biorth = Vec::with_capacity(wave.len());
        for &k in &wave.ks {
            hyperbolic_biorth.push(HyperbolicBiorth::new(k, heat.alpha, &grid)?);
        }
        let mut closeness_partial_sums = Vec::new();
        let mut acc = 0.0;
        for rec in parabolic_tail.iter().skip(1) {
            acc += rec.branch.term();
            closeness_partial_sums.push((rec.j, acc));
        }
        Ok(Self {
            heat,
            wave,
            parabolic_tail,
            hyperbolic_biorth,
            closeness_partial_sums,
            grid,
        })
    }

    pub fn n_heat(&self) -> usize {
        self.heat.len()
    }

    pub fn len(&self) -> usize {
        self.heat.len() + self.wave.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `{-λ_j}` followed by `{iμ_k}`.
    pub fn eigenvalues(&self) -> Vec<C64> {
        self.heat
            .eigenvalues
            .iter()
            .map(|&l| C64::new(-l, 0.0))
            .chain(self.wave.mu.iter().map(|&m| C64::new(0.0, m)))
            .collect()
    }

    /// `min_{j,k} |-λ_j - iμ_k|`.
    pub fn spectral_gap(&self) -> f64 {
        let mut gap = f64::INFINITY;
        for &l in &self.heat.eigenvalues {
            for &m in &self.wave.mu {
                gap = gap.min(C64::new(-l, -m).norm());
            }
        }
        gap
    }

    /// Wave profile `(w, w_x)` of `Z_j^p`.
    pub fn parabolic_wave(&self, i: usize, x: f64) -> (f64, f64) {
        let l = self.heat.eigenvalues[i];
        let e0 = self.heat.trace0[i];
        if l == 0.0 {
            return (e0 * (x - 1.0), e0);
        }
        let d = 1.0 + (-2.0 * l).exp();
        let a = (l * (x - 2.0)).exp();
        let b = (-l * x).exp();
        (e0 * (a - b) / (l * d), e0 * (a + b) / d)
    }

    /// `(z, w_x, w̃)` of eigenvector `a` (heat indices first).
    pub fn primal_components(&self, a: usize, x: f64) -> (C64, C64, C64) {
        let n = self.n_heat();
        if a < n {
            let (w, wx) = self.parabolic_wave(a, x);
            let l = self.heat.eigenvalues[a];
            (
                C64::new(self.heat.eval(a, x), 0.0),
                C64::new(wx, 0.0),
                C64::new(-l * w, 0.0),
            )
        } else {
            hyperbolic_mode(self.wave.mu[a - n], x)
        }
    }

    /// `(φ, ψ_x, ψ̃)` of biorthogonal `b`.
    pub fn adjoint_components(&self, b: usize, x: f64) -> (C64, C64, C64) {
        let n = self.n_heat();
        if b < n {
            let zero = C64::new(0.0, 0.0);
            (C64::new(self.heat.eval(b, x), 0.0), zero, zero)
        } else {
            self.hyperbolic_biorth[b - n].adjoint_components(x)
        }
    }

    /// `⟨Z_a, Φ_b⟩_𝒳` for all computed pairs, by quadrature.
    pub fn pairing_matrix(&self) -> Array2<C64> {
        let n = self.len();
        let nodes = &self.grid.nodes;
        let prim: Vec<Vec<(C64, C64, C64)>> = (0..n)
            .map(|a| nodes.iter().map(|&x| self.primal_components(a, x)).collect())
            .collect();
        let adj: Vec<Vec<(C64, C64, C64)>> = (0..n)
            .map(|b| nodes.iter().map(|&x| self.adjoint_components(b, x)).collect())
            .collect();
        Array2::from_shape_fn((n, n), |(a, b)| {
            prim[a]
                .iter()
                .zip(&adj[b])
                .zip(&self.grid.weights)
                .map(|((p, q), &w)| (p.0 * q.0.conj() + p.1 * q.1.conj() + p.2 * q.2.conj()) * w)
                .sum()
        })
    }

    /// `max |⟨Z_a, Φ_b⟩ - δ_ab|`.
    pub fn biorthogonality_residual(&self) -> f64 {
        let p = self.pairing_matrix();
        let mut worst: f64 = 0.0;
        for ((a, b), v) in p.indexed_iter() {
            let d = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((v - d).norm());
        }
        worst
    }

    /// `𝔅*Φ_a`: signed `e_j(1)` for parabolic modes, `c_k φ_k(1)` for hyperbolic ones.
    pub fn observations(&self) -> Vec<C64> {
        self.heat
            .trace1
            .iter()
            .map(|&t| C64::new(t, 0.0))
            .chain(self.hyperbolic_biorth.iter().map(|h| h.observation))
            .collect()
    }

    /// `‖Z_j^p‖²_𝒳` by quadrature.
    pub fn parabolic_norm_sq_quadrature(&self, i: usize) -> f64 {
        self.grid.integrate(|x| {
            let (z, wx, wt) = self.primal_components(i, x);
            z.norm_sqr() + wx.norm_sqr() + wt.norm_sqr()
        })
    }

    pub fn boundary_residuals(&self, branch: Branch, index: usize) -> Result<BoundaryResiduals> {
        let alpha = self.heat.alpha;
        match branch {
            Branch::Parabolic => {
                if index >= self.n_heat() {
                    return invalid("parabolic index out of range");
                }
                let i = index;
                let l = self.heat.eigenvalues[i];
                let (w1, _) = self.parabolic_wave(i, 1.0);
                let (_, wx0) = self.parabolic_wave(i, 0.0);
                let z0 = self.heat.eval(i, 0.0);
                let z1 = self.heat.eval(i, 1.0);
                let primal = [
                    self.heat.eval_dx(i, 0.0).abs(),
                    (self.heat.eval_dx(i, 1.0) + alpha * z1).abs(),
                    w1.abs(),
                    (l * w1).abs(),
                    (wx0 - z0).abs(),
                ];
                let adjoint = [
                    0.0,
                    0.0,
                    0.0,
                    (self.heat.eval_dx(i, 1.0) + alpha * z1).abs(),
                    self.heat.eval_dx(i, 0.0).abs(),
                ];
                Ok(BoundaryResiduals { primal, adjoint })
            }
            Branch::Hyperbolic => {
                if index >= self.wave.len() {
                    return invalid("hyperbolic index out of range");
                }
                let (w1, wt1, wx0) = (
                    self.wave.unit_mode(index, 1.0).0,
                    self.wave.unit_mode(index, 1.0).1,
                    self.wave.unit_mode(index, 0.0).2,
                );
                let primal = [0.0, 0.0, w1.norm(), wt1.norm(), wx0.norm()];
                let h = &self.hyperbolic_biorth[index];
                let (_, psi1, psit1) = h.adjoint_values(1.0);
                let (_, psix0, psit0) = h.adjoint_components(0.0);
                let adjoint = [
                    psi1.norm(),
                    psit1.norm(),
                    psix0.norm(),
                    (h.c * (h.phi_dx(1.0) + alpha * h.phi(1.0))).norm(),
                    (h.c * h.phi_dx(0.0) - psit0).norm(),
                ];
                Ok(BoundaryResiduals { primal, adjoint })
            }
        }
    }

    /// CSV rows `J, partial_sum, tail_bound`.
    pub fn closeness_csv_rows(&self) -> Vec<[f64; 3]> {
        self.closeness_partial_sums
            .iter()
            .map(|&(j, s)| [j as f64, s, closeness_tail_bound(j)])
            .collect()
    }

    /// CSV rows `k, Re, Im, |obs|·√(1+|k|)·e^{√(π|k|/2)}`.
    pub fn observation_csv_rows(&self) -> Vec<[f64; 4]> {
        self.hyperbolic_biorth
            .iter()
            .map(|h| {
                let ka = h.k.unsigned_abs() as f64;
                [
                    h.k as f64,
                    h.observation.re,
                    h.observation.im,
                    h.observation.norm() * (1.0 + ka).sqrt() * (PI * ka / 2.0).sqrt().exp(),
                ]
            })
            .collect()
    }

    /// CSV rows `row, col, Re, Im` of `⟨Z_a, Φ_b⟩ - δ_ab`.
    pub fn biorthogonality_csv_rows(&self) -> Vec<[f64; 4]> {
        let p = self.pairing_matrix();
        p.indexed_iter()
            .map(|((a, b), v)| {
                let d = if a == b { 1.0 } else { 0.0 };
                [a as f64, b as f64, v.re - d, v.im]
            })
            .collect()
    }
}
