//! Moment-method control synthesis for the exponential family
//! `{-λ_j} ∪ {iμ_k}` on `(0, T)`.
//!
//! In biorthogonal coordinates `y_a = ⟨Z, Φ_a⟩` the controlled system is
//! `ẏ_a = ε_a y_a + o_a u` with `o_a = conj(𝔅*Φ_a)`. Writing `v(s) = u(T-s)`,
//! reaching `y_a(T)` is the moment condition `∫₀^T v(s) e^{ε_a s} ds = m_a`
//! with `m_a = (y_a(T) - e^{ε_a T} y_a(0)) / o_a`. Controls are sought as
//! `v(s) = Σ_b c_b e^{conj(ε_b) s}`, so that `G c = m` with the Gram matrix
//! `G_ab = ∫₀^T e^{(ε_a + conj ε_b) s} ds`.

use std::f64::consts::PI;

use ndarray::{concatenate, s, Array1, Array2, Axis};
use num_complex::Complex64 as C64;

use crate::closed_loop::{simulate_with_input, ClosedLoopModel, Coords, LoopMode, TransformDirection};
use crate::coupled_spectral::hyperbolic_biorthogonal;
use crate::error::{invalid, Error, Result};
use crate::linalg::{self, CMatrix, CVector};

const I: C64 = C64 { re: 0.0, im: 1.0 };
const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Unregularized solves beyond this Gram condition number are refused.
pub const COND_REFUSE: f64 = 1e14;
/// Default Tikhonov weight relative to `trace(G)/n`.
pub const DEFAULT_REG: f64 = 1e-12;

/// `(e^z - 1)/z`.
fn phi1(z: C64) -> C64 {
    if z.norm() < 1e-3 {
        1.0 + z * (0.5 + z * (1.0 / 6.0 + z * (1.0 / 24.0 + z / 120.0)))
    } else {
        (z.exp() - 1.0) / z
    }
}

/// `G_ab = ∫₀^T e^{ε_a t} conj(e^{ε_b t}) dt`.
pub fn exponential_gram(t: f64, exponents: &[C64]) -> Result<CMatrix> {
    if !(t > 0.0) {
        return invalid("Gram horizon must be positive");
    }
    for i in 0..exponents.len() {
        for j in 0..i {
            if exponents[i] == exponents[j] {
                return invalid(format!("duplicate exponent {}", exponents[i]));
            }
        }
    }
    let n = exponents.len();
    Ok(Array2::from_shape_fn((n, n), |(a, b)| {
        t * phi1((exponents[a] + exponents[b].conj()) * t)
    }))
}

/// `√(1+|k|) e^{√(π|k|/2)}`.
pub fn v_weight(k: i64) -> f64 {
    let ka = k.unsigned_abs() as f64;
    (1.0 + ka).sqrt() * (PI * ka / 2.0).sqrt().exp()
}

/// `√(Σ|α_j|² + Σ|β_k v_weight(k)|²)`.
pub fn v_norm(beta: &[(i64, C64)], alpha: &[C64]) -> f64 {
    let a: f64 = alpha.iter().map(|v| v.norm_sqr()).sum();
    let b: f64 = beta.iter().map(|(k, v)| (v * v_weight(*k)).norm_sqr()).sum();
    (a + b).sqrt()
}

#[derive(Debug, Clone)]
pub struct MomentProblem {
    pub horizon: f64,
    /// `λ_j` (the exponents are `-λ_j`).
    pub heat_eigenvalues: Vec<f64>,
    /// `μ_k` (the exponents are `iμ_k`).
    pub wave_frequencies: Vec<f64>,
    pub wave_ks: Vec<i64>,
    /// Heat moments first, then wave moments.
    pub targets: Vec<C64>,
    pub regularization: f64,
}

impl MomentProblem {
    pub fn exponents(&self) -> Vec<C64> {
        self.heat_eigenvalues
            .iter()
            .map(|&l| C64::new(-l, 0.0))
            .chain(self.wave_frequencies.iter().map(|&m| I * m))
            .collect()
    }

    /// `v_weight(k)` over the wave modes; strictly increasing in `|k|`.
    pub fn v_weights(&self) -> Vec<f64> {
        self.wave_ks.iter().map(|&k| v_weight(k)).collect()
    }

    pub fn gram(&self) -> Result<CMatrix> {
        exponential_gram(self.horizon, &self.exponents())
    }
}

/// `v(s) = Σ_b c_b e^{conj(ε_b) s}` and the control `u(t) = v(T - t)`.
#[derive(Debug, Clone)]
pub struct MomentControl {
    pub horizon: f64,
    pub exponents: Vec<C64>,
    pub coefficients: CVector,
    /// `‖v‖²_{L²(0,T)} = c^H G c`.
    pub norm_sq: f64,
    /// `|(G c)_a - m_a|` for the exact Gram.
    pub residuals: Vec<f64>,
    pub condition_number: f64,
}

impl MomentControl {
    fn new(horizon: f64, exponents: Vec<C64>, coefficients: CVector, g: &CMatrix, m: &CVector, cond: f64) -> Self {
        let gc = g.dot(&coefficients);
        let norm_sq = coefficients
            .iter()
            .zip(gc.iter())
            .map(|(c, v)| c.conj() * v)
            .sum::<C64>()
            .re
            .max(0.0);
        let residuals = gc.iter().zip(m.iter()).map(|(a, b)| (a - b).norm()).collect();
        Self {
            horizon,
            exponents,
            coefficients,
            norm_sq,
            residuals,
            condition_number: cond,
        }
    }

    pub fn v(&self, s: f64) -> C64 {
        self.coefficients
            .iter()
            .zip(&self.exponents)
            .map(|(c, e)| c * (e.conj() * s).exp())
            .sum()
    }

    pub fn control_at(&self, t: f64) -> C64 {
        self.v(self.horizon - t)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq.sqrt()
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().cloned().fold(0.0, f64::max)
    }

    /// Samples `(t, Re u, Im u)` on a uniform grid.
    pub fn csv_rows(&self, n: usize) -> Vec<[f64; 3]> {
        (0..=n)
            .map(|i| {
                let t = self.horizon * i as f64 / n as f64;
                let u = self.control_at(t);
                [t, u.re, u.im]
            })
            .collect()
    }
}

fn default_reg(g: &CMatrix) -> f64 {
    let n = g.nrows().max(1) as f64;
    DEFAULT_REG * g.diag().iter().map(|v| v.re).sum::<f64>() / n
}

/// Solves `(G + reg I) c = m`.
pub fn minimal_norm_control(problem: &MomentProblem) -> Result<MomentControl> {
    let exps = problem.exponents();
    if problem.targets.len() != exps.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} targets for {} exponents",
            problem.targets.len(),
            exps.len()
        )));
    }
    if !(problem.regularization >= 0.0) {
        return invalid("regularization must be >= 0");
    }
    let g = problem.gram()?;
    let cond = linalg::cond2(&g)?;
    if cond > COND_REFUSE && problem.regularization == 0.0 {
        return Err(Error::IllConditioned(format!(
            "Gram condition number {cond:e} needs an explicit regularization"
        )));
    }
    let m = Array1::from(problem.targets.clone());
    let mut a = g.clone();
    for i in 0..a.nrows() {
        a[[i, i]] += problem.regularization;
    }
    let c = if m.iter().all(|v| *v == ZERO) {
        Array1::from_elem(m.len(), ZERO)
    } else {
        linalg::solve(&a, &m)?
    };
    Ok(MomentControl::new(problem.horizon, exps, c, &g, &m, cond))
}

/// Observations `o_a` of a truncated primal model (open loop, `(z, w)`
/// coordinates). Its left eigenvectors give `y = (z, w + Π̂z)`, so the
/// observations are `e_j(1)` and `(Π̂ e(1))_k`.
pub fn truncated_observations(model: &ClosedLoopModel) -> Vec<C64> {
    model.input_column(Coords::Zp).to_vec()
}

#[derive(Debug, Clone)]
pub struct MixedControlReport {
    pub control: MomentControl,
    /// `max_j |z_j(T)|` from the independent simulation.
    pub heat_residual: f64,
    /// `‖w(T) - target‖` from the simulation.
    pub wave_error: f64,
    /// Wave error predicted by the least-squares solve.
    pub predicted_wave_error: f64,
    pub epsilon: f64,
    pub feasible: bool,
    pub regularization: f64,
}

/// Steers `x0 = (z, w)` so that `z(T) = 0` exactly (truncated heat moments as
/// hard constraints) and `‖w(T) - wave_target‖ < ε` (wave moments by weighted,
/// Tikhonov-regularized least squares on the null space of the constraints).
/// The result is checked by Duhamel simulation of the open-loop `(z, w)` model.
pub fn mixed_control(
    model: &ClosedLoopModel,
    x0: &CVector,
    wave_target: &CVector,
    epsilon: f64,
    t_end: f64,
) -> Result<MixedControlReport> {
    let (n, k) = (model.n_heat(), model.n_wave());
    if x0.len() != n + k || wave_target.len() != k {
        return Err(Error::DimensionMismatch("mixed control data does not match the model".into()));
    }
    if !(t_end >= 2.0) || !(epsilon > 0.0) {
        return invalid("mixed control needs T >= 2 and epsilon > 0");
    }
    mixed_control_any_horizon(model, x0, wave_target, epsilon, t_end)
}

/// [`mixed_control`] without the `T ≥ 2` guard, for horizon comparisons.
pub fn mixed_control_any_horizon(
    model: &ClosedLoopModel,
    x0: &CVector,
    wave_target: &CVector,
    epsilon: f64,
    t_end: f64,
) -> Result<MixedControlReport> {
    let (n, k) = (model.n_heat(), model.n_wave());
    let problem = MomentProblem {
        horizon: t_end,
        heat_eigenvalues: model.heat.eigenvalues.clone(),
        wave_frequencies: model.wave.mu.clone(),
        wave_ks: model.wave.ks.clone(),
        targets: vec![ZERO; n + k],
        regularization: 0.0,
    };
    let exps = problem.exponents();
    let obs = truncated_observations(model);
    let y0 = model.transform_state(x0, TransformDirection::ToZp)?;
    let m: CVector = (0..n + k)
        .map(|a| {
            let target = if a < n { ZERO } else { wave_target[a - n] };
            (target - (exps[a] * t_end).exp() * y0[a]) / obs[a]
        })
        .collect();
    let g = problem.gram()?;
    let cond = linalg::cond2(&g)?;
    let reg = default_reg(&g);

    let gh = g.slice(s![..n, ..]).to_owned();
    let gw = g.slice(s![n.., ..]).to_owned();
    let mh = m.slice(s![..n]).to_owned();
    let mw = m.slice(s![n..]).to_owned();
    let c0 = linalg::lstsq(&gh, &mh)?;
    let (null, _) = linalg::nullspace(&gh, 1e-13)?;
    let d: CVector = obs[n..].iter().map(|o| C64::new(o.norm(), 0.0)).collect();
    let dmat = Array2::from_diag(&d);
    let sr = C64::new(reg.sqrt(), 0.0);
    let top = dmat.dot(&gw).dot(&null);
    let bottom = null.mapv(|v| v * sr);
    let lhs = concatenate(Axis(0), &[top.view(), bottom.view()])
        .map_err(|e| Error::Numerical(e.to_string()))?;
    let rhs_top = dmat.dot(&(&mw - &gw.dot(&c0)));
    let rhs_bottom = c0.mapv(|v| -v * sr);
    let rhs = concatenate(Axis(0), &[rhs_top.view(), rhs_bottom.view()])
        .map_err(|e| Error::Numerical(e.to_string()))?;
    let y = if null.ncols() > 0 {
        linalg::lstsq(&lhs, &rhs)?
    } else {
        Array1::from_elem(0, ZERO)
    };
    let c = &c0 + &null.dot(&y);
    let control = MomentControl::new(t_end, exps, c, &g, &m, cond);
    let predicted_wave_error = dmat
        .dot(&(&gw.dot(&control.coefficients) - &mw))
        .iter()
        .map(|v| v.norm_sqr())
        .sum::<f64>()
        .sqrt();

    let a = model.assemble_generator(LoopMode::Open, Coords::Zw)?;
    let b = model.input_column(Coords::Zw);
    let xt = simulate_with_input(&a, &b, x0, &|t| control.control_at(t), t_end)?;
    let heat_residual = xt.slice(s![..n]).iter().map(|v| v.norm()).fold(0.0, f64::max);
    let wave_error = (&xt.slice(s![n..]) - wave_target)
        .iter()
        .map(|v| v.norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok(MixedControlReport {
        feasible: wave_error < epsilon,
        control,
        heat_residual,
        wave_error,
        predicted_wave_error,
        epsilon,
        regularization: reg,
    })
}

/// Minimal `L²` cost of steering the pure hyperbolic mode `Z_k^h` to zero,
/// for each `k`, with the continuum observations `c_k φ_k(1)`.
#[derive(Debug, Clone)]
pub struct HyperbolicCost {
    pub ks: Vec<i64>,
    pub costs: Vec<f64>,
    /// Slope of `ln cost` against `√k`.
    pub slope: f64,
    pub fit_residual: f64,
    pub condition_number: f64,
}

/// Family `{-λ_j}_{j≤n_heat} ∪ {iμ_l}_{-K≤l<K}` (Neumann heat) on `(0, T)`.
/// The cost of target `k` is `|m_k| √((G⁻¹)_kk)` with `m_k = -e^{iμ_k T}/o_k`.
pub fn hyperbolic_steering_cost(ks: &[i64], half_width: usize, n_heat: usize, t_end: f64) -> Result<HyperbolicCost> {
    if ks.len() < 2 {
        return invalid("need at least two target modes");
    }
    let kk = half_width as i64;
    if ks.iter().any(|&k| k < -kk || k >= kk) {
        return invalid("target mode outside the exponent window");
    }
    let heat: Vec<f64> = (0..n_heat).map(|j| (j as f64 * PI).powi(2)).collect();
    let wave_ks: Vec<i64> = (-kk..kk).collect();
    let problem = MomentProblem {
        horizon: t_end,
        heat_eigenvalues: heat,
        wave_frequencies: wave_ks.iter().map(|&k| crate::wave_spectral::mu(k)).collect(),
        wave_ks: wave_ks.clone(),
        targets: vec![],
        regularization: 0.0,
    };
    let g = problem.gram()?;
    let cond = linalg::cond2(&g)?;
    if cond > COND_REFUSE {
        return Err(Error::IllConditioned(format!("Gram condition number {cond:e}")));
    }
    let ginv = linalg::inverse(&g)?;
    let mut costs = Vec::with_capacity(ks.len());
    for &k in ks {
        let h = hyperbolic_biorthogonal(k, 0.0)?;
        let obs = h.observation.conj();
        let idx = n_heat + (k + kk) as usize;
        let mk = 1.0 / obs.norm();
        costs.push(mk * ginv[[idx, idx]].re.max(0.0).sqrt());
    }
    let x: Vec<f64> = ks.iter().map(|&k| (k.unsigned_abs() as f64).sqrt()).collect();
    let y: Vec<f64> = costs.iter().map(|c| c.ln()).collect();
    let (slope, _, fit_residual) = linalg::linear_fit(&x, &y);
    Ok(HyperbolicCost {
        ks: ks.to_vec(),
        costs,
        slope,
        fit_residual,
        condition_number: cond,
    })
}
