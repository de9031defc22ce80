//! Truncated generators of the cascade in eigencoordinates, trajectory
//! propagation and the stability diagnostics built on them.
//!
//! State vectors are `[z_1..z_N, q_1..q_2K]` where `z` are heat coefficients
//! in the Robin basis and `q` are wave coefficients in the unit basis `f̂_k`:
//! either the physical wave `w` (coordinates `Zw`) or `p = w + Π̂z` (`Zp`).
//!
//! Open loop, `Zw`: `ż = -Λz + e(1) ũ`, `ẇ = iMw + i 1 e(0)ᵀ z`.
//! Closed loop, `Zp`: `ũ = -gᵀp`, `ż = -Λz + e(1) ũ`, `ṗ = (iM - ḡgᵀ) p`.
//! The physical flux at `x = 1` is `u = -α z(1) + ũ`.

use std::f64::consts::PI;

use ndarray::{s, Array1, Array2};
use num_complex::Complex64 as C64;

use crate::error::{invalid, Error, Result};
use crate::heat_spectral::HeatSpectrum;
use crate::linalg::{self, CMatrix, CVector, EigenDecomposition};
use crate::quadrature::{trapezoid, GaussGrid};
use crate::sylvester::{unit_sylvester_matrix, SylvesterData};
use crate::wave_spectral::WaveSpectrum;

const I: C64 = C64 { re: 0.0, im: 1.0 };
const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Eigenvector-matrix condition number above which propagation switches to
/// the implicit scheme.
pub const COND_LIMIT: f64 = 1e8;
/// Relative tolerance of the step-doubling check.
pub const IMPLICIT_TOL: f64 = 1e-10;
const MAX_DOUBLINGS: u32 = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoopMode {
    Open,
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coords {
    Zp,
    Zw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformDirection {
    ToZp,
    ToZw,
}

#[derive(Debug, Clone)]
pub struct ClosedLoopModel {
    pub heat: HeatSpectrum,
    pub wave: WaveSpectrum,
    /// `[2K × N]` Sylvester matrix in unit wave coordinates.
    pub pi_hat: CMatrix,
    /// `g_k = (ΠB)* f̂_k`; `None` for an open-loop-only model.
    pub feedback: Option<Vec<C64>>,
}

impl ClosedLoopModel {
    pub fn open(heat: HeatSpectrum, wave: WaveSpectrum) -> Self {
        let pi_hat = unit_sylvester_matrix(&heat, &wave);
        Self {
            heat,
            wave,
            pi_hat,
            feedback: None,
        }
    }

    pub fn closed(heat: HeatSpectrum, wave: WaveSpectrum, sylv: &SylvesterData) -> Result<Self> {
        if sylv.b.len() != wave.len() || sylv.pi_matrix.ncols() != heat.len() {
            return Err(Error::DimensionMismatch(format!(
                "Sylvester data is {}x{}, model is {}x{}",
                sylv.b.len(),
                sylv.pi_matrix.ncols(),
                wave.len(),
                heat.len()
            )));
        }
        if sylv.alpha != heat.alpha {
            return invalid("Sylvester data built for a different alpha");
        }
        let mut m = Self::open(heat, wave);
        m.feedback = Some(sylv.feedback_row());
        Ok(m)
    }

    /// Builds the Sylvester data with an `n_series`-term series and closes the loop.
    pub fn with_series(heat: HeatSpectrum, wave: WaveSpectrum, n_series: usize) -> Result<Self> {
        let sylv = SylvesterData::build(&heat, &wave, n_series)?;
        Self::closed(heat, wave, &sylv)
    }

    pub fn n_heat(&self) -> usize {
        self.heat.len()
    }

    pub fn n_wave(&self) -> usize {
        self.wave.len()
    }

    pub fn dim(&self) -> usize {
        self.n_heat() + self.n_wave()
    }

    fn feedback_row(&self) -> Result<&[C64]> {
        match &self.feedback {
            Some(g) => Ok(g),
            None => invalid("closed-loop quantities need Sylvester data"),
        }
    }

    /// `E_Π = iM - ḡ gᵀ`.
    pub fn e_pi(&self) -> Result<CMatrix> {
        let g = self.feedback_row()?;
        let k = self.n_wave();
        Ok(Array2::from_shape_fn((k, k), |(a, b)| {
            let d = if a == b { I * self.wave.mu[a] } else { ZERO };
            d - g[a].conj() * g[b]
        }))
    }

    /// Input column of `ũ`: `e(1)` over heat modes, zero over wave modes (`Zw`),
    /// `Π̂ e(1)` over wave modes (`Zp`).
    pub fn input_column(&self, coords: Coords) -> CVector {
        let n = self.n_heat();
        let t1: CVector = self.heat.trace1.iter().map(|&t| C64::new(t, 0.0)).collect();
        let mut col = Array1::from_elem(self.dim(), ZERO);
        col.slice_mut(s![..n]).assign(&t1);
        if coords == Coords::Zp {
            col.slice_mut(s![n..]).assign(&self.pi_hat.dot(&t1));
        }
        col
    }

    pub fn assemble_generator(&self, mode: LoopMode, coords: Coords) -> Result<CMatrix> {
        let (n, k) = (self.n_heat(), self.n_wave());
        let mut m = linalg::zeros(n + k, n + k);
        for j in 0..n {
            m[[j, j]] = C64::new(-self.heat.eigenvalues[j], 0.0);
        }
        for a in 0..k {
            m[[n + a, n + a]] = I * self.wave.mu[a];
        }
        match (mode, coords) {
            (LoopMode::Open, Coords::Zp) => {}
            (LoopMode::Open, Coords::Zw) => {
                for a in 0..k {
                    for j in 0..n {
                        m[[n + a, j]] = I * self.heat.trace0[j];
                    }
                }
            }
            (LoopMode::Closed, Coords::Zp) => {
                let g = self.feedback_row()?;
                for j in 0..n {
                    for b in 0..k {
                        m[[j, n + b]] = -self.heat.trace1[j] * g[b];
                    }
                }
                for a in 0..k {
                    for b in 0..k {
                        m[[n + a, n + b]] -= g[a].conj() * g[b];
                    }
                }
            }
            (LoopMode::Closed, Coords::Zw) => {
                let zp = self.assemble_generator(LoopMode::Closed, Coords::Zp)?;
                let t = self.transform_matrix(TransformDirection::ToZp);
                let ti = self.transform_matrix(TransformDirection::ToZw);
                m = ti.dot(&zp).dot(&t);
            }
        }
        Ok(m)
    }

    /// `𝒯 = [[I, 0], [Π̂, I]]` (`ToZp`) or its inverse (`ToZw`).
    pub fn transform_matrix(&self, dir: TransformDirection) -> CMatrix {
        let n = self.n_heat();
        let mut t = linalg::identity(self.dim());
        let sign = match dir {
            TransformDirection::ToZp => 1.0,
            TransformDirection::ToZw => -1.0,
        };
        t.slice_mut(s![n.., ..n]).assign(&self.pi_hat.mapv(|v| v * sign));
        t
    }

    /// `p = w + Π̂z` or `w = p - Π̂z`.
    pub fn transform_state(&self, x: &CVector, dir: TransformDirection) -> Result<CVector> {
        self.check_len(x)?;
        let n = self.n_heat();
        let pz = self.pi_hat.dot(&x.slice(s![..n]));
        let mut out = x.clone();
        let mut q = out.slice_mut(s![n..]);
        match dir {
            TransformDirection::ToZp => q += &pz,
            TransformDirection::ToZw => q -= &pz,
        }
        Ok(out)
    }

    fn check_len(&self, x: &CVector) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "state of length {} for a model of dimension {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Physical wave coefficients `w`.
    pub fn physical_wave(&self, x: &CVector, coords: Coords) -> Result<CVector> {
        let x = match coords {
            Coords::Zw => x.clone(),
            Coords::Zp => self.transform_state(x, TransformDirection::ToZw)?,
        };
        Ok(x.slice(s![self.n_heat()..]).to_owned())
    }

    /// Feedback `ũ = -gᵀp` (zero in open loop).
    pub fn control(&self, x: &CVector, mode: LoopMode, coords: Coords) -> Result<C64> {
        if mode == LoopMode::Open {
            return Ok(ZERO);
        }
        let g = self.feedback_row()?;
        let p = match coords {
            Coords::Zp => x.clone(),
            Coords::Zw => self.transform_state(x, TransformDirection::ToZp)?,
        };
        Ok(-p.slice(s![self.n_heat()..]).iter().zip(g).map(|(p, g)| p * g).sum::<C64>())
    }

    /// Smooth data in `(z, p)` coordinates: `z_j = 1/(1+λ_j)`,
    /// `p_k = sign(μ_k)/(1+μ_k²)` (real physical profiles).
    pub fn smooth_initial_data(&self) -> CVector {
        self.heat
            .eigenvalues
            .iter()
            .map(|&l| C64::new(1.0 / (1.0 + l), 0.0))
            .chain(self.wave.mu.iter().map(|&m| C64::new(m.signum() / (1.0 + m * m), 0.0)))
            .collect()
    }

    pub fn simulate(
        &self,
        mode: LoopMode,
        coords: Coords,
        x0: &CVector,
        t_end: f64,
        dt_out: f64,
    ) -> Result<TrajectoryRecord> {
        self.check_len(x0)?;
        let times = uniform_times(t_end, dt_out)?;
        let prop = Propagator::new(&self.assemble_generator(mode, coords)?)?;
        let states = prop.trajectory(x0, &times)?;
        self.record(mode, coords, times, states, &prop)
    }

    fn record(
        &self,
        mode: LoopMode,
        coords: Coords,
        times: Vec<f64>,
        states: Vec<CVector>,
        prop: &Propagator,
    ) -> Result<TrajectoryRecord> {
        let n = self.n_heat();
        let mut rec = TrajectoryRecord {
            times,
            coords,
            mode,
            z: Vec::with_capacity(states.len()),
            wave: Vec::with_capacity(states.len()),
            control: Vec::with_capacity(states.len()),
            energy: Vec::with_capacity(states.len()),
            norms: Vec::with_capacity(states.len()),
            method: prop.method,
            vector_condition: prop.vector_condition,
        };
        for x in states {
            let w = self.physical_wave(&x, coords)?;
            let z = x.slice(s![..n]).to_owned();
            let sq = z.iter().chain(w.iter()).map(|v| v.norm_sqr()).sum::<f64>();
            rec.control.push(self.control(&x, mode, coords)?);
            rec.energy.push(0.5 * sq);
            rec.norms.push(sq.sqrt());
            rec.z.push(z.to_vec());
            rec.wave.push(x.slice(s![n..]).to_vec());
        }
        Ok(rec)
    }
}

/// `0, dt, 2dt, ...` up to `t_end` (inclusive within rounding).
pub fn uniform_times(t_end: f64, dt: f64) -> Result<Vec<f64>> {
    if !(t_end > 0.0) || !(dt > 0.0) || !t_end.is_finite() {
        return invalid("simulation needs T > 0 and dt_out > 0");
    }
    let steps = (t_end / dt + 1e-9).floor() as usize;
    Ok((0..=steps).map(|i| i as f64 * dt).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropagationMethod {
    Eigen,
    ImplicitStepDoubling,
}

/// `x(t) = e^{At} x(0)` by eigendecomposition, or by Crank–Nicolson with
/// step doubling when the eigenvectors are ill-conditioned.
#[derive(Debug, Clone)]
pub struct Propagator {
    pub matrix: CMatrix,
    pub method: PropagationMethod,
    pub vector_condition: f64,
    eig: Option<EigenDecomposition>,
}

impl Propagator {
    pub fn new(a: &CMatrix) -> Result<Self> {
        let eig = EigenDecomposition::new(a)?;
        if eig.vector_condition <= COND_LIMIT {
            Ok(Self {
                matrix: a.clone(),
                method: PropagationMethod::Eigen,
                vector_condition: eig.vector_condition,
                eig: Some(eig),
            })
        } else {
            let mut p = Self::implicit(a);
            p.vector_condition = eig.vector_condition;
            Ok(p)
        }
    }

    pub fn implicit(a: &CMatrix) -> Self {
        Self {
            matrix: a.clone(),
            method: PropagationMethod::ImplicitStepDoubling,
            vector_condition: f64::NAN,
            eig: None,
        }
    }

    pub fn eigen(&self) -> Option<&EigenDecomposition> {
        self.eig.as_ref()
    }

    /// States at the given (increasing) times.
    pub fn trajectory(&self, x0: &CVector, times: &[f64]) -> Result<Vec<CVector>> {
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return invalid("time grid must be strictly increasing");
        }
        match &self.eig {
            Some(e) => {
                let c = e.modal(x0);
                Ok(times.iter().map(|&t| e.evolve_modal(&c, t)).collect())
            }
            None => {
                let mut out = Vec::with_capacity(times.len());
                let mut x = self.step(x0, times.first().copied().unwrap_or(0.0))?;
                out.push(x.clone());
                let mut cache: Option<(f64, CMatrix)> = None;
                for w in times.windows(2) {
                    let dt = w[1] - w[0];
                    let q = match &cache {
                        Some((h, q)) if (h - dt).abs() <= 1e-12 * dt => q.clone(),
                        _ => {
                            let q = self.implicit_matrix(dt)?;
                            cache = Some((dt, q.clone()));
                            q
                        }
                    };
                    x = q.dot(&x);
                    out.push(x.clone());
                }
                Ok(out)
            }
        }
    }

    pub fn propagate(&self, x0: &CVector, t: f64) -> Result<CVector> {
        match &self.eig {
            Some(e) => Ok(e.evolve_modal(&e.modal(x0), t)),
            None => self.step(x0, t),
        }
    }

    fn step(&self, x0: &CVector, t: f64) -> Result<CVector> {
        if t == 0.0 {
            return Ok(x0.clone());
        }
        Ok(self.implicit_matrix(t)?.dot(x0))
    }

    /// `(I - hA/2)^{-1}(I + hA/2)` raised to `m` substeps over `dt`.
    fn cn_power(&self, dt: f64, doublings: u32) -> Result<CMatrix> {
        let n = self.matrix.nrows();
        let h = dt / 2f64.powi(doublings as i32);
        let id = linalg::identity(n);
        let half = self.matrix.mapv(|v| v * (0.5 * h));
        let mut p = linalg::inverse(&(&id - &half))?.dot(&(&id + &half));
        for _ in 0..doublings {
            p = p.dot(&p);
        }
        Ok(p)
    }

    /// Richardson-corrected Crank–Nicolson propagator over `dt`, accepted once
    /// successive halvings agree to [`IMPLICIT_TOL`].
    fn implicit_matrix(&self, dt: f64) -> Result<CMatrix> {
        let mut coarse = self.cn_power(dt, 0)?;
        for d in 1..=MAX_DOUBLINGS {
            let fine = self.cn_power(dt, d)?;
            let diff = &fine - &coarse;
            let err = frob(&diff) / 3.0;
            if err <= IMPLICIT_TOL * frob(&fine).max(1e-300) {
                return Ok(&fine + &diff.mapv(|v| v / 3.0));
            }
            coarse = fine;
        }
        Err(Error::Numerical(format!(
            "step doubling did not reach {IMPLICIT_TOL:e} over dt = {dt}"
        )))
    }
}

fn frob(a: &CMatrix) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Final state of `ẋ = Ax + b u(t)` by Duhamel's formula in modal coordinates.
/// Each modal convolution `∫₀^T e^{λ(T-s)} u(s) ds` uses a composite
/// Gauss–Legendre grid refined towards `s = T`.
pub fn simulate_with_input(
    a: &CMatrix,
    b: &CVector,
    x0: &CVector,
    u: &dyn Fn(f64) -> C64,
    t_end: f64,
) -> Result<CVector> {
    if !(t_end > 0.0) {
        return invalid("horizon must be positive");
    }
    let e = EigenDecomposition::new(a)?;
    if e.vector_condition > COND_LIMIT {
        return Err(Error::IllConditioned(format!(
            "eigenvector condition {:e} too large for modal Duhamel integration",
            e.vector_condition
        )));
    }
    let rate = e.values.iter().map(|l| l.re.abs()).fold(1.0, f64::max);
    let freq = e.values.iter().map(|l| l.im.abs()).fold(1.0, f64::max);
    let grid = GaussGrid::graded_unit(rate * t_end, freq * t_end)?.mapped(0.0, t_end);
    let us: Vec<C64> = grid.nodes.iter().map(|&s| u(s)).collect();
    let c0 = e.modal(x0);
    let bm = e.modal(b);
    let c: CVector = (0..c0.len())
        .map(|i| {
            let l = e.values[i];
            let conv: C64 = grid
                .nodes
                .iter()
                .zip(&grid.weights)
                .zip(&us)
                .map(|((&s, &w), &us)| (l * (t_end - s)).exp() * us * w)
                .sum();
            (l * t_end).exp() * c0[i] + bm[i] * conv
        })
        .collect();
    Ok(e.vectors.dot(&c))
}

/// Sampled trajectory with derived quantities.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub coords: Coords,
    pub mode: LoopMode,
    pub z: Vec<Vec<C64>>,
    /// Wave coefficients in the run's coordinates (`p` or `w`).
    pub wave: Vec<Vec<C64>>,
    /// Feedback `ũ(t)`.
    pub control: Vec<C64>,
    /// `½(‖z‖² + ‖w‖²)`.
    pub energy: Vec<f64>,
    /// `‖Z(t)‖_𝒳`.
    pub norms: Vec<f64>,
    pub method: PropagationMethod,
    pub vector_condition: f64,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `∫₀^T |ũ|² dt` by the trapezoidal rule.
    pub fn control_energy(&self) -> f64 {
        let y: Vec<f64> = self.control.iter().map(|u| u.norm_sqr()).collect();
        trapezoid(&self.times, &y)
    }

    /// `½‖q(t)‖²` of the stored wave coefficients.
    pub fn wave_half_norm_sq(&self, i: usize) -> f64 {
        0.5 * self.wave[i].iter().map(|v| v.norm_sqr()).sum::<f64>()
    }

    /// CSV rows `t, norm, Re u, Im u, energy`.
    pub fn csv_rows(&self) -> Vec<[f64; 5]> {
        (0..self.len())
            .map(|i| {
                [
                    self.times[i],
                    self.norms[i],
                    self.control[i].re,
                    self.control[i].im,
                    self.energy[i],
                ]
            })
            .collect()
    }
}

/// Result of fitting `log ‖Z‖ ≈ c + γ log(1+t)` on a window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub exponent: f64,
    pub residual: f64,
    pub samples: usize,
    /// Some sample in the window is below `1e-12`.
    pub floor_warning: bool,
}

pub fn decay_fit_series(times: &[f64], norms: &[f64], t_lo: f64, t_hi: f64) -> Result<DecayFit> {
    if !(t_hi > t_lo) || t_lo < 1.0 {
        return invalid("decay window needs t_hi > t_lo >= 1");
    }
    let (mut x, mut y) = (Vec::new(), Vec::new());
    let mut floor_warning = false;
    for (&t, &n) in times.iter().zip(norms) {
        if t >= t_lo && t <= t_hi {
            floor_warning |= n < 1e-12;
            if n > 0.0 {
                x.push((1.0 + t).ln());
                y.push(n.ln());
            }
        }
    }
    if x.len() < 3 {
        return invalid("fewer than three samples in the decay window");
    }
    let (exponent, _, residual) = linalg::linear_fit(&x, &y);
    Ok(DecayFit {
        exponent,
        residual,
        samples: x.len(),
        floor_warning,
    })
}

pub fn decay_fit(traj: &TrajectoryRecord, t_lo: f64, t_hi: f64) -> Result<DecayFit> {
    decay_fit_series(&traj.times, &traj.norms, t_lo, t_hi)
}

/// `πm` points, roughly log-spaced on `[lo, hi]`: midway between consecutive
/// open-loop ordinates `μ_k = π(k+½)`.
pub fn offset_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(hi > lo) || lo < PI || n < 2 {
        return invalid("offset grid needs pi <= lo < hi and n >= 2");
    }
    let mut out: Vec<f64> = (0..n)
        .map(|i| {
            let s = lo * (hi / lo).powf(i as f64 / (n - 1) as f64);
            (s / PI).round() * PI
        })
        .collect();
    out.dedup();
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ResolventScan {
    pub s: Vec<f64>,
    /// `‖(is - E)^{-1}‖ = 1/σ_min(is - E)`.
    pub norms: Vec<f64>,
    /// `1/dist(is, σ(E))`.
    pub lower_bounds: Vec<f64>,
    /// `σ_min < 1e-14 σ_max`.
    pub near_singular: Vec<bool>,
    /// Log-log slope over all `s`.
    pub slope: f64,
    /// Log-log slope over `[s_max/10, s_max]`.
    pub top_decade_slope: f64,
}

pub fn resolvent_scan(e: &CMatrix, s_values: &[f64]) -> Result<ResolventScan> {
    if s_values.len() < 2 {
        return invalid("resolvent scan needs at least two points");
    }
    let n = e.nrows();
    let eig = linalg::EigenDecomposition::new(e)?;
    let mut norms = Vec::with_capacity(s_values.len());
    let mut lower = Vec::with_capacity(s_values.len());
    let mut flagged = Vec::with_capacity(s_values.len());
    for &s in s_values {
        let mut m = e.mapv(|v| -v);
        for i in 0..n {
            m[[i, i]] += I * s;
        }
        let sv = linalg::singular_values(&m)?;
        let smin = *sv.last().unwrap();
        flagged.push(smin < 1e-14 * sv[0]);
        norms.push(if smin > 0.0 { 1.0 / smin } else { f64::INFINITY });
        let dist = eig.values.iter().map(|l| (I * s - l).norm()).fold(f64::INFINITY, f64::min);
        lower.push(1.0 / dist);
    }
    let lx: Vec<f64> = s_values.iter().map(|s| s.abs().ln()).collect();
    let ly: Vec<f64> = norms.iter().map(|v| v.ln()).collect();
    let (slope, _, _) = linalg::linear_fit(&lx, &ly);
    let smax = s_values.iter().map(|s| s.abs()).fold(0.0, f64::max);
    let (tx, ty): (Vec<f64>, Vec<f64>) = lx
        .iter()
        .zip(&ly)
        .filter(|(x, _)| x.exp() >= smax / 10.0 * (1.0 - 1e-12))
        .map(|(a, b)| (*a, *b))
        .unzip();
    let top_decade_slope = if tx.len() >= 2 {
        linalg::linear_fit(&tx, &ty).0
    } else {
        f64::NAN
    };
    Ok(ResolventScan {
        s: s_values.to_vec(),
        norms,
        lower_bounds: lower,
        near_singular: flagged,
        slope,
        top_decade_slope,
    })
}

#[derive(Debug, Clone)]
pub struct DissipationReport {
    /// Interior times where the residual was evaluated.
    pub times: Vec<f64>,
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    /// Initial layer excluded from the maximum.
    pub skip: f64,
    /// Max over the same times of `|Ė_{dt} - Ė_{2dt}|/3`, the `O(dt²)` part.
    pub discretization_estimate: f64,
    pub dt: f64,
}

/// Compares central differences of `E(t) = ½∫(|z|² + |w_x|² + |w_t|²)` with
/// `Re(z(1) ū) - ∫|z_x|² - Re(w_t(0) z̄(0))` on an `n_grid`-point
/// Gauss–Legendre grid, for `t > skip`.
pub fn dissipation_check(
    model: &ClosedLoopModel,
    traj: &TrajectoryRecord,
    n_grid: usize,
    skip: f64,
) -> Result<DissipationReport> {
    if traj.len() < 5 {
        return invalid("dissipation check needs at least five samples");
    }
    let dt = traj.times[1] - traj.times[0];
    if traj
        .times
        .windows(2)
        .any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt)
    {
        return invalid("dissipation check needs a uniform time grid");
    }
    let grid = GaussGrid::single(0.0, 1.0, n_grid)?;
    let (n, k) = (model.n_heat(), model.n_wave());
    let np = grid.len();
    let heat_v = Array2::from_shape_fn((np, n), |(p, j)| C64::new(model.heat.eval(j, grid.nodes[p]), 0.0));
    let heat_dx = Array2::from_shape_fn((np, n), |(p, j)| C64::new(model.heat.eval_dx(j, grid.nodes[p]), 0.0));
    let wave_x = Array2::from_shape_fn((np, k), |(p, a)| model.wave.unit_mode(a, grid.nodes[p]).2);
    let wave_t = Array2::from_shape_fn((np, k), |(p, a)| model.wave.unit_mode(a, grid.nodes[p]).1);
    let alpha = model.heat.alpha;

    let mut energy = Vec::with_capacity(traj.len());
    let mut rhs = Vec::with_capacity(traj.len());
    for i in 0..traj.len() {
        let z = Array1::from(traj.z[i].clone());
        let mut x = z.to_vec();
        x.extend_from_slice(&traj.wave[i]);
        let w = model.physical_wave(&Array1::from(x), traj.coords)?;
        let zv = heat_v.dot(&z);
        let zx = heat_dx.dot(&z);
        let wx = wave_x.dot(&w);
        let wt = wave_t.dot(&w);
        let dens: Vec<f64> = (0..np)
            .map(|p| zv[p].norm_sqr() + wx[p].norm_sqr() + wt[p].norm_sqr())
            .collect();
        energy.push(0.5 * grid.sum_samples(&dens));
        let zx2: Vec<f64> = zx.iter().map(|v| v.norm_sqr()).collect();
        let z1: C64 = (0..n).map(|j| z[j] * model.heat.eval(j, 1.0)).sum();
        let z0: C64 = (0..n).map(|j| z[j] * model.heat.eval(j, 0.0)).sum();
        let wt0: C64 = w.iter().map(|v| I * v).sum();
        let u = -alpha * z1 + traj.control[i];
        rhs.push((z1 * u.conj()).re - grid.sum_samples(&zx2) - (wt0 * z0.conj()).re);
    }
    let mut times = Vec::new();
    let mut residuals = Vec::new();
    let mut disc: f64 = 0.0;
    let mut max_residual: f64 = 0.0;
    for i in 1..traj.len() - 1 {
        let t = traj.times[i];
        let d1 = (energy[i + 1] - energy[i - 1]) / (2.0 * dt);
        let r = (d1 - rhs[i]).abs();
        times.push(t);
        residuals.push(r);
        if t > skip {
            max_residual = max_residual.max(r);
            if i >= 2 && i + 2 < traj.len() {
                let d2 = (energy[i + 2] - energy[i - 2]) / (4.0 * dt);
                disc = disc.max((d1 - d2).abs() / 3.0);
            }
        }
    }
    Ok(DissipationReport {
        times,
        residuals,
        max_residual,
        skip,
        discretization_estimate: disc,
        dt,
    })
}

/// `min_k |b_k|·|μ_k|` for each `α`, and the maximizer.
pub fn select_alpha_star(alphas: &[f64], wave: &WaveSpectrum, n_series: usize) -> Result<(f64, Vec<f64>)> {
    if alphas.is_empty() {
        return invalid("empty alpha grid");
    }
    let mut scores = Vec::with_capacity(alphas.len());
    for &a in alphas {
        let series = HeatSpectrum::build(a, n_series)?;
        let mut worst = f64::INFINITY;
        for &m in &wave.mu {
            let b = crate::sylvester::pib_coefficient(m, &series)?;
            worst = worst.min(b.value.norm() * m.abs());
        }
        scores.push(worst);
    }
    let best = scores
        .iter()
        .enumerate()
        .fold(0, |bi, (i, &s)| if s > scores[bi] { i } else { bi });
    Ok((alphas[best], scores))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(alpha: f64, n: usize, k: usize) -> ClosedLoopModel {
        let heat = HeatSpectrum::build(alpha, n).unwrap();
        let wave = WaveSpectrum::new(k).unwrap();
        if alpha > 0.0 {
            ClosedLoopModel::with_series(heat, wave, 20_000).unwrap()
        } else {
            ClosedLoopModel::open(heat, wave)
        }
    }

    fn eigvals(m: &CMatrix) -> Vec<C64> {
        let mut v = EigenDecomposition::new(m).unwrap().values.to_vec();
        v.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
        v
    }

    #[test]
    fn open_zp_is_diagonal() {
        let m = model(0.1, 5, 3);
        let a = m.assemble_generator(LoopMode::Open, Coords::Zp).unwrap();
        for ((i, j), v) in a.indexed_iter() {
            if i != j {
                assert_eq!(*v, ZERO);
            }
        }
        assert_eq!(a[[0, 0]].re, -m.heat.eigenvalues[0]);
        assert_eq!(a[[5, 5]].im, m.wave.mu[0]);
    }

    #[test]
    fn open_zw_is_similar_to_open_zp() {
        let m = model(0.1, 6, 4);
        let zp = m.assemble_generator(LoopMode::Open, Coords::Zp).unwrap();
        let zw = m.assemble_generator(LoopMode::Open, Coords::Zw).unwrap();
        let back = m
            .transform_matrix(TransformDirection::ToZw)
            .dot(&zp)
            .dot(&m.transform_matrix(TransformDirection::ToZp));
        for (a, b) in back.iter().zip(zw.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn closed_loop_is_stable_and_similar() {
        let m = model(0.05, 8, 8);
        let zp = m.assemble_generator(LoopMode::Closed, Coords::Zp).unwrap();
        let zw = m.assemble_generator(LoopMode::Closed, Coords::Zw).unwrap();
        let a = eigvals(&zp);
        let b = eigvals(&zw);
        assert!(a.iter().all(|l| l.re < 0.0));
        for x in &a {
            let d = b.iter().map(|y| (x - y).norm()).fold(f64::INFINITY, f64::min);
            assert!(d < 1e-8, "{x}: {d}");
        }
    }

    #[test]
    fn e_pi_is_dissipative() {
        let m = model(0.05, 4, 6);
        let e = m.e_pi().unwrap();
        let g = m.feedback.clone().unwrap();
        let p: CVector = (0..12).map(|i| C64::new((i as f64).sin(), 0.3 * i as f64)).collect();
        let ep = e.dot(&p);
        let re: f64 = ep.iter().zip(p.iter()).map(|(a, b)| a * b.conj()).sum::<C64>().re;
        let gp: C64 = g.iter().zip(p.iter()).map(|(a, b)| a * b).sum();
        let scale = p.iter().map(|v| v.norm_sqr()).sum::<f64>();
        assert!((re + gp.norm_sqr()).abs() < 1e-14 * scale);
    }

    #[test]
    fn transform_round_trip() {
        let m = model(0.2, 5, 3);
        let x: CVector = (0..11).map(|i| C64::new(i as f64, -(i as f64).cos())).collect();
        let y = m.transform_state(&x, TransformDirection::ToZp).unwrap();
        let back = m.transform_state(&y, TransformDirection::ToZw).unwrap();
        for (a, b) in x.iter().zip(back.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
        let mut w = x.clone();
        w.slice_mut(s![..5]).fill(ZERO);
        assert_eq!(m.transform_state(&w, TransformDirection::ToZp).unwrap(), w);
        assert!(m.transform_state(&x.slice(s![..4]).to_owned(), TransformDirection::ToZp).is_err());
    }

    #[test]
    fn two_path_evolution_agrees() {
        let m = model(0.3, 6, 5);
        let x: CVector = (0..16).map(|i| C64::new(1.0 / (1.0 + i as f64), 0.1)).collect();
        let t = 0.7;
        let direct = Propagator::new(&m.assemble_generator(LoopMode::Open, Coords::Zw).unwrap())
            .unwrap()
            .propagate(&x, t)
            .unwrap();
        let p0 = m.transform_state(&x, TransformDirection::ToZp).unwrap();
        let pt = Propagator::new(&m.assemble_generator(LoopMode::Open, Coords::Zp).unwrap())
            .unwrap()
            .propagate(&p0, t)
            .unwrap();
        let via = m.transform_state(&pt, TransformDirection::ToZw).unwrap();
        for (a, b) in direct.iter().zip(via.iter()) {
            assert!((a - b).norm() < 1e-8);
        }
    }

    #[test]
    fn free_wave_norm_is_conserved() {
        let m = model(0.0, 4, 6);
        let mut x = Array1::from_elem(m.dim(), ZERO);
        for a in 0..12 {
            x[4 + a] = C64::new(1.0 / (1.0 + a as f64), 0.5);
        }
        let tr = m.simulate(LoopMode::Open, Coords::Zp, &x, 8.0, 0.25).unwrap();
        let n0 = tr.norms[0];
        assert!(tr.norms.iter().all(|n| (n - n0).abs() < 1e-10));
    }

    #[test]
    fn single_heat_mode_decays_exactly() {
        let m = model(0.0, 4, 2);
        let mut x = Array1::from_elem(m.dim(), ZERO);
        x[1] = C64::new(1.0, 0.0);
        let tr = m.simulate(LoopMode::Open, Coords::Zp, &x, 1.0, 0.1).unwrap();
        for (t, z) in tr.times.iter().zip(&tr.z) {
            assert!((z[1].re - (-PI * PI * t).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn implicit_fallback_matches_eigen() {
        let m = model(0.1, 4, 3);
        let a = m.assemble_generator(LoopMode::Closed, Coords::Zp).unwrap();
        let x = m.smooth_initial_data();
        let e = Propagator::new(&a).unwrap();
        assert_eq!(e.method, PropagationMethod::Eigen);
        let i = Propagator::implicit(&a);
        let times = [0.0, 0.05, 0.1, 0.15];
        let ye = e.trajectory(&x, &times).unwrap();
        let yi = i.trajectory(&x, &times).unwrap();
        for (u, v) in ye.iter().zip(&yi) {
            for (p, q) in u.iter().zip(v.iter()) {
                assert!((p - q).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn jordan_block_uses_implicit_scheme() {
        let mut a = linalg::zeros(2, 2);
        a[[0, 0]] = C64::new(-1.0, 0.0);
        a[[1, 1]] = C64::new(-1.0, 0.0);
        a[[0, 1]] = C64::new(1.0, 0.0);
        let p = Propagator::new(&a).unwrap();
        assert_eq!(p.method, PropagationMethod::ImplicitStepDoubling);
        let x = p.propagate(&Array1::from(vec![ZERO, C64::new(1.0, 0.0)]), 1.0).unwrap();
        assert!((x[0].re - (-1f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn synthetic_decay_fit() {
        let t: Vec<f64> = (0..=1000).map(|i| i as f64).collect();
        let n: Vec<f64> = t.iter().map(|t| (1.0 + t).powf(-0.5)).collect();
        let f = decay_fit_series(&t, &n, 20.0, 500.0).unwrap();
        assert!((f.exponent + 0.5).abs() < 1e-6);
        assert!(!f.floor_warning);
        assert!(decay_fit_series(&t, &n, 0.5, 500.0).is_err());
    }

    #[test]
    fn closed_loop_norm_envelope_decreases() {
        let m = model(0.5, 8, 8);
        let x = m.smooth_initial_data();
        let tr = m.simulate(LoopMode::Closed, Coords::Zp, &x, 60.0, 0.05).unwrap();
        let env: Vec<f64> = tr.norms.chunks(200).map(|c| c.iter().cloned().fold(0.0, f64::max)).collect();
        assert!(env.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9)));
    }

    #[test]
    fn e_pi_only_matches_full_exponent_when_heat_is_fast() {
        let m = model(1.0, 16, 16);
        let x = m.smooth_initial_data();
        let full = m.simulate(LoopMode::Closed, Coords::Zp, &x, 500.0, 1.0).unwrap();
        let e = Propagator::new(&m.e_pi().unwrap()).unwrap();
        let p0 = x.slice(s![16..]).to_owned();
        let times = uniform_times(500.0, 1.0).unwrap();
        let pn: Vec<f64> = e.trajectory(&p0, &times).unwrap().iter().map(|p| linalg::vec_norm(p.as_slice().unwrap())).collect();
        let a = decay_fit(&full, 20.0, 500.0).unwrap().exponent;
        let b = decay_fit_series(&times, &pn, 20.0, 500.0).unwrap().exponent;
        assert!((a - b).abs() < 0.1, "{a} {b}");
    }

    #[test]
    fn resolvent_dominates_spectral_bound() {
        let m = model(0.05, 2, 16);
        let e = m.e_pi().unwrap();
        let s = offset_grid(4.0, 60.0, 8).unwrap();
        let r = resolvent_scan(&e, &s).unwrap();
        for (n, l) in r.norms.iter().zip(&r.lower_bounds) {
            assert!(*n >= l * (1.0 - 1e-10));
        }
        assert!(r.near_singular.iter().all(|f| !f));
    }

    #[test]
    fn resolvent_is_stable_under_truncation() {
        let a = model(0.05, 2, 16).e_pi().unwrap();
        let b = model(0.05, 2, 32).e_pi().unwrap();
        let s = offset_grid(4.0, crate::wave_spectral::mu(8), 6).unwrap();
        let ra = resolvent_scan(&a, &s).unwrap();
        let rb = resolvent_scan(&b, &s).unwrap();
        for (x, y) in ra.norms.iter().zip(&rb.norms) {
            assert!((x / y - 1.0).abs() < 0.01);
        }
    }

    #[test]
    fn dissipation_trivial_and_single_mode() {
        let m = model(0.0, 4, 4);
        let zero = Array1::from_elem(m.dim(), ZERO);
        let tr = m.simulate(LoopMode::Open, Coords::Zw, &zero, 0.1, 0.01).unwrap();
        let rep = dissipation_check(&m, &tr, 64, 0.0).unwrap();
        assert_eq!(rep.max_residual, 0.0);

        let heat_only = ClosedLoopModel::open(HeatSpectrum::build(0.0, 4).unwrap(), WaveSpectrum::new(1).unwrap());
        let mut x = Array1::from_elem(heat_only.dim(), ZERO);
        x[1] = C64::new(1.0, 0.0);
        let a = heat_only.assemble_generator(LoopMode::Open, Coords::Zw).unwrap();
        let mut a0 = a.clone();
        a0.slice_mut(s![4.., ..4]).fill(ZERO);
        let prop = Propagator::new(&a0).unwrap();
        let times = uniform_times(0.05, 1e-4).unwrap();
        let states = prop.trajectory(&x, &times).unwrap();
        let tr = heat_only.record(LoopMode::Open, Coords::Zw, times, states, &prop).unwrap();
        // -∫|z_x|² = -λ_2 |z_2|² for a single Neumann mode
        let l = PI * PI;
        for i in 1..tr.len() - 1 {
            let de = (tr.energy[i + 1] - tr.energy[i - 1]) / 2e-4;
            let exact = -l * tr.z[i][1].norm_sqr();
            assert!((de - exact).abs() < 1e-6 * l, "{de} {exact}");
        }
    }

    #[test]
    fn control_energy_identity() {
        let m = model(0.2, 6, 6);
        let x = m.smooth_initial_data();
        let tr = m.simulate(LoopMode::Closed, Coords::Zp, &x, 5.0, 1e-3).unwrap();
        let lhs = tr.control_energy();
        let rhs = tr.wave_half_norm_sq(0) - tr.wave_half_norm_sq(tr.len() - 1);
        assert!((lhs - rhs).abs() < 1e-6 * rhs, "{lhs} {rhs}");
        for (i, u) in tr.control.iter().enumerate() {
            let p = &tr.wave[i];
            let g = m.feedback.as_ref().unwrap();
            let v: C64 = -p.iter().zip(g).map(|(a, b)| a * b).sum::<C64>();
            assert!((u - v).norm() < 1e-15);
        }
    }

    #[test]
    fn duhamel_matches_scalar_solution() {
        let mut a = linalg::zeros(1, 1);
        a[[0, 0]] = C64::new(-3.0, 2.0);
        let b = Array1::from(vec![C64::new(1.0, 0.0)]);
        let x0 = Array1::from(vec![C64::new(0.5, 0.0)]);
        let t = 1.3;
        let y = simulate_with_input(&a, &b, &x0, &|s| C64::new(s.cos(), 0.0), t).unwrap();
        let l = a[[0, 0]];
        // ∫₀^T e^{l(T-s)} cos s ds, closed form
        let ii = C64::new(0.0, 1.0);
        let f = |w: C64| ((w * t).exp() - (l * t).exp()) / (w - l);
        let exact = (l * t).exp() * 0.5 + 0.5 * (f(ii) + f(-ii));
        assert!((y[0] - exact).norm() < 1e-13);
    }

    #[test]
    fn alpha_star_prefers_largest_score() {
        let wave = WaveSpectrum::new(4).unwrap();
        let (a, scores) = select_alpha_star(&[0.02, 0.2], &wave, 2000).unwrap();
        let i = if scores[0] >= scores[1] { 0 } else { 1 };
        assert_eq!(a, [0.02, 0.2][i]);
    }
}
