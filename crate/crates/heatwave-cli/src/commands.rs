//! The experiments behind each subcommand.

use std::f64::consts::{PI, SQRT_2};

use heatwave::closed_loop::{
    decay_fit, offset_grid, resolvent_scan, ClosedLoopModel, Coords, LoopMode, TransformDirection,
};
use heatwave::coupled_spectral::{Branch, CoupledBasis};
use heatwave::heat_spectral::HeatSpectrum;
use heatwave::linalg::{hermitian_eigenvalues, CVector};
use heatwave::moments::{exponential_gram, mixed_control, v_norm};
use heatwave::sylvester::{alternating_sum_identities, pib_closed_form, sylvester_weak_residual, SylvesterData};
use heatwave::wave_spectral::{mu, WaveSpectrum};
use heatwave::C64;
use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{Command, ExperimentConfig};
use crate::output::{scalar, Cell, Scalars, Table};

/// Tables and scalars of a run; `failures` lists violated invariants.
#[derive(Debug, Default)]
pub struct Outcome {
    pub tables: Vec<Table>,
    pub scalars: Scalars,
    pub failures: Vec<String>,
}

impl Outcome {
    fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(msg());
        }
    }
}

pub type RunResult = Result<Outcome, heatwave::Error>;

pub fn run(cfg: &ExperimentConfig) -> RunResult {
    match cfg.command {
        Command::Spectrum => spectrum(cfg),
        Command::RieszCheck => riesz_check(cfg),
        Command::Sylvester => sylvester(cfg),
        Command::Simulate => simulate(cfg),
        Command::Resolvent => resolvent(cfg),
        Command::Control => control(cfg),
        Command::Verify => verify(cfg),
    }
}

fn spectrum(cfg: &ExperimentConfig) -> RunResult {
    let heat = HeatSpectrum::build(cfg.alpha, cfg.n_heat)?;
    let wave = WaveSpectrum::new(cfg.k_wave)?;
    let mut out = Outcome::default();
    if let Err(e) = heat.check_invariants(1e-13) {
        out.failures.push(e);
    }
    scalar(&mut out.scalars, "lambda_1", heat.eigenvalues[0]);
    scalar(&mut out.scalars, "lambda_n", *heat.eigenvalues.last().unwrap());
    scalar(&mut out.scalars, "max_root_residual", heat.residuals.iter().cloned().fold(0.0, f64::max));
    out.tables.push(Table::new(
        "heat_spectrum",
        ["j", "lambda", "sqrt_lambda", "c", "trace0", "trace1"],
        heat.csv_rows(),
    ));
    out.tables.push(Table::new("wave_spectrum", ["k", "mu", "re_fstar", "im_fstar"], wave.csv_rows()));
    Ok(out)
}

fn riesz_check(cfg: &ExperimentConfig) -> RunResult {
    let basis = CoupledBasis::build(HeatSpectrum::build(cfg.alpha, cfg.n_heat)?, WaveSpectrum::new(cfg.k_wave)?)?;
    let mut out = Outcome::default();
    let pairing = basis.biorthogonality_residual();
    let mut boundary: f64 = 0.0;
    for i in 0..basis.n_heat() {
        boundary = boundary.max(basis.boundary_residuals(Branch::Parabolic, i)?.max());
    }
    for i in 0..basis.wave.len() {
        boundary = boundary.max(basis.boundary_residuals(Branch::Hyperbolic, i)?.max());
    }
    out.check(pairing <= 1e-8, || format!("pairing residual {pairing:e} > 1e-8"));
    out.check(boundary <= 1e-9, || format!("boundary residual {boundary:e} > 1e-9"));
    let closeness = basis.closeness_csv_rows();
    if let Some(last) = closeness.last() {
        scalar(&mut out.scalars, "closeness_partial_sum", last[1]);
        scalar(&mut out.scalars, "closeness_tail_bound", last[2]);
    }
    scalar(&mut out.scalars, "pairing_residual", pairing);
    scalar(&mut out.scalars, "boundary_residual", boundary);
    scalar(&mut out.scalars, "spectral_gap", basis.spectral_gap());
    out.tables.push(Table::new("closeness", ["J", "partial_sum", "tail_bound"], closeness));
    out.tables.push(Table::new("biorthogonality", ["row", "col", "re", "im"], basis.biorthogonality_csv_rows()));
    out.tables.push(Table::new(
        "observations",
        ["k", "re", "im", "weighted_modulus"],
        basis.observation_csv_rows(),
    ));
    Ok(out)
}

fn sylvester(cfg: &ExperimentConfig) -> RunResult {
    let heat = HeatSpectrum::build(cfg.alpha, cfg.n_heat)?;
    let wave = WaveSpectrum::new(cfg.k_wave)?;
    let s = SylvesterData::build(&heat, &wave, cfg.n_series)?;
    let mut out = Outcome::default();
    let rows = s.csv_rows();
    let scaled: Vec<f64> = rows.iter().map(|r| r[3]).collect();
    let top = wave.index_of(cfg.k_wave as i64 - 1).expect("largest k is in the window");
    let mut closed_err: f64 = 0.0;
    let mut sym: f64 = 0.0;
    for (i, (&b, &m)) in s.b.iter().zip(&s.mu).enumerate() {
        let c = pib_closed_form(m, cfg.alpha);
        closed_err = closed_err.max((b - c).norm() / c.norm());
        sym = sym.max((s.b[wave.partner(i)] - b.conj()).norm() / b.norm());
    }
    out.check(sym <= 8.0 * f64::EPSILON, || format!("conjugate symmetry off by {sym:e}"));
    scalar(&mut out.scalars, "k_max", (cfg.k_wave - 1) as f64);
    scalar(&mut out.scalars, "b_mu_at_k_max", scaled[top]);
    scalar(&mut out.scalars, "b_mu_min", scaled.iter().cloned().fold(f64::INFINITY, f64::min));
    scalar(&mut out.scalars, "b_mu_max", scaled.iter().cloned().fold(0.0, f64::max));
    scalar(&mut out.scalars, "reference_sqrt2_alpha2_over_72", SQRT_2 * cfg.alpha * cfg.alpha / 72.0);
    scalar(&mut out.scalars, "max_rel_dev_from_closed_form", closed_err);
    scalar(&mut out.scalars, "max_tail_bound", s.b_tail.iter().cloned().fold(0.0, f64::max));
    scalar(&mut out.scalars, "conjugate_symmetry", sym);
    out.tables.push(Table::new("feedback", ["k", "re_b", "im_b", "abs_b_mu", "asymptotic_abs_mu"], rows));
    let pi = s.pi_matrix.indexed_iter().map(|((r, c), v)| [r as f64, c as f64, v.re, v.im]);
    out.tables.push(Table::new("pi_matrix", ["row", "col", "re", "im"], pi));
    Ok(out)
}

fn closed_model(cfg: &ExperimentConfig) -> Result<ClosedLoopModel, heatwave::Error> {
    ClosedLoopModel::with_series(
        HeatSpectrum::build(cfg.alpha, cfg.n_heat)?,
        WaveSpectrum::new(cfg.k_wave)?,
        cfg.n_series,
    )
}

fn simulate(cfg: &ExperimentConfig) -> RunResult {
    let m = closed_model(cfg)?;
    let x0 = m.smooth_initial_data();
    let tr = m.simulate(LoopMode::Closed, Coords::Zp, &x0, cfg.t, cfg.dt_out)?;
    let mut out = Outcome::default();
    let p: Vec<f64> = (0..tr.len()).map(|i| tr.wave_half_norm_sq(i)).collect();
    let growth = p.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    out.check(growth <= 1e-12 * p[0].max(1e-300), || format!("wave energy increased by {growth:e}"));
    scalar(&mut out.scalars, "initial_norm", tr.norms[0]);
    scalar(&mut out.scalars, "final_norm", *tr.norms.last().unwrap());
    scalar(&mut out.scalars, "control_energy", tr.control_energy());
    scalar(&mut out.scalars, "wave_energy_drop", p[0] - p[p.len() - 1]);
    scalar(&mut out.scalars, "vector_condition", tr.vector_condition);
    if cfg.t >= 40.0 {
        if let Ok(fit) = decay_fit(&tr, 20.0, cfg.t) {
            scalar(&mut out.scalars, "decay_exponent", fit.exponent);
            scalar(&mut out.scalars, "decay_fit_residual", fit.residual);
        }
    }
    out.tables.push(Table::new("trajectory", ["t", "norm", "re_u", "im_u", "energy"], tr.csv_rows()));
    Ok(out)
}

fn resolvent(cfg: &ExperimentConfig) -> RunResult {
    let m = closed_model(cfg)?;
    let s = offset_grid(10.0, 1e3, 40)?;
    let scan = resolvent_scan(&m.e_pi()?, &s)?;
    let mut out = Outcome::default();
    // ‖R(is)‖ ≥ 1/dist(is, σ)
    let below = scan
        .norms
        .iter()
        .zip(&scan.lower_bounds)
        .any(|(n, l)| *n < l * (1.0 - 1e-8));
    out.check(!below, || "resolvent norm below the spectral lower bound".into());
    scalar(&mut out.scalars, "slope", scan.slope);
    scalar(&mut out.scalars, "top_decade_slope", scan.top_decade_slope);
    scalar(&mut out.scalars, "near_singular_samples", scan.near_singular.iter().filter(|&&f| f).count() as f64);
    let rows = (0..scan.s.len()).map(|i| [scan.s[i], scan.norms[i], scan.lower_bounds[i]]);
    out.tables.push(Table::new("resolvent", ["s", "norm", "lower_bound"], rows));
    Ok(out)
}

fn control(cfg: &ExperimentConfig) -> RunResult {
    let m = ClosedLoopModel::open(HeatSpectrum::build(cfg.alpha, cfg.n_heat)?, WaveSpectrum::new(cfg.k_wave)?);
    let x0 = m.smooth_initial_data();
    let target: CVector = Array1::from_elem(m.n_wave(), C64::new(0.0, 0.0));
    let r = mixed_control(&m, &x0, &target, cfg.epsilon, cfg.t)?;
    let mut out = Outcome::default();
    out.check(r.heat_residual <= 1e-8, || format!("heat residual {:e} > 1e-8", r.heat_residual));
    out.check(r.feasible, || format!("wave error {:e} >= epsilon", r.wave_error));
    scalar(&mut out.scalars, "control_norm", r.control.norm());
    scalar(&mut out.scalars, "heat_residual", r.heat_residual);
    scalar(&mut out.scalars, "wave_error", r.wave_error);
    scalar(&mut out.scalars, "predicted_wave_error", r.predicted_wave_error);
    scalar(&mut out.scalars, "gram_condition", r.control.condition_number);
    let summary = vec![vec![
        Cell::Text("mixed".into()),
        Cell::Num(cfg.t),
        Cell::Num(cfg.n_heat as f64),
        Cell::Num(cfg.k_wave as f64),
        Cell::Num(r.regularization),
        Cell::Num(r.control.norm()),
        Cell::Num(r.heat_residual),
        Cell::Num(r.wave_error),
        Cell::Num(r.control.condition_number),
    ]];
    out.tables.push(Table::with_cells(
        "control_summary",
        &["experiment", "T", "n_heat", "k_wave", "reg", "control_norm", "heat_residual", "wave_error", "gram_condition"],
        summary,
    ));
    let n = ((cfg.t / cfg.dt_out).round() as usize).max(1);
    out.tables.push(Table::new("control_signal", ["t", "re_u", "im_u"], r.control.csv_rows(n)));
    Ok(out)
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> CVector {
    (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

/// Composed invariant suites with seeded random samples.
fn verify(cfg: &ExperimentConfig) -> RunResult {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows: Vec<(String, f64, f64)> = Vec::new();
    let alpha = if cfg.alpha > 0.0 { cfg.alpha } else { 0.05 };

    let mut worst: f64 = 0.0;
    for _ in 0..16 {
        let a = 10f64.powf(rng.gen_range(-4.0..1.0));
        let h = HeatSpectrum::build(a, cfg.n_heat)?;
        if h.check_invariants(1e-13).is_err() {
            worst = f64::INFINITY;
        }
        worst = worst.max(h.residuals.iter().cloned().fold(0.0, f64::max));
    }
    rows.push(("heat_interlacing_residual".into(), worst, 1e-13));

    let neumann = HeatSpectrum::build(0.0, cfg.n_heat)?;
    let dev = neumann
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(i, l)| (l - (i as f64 * PI).powi(2)).abs())
        .fold(0.0, f64::max);
    rows.push(("neumann_eigenvalues".into(), dev, 0.0));

    let (s2, s4) = alternating_sum_identities(2000);
    rows.push(("alternating_sums".into(), (s2 + 1.0 / 6.0).abs().max((s4 + 7.0 / 360.0).abs()), 1e-10));

    let heat = HeatSpectrum::build(alpha, cfg.n_heat)?;
    let wave = WaveSpectrum::new(cfg.k_wave)?;
    let sylv = SylvesterData::build(&heat, &wave, cfg.n_series)?;
    let closed_err = sylv
        .b
        .iter()
        .zip(&sylv.mu)
        .map(|(b, &m)| {
            let c = pib_closed_form(m, alpha);
            (b - c).norm() / c.norm()
        })
        .fold(0.0, f64::max);
    rows.push(("feedback_series_vs_closed_form".into(), closed_err, 1e-6));
    let sym = (0..wave.len())
        .map(|i| (sylv.b[wave.partner(i)] - sylv.b[i].conj()).norm() / sylv.b[i].norm())
        .fold(0.0, f64::max);
    rows.push(("feedback_conjugate_symmetry".into(), sym, 8.0 * f64::EPSILON));
    let mut weak: f64 = 0.0;
    for j in 0..heat.len() {
        for k in 0..wave.len() {
            weak = weak.max(sylvester_weak_residual(&sylv, &heat, &wave, j, k));
        }
    }
    rows.push(("sylvester_weak_residual".into(), weak, 1e-12));

    let model = ClosedLoopModel::closed(heat.clone(), wave.clone(), &sylv)?;
    let mut round: f64 = 0.0;
    let mut dissip: f64 = f64::NEG_INFINITY;
    let e = model.e_pi()?;
    for _ in 0..16 {
        let x = random_vec(&mut rng, model.dim());
        let back = model.transform_state(&model.transform_state(&x, TransformDirection::ToZp)?, TransformDirection::ToZw)?;
        round = round.max(x.iter().zip(back.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max));
        let p = random_vec(&mut rng, model.n_wave());
        let q: C64 = e.dot(&p).iter().zip(p.iter()).map(|(a, b)| a * b.conj()).sum();
        let nsq: f64 = p.iter().map(|v| v.norm_sqr()).sum();
        dissip = dissip.max(q.re / nsq);
    }
    rows.push(("transform_round_trip".into(), round, 1e-12));
    rows.push(("e_pi_dissipativity".into(), dissip.max(0.0), 1e-14));

    let mut gram_min = f64::INFINITY;
    let mut herm: f64 = 0.0;
    for _ in 0..8 {
        let t = rng.gen_range(2.0..5.0);
        let n = rng.gen_range(1..5usize);
        let exps: Vec<C64> = (0..n)
            .map(|j| C64::new(-(j as f64 * PI).powi(2), 0.0))
            .chain((-3..3).map(|k| C64::new(0.0, mu(k))))
            .collect();
        let g = exponential_gram(t, &exps)?;
        herm = herm.max((&g - &g.t().mapv(|v| v.conj())).iter().map(|v| v.norm()).fold(0.0, f64::max));
        gram_min = gram_min.min(hermitian_eigenvalues(&g)?[0]);
    }
    rows.push(("gram_hermitian".into(), herm, 1e-13));
    rows.push(("gram_positive_definite".into(), if gram_min > 0.0 { 0.0 } else { 1.0 }, 0.0));

    let mut vn: f64 = 0.0;
    for _ in 0..16 {
        let beta: Vec<(i64, C64)> =
            (0..4).map(|_| (rng.gen_range(-20..20), C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))).collect();
        let a: Vec<C64> = random_vec(&mut rng, 3).to_vec();
        let l2 = (a.iter().chain(beta.iter().map(|(_, v)| v)).map(|v| v.norm_sqr()).sum::<f64>()).sqrt();
        vn = vn.max(l2 - v_norm(&beta, &a));
    }
    rows.push(("v_norm_dominates_l2".into(), vn.max(0.0), 1e-14));

    let basis = CoupledBasis::build(HeatSpectrum::build(cfg.alpha, cfg.n_heat)?, wave.clone())?;
    rows.push(("biorthogonality".into(), basis.biorthogonality_residual(), 1e-8));
    let mut bc: f64 = 0.0;
    for i in 0..basis.n_heat() {
        bc = bc.max(basis.boundary_residuals(Branch::Parabolic, i)?.max());
    }
    for i in 0..basis.wave.len() {
        bc = bc.max(basis.boundary_residuals(Branch::Hyperbolic, i)?.max());
    }
    rows.push(("boundary_conditions".into(), bc, 1e-9));

    let small = ClosedLoopModel::closed(
        HeatSpectrum::build(alpha, cfg.n_heat.min(8))?,
        WaveSpectrum::new(cfg.k_wave.min(8))?,
        &SylvesterData::build(
            &HeatSpectrum::build(alpha, cfg.n_heat.min(8))?,
            &WaveSpectrum::new(cfg.k_wave.min(8))?,
            cfg.n_series,
        )?,
    )?;
    let tr = small.simulate(LoopMode::Closed, Coords::Zp, &small.smooth_initial_data(), 2.0, 1e-3)?;
    let drop = tr.wave_half_norm_sq(0) - tr.wave_half_norm_sq(tr.len() - 1);
    rows.push(("control_energy_identity".into(), (tr.control_energy() - drop).abs() / drop, 1e-6));

    let mut out = Outcome::default();
    let mut cells = Vec::with_capacity(rows.len());
    for (name, value, tol) in rows {
        let pass = value <= tol;
        out.check(pass, || format!("{name}: {value:e} > {tol:e}"));
        scalar(&mut out.scalars, &name, value);
        cells.push(vec![Cell::Text(name), Cell::Num(value), Cell::Num(tol), Cell::Num(if pass { 1.0 } else { 0.0 })]);
    }
    out.tables.push(Table::with_cells("verify", &["check", "value", "tolerance", "pass"], cells));
    Ok(out)
}
