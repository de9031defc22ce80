//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any criterion fails.
//!
//! Run with `cargo test -p heatwave --test acceptance`. A single criterion can be
//! selected with `HEATWAVE_CRITERION=<n>`.

use std::f64::consts::{PI, SQRT_2};
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use heatwave::closed_loop::{
    decay_fit, dissipation_check, offset_grid, resolvent_scan, select_alpha_star, ClosedLoopModel, Coords,
    LoopMode,
};
use heatwave::coupled_spectral::{
    closeness_tail_bound, parabolic_branch, quadratic_closeness, Branch, CoupledBasis,
};
use heatwave::heat_spectral::{eigenvalue_expansion, robin_root, HeatSpectrum};
use heatwave::linalg::CVector;
use heatwave::moments::{hyperbolic_steering_cost, mixed_control, mixed_control_any_horizon};
use heatwave::quadrature::GaussGrid;
use heatwave::sylvester::{alternating_sum_identities, pib_coefficient, DEFAULT_N_SERIES};
use heatwave::wave_spectral::{mu, WaveSpectrum};
use heatwave::C64;
use ndarray::Array1;

type Outcome = Result<String, String>;

const ALPHA_GRID: [f64; 4] = [0.01, 0.02, 0.05, 0.1];

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn err(e: heatwave::Error) -> String {
    e.to_string()
}

fn criterion_1() -> Outcome {
    let mut worst: f64 = 0.0;
    for alpha in [0.01, 0.1, 1.0] {
        for j in 1..=200usize {
            let r = robin_root(j, alpha).map_err(err)?;
            let lo = ((j - 1) as f64 * PI).powi(2);
            let hi = ((j as f64 - 0.5) * PI).powi(2);
            ensure(r.lambda > lo && r.lambda < hi, format!("alpha={alpha} j={j}: {} outside ({lo}, {hi})", r.lambda))?;
            worst = worst.max(r.residual);
        }
    }
    ensure(worst <= 1e-13, format!("max residual {worst:e}"))?;
    Ok(format!("600 roots interlaced, max residual {worst:.2e}"))
}

fn expansion_error(alpha: f64) -> Result<f64, String> {
    let exact = robin_root(1, alpha).map_err(err)?.sqrt_lambda;
    Ok((exact - eigenvalue_expansion(1, alpha).map_err(err)?).abs())
}

fn criterion_2() -> Outcome {
    let e2 = expansion_error(1e-2)?;
    let e3 = expansion_error(1e-3)?;
    let ratio = e2 / e3;
    ensure((300.0..=3000.0).contains(&ratio), format!("ratio {ratio:.1}"))?;
    Ok(format!("error {e2:.3e} -> {e3:.3e}, ratio {ratio:.1}"))
}

fn criterion_3() -> Outcome {
    let (s2, s4) = alternating_sum_identities(2000);
    let d2 = (s2 + 1.0 / 6.0).abs();
    let d4 = (s4 + 7.0 / 360.0).abs();
    ensure(d2 <= 1e-10 && d4 <= 1e-10, format!("S2 off by {d2:e}, S4 off by {d4:e}"))?;
    Ok(format!("S2={s2:.15}, S4={s4:.15}"))
}

fn criterion_4() -> Outcome {
    // convergence: partial sums increase and the increments obey the tail bound
    let js = [10usize, 20, 40, 80, 160, 320, 640];
    let sums: Vec<f64> = js.iter().map(|&j| quadratic_closeness(j)).collect::<Result<_, _>>().map_err(err)?;
    for w in 0..js.len() - 1 {
        let inc = sums[w + 1] - sums[w];
        ensure(inc > 0.0, "partial sums not increasing")?;
        ensure(inc <= closeness_tail_bound(js[w]), format!("increment {inc:e} above tail bound at J={}", js[w]))?;
    }
    let last = *sums.last().unwrap();
    let tail = closeness_tail_bound(*js.last().unwrap());

    for j in 2..=30usize {
        let b = parabolic_branch(j).map_err(err)?;
        let l = b.lambda;
        let grid = GaussGrid::graded_unit(2.0 * l, 0.0).map_err(err)?;
        // quadrature of the profiles
        let qf = grid.integrate(|x| b.f(x).powi(2));
        let qg = grid.integrate(|x| b.g(x).powi(2));
        let rel = |a: f64, c: f64| (a - c).abs() / c.abs().max(1e-300);
        ensure(rel(qg, b.g_norm_sq) < 1e-10, format!("j={j}: g norm {qg} vs {}", b.g_norm_sq))?;
        if qf > 1e-290 {
            ensure(rel(qf, b.f_norm_sq) < 1e-10, format!("j={j}: f norm {qf} vs {}", b.f_norm_sq))?;
        }
        // raw closed form where it does not overflow
        if 4.0 * l < 700.0 {
            let e = (2.0 * l).exp();
            let closed = (e - 1.0) / (2.0 * l * (1.0 + e).powi(2));
            ensure(rel(b.f_norm_sq, closed) < 1e-12, format!("j={j}: closed form {closed} vs {}", b.f_norm_sq))?;
        }
        if j >= 4 {
            ensure(rel(b.g_norm_sq, 1.0 / (2.0 * l)) < 0.05, format!("j={j}: g asymptotic"))?;
            let fa = (-2.0 * l).exp() / (2.0 * l);
            if fa > 1e-300 {
                ensure(rel(b.f_norm_sq, fa) < 0.05, format!("j={j}: f asymptotic"))?;
            }
        }
    }
    Ok(format!("partial sum {last:.12} with tail <= {tail:.2e}; per-term forms agree"))
}

fn criterion_5() -> Outcome {
    let alpha = 0.05;
    let series = HeatSpectrum::build(alpha, DEFAULT_N_SERIES).map_err(err)?;
    let reference = SQRT_2 * alpha * alpha / 72.0;
    let mut worst: f64 = 0.0;
    let mut sym: f64 = 0.0;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for k in 100..=400i64 {
        let m = mu(k);
        let b = pib_coefficient(m, &series).map_err(err)?.value;
        let bm = pib_coefficient(mu(-k - 1), &series).map_err(err)?.value;
        sym = sym.max((bm - b.conj()).norm() / b.norm());
        let scaled = b.norm() * m;
        lo = lo.min(scaled);
        hi = hi.max(scaled);
        worst = worst.max((scaled / reference - 1.0).abs());
    }
    ensure(sym <= 8.0 * f64::EPSILON, format!("conjugate symmetry off by {sym:e}"))?;
    ensure(
        worst <= 0.2,
        format!("|b_k||mu_k| spans [{lo:.3e}, {hi:.3e}], reference {reference:.3e}, max relative deviation {worst:.3e}"),
    )?;
    Ok(format!("|b_k||mu_k| in [{lo:.3e}, {hi:.3e}], reference {reference:.3e}"))
}

fn criterion_6() -> Outcome {
    let alpha = 0.05;
    let heat = HeatSpectrum::build(alpha, 4).map_err(err)?;
    let wave = WaveSpectrum::new(256).map_err(err)?;
    let model = ClosedLoopModel::with_series(heat, wave, DEFAULT_N_SERIES).map_err(err)?;
    let e = model.e_pi().map_err(err)?;
    let s = offset_grid(10.0, 1e3, 40).map_err(err)?;
    let scan = resolvent_scan(&e, &s).map_err(err)?;
    ensure(!scan.near_singular.iter().any(|&f| f), "near-singular resolvent sample")?;
    let slope = scan.slope;
    ensure(
        (slope - 2.0).abs() <= 0.3,
        format!(
            "slope {slope:.3} (norm {:.3} at s={:.1}, {:.3} at s={:.1}; top decade slope {:.3})",
            scan.norms[0],
            scan.s[0],
            scan.norms.last().unwrap(),
            scan.s.last().unwrap(),
            scan.top_decade_slope
        ),
    )?;
    Ok(format!("slope {slope:.3}"))
}

fn criterion_7() -> Outcome {
    let selection_wave = WaveSpectrum::new(32).map_err(err)?;
    let (alpha, scores) = select_alpha_star(&ALPHA_GRID, &selection_wave, DEFAULT_N_SERIES).map_err(err)?;
    let heat = HeatSpectrum::build(alpha, 16).map_err(err)?;
    let wave = WaveSpectrum::new(32).map_err(err)?;
    let model = ClosedLoopModel::with_series(heat, wave, DEFAULT_N_SERIES).map_err(err)?;
    let x0 = model.smooth_initial_data();
    let closed = model.simulate(LoopMode::Closed, Coords::Zp, &x0, 500.0, 0.5).map_err(err)?;
    let fit = decay_fit(&closed, 20.0, 500.0).map_err(err)?;

    let mut pure_wave = x0.clone();
    pure_wave.iter_mut().take(model.n_heat()).for_each(|v| *v = C64::new(0.0, 0.0));
    let open = model.simulate(LoopMode::Open, Coords::Zp, &pure_wave, 500.0, 0.5).map_err(err)?;
    let open_fit = decay_fit(&open, 20.0, 500.0).map_err(err)?;

    let summary = format!(
        "alpha*={alpha} (scores {:.3?}), closed-loop exponent {:.3}, open-loop exponent {:.2e}",
        scores, fit.exponent, open_fit.exponent
    );
    ensure(open_fit.exponent.abs() <= 0.02, format!("open loop decays: {summary}"))?;
    ensure((-0.65..=-0.35).contains(&fit.exponent), summary.clone())?;
    Ok(summary)
}

fn criterion_8() -> Outcome {
    let heat = HeatSpectrum::build(0.05, 16).map_err(err)?;
    let wave = WaveSpectrum::new(16).map_err(err)?;
    let model = ClosedLoopModel::with_series(heat, wave, DEFAULT_N_SERIES).map_err(err)?;
    let x0 = model.smooth_initial_data();
    let tr = model.simulate(LoopMode::Closed, Coords::Zp, &x0, 5.0, 1e-3).map_err(err)?;
    let lhs = tr.control_energy();
    let rhs = tr.wave_half_norm_sq(0) - tr.wave_half_norm_sq(tr.len() - 1);
    let rel = (lhs - rhs).abs() / rhs.abs();
    ensure(rel <= 1e-6, format!("relative mismatch {rel:e}"))?;
    Ok(format!("control energy {lhs:.10e}, wave energy drop {rhs:.10e}, relative {rel:.1e}"))
}

fn criterion_9() -> Outcome {
    let dt = 1e-3;
    let heat = HeatSpectrum::build(0.05, 64).map_err(err)?;
    let wave = WaveSpectrum::new(32).map_err(err)?;
    let model = ClosedLoopModel::with_series(heat, wave, DEFAULT_N_SERIES).map_err(err)?;
    let x0 = model.smooth_initial_data();
    let tr = model.simulate(LoopMode::Closed, Coords::Zp, &x0, 2.0, dt).map_err(err)?;
    let rep = dissipation_check(&model, &tr, 512, 10.0 * dt).map_err(err)?;
    ensure(rep.max_residual <= 1e-4, format!("max residual {:e}", rep.max_residual))?;
    Ok(format!(
        "max residual {:.2e} for t > {}, time-difference estimate {:.2e}",
        rep.max_residual, rep.skip, rep.discretization_estimate
    ))
}

fn criterion_10() -> Outcome {
    let heat = HeatSpectrum::build(0.0, 6).map_err(err)?;
    let wave = WaveSpectrum::new(6).map_err(err)?;
    let model = ClosedLoopModel::open(heat, wave);
    let x0 = model.smooth_initial_data();
    let target: CVector = Array1::from_elem(model.n_wave(), C64::new(0.0, 0.0));
    let eps = 1e-3;
    let r = mixed_control(&model, &x0, &target, eps, 2.5).map_err(err)?;
    ensure(r.heat_residual <= 1e-8, format!("heat residual {:e}", r.heat_residual))?;
    ensure(r.wave_error < eps, format!("wave error {:e}", r.wave_error))?;
    let short = mixed_control_any_horizon(&model, &x0, &target, eps, 1.5).map_err(err)?;
    ensure(
        short.control.norm() > r.control.norm(),
        format!("cost at T=1.5 ({:e}) not above T=2.5 ({:e})", short.control.norm(), r.control.norm()),
    )?;

    let ks: Vec<i64> = (3..=12).collect();
    let cost = hyperbolic_steering_cost(&ks, 16, 3, 2.5).map_err(err)?;
    ensure(cost.slope > 0.0, format!("cost slope {}", cost.slope))?;
    Ok(format!(
        "T=2.5: heat {:.1e}, wave {:.1e}, |u| {:.3e}; T=1.5: |u| {:.3e}; ln cost vs sqrt(k) slope {:.3}",
        r.heat_residual,
        r.wave_error,
        r.control.norm(),
        short.control.norm(),
        cost.slope
    ))
}

fn criterion_11() -> Outcome {
    let mut worst_pair: f64 = 0.0;
    let mut worst_bc: f64 = 0.0;
    for (alpha, n, k) in [(0.0, 8, 8), (0.2, 6, 5)] {
        let heat = HeatSpectrum::build(alpha, n).map_err(err)?;
        let wave = WaveSpectrum::new(k).map_err(err)?;
        let basis = CoupledBasis::build(heat, wave).map_err(err)?;
        worst_pair = worst_pair.max(basis.biorthogonality_residual());
        for i in 0..basis.n_heat() {
            worst_bc = worst_bc.max(basis.boundary_residuals(Branch::Parabolic, i).map_err(err)?.max());
        }
        for i in 0..basis.wave.len() {
            worst_bc = worst_bc.max(basis.boundary_residuals(Branch::Hyperbolic, i).map_err(err)?.max());
        }
    }
    ensure(worst_pair <= 1e-8, format!("pairing residual {worst_pair:e}"))?;
    ensure(worst_bc <= 1e-9, format!("boundary residual {worst_bc:e}"))?;
    Ok(format!("pairing residual {worst_pair:.1e}, boundary residual {worst_bc:.1e}"))
}

struct Criterion {
    id: usize,
    name: &'static str,
    budget: Option<Duration>,
    run: fn() -> Outcome,
}

fn main() {
    let all = [
        Criterion { id: 1, name: "spectral interlacing", budget: Some(Duration::from_secs(1)), run: criterion_1 },
        Criterion { id: 2, name: "expansion order", budget: Some(Duration::from_secs(1)), run: criterion_2 },
        Criterion { id: 3, name: "alternating sums", budget: Some(Duration::from_secs(1)), run: criterion_3 },
        Criterion { id: 4, name: "quadratic closeness", budget: Some(Duration::from_secs(1)), run: criterion_4 },
        Criterion { id: 5, name: "feedback asymptotic", budget: Some(Duration::from_secs(30)), run: criterion_5 },
        Criterion { id: 6, name: "resolvent growth", budget: Some(Duration::from_secs(120)), run: criterion_6 },
        Criterion { id: 7, name: "polynomial decay", budget: Some(Duration::from_secs(120)), run: criterion_7 },
        Criterion { id: 8, name: "control energy", budget: None, run: criterion_8 },
        Criterion { id: 9, name: "dissipation law", budget: None, run: criterion_9 },
        Criterion { id: 10, name: "moment steering", budget: Some(Duration::from_secs(60)), run: criterion_10 },
        Criterion { id: 11, name: "biorthogonality", budget: None, run: criterion_11 },
    ];
    let only: Option<usize> = std::env::var("HEATWAVE_CRITERION").ok().and_then(|s| s.parse().ok());
    let mut failed = Vec::new();
    for c in all.iter().filter(|c| only.is_none_or(|o| o == c.id)) {
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let result = match (result, c.budget) {
            (Ok(_), Some(b)) if elapsed > b => Err(format!("runtime {:.2}s over budget {:.0}s", elapsed.as_secs_f64(), b.as_secs_f64())),
            (r, _) => r,
        };
        match result {
            Ok(detail) => println!("criterion {}: PASS {} ({:.2}s) {detail}", c.id, c.name, elapsed.as_secs_f64()),
            Err(detail) => {
                println!("criterion {}: FAIL {} ({:.2}s) {detail}", c.id, c.name, elapsed.as_secs_f64());
                failed.push(c.id);
            }
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
