use heatwave::closed_loop::{ClosedLoopModel, Coords, LoopMode, TransformDirection};
use heatwave::heat_spectral::HeatSpectrum;
use heatwave::sylvester::{pib_closed_form, SylvesterData};
use heatwave::wave_spectral::WaveSpectrum;

fn model() -> (ClosedLoopModel, SylvesterData) {
    let heat = HeatSpectrum::build(0.1, 8).unwrap();
    let wave = WaveSpectrum::new(6).unwrap();
    let sylv = SylvesterData::build(&heat, &wave, 50_000).unwrap();
    (ClosedLoopModel::closed(heat, wave, &sylv).unwrap(), sylv)
}

#[test]
fn series_feedback_matches_green_function() {
    let (_, s) = model();
    for (b, &m) in s.b.iter().zip(&s.mu) {
        let c = pib_closed_form(m, s.alpha);
        assert!((b - c).norm() < 1e-9 * c.norm().max(1e-12), "mu={m}: {b} vs {c}");
    }
}

#[test]
fn both_coordinate_systems_give_the_same_physical_trajectory() {
    let (m, _) = model();
    let x0 = m.smooth_initial_data();
    let w0 = m.transform_state(&x0, TransformDirection::ToZw).unwrap();
    let a = m.simulate(LoopMode::Closed, Coords::Zp, &x0, 3.0, 0.5).unwrap();
    let b = m.simulate(LoopMode::Closed, Coords::Zw, &w0, 3.0, 0.5).unwrap();
    for i in 0..a.len() {
        assert!((a.norms[i] - b.norms[i]).abs() < 1e-9 * a.norms[0], "t={}", a.times[i]);
        assert!((a.control[i] - b.control[i]).norm() < 1e-9);
    }
}

#[test]
fn closed_loop_energy_never_increases() {
    let (m, _) = model();
    let x0 = m.smooth_initial_data();
    let tr = m.simulate(LoopMode::Closed, Coords::Zp, &x0, 20.0, 0.1).unwrap();
    let p: Vec<f64> = (0..tr.len()).map(|i| tr.wave_half_norm_sq(i)).collect();
    assert!(p.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    assert!(tr.norms.last().unwrap() < &tr.norms[0]);
}
