//! Gauss–Legendre rules on intervals: fixed composite grids for repeated
//! reconstruction and an adaptive integrator used as an independent check.

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64 as C64;

use crate::error::{invalid, Result};

/// Nodes and weights on [-1, 1].
fn reference_rule(order: usize) -> Result<Vec<(f64, f64)>> {
    match GaussLegendre::new(order) {
        Ok(rule) => Ok(rule.as_node_weight_pairs().to_vec()),
        Err(_) => invalid(format!("Gauss-Legendre order {order} < 2")),
    }
}

/// A composite Gauss–Legendre grid on [a, b].
#[derive(Debug, Clone)]
pub struct GaussGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussGrid {
    /// `panels` equal sub-intervals with an `order`-point rule on each.
    pub fn composite(a: f64, b: f64, panels: usize, order: usize) -> Result<Self> {
        if panels == 0 || !(b > a) {
            return invalid("composite grid needs panels >= 1 and b > a");
        }
        let rule = reference_rule(order)?;
        let h = (b - a) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        for p in 0..panels {
            let lo = a + h * p as f64;
            for &(x, w) in &rule {
                nodes.push(lo + 0.5 * h * (x + 1.0));
                weights.push(0.5 * h * w);
            }
        }
        Ok(Self { nodes, weights })
    }

    /// A single `n`-point rule on [a, b].
    pub fn single(a: f64, b: f64, n: usize) -> Result<Self> {
        Self::composite(a, b, 1, n)
    }

    /// Default grid for [0, 1] resolving oscillations up to roughly `max_freq`.
    pub fn unit_for_frequency(max_freq: f64) -> Result<Self> {
        let panels = ((max_freq.abs() / std::f64::consts::PI).ceil() as usize).max(4) * 2;
        Self::composite(0.0, 1.0, panels, 16)
    }

    /// One `order`-point rule on each interval between consecutive breakpoints.
    pub fn from_breakpoints(points: &[f64], order: usize) -> Result<Self> {
        if points.len() < 2 || points.windows(2).any(|p| !(p[1] > p[0])) {
            return invalid("breakpoints must be strictly increasing");
        }
        let rule = reference_rule(order)?;
        let mut nodes = Vec::with_capacity((points.len() - 1) * order);
        let mut weights = Vec::with_capacity((points.len() - 1) * order);
        for p in points.windows(2) {
            let h = p[1] - p[0];
            for &(x, w) in &rule {
                nodes.push(p[0] + 0.5 * h * (x + 1.0));
                weights.push(0.5 * h * w);
            }
        }
        Ok(Self { nodes, weights })
    }

    /// Grid on [0, 1] for integrands with oscillations up to `max_freq` and
    /// boundary layers `e^{-rate·x}`, `e^{-rate·(1-x)}` down to width `1/max_rate`.
    /// Panels are refined geometrically towards both ends.
    pub fn graded_unit(max_rate: f64, max_freq: f64) -> Result<Self> {
        let n = ((max_freq.abs() / std::f64::consts::PI).ceil() as usize).max(4) * 2;
        let h = 1.0 / n as f64;
        let mut points: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
        let mut d = 0.5 * h;
        let floor = 0.25 / max_rate.abs().max(1.0);
        while d > floor {
            points.push(d);
            points.push(1.0 - d);
            d *= 0.5;
        }
        points.sort_by(|a, b| a.partial_cmp(b).unwrap());
        points.dedup();
        Self::from_breakpoints(&points, 16)
    }

    /// Maps a grid on [0, 1] affinely onto [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> Self {
        let h = b - a;
        Self {
            nodes: self.nodes.iter().map(|x| a + h * x).collect(),
            weights: self.weights.iter().map(|w| h * w).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    pub fn integrate_c(&self, f: impl Fn(f64) -> C64) -> C64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| f(x) * w)
            .sum()
    }

    /// Weighted sum of precomputed samples.
    pub fn sum_samples(&self, samples: &[f64]) -> f64 {
        samples.iter().zip(&self.weights).map(|(s, w)| s * w).sum()
    }
}

const ADAPTIVE_ORDER: usize = 12;
const ADAPTIVE_MAX_DEPTH: usize = 40;

/// Adaptive Gauss–Legendre quadrature of a complex integrand.
///
/// Each interval is accepted when the single-rule value agrees with the sum
/// over its two halves to `tol` (absolute, scaled by the interval share).
pub fn adaptive_c(f: &dyn Fn(f64) -> C64, a: f64, b: f64, tol: f64) -> Result<C64> {
    if !(b > a) || !(tol > 0.0) {
        return invalid("adaptive quadrature needs b > a and tol > 0");
    }
    let rule = reference_rule(ADAPTIVE_ORDER)?;
    let apply = |lo: f64, hi: f64| -> C64 {
        let c = 0.5 * (lo + hi);
        let r = 0.5 * (hi - lo);
        rule.iter().map(|&(x, w)| f(c + r * x) * (w * r)).sum()
    };
    let mut total = C64::new(0.0, 0.0);
    let mut stack = vec![(a, b, apply(a, b), 0usize)];
    while let Some((lo, hi, whole, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = apply(lo, mid);
        let right = apply(mid, hi);
        let local_tol = tol * (hi - lo) / (b - a);
        if (left + right - whole).norm() <= local_tol.max(1e-300) || depth >= ADAPTIVE_MAX_DEPTH {
            total += left + right;
        } else {
            stack.push((lo, mid, left, depth + 1));
            stack.push((mid, hi, right, depth + 1));
        }
    }
    Ok(total)
}

/// Real-valued convenience wrapper of [`adaptive_c`].
pub fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    Ok(adaptive_c(&|x| C64::new(f(x), 0.0), a, b, tol)?.re)
}

/// Trapezoidal rule on a (possibly nonuniform) sample grid.
pub fn trapezoid(t: &[f64], y: &[f64]) -> f64 {
    t.windows(2)
        .zip(y.windows(2))
        .map(|(tt, yy)| 0.5 * (tt[1] - tt[0]) * (yy[0] + yy[1]))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_grid_resolves_boundary_layers() {
        let lam = 5000.0;
        let g = GaussGrid::graded_unit(lam, 10.0).unwrap();
        let exact = -(-lam).exp_m1() / lam;
        assert!((g.integrate(|x| (-lam * x).exp()) - exact).abs() < 1e-15);
        assert!((g.integrate(|x| (-lam * (1.0 - x)).exp()) - exact).abs() < 1e-15);
        assert!(GaussGrid::from_breakpoints(&[0.0, 0.0, 1.0], 8).is_err());
    }

    #[test]
    fn composite_integrates_polynomials_exactly() {
        let g = GaussGrid::composite(0.0, 2.0, 3, 4).unwrap();
        let v = g.integrate(|x| x.powi(7));
        assert!((v - 2f64.powi(8) / 8.0).abs() < 1e-11);
    }

    #[test]
    fn oscillatory_grid() {
        let g = GaussGrid::unit_for_frequency(200.0).unwrap();
        let v = g.integrate(|x| (200.0 * x).cos().powi(2));
        let exact = 0.5 + (400.0f64).sin() / 800.0;
        assert!((v - exact).abs() < 1e-13);
    }

    #[test]
    fn adaptive_handles_boundary_layer() {
        let lam = 500.0;
        let v = adaptive(&|x: f64| (-lam * x).exp(), 0.0, 1.0, 1e-14).unwrap();
        let exact = -(-lam).exp_m1() / lam;
        assert!((v - exact).abs() < 1e-14);
    }

    #[test]
    fn trapezoid_linear_exact() {
        let t = [0.0, 0.5, 2.0];
        let y = [1.0, 2.0, 5.0];
        assert!((trapezoid(&t, &y) - 6.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(GaussGrid::composite(1.0, 0.0, 2, 4).is_err());
        assert!(GaussGrid::composite(0.0, 1.0, 2, 1).is_err());
    }
}
