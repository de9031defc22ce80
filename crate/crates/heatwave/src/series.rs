//! Summation of slowly convergent alternating series.
//!
//! Terms are accumulated pairwise (consecutive terms of opposite sign are
//! combined before being added), then the last partial sums are smoothed by
//! repeated averaging (Euler–van Wijngaarden), which removes the oscillating
//! part of the truncation error when the term magnitudes vary smoothly.

use num_complex::Complex64 as C64;

/// Number of trailing partial sums used by the averaging step.
pub const EULER_DEPTH: usize = 12;

#[derive(Debug, Clone, Copy)]
pub struct SeriesSum {
    /// Accelerated estimate of the full sum.
    pub value: C64,
    /// Plain partial sum over all `n` terms.
    pub partial: C64,
    /// Magnitude of the last included term.
    pub last_term: f64,
    /// Conservative tail bound `2 |term(n)|`.
    pub tail_bound: f64,
    /// Number of terms summed.
    pub n: usize,
}

/// Sums `term(1) + ... + term(n)` for an alternating sequence.
pub fn alternating_sum(term: impl Fn(usize) -> C64, n: usize) -> SeriesSum {
    assert!(n >= 2, "need at least two terms");
    let depth = EULER_DEPTH.min(n);
    let head = n - depth;
    let mut acc = C64::new(0.0, 0.0);
    let mut j = 1;
    while j < head {
        acc += term(j) + term(j + 1);
        j += 2;
    }
    if j <= head {
        acc += term(j);
    }
    let mut partials = Vec::with_capacity(depth);
    let mut last = C64::new(0.0, 0.0);
    for j in head + 1..=n {
        last = term(j);
        acc += last;
        partials.push(acc);
    }
    let value = repeated_average(partials.clone());
    SeriesSum {
        value,
        partial: acc,
        last_term: last.norm(),
        tail_bound: 2.0 * last.norm(),
        n,
    }
}

/// Averages neighbouring entries until one value is left.
pub fn repeated_average(mut s: Vec<C64>) -> C64 {
    while s.len() > 1 {
        for i in 0..s.len() - 1 {
            s[i] = 0.5 * (s[i] + s[i + 1]);
        }
        s.pop();
    }
    s[0]
}
