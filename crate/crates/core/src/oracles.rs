//! Reference values: the β = 2 sine-kernel formulas, the leading
//! large-distance asymptotics of the truncated two-point function, the
//! overcrowding envelope, and the Poisson and lattice limits.

use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::quad;

/// Mean number of points per unit length.
pub const INTENSITY: f64 = 1.0 / TAU;

/// Sine kernel `sin((x - y)/2) / (π |x - y|)` up to sign symmetry, with the
/// diagonal value `1/(2π)`.
pub fn sine_kernel(x: f64, y: f64) -> f64 {
    let d = x - y;
    if d.abs() < 1e-8 {
        return INTENSITY * (1.0 - d * d / 24.0);
    }
    (d / 2.0).sin() / (PI * d)
}

/// `ρ^(k)(x_1..x_k) = det K(x_i, x_j)` for the β = 2 process.
pub fn rho_k_beta2(points: &[f64]) -> f64 {
    let k = points.len();
    if k == 0 {
        return 1.0;
    }
    DMatrix::from_fn(k, k, |i, j| sine_kernel(points[i], points[j])).determinant()
}

/// Truncated two-point function at separation `r`, `-sin²(r/2) / (π² r²)`.
pub fn rho2_truncated_beta2(r: f64) -> f64 {
    if r.abs() < 1e-4 {
        return -(1.0 - r * r / 12.0) / (4.0 * PI * PI);
    }
    let s = (r / 2.0).sin();
    -s * s / (PI * PI * r * r)
}

fn check_window(w: (f64, f64)) -> Result<()> {
    if !(w.0.is_finite() && w.1.is_finite() && w.1 > w.0) {
        return Err(invalid(format!("window must be a finite interval with a < b, got {w:?}")));
    }
    Ok(())
}

/// True when the intervals share a segment of positive length.
pub fn windows_overlap(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0.max(b.0) < a.1.min(b.1)
}

/// Panels per axis so each covers at most about one radian of the
/// integrand's oscillation.
fn panels_for(len: f64) -> usize {
    (len.ceil() as usize).clamp(1, 4096)
}

/// `∫_{w1} ∫_{w2} ρ_T^(2)(u - v) dv du` for disjoint windows, by iterated
/// adaptive quadrature to absolute tolerance about 1e-10.
pub fn rho2_truncated_beta2_integrated(w1: (f64, f64), w2: (f64, f64)) -> Result<f64> {
    check_window(w1)?;
    check_window(w2)?;
    if windows_overlap(w1, w2) {
        return Err(invalid(format!("windows {w1:?} and {w2:?} overlap")));
    }
    let tol = 1e-11;
    let px = panels_for(w1.1 - w1.0);
    let py = panels_for(w2.1 - w2.0);
    let inner = |u: f64| quad::integrate_panels(|v| rho2_truncated_beta2(u - v), w2.0, w2.1, py, tol / 4.0);
    Ok(quad::integrate_panels(inner, w1.0, w1.1, px, tol))
}

/// Variance of the number of points in an interval of length `lambda` for
/// β = 2: `λ/(2π) + ∫∫_{[0,λ]²} ρ_T^(2) = λ/(2π) + 2∫_0^λ (λ - s) ρ_T^(2)(s) ds`.
pub fn count_variance_beta2(lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(invalid(format!("lambda must be non-negative, got {lambda}")));
    }
    let body = quad::integrate_panels(|s| (lambda - s) * rho2_truncated_beta2(s), 0.0, lambda, panels_for(lambda), 1e-13);
    Ok(lambda * INTENSITY + 2.0 * body)
}

/// Leading large-distance behaviour of `ρ_T^(2)(r)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeadingAsymptotics {
    /// The leading term when its constant is known (β ≤ 2).
    pub value: Option<f64>,
    /// Power `p` of the envelope `r^{-p}`.
    pub decay_exponent: f64,
    /// Whether the leading term carries a `cos r` modulation.
    pub oscillating: bool,
}

/// Leading asymptotics of the truncated two-point function:
/// `-1/(π² β r²)` for β < 2, `-1/(2π² r²) + cos r/(2π² r²)` at β = 2, and an
/// envelope `r^{-4/β}` with unknown constant and `cos r` modulation for β > 2.
pub fn forrester_haldane_leading(beta: f64, r: f64) -> Result<LeadingAsymptotics> {
    if !(beta > 0.0 && r > 0.0) {
        return Err(invalid("beta and r must be positive"));
    }
    let out = if beta < 2.0 {
        LeadingAsymptotics { value: Some(-1.0 / (PI * PI * beta * r * r)), decay_exponent: 2.0, oscillating: false }
    } else if beta == 2.0 {
        let c = 2.0 * PI * PI * r * r;
        LeadingAsymptotics { value: Some(-1.0 / c + r.cos() / c), decay_exponent: 2.0, oscillating: true }
    } else {
        LeadingAsymptotics { value: None, decay_exponent: 4.0 / beta, oscillating: true }
    };
    Ok(out)
}

/// The overcrowding envelope `exp(-(β/4) n² ln(n/λ))` with validity flags.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OvercrowdingBound {
    pub value: f64,
    /// `λ ≥ 1`, the range the estimate is stated for.
    pub lambda_in_range: bool,
    /// `n > λ`; otherwise the expression is at least 1 and says nothing.
    pub applicable: bool,
}

pub fn overcrowding_bound(beta: f64, lambda: f64, n: u32) -> Result<OvercrowdingBound> {
    if !(beta > 0.0 && lambda > 0.0) || n == 0 {
        return Err(invalid("beta, lambda and n must be positive"));
    }
    let nf = f64::from(n);
    Ok(OvercrowdingBound {
        value: (-(beta / 4.0) * nf * nf * (nf / lambda).ln()).exp(),
        lambda_in_range: lambda >= 1.0,
        applicable: nf > lambda,
    })
}

/// Poisson probability mass `e^{-μ} μ^k / k!`.
pub fn poisson_pmf(k: u64, mean: f64) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let lg: f64 = (1..=k).map(|i| (i as f64).ln()).sum();
    (k as f64 * mean.ln() - mean - lg).exp()
}

/// Count variance on an interval of length `lambda` for the randomly shifted
/// lattice `U + 2πZ`, the β → ∞ limit: `p(1 - p)` with `p = {λ/2π}`.
pub fn picket_fence_count_variance(lambda: f64) -> f64 {
    let x = lambda / TAU;
    let p = x - x.floor();
    p * (1.0 - p)
}
