//! One- and two-dimensional adaptive quadrature on finite intervals.
//!
//! Thin layer over the double-exponential rule of the `quadrature` crate.
//! Long or oscillatory ranges are split into panels so each call sees a
//! smooth, moderately varying integrand.

/// Integrate `f` over `[a, b]` to roughly `tol` absolute error.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    quadrature::integrate(f, a, b, tol).integral
}

/// Integrate over `[a, b]` split into `panels` equal pieces.
pub fn integrate_panels<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize, tol: f64) -> f64 {
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let per = tol / panels as f64;
    (0..panels)
        .map(|i| {
            let lo = a + h * i as f64;
            let hi = if i + 1 == panels { b } else { lo + h };
            integrate(&f, lo, hi, per)
        })
        .sum()
}

/// Iterated integral of `f(x, y)` over `[x0, x1] × [y0, y1]`.
pub fn integrate_2d<F: Fn(f64, f64) -> f64>(
    f: F,
    (x0, x1): (f64, f64),
    (y0, y1): (f64, f64),
    tol: f64,
) -> f64 {
    let inner_tol = tol / (4.0 * (x1 - x0).abs().max(1.0));
    integrate(|x| integrate(|y| f(x, y), y0, y1, inner_tol), x0, x1, tol)
}

/// Composite midpoint rule with `n` cells per axis; an independent check on
/// [`integrate_2d`].
pub fn midpoint_2d<F: Fn(f64, f64) -> f64>(
    f: F,
    (x0, x1): (f64, f64),
    (y0, y1): (f64, f64),
    n: usize,
) -> f64 {
    let hx = (x1 - x0) / n as f64;
    let hy = (y1 - y0) / n as f64;
    let mut acc = 0.0;
    for i in 0..n {
        let x = x0 + (i as f64 + 0.5) * hx;
        for j in 0..n {
            acc += f(x, y0 + (j as f64 + 0.5) * hy);
        }
    }
    acc * hx * hy
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_and_exponential() {
        assert!((integrate(|x| x * x, 0.0, 3.0, 1e-12) - 9.0).abs() < 1e-11);
        let e = integrate(f64::exp, 0.0, 1.0, 1e-13);
        assert!((e - (std::f64::consts::E - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn panels_handle_oscillation() {
        let v = integrate_panels(|x| (20.0 * x).sin(), 0.0, 10.0, 40, 1e-12);
        let exact = (1.0 - (200.0f64).cos()) / 20.0;
        assert!((v - exact).abs() < 1e-10);
    }

    #[test]
    fn separable_2d() {
        let v = integrate_2d(|x, y| x * y.exp(), (0.0, 2.0), (0.0, 1.0), 1e-12);
        let exact = 2.0 * (std::f64::consts::E - 1.0);
        assert!((v - exact).abs() < 1e-10);
        let m = midpoint_2d(|x, y| x * y.exp(), (0.0, 2.0), (0.0, 1.0), 400);
        assert!((m - exact).abs() < 1e-5);
    }
}
