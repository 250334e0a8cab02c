//! Euler–Maruyama integration of the stochastic sine equation
//! `d alpha = lambda f(t) dt + Re((exp(-i alpha) - 1) dW)` for a family of
//! shift parameters driven by one shared noise path.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::noise::NoisePath;
use crate::params::BetaParams;

/// One step of the piecewise-constant scheme for the sine diffusion:
/// `alpha + drift + Re((exp(-i alpha) - 1) dw)`.
#[inline]
pub fn sine_step(alpha: f64, drift: f64, dw: Complex64) -> f64 {
    let (s, c) = alpha.sin_cos();
    alpha + drift + (c - 1.0) * dw.re + s * dw.im
}

/// Restore ordering across a λ-sorted family after a step. Returns the number
/// of entries that had to be raised.
#[inline]
pub fn clamp_ordered(values: &mut [f64]) -> usize {
    let mut clamps = 0;
    for i in 1..values.len() {
        if values[i] < values[i - 1] {
            values[i] = values[i - 1];
            clamps += 1;
        }
    }
    clamps
}

pub(crate) fn check_sorted(lambdas: &[f64]) -> Result<()> {
    if lambdas.is_empty() {
        return Err(invalid("at least one lambda is required"));
    }
    if lambdas.iter().any(|l| !l.is_finite()) {
        return Err(invalid("lambdas must be finite"));
    }
    if lambdas.windows(2).any(|w| w[0] > w[1]) {
        return Err(invalid("lambdas must be sorted ascending"));
    }
    Ok(())
}

/// Values of `alpha_lambda` on a uniform time grid for a sorted family of
/// shifts, stored row-major by time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffusionTrajectory {
    pub lambdas: Vec<f64>,
    pub step: f64,
    pub n_steps: usize,
    /// `values[j * lambdas.len() + i] = alpha_{lambda_i}(t_j)`.
    pub values: Vec<f64>,
    /// First grid index of the qualifying freeze run, when one was tracked.
    pub frozen_at: Vec<Option<usize>>,
    /// Number of order-restoring clamps applied.
    pub clamps: usize,
    pub seed: u64,
}

impl DiffusionTrajectory {
    pub fn width(&self) -> usize {
        self.lambdas.len()
    }

    pub fn time(&self, j: usize) -> f64 {
        self.step * j as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|j| self.time(j)).collect()
    }

    pub fn at(&self, j: usize, i: usize) -> f64 {
        self.values[j * self.width() + i]
    }

    /// All grid values of the `i`-th member.
    pub fn series(&self, i: usize) -> Vec<f64> {
        (0..=self.n_steps).map(|j| self.at(j, i)).collect()
    }

    pub fn terminal(&self) -> &[f64] {
        let m = self.width();
        &self.values[self.n_steps * m..]
    }

    /// Nearest-integer count `round(alpha(T) / 2 pi)` per member.
    pub fn terminal_counts(&self) -> Vec<i64> {
        self.terminal().iter().map(|a| count_from_angle(*a)).collect()
    }
}

/// `round(alpha / 2 pi)`.
#[inline]
pub fn count_from_angle(alpha: f64) -> i64 {
    (alpha / std::f64::consts::TAU).round() as i64
}

/// Integrate the whole family on the grid of `noise`, with the ordering clamp.
pub fn integrate_family(
    params: &BetaParams,
    lambdas: &[f64],
    noise: &NoisePath,
) -> Result<DiffusionTrajectory> {
    check_sorted(lambdas)?;
    let m = lambdas.len();
    let n = noise.n_steps;
    let dt = noise.step();
    let mut values = Vec::with_capacity((n + 1) * m);
    values.resize(m, 0.0);
    let mut state = vec![0.0; m];
    let mut clamps = 0;
    for (j, dw) in noise.increments.iter().enumerate() {
        let mass = params.drift_mass_between(dt * j as f64, dt * (j + 1) as f64);
        for (a, l) in state.iter_mut().zip(lambdas) {
            *a = sine_step(*a, l * mass, *dw);
        }
        clamps += clamp_ordered(&mut state);
        if let Some(i) = state.iter().position(|a| !a.is_finite()) {
            return Err(Error::NumericalFailure { step: j, seed: noise.seed, lambda: lambdas[i] });
        }
        values.extend_from_slice(&state);
    }
    Ok(DiffusionTrajectory {
        lambdas: lambdas.to_vec(),
        step: dt,
        n_steps: n,
        values,
        frozen_at: vec![None; m],
        clamps,
        seed: noise.seed,
    })
}

/// Noise rotated by a base trajectory, `dW~_j = exp(-i alpha_base(t_j)) dW_j`.
/// Rotation is an isometry, so the result is again a standard complex
/// Brownian path.
pub fn rotate_noise(base: &DiffusionTrajectory, noise: &NoisePath) -> Result<NoisePath> {
    check_same_grid(base, noise)?;
    if base.width() != 1 {
        return Err(invalid("rotation needs a single-member base trajectory"));
    }
    let increments = noise
        .increments
        .iter()
        .enumerate()
        .map(|(j, w)| Complex64::from_polar(1.0, -base.at(j, 0)) * w)
        .collect();
    Ok(NoisePath { increments, ..noise.clone() })
}

fn check_same_grid(base: &DiffusionTrajectory, noise: &NoisePath) -> Result<()> {
    if base.n_steps != noise.n_steps || (base.step - noise.step()).abs() > 1e-12 * base.step {
        return Err(invalid(format!(
            "grid mismatch: base has {} steps of {}, noise has {} steps of {}",
            base.n_steps,
            base.step,
            noise.n_steps,
            noise.step()
        )));
    }
    Ok(())
}

/// Integrate the difference diffusion `alpha_{lambda_base + lambda} -
/// alpha_{lambda_base}`, which solves the sine equation with shift `lambda`
/// driven by the noise rotated through the base trajectory.
pub fn integrate_difference(
    params: &BetaParams,
    lambda: f64,
    base: &DiffusionTrajectory,
    noise: &NoisePath,
) -> Result<DiffusionTrajectory> {
    let rotated = rotate_noise(base, noise)?;
    integrate_family(params, &[lambda], &rotated)
}

/// Drift term of a generic scalar SDE driven by complex noise.
pub trait Drift {
    /// `∫_a^b f`.
    fn integral(&self, a: f64, b: f64) -> f64;
    /// `sup |f|` on the horizon of interest.
    fn sup(&self) -> f64;
}

/// Diffusion coefficient `g`, entering as `Re(g(x) dW)`.
pub trait Diffusion {
    fn coeff(&self, x: f64) -> Complex64;
    fn lipschitz(&self) -> f64;
    fn sup(&self) -> f64;
}

/// `lambda f(t)` for the carousel drift profile.
#[derive(Clone, Copy, Debug)]
pub struct SineDrift {
    pub params: BetaParams,
    pub lambda: f64,
}

impl Drift for SineDrift {
    fn integral(&self, a: f64, b: f64) -> f64 {
        self.lambda * self.params.drift_mass_between(a, b)
    }
    fn sup(&self) -> f64 {
        self.lambda.abs() * self.params.drift_sup()
    }
}

/// A drift given pointwise; step integrals use three-point Gauss–Legendre.
pub struct FnDrift<F> {
    pub f: F,
    pub sup: f64,
}

impl<F: Fn(f64) -> f64> Drift for FnDrift<F> {
    fn integral(&self, a: f64, b: f64) -> f64 {
        let h = (b - a) / 2.0;
        let m = (a + b) / 2.0;
        let x = h * (0.6f64).sqrt();
        h * (5.0 * (self.f)(m - x) + 8.0 * (self.f)(m) + 5.0 * (self.f)(m + x)) / 9.0
    }
    fn sup(&self) -> f64 {
        self.sup
    }
}

/// `g(x) = exp(-i x) - 1`, with Lipschitz constant 1 and sup norm 2.
#[derive(Clone, Copy, Debug, Default)]
pub struct SineDiffusion;

impl Diffusion for SineDiffusion {
    fn coeff(&self, x: f64) -> Complex64 {
        Complex64::from_polar(1.0, -x) - 1.0
    }
    fn lipschitz(&self) -> f64 {
        1.0
    }
    fn sup(&self) -> f64 {
        2.0
    }
}

/// `g ≡ 0`.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoDiffusion;

impl Diffusion for NoDiffusion {
    fn coeff(&self, _x: f64) -> Complex64 {
        Complex64::new(0.0, 0.0)
    }
    fn lipschitz(&self) -> f64 {
        0.0
    }
    fn sup(&self) -> f64 {
        0.0
    }
}

/// The recursion `x_{j+1} = x_j + ∫_{t_j}^{t_{j+1}} f + Re(g(x_j) dW_j)`,
/// returning all grid values starting from `x0`.
pub fn piecewise_constant_scheme<D: Drift, G: Diffusion>(
    drift: &D,
    diffusion: &G,
    x0: f64,
    noise: &NoisePath,
) -> Result<Vec<f64>> {
    let dt = noise.step();
    let mut out = Vec::with_capacity(noise.n_steps + 1);
    let mut x = x0;
    out.push(x);
    for (j, dw) in noise.increments.iter().enumerate() {
        let a = dt * j as f64;
        x += drift.integral(a, a + dt) + (diffusion.coeff(x) * dw).re;
        if !x.is_finite() {
            return Err(Error::NumericalFailure { step: j, seed: noise.seed, lambda: f64::NAN });
        }
        out.push(x);
    }
    Ok(out)
}

/// Mean-square error bound of the piecewise-constant scheme,
/// `8 c_g^2 (|g|^2 + delta |f|^2) T delta exp(4 c_g^2 T)`.
pub fn l2_error_bound(c_g: f64, g_sup: f64, f_sup: f64, t_end: f64, delta: f64) -> f64 {
    let c2 = c_g * c_g;
    8.0 * c2 * (g_sup * g_sup + delta * f_sup * f_sup) * t_end * delta * (4.0 * c2 * t_end).exp()
}

/// One row of a self-convergence study.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub delta: f64,
    /// Root-mean-square terminal gap between the runs with steps `delta` and
    /// `delta / 2` on bridge-consistent noise.
    pub rms_gap: f64,
    /// Error bound at step `delta` (on the squared error).
    pub bound: f64,
}

/// Terminal-gap study at horizon `t_end`: for each of `levels` dyadic step
/// sizes starting at `t_end / n0`, compare the scheme on the path and on its
/// refinement, averaging squared gaps over `n_paths` seeds.
pub fn self_convergence(
    params: &BetaParams,
    lambda: f64,
    t_end: f64,
    n0: usize,
    levels: u32,
    n_paths: usize,
    seed0: u64,
) -> Result<Vec<ConvergenceRow>> {
    use rayon::prelude::*;
    if levels == 0 || n_paths == 0 {
        return Err(invalid("need at least one level and one path"));
    }
    let drift = SineDrift { params: *params, lambda };
    let per_seed: Vec<Vec<f64>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            let mut path = generate_noise_for(seed0 ^ i, t_end, n0)?;
            let mut coarse = *piecewise_constant_scheme(&drift, &SineDiffusion, 0.0, &path)?
                .last()
                .unwrap();
            let mut gaps = Vec::with_capacity(levels as usize);
            for _ in 0..levels {
                path = path.refine();
                let fine = *piecewise_constant_scheme(&drift, &SineDiffusion, 0.0, &path)?
                    .last()
                    .unwrap();
                gaps.push((fine - coarse).powi(2));
                coarse = fine;
            }
            Ok(gaps)
        })
        .collect::<Result<_>>()?;
    Ok((0..levels as usize)
        .map(|l| {
            let delta = t_end / (n0 << l) as f64;
            let ms = per_seed.iter().map(|g| g[l]).sum::<f64>() / n_paths as f64;
            ConvergenceRow {
                delta,
                rms_gap: ms.sqrt(),
                bound: l2_error_bound(1.0, 2.0, drift.sup(), t_end, delta),
            }
        })
        .collect())
}

fn generate_noise_for(seed: u64, t_end: f64, n: usize) -> Result<NoisePath> {
    crate::noise::generate_noise(seed, t_end, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::generate_noise;

    #[test]
    fn zero_lambda_stays_at_zero() {
        let p = BetaParams::new(2.0).unwrap();
        let noise = generate_noise(1, 10.0, 1000).unwrap();
        let tr = integrate_family(&p, &[0.0], &noise).unwrap();
        assert!(tr.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn unsorted_lambdas_rejected() {
        let p = BetaParams::new(2.0).unwrap();
        let noise = generate_noise(1, 1.0, 10).unwrap();
        assert!(integrate_family(&p, &[1.0, 0.5], &noise).is_err());
    }

    #[test]
    fn difference_with_zero_base_equals_plain_run() {
        let p = BetaParams::new(2.0).unwrap();
        let noise = generate_noise(5, 5.0, 500).unwrap();
        let base = integrate_family(&p, &[0.0], &noise).unwrap();
        let d = integrate_difference(&p, 3.0, &base, &noise).unwrap();
        let direct = integrate_family(&p, &[3.0], &noise).unwrap();
        assert_eq!(d.values, direct.values);
    }

    #[test]
    fn difference_matches_pathwise_gap() {
        let p = BetaParams::new(2.0).unwrap();
        let noise = generate_noise(9, 8.0, 800).unwrap();
        let pair = integrate_family(&p, &[1.5, 4.0], &noise).unwrap();
        assert_eq!(pair.clamps, 0);
        let base = integrate_family(&p, &[1.5], &noise).unwrap();
        let d = integrate_difference(&p, 2.5, &base, &noise).unwrap();
        for j in 0..=pair.n_steps {
            assert!((pair.at(j, 1) - pair.at(j, 0) - d.at(j, 0)).abs() < 1e-9);
        }
    }

    #[test]
    fn grid_mismatch_rejected() {
        let p = BetaParams::new(2.0).unwrap();
        let base = integrate_family(&p, &[1.0], &generate_noise(1, 1.0, 10).unwrap()).unwrap();
        let noise = generate_noise(1, 1.0, 20).unwrap();
        assert!(integrate_difference(&p, 1.0, &base, &noise).is_err());
    }

    #[test]
    fn noiseless_scheme_is_quadrature() {
        let noise = generate_noise(0, 2.0, 10_000).unwrap();
        let drift = FnDrift { f: |t: f64| (3.0 * t).cos() + t * t, sup: 5.0 };
        let xs = piecewise_constant_scheme(&drift, &NoDiffusion, 0.0, &noise).unwrap();
        let exact = (6.0f64).sin() / 3.0 + 8.0 / 3.0;
        assert!((xs.last().unwrap() - exact).abs() < 1e-8);
    }

    #[test]
    fn bound_plug_in() {
        let (beta, lambda) = (2.0, 3.0);
        let f_sup = beta * lambda / 4.0;
        let expected = 8.0 * (4.0 + 0.01 * f_sup * f_sup) * 0.01 * 4f64.exp();
        assert!((l2_error_bound(1.0, 2.0, f_sup, 1.0, 0.01) - expected).abs() < 1e-12);
    }

    #[test]
    fn sine_scheme_agrees_with_family_integrator() {
        let p = BetaParams::new(3.0).unwrap();
        let noise = generate_noise(4, 3.0, 300).unwrap();
        let drift = SineDrift { params: p, lambda: 2.0 };
        let xs = piecewise_constant_scheme(&drift, &SineDiffusion, 0.0, &noise).unwrap();
        let tr = integrate_family(&p, &[2.0], &noise).unwrap();
        for (a, b) in xs.iter().zip(tr.series(0)) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
