//! Inverse temperature and the exponential drift profile of the carousel.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Inverse temperature `beta` together with the drift profile
/// `f(t) = (beta/4) exp(-beta t / 4)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    beta: f64,
}

impl BetaParams {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(invalid(format!("beta must be positive and finite, got {beta}")));
        }
        Ok(Self { beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Decay rate `beta/4` of the drift profile.
    pub fn rate(&self) -> f64 {
        self.beta / 4.0
    }

    pub fn drift(&self, t: f64) -> f64 {
        self.rate() * (-self.rate() * t).exp()
    }

    /// `F(t) = ∫_0^t f = 1 - exp(-beta t / 4)`.
    pub fn drift_mass(&self, t: f64) -> f64 {
        -(-self.rate() * t).exp_m1()
    }

    /// Drift mass remaining after `t`, `exp(-beta t / 4)`.
    pub fn tail_mass(&self, t: f64) -> f64 {
        (-self.rate() * t).exp()
    }

    /// `∫_a^b f`, computed without cancellation.
    pub fn drift_mass_between(&self, a: f64, b: f64) -> f64 {
        let k = self.rate();
        (-k * a).exp() * -(-k * (b - a)).exp_m1()
    }

    /// Sup norm of `f`, attained at `t = 0`.
    pub fn drift_sup(&self) -> f64 {
        self.rate()
    }

    /// Default step `min(0.01, 0.1 / (1 + |lambda_max|))`.
    pub fn default_step(lambda_max: f64) -> f64 {
        (0.1 / (1.0 + lambda_max.abs())).min(0.01)
    }

    /// Default horizon `max(10, (8/beta)(1 + ln(1 + |lambda_max|)))`.
    pub fn default_horizon(&self, lambda_max: f64) -> f64 {
        (8.0 / self.beta * (1.0 + lambda_max.abs().ln_1p())).max(10.0)
    }

    /// Hard cap on integration time: the default horizon plus the time the
    /// remaining drift mass needs to fall below `tol_drift / |lambda_max|`.
    pub fn max_horizon(&self, lambda_max: f64, tol_drift: f64) -> f64 {
        let base = self.default_horizon(lambda_max);
        let l = lambda_max.abs();
        if l <= tol_drift {
            return base;
        }
        base + (l / tol_drift).ln() / self.rate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_positive_beta() {
        assert!(BetaParams::new(0.0).is_err());
        assert!(BetaParams::new(-1.0).is_err());
        assert!(BetaParams::new(f64::NAN).is_err());
    }

    #[test]
    fn drift_integrates_to_one() {
        for beta in [0.05, 0.5, 2.0, 8.0, 50.0] {
            let p = BetaParams::new(beta).unwrap();
            let horizon = 200.0 / p.rate();
            let total = crate::quad::integrate(|t| p.drift(t), 0.0, horizon, 1e-13);
            assert!((total - 1.0).abs() < 1e-10, "beta {beta}: {total}");
        }
    }

    #[test]
    fn drift_mass_between_matches_difference() {
        let p = BetaParams::new(2.0).unwrap();
        let direct = p.drift_mass(3.5) - p.drift_mass(1.25);
        assert!((p.drift_mass_between(1.25, 3.5) - direct).abs() < 1e-15);
    }
}
