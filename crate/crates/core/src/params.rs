//! Market and utility constants, and the closed-form Merton factors.
//!
//! The Merton factors `F0`, `F1` are the value-function multipliers of the
//! zero-claim investment problem in the liquid (0) and illiquid (1) states.
//! They are mixtures of two exponentials whose rates are the roots of
//! `x^2 - (d0 + nu01 + nu10) x + d0 nu10 = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Market/utility constants with the derived Merton constant `d0` and the
/// source constant `kappa`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    sigma: f64,
    mu: f64,
    nu01: f64,
    nu10: f64,
    gamma: f64,
    horizon: f64,
    d0: f64,
    kappa: f64,
}

impl ModelParams {
    /// Validates the raw constants and derives `d0 = mu^2 / (2 sigma^2)` and
    /// `kappa = d0 + nu01 - nu10`.
    pub fn new(sigma: f64, mu: f64, nu01: f64, nu10: f64, gamma: f64, horizon: f64) -> Result<Self> {
        positive("sigma", sigma)?;
        positive("gamma", gamma)?;
        positive("T", horizon)?;
        non_negative("nu01", nu01)?;
        non_negative("nu10", nu10)?;
        if !mu.is_finite() {
            return Err(Error::validation("mu", "must be finite"));
        }
        let d0 = mu * mu / (2.0 * sigma * sigma);
        let kappa = d0 + nu01 - nu10;
        Ok(Self {
            sigma,
            mu,
            nu01,
            nu10,
            gamma,
            horizon,
            d0,
            kappa,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn nu01(&self) -> f64 {
        self.nu01
    }
    pub fn nu10(&self) -> f64 {
        self.nu10
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    /// Horizon `T` in years.
    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    pub fn d0(&self) -> f64 {
        self.d0
    }
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Copy with a different liquid-to-illiquid intensity; `kappa` is re-derived.
    pub fn with_nu01(&self, nu01: f64) -> Result<Self> {
        Self::new(self.sigma, self.mu, nu01, self.nu10, self.gamma, self.horizon)
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::validation(field, format!("must be > 0, got {v}")))
    }
}

fn non_negative(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::validation(field, format!("must be >= 0, got {v}")))
    }
}

/// Values of the Merton factors and their calendar-time derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FactorValues {
    pub f0: f64,
    pub f1: f64,
    pub df0: f64,
    pub df1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FactorAudit {
    /// `max(|F0(T) - 1|, |F1(T) - 1|)`
    pub terminal_error: f64,
    pub max_ode_residual: f64,
    pub positive: bool,
}

/// Spectral data `lambda1 > lambda2`, mixture coefficients and the horizon.
///
/// The coefficients are stored in the horizon-normalised form
/// `a_i = c_i e^{lambda_i T}` so that `F(t) = a_1 e^{lambda_1 (t-T)} + ...`
/// never overflows for long horizons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MertonFactors {
    lambda1: f64,
    lambda2: f64,
    a1: f64,
    a2: f64,
    d0: f64,
    nu01: f64,
    nu10: f64,
    horizon: f64,
}

impl MertonFactors {
    /// Builds the factors for `params`. Requires `nu01 > 0`.
    pub fn new(params: &ModelParams) -> Result<Self> {
        let (d0, nu01, nu10) = (params.d0(), params.nu01(), params.nu10());
        if nu01 == 0.0 {
            return Err(Error::IllposedFactors);
        }
        let b = d0 + nu01 + nu10;
        // (d0 - nu10)^2 + nu01 (nu01 + 2 d0 + 2 nu10) is the discriminant
        // written as a sum of non-negative terms.
        let disc = (d0 - nu10).powi(2) + nu01 * (nu01 + 2.0 * d0 + 2.0 * nu10);
        let root = disc.sqrt();
        let lambda1 = 0.5 * (b + root);
        // product form avoids cancellation in b - root
        let lambda2 = if lambda1 > 0.0 {
            d0 * nu10 / lambda1
        } else {
            0.5 * (b - root)
        };
        if (lambda1 - lambda2).abs() <= 1e-12 * (lambda1 + lambda2).abs() {
            return Err(Error::DegenerateSpectrum { lambda1, lambda2 });
        }
        let a1 = (lambda2 - d0) / (lambda2 - lambda1);
        let a2 = (lambda1 - d0) / (lambda1 - lambda2);
        Ok(Self {
            lambda1,
            lambda2,
            a1,
            a2,
            d0,
            nu01,
            nu10,
            horizon: params.horizon(),
        })
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }
    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }
    /// `c1 = (lambda2 - d0) / (lambda2 - lambda1) e^{-lambda1 T}`.
    pub fn c1(&self) -> f64 {
        self.a1 * (-self.lambda1 * self.horizon).exp()
    }
    /// `c2 = (lambda1 - d0) / (lambda1 - lambda2) e^{-lambda2 T}`.
    pub fn c2(&self) -> f64 {
        self.a2 * (-self.lambda2 * self.horizon).exp()
    }
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// `F0`, `F1` and their derivatives at calendar time `t` in `[0, T]`.
    pub fn evaluate(&self, t: f64) -> Result<FactorValues> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::Domain(format!(
                "factor time t = {t} outside [0, {}]",
                self.horizon
            )));
        }
        Ok(self.evaluate_unchecked(t))
    }

    /// Terminal error and ODE residuals at `n_times` evenly spaced times in
    /// `[0, T]`. Residuals are divided by `max(1, |F0|, |F1|)`.
    pub fn audit(&self, n_times: usize) -> FactorAudit {
        let end = self.evaluate_unchecked(self.horizon);
        let terminal_error = (end.f0 - 1.0).abs().max((end.f1 - 1.0).abs());
        let nu10 = self.nu10;
        let mut max_ode_residual = 0.0f64;
        let mut positive = true;
        for k in 0..n_times {
            let t = self.horizon * k as f64 / (n_times.max(2) - 1) as f64;
            let v = self.evaluate_unchecked(t);
            positive &= v.f0 > 0.0 && v.f1 > 0.0;
            let scale = 1f64.max(v.f0.abs()).max(v.f1.abs());
            let r0 = v.df0 + self.nu01 * v.f1 - (self.d0 + self.nu01) * v.f0;
            let r1 = v.df1 + nu10 * v.f0 - nu10 * v.f1;
            max_ode_residual = max_ode_residual.max(r0.abs().max(r1.abs()) / scale);
        }
        FactorAudit {
            terminal_error,
            max_ode_residual,
            positive,
        }
    }

    pub(crate) fn evaluate_unchecked(&self, t: f64) -> FactorValues {
        let s = t - self.horizon;
        let e1 = self.a1 * (self.lambda1 * s).exp();
        let e2 = self.a2 * (self.lambda2 * s).exp();
        let g1 = self.d0 + self.nu01 - self.lambda1;
        let g2 = self.d0 + self.nu01 - self.lambda2;
        FactorValues {
            f0: e1 + e2,
            f1: (g1 * e1 + g2 * e2) / self.nu01,
            df0: self.lambda1 * e1 + self.lambda2 * e2,
            df1: (g1 * self.lambda1 * e1 + g2 * self.lambda2 * e2) / self.nu01,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_drift_gives_zero_d0() {
        let p = ModelParams::new(0.2, 0.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(p.d0(), 0.0);
        // symmetric intensities cancel
        assert_eq!(p.kappa(), 0.0);
    }

    #[test]
    fn d0_hand_value() {
        let p = ModelParams::new(0.2, 0.06, 0.0, 0.0, 1.0, 1.0).unwrap();
        assert!((p.d0() - 0.045).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_positive_fields() {
        for (sigma, gamma, t, name) in [
            (0.0, 1.0, 1.0, "sigma"),
            (0.2, -1.0, 1.0, "gamma"),
            (0.2, 1.0, 0.0, "T"),
        ] {
            match ModelParams::new(sigma, 0.0, 1.0, 1.0, gamma, t) {
                Err(Error::Validation { field, .. }) => assert_eq!(field, name),
                other => panic!("expected validation error, got {other:?}"),
            }
        }
        assert!(ModelParams::new(0.2, 0.0, -1.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn roots_of_x2_minus_x() {
        let p = ModelParams::new(0.3, 0.0, 1.0, 0.0, 1.0, 1.0).unwrap();
        let f = MertonFactors::new(&p).unwrap();
        assert!((f.lambda1() - 1.0).abs() < 1e-15);
        assert_eq!(f.lambda2(), 0.0);
    }

    #[test]
    fn product_identity_example() {
        // d0 = 0.045, nu10 = 2
        let p = ModelParams::new(0.2, 0.06, 1.0, 2.0, 1.0, 1.0).unwrap();
        let f = MertonFactors::new(&p).unwrap();
        assert!((f.lambda1() * f.lambda2() - 0.09).abs() < 1e-14);
    }

    #[test]
    fn nu01_zero_is_illposed() {
        let p = ModelParams::new(0.2, 0.06, 0.0, 2.0, 1.0, 1.0).unwrap();
        assert_eq!(MertonFactors::new(&p), Err(Error::IllposedFactors));
    }

    #[test]
    fn out_of_range_time_is_domain_error() {
        let p = ModelParams::new(0.3, 0.06, 1.0, 2.0, 1.0, 1.0).unwrap();
        let f = MertonFactors::new(&p).unwrap();
        assert!(matches!(f.evaluate(1.5), Err(Error::Domain(_))));
        assert!(matches!(f.evaluate(-0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn terminal_values_from_raw_coefficients() {
        // Brute force: evaluate c1 e^{l1 T} + c2 e^{l2 T} with the published
        // c1, c2 rather than the normalised internal form.
        for (mu, nu01, nu10) in [(0.06, 1.0, 2.0), (0.0, 0.5, 0.1), (0.2, 3.0, 0.7)] {
            let p = ModelParams::new(0.3, mu, nu01, nu10, 1.0, 2.0).unwrap();
            let f = MertonFactors::new(&p).unwrap();
            let t = p.horizon();
            let f0 = f.c1() * (f.lambda1() * t).exp() + f.c2() * (f.lambda2() * t).exp();
            let a = p.d0() + nu01;
            let f1 = (f.c1() * (a - f.lambda1()) * (f.lambda1() * t).exp()
                + f.c2() * (a - f.lambda2()) * (f.lambda2() * t).exp())
                / nu01;
            assert!((f0 - 1.0).abs() < 1e-12);
            assert!((f1 - 1.0).abs() < 1e-12);
        }
    }

    fn draw() -> impl Strategy<Value = (f64, f64, f64, f64, f64)> {
        (0.05f64..1.0, -0.5f64..0.5, 0.01f64..5.0, 0.0f64..5.0, 0.1f64..5.0)
    }

    #[test]
    fn audit_over_random_draws() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let p = ModelParams::new(
                rng.random_range(0.05..1.0),
                rng.random_range(-0.5..0.5),
                rng.random_range(0.01..5.0),
                rng.random_range(0.0..5.0),
                1.0,
                rng.random_range(0.1..5.0),
            )
            .unwrap();
            let a = MertonFactors::new(&p).unwrap().audit(50);
            assert!(a.terminal_error <= 1e-12 && a.max_ode_residual <= 1e-10 && a.positive, "{a:?}");
        }
    }

    proptest! {
        #[test]
        fn spectral_identities((sigma, mu, nu01, nu10, t) in draw()) {
            let p = ModelParams::new(sigma, mu, nu01, nu10, 1.0, t).unwrap();
            let f = MertonFactors::new(&p).unwrap();
            let sum = p.d0() + nu01 + nu10;
            prop_assert!((f.lambda1() + f.lambda2() - sum).abs() <= 1e-12 * sum.max(1.0));
            let prod = p.d0() * nu10;
            prop_assert!((f.lambda1() * f.lambda2() - prod).abs() <= 1e-12 * prod.max(1.0));
            prop_assert!(f.lambda1() >= f.lambda2());
        }

        #[test]
        fn factors_positive_and_ode_consistent((sigma, mu, nu01, nu10, t) in draw(), frac in 0.0f64..=1.0) {
            let p = ModelParams::new(sigma, mu, nu01, nu10, 1.0, t).unwrap();
            let f = MertonFactors::new(&p).unwrap();
            let v = f.evaluate(frac * t).unwrap();
            prop_assert!(v.f0 > 0.0 && v.f1 > 0.0);
            let scale = 1f64.max(v.f0.abs()).max(v.f1.abs());
            let r0 = v.df0 + nu01 * v.f1 - (p.d0() + nu01) * v.f0;
            let r1 = v.df1 + nu10 * v.f0 - nu10 * v.f1;
            prop_assert!(r0.abs() <= 1e-10 * scale);
            prop_assert!(r1.abs() <= 1e-10 * scale);
        }
    }
}
