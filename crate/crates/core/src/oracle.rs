//! Closed-form reference solutions used by the convergence studies and the
//! acceptance checks.

use crate::error::Result;
use crate::params::{MertonFactors, ModelParams};

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Zero-rate, driftless lognormal call value `E[(S_tau - K)^+]` with
/// `dS = sigma S dW`, `S_0 = s`.
pub fn lognormal_call(s: f64, strike: f64, sigma: f64, tau: f64) -> f64 {
    if tau <= 0.0 {
        return (s - strike).max(0.0);
    }
    let v = sigma * tau.sqrt();
    let d1 = ((s / strike).ln() + 0.5 * v * v) / v;
    let d2 = d1 - v;
    s * norm_cdf(d1) - strike * norm_cdf(d2)
}

/// Solution with `nu01 = 0` and a call payoff: the equation is linear and
/// `u = kappa tau + gamma C(S, tau)`.
pub fn linear_call_solution(params: &ModelParams, strike: f64, s: f64, tau: f64) -> f64 {
    params.kappa() * tau + params.gamma() * lognormal_call(s, strike, params.sigma(), tau)
}

/// Spatially constant solution for `h = level`:
/// `u(tau) = gamma h* - nu10 tau - ln F0(T - tau)`.
///
/// The constant prices `p = q = h*` solve the price system; inverting the
/// representation `gamma p = nu10 tau + ln F0(T - tau) + u` gives `u`, and
/// `F0(T) = 1` makes it match the initial datum.
pub fn constant_payoff_solution(params: &ModelParams, factors: &MertonFactors, level: f64, tau: f64) -> Result<f64> {
    let f = factors.evaluate(params.horizon() - tau)?;
    Ok(params.gamma() * level - params.nu10() * tau - f.f0.ln())
}
