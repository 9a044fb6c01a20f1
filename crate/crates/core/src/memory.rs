//! Running value of the memory integral `I(S, tau) = int_0^tau e^{-u(S,s)} ds`.

use crate::error::{Error, Result};

/// Exponent cap: `|u|` beyond this is treated as solver blow-up.
pub const U_CAP: f64 = 500.0;

/// Fails with `Overflow` at the first node where `|u| > cap` (or `u` is NaN).
pub fn check_cap(u: &[f64], cap: f64) -> Result<()> {
    match u.iter().position(|v| !(v.abs() <= cap)) {
        Some(node) => Err(Error::Overflow {
            node,
            value: u[node].abs(),
            cap,
        }),
        None => Ok(()),
    }
}

/// Per-node memory integral advanced by the trapezoid rule.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryState {
    current: Vec<f64>,
    level: usize,
    u_cap: f64,
}

impl HistoryState {
    pub fn new(n_nodes: usize) -> Self {
        Self::with_cap(n_nodes, U_CAP)
    }

    pub fn with_cap(n_nodes: usize, u_cap: f64) -> Self {
        Self {
            current: vec![0.0; n_nodes],
            level: 0,
            u_cap,
        }
    }

    pub fn current(&self) -> &[f64] {
        &self.current
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn u_cap(&self) -> f64 {
        self.u_cap
    }

    /// `I += dtau (e^{-u_prev} + e^{-u_next}) / 2` at every node.
    pub fn advance(&mut self, u_prev: &[f64], u_next: &[f64], dtau: f64) -> Result<()> {
        if !(dtau > 0.0) {
            return Err(Error::validation("dtau", "must be > 0"));
        }
        check_cap(u_prev, self.u_cap)?;
        check_cap(u_next, self.u_cap)?;
        trapezoid_increment(&mut self.current, u_prev, u_next, dtau);
        self.level += 1;
        Ok(())
    }
}

/// `acc += dtau (e^{-a} + e^{-b}) / 2`, no cap checks.
pub(crate) fn trapezoid_increment(acc: &mut [f64], a: &[f64], b: &[f64], dtau: f64) {
    for ((i, &x), &y) in acc.iter_mut().zip(a).zip(b) {
        *i += 0.5 * dtau * ((-x).exp() + (-y).exp());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn integrate(f: impl Fn(f64) -> f64, t: f64, steps: usize) -> f64 {
        let mut h = HistoryState::new(1);
        let dt = t / steps as f64;
        for k in 0..steps {
            let a = [f(k as f64 * dt)];
            let b = [f((k + 1) as f64 * dt)];
            h.advance(&a, &b, dt).unwrap();
        }
        h.current()[0]
    }

    #[test]
    fn starts_at_zero_and_is_exact_for_constants() {
        let h = HistoryState::new(4);
        assert!(h.current().iter().all(|&v| v == 0.0));
        assert!((integrate(|_| 0.0, 0.75, 3) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn two_step_hand_trapezoid() {
        let got = integrate(|s| s, 1.0, 2);
        let want = 0.25 * (1.0 + 2.0 * (-0.5f64).exp() + (-1.0f64).exp());
        assert!((got - want).abs() < 1e-15);
    }

    #[test]
    fn second_order_against_analytic_integrals() {
        let cases: [(fn(f64) -> f64, f64); 2] = [
            (|s| s, 1.0 - (-1.0f64).exp()),
            (|s| s.sin(), {
                // int_0^1 e^{-sin s} ds by composite Simpson on 20000 panels
                let n = 20000;
                let h = 1.0 / n as f64;
                let f = |s: f64| (-s.sin()).exp();
                let mut acc = f(0.0) + f(1.0);
                for k in 1..n {
                    acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * h);
                }
                acc * h / 3.0
            }),
        ];
        for (f, exact) in cases {
            let errs: Vec<f64> = [10, 20, 40].iter().map(|&n| (integrate(f, 1.0, n) - exact).abs()).collect();
            for w in errs.windows(2) {
                assert!((w[0] / w[1]).log2() >= 1.9, "{errs:?}");
            }
        }
    }

    #[test]
    fn overflow_is_an_error() {
        let mut h = HistoryState::new(2);
        let err = h.advance(&[0.0, 0.0], &[0.0, -501.0], 0.1).unwrap_err();
        assert!(matches!(err, Error::Overflow { node: 1, .. }));
        assert!(h.advance(&[f64::NAN, 0.0], &[0.0, 0.0], 0.1).is_err());
        assert!(h.advance(&[0.0, 0.0], &[0.0, 0.0], 0.0).is_err());
    }

    proptest! {
        #[test]
        fn never_decreases_and_is_deterministic(us in proptest::collection::vec(-20.0f64..20.0, 6), dt in 1e-4f64..0.5) {
            let mut a = HistoryState::new(3);
            let mut b = HistoryState::new(3);
            let before = a.current().to_vec();
            a.advance(&us[..3], &us[3..], dt).unwrap();
            b.advance(&us[..3], &us[3..], dt).unwrap();
            for (x, y) in a.current().iter().zip(&before) {
                prop_assert!(x >= y);
            }
            prop_assert_eq!(a.current(), b.current());
        }
    }
}
