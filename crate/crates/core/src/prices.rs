//! Buyer's indifference prices and certainty equivalents from a solved surface.
//!
//! Surfaces are stored in time-to-maturity `tau`; everything here is
//! re-indexed to calendar time `t = T - tau`, so row `k` of a
//! [`PriceSurfaces`] field corresponds to `t = k dtau`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::grid::{Grid, Surface};
use crate::memory::U_CAP;
use crate::params::{MertonFactors, ModelParams};
use crate::payoff::PayoffSpec;

/// Calendar-time fields, time-major: `field[k * n_space + i]` at `t_k`, `x_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSurfaces {
    grid: Grid,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub r0: Vec<f64>,
    pub r1: Vec<f64>,
}

impl PriceSurfaces {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Calendar time of row `k`.
    pub fn t(&self, k: usize) -> f64 {
        self.grid.horizon() - self.grid.tau(self.grid.n_time() - k)
    }

    pub fn row<'a>(&self, field: &'a [f64], k: usize) -> &'a [f64] {
        let m = self.grid.n_space();
        &field[k * m..(k + 1) * m]
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,S,t,p,q,r0,r1")?;
        let m = self.grid.n_space();
        for k in 0..=self.grid.n_time() {
            let t = self.t(k);
            for i in 0..m {
                let j = k * m + i;
                writeln!(
                    w,
                    "{},{},{},{},{},{},{}",
                    self.grid.x_nodes()[i],
                    self.grid.s_nodes()[i],
                    t,
                    self.p[j],
                    self.q[j],
                    self.r0[j],
                    self.r1[j]
                )?;
            }
        }
        Ok(())
    }
}

fn gamma_h(params: &ModelParams, payoff: &PayoffSpec, grid: &Grid) -> Vec<f64> {
    payoff
        .sample(grid.s_nodes())
        .iter()
        .map(|h| params.gamma() * h)
        .collect()
}

/// `r0 = u + nu10 tau` and `r1 = nu10 tau - ln(nu10 I + e^{-gamma h})`,
/// both indexed by `tau` level like the surface.
pub fn r_from_u(surface: &Surface, params: &ModelParams, payoff: &PayoffSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    let grid = surface.grid();
    let gh = gamma_h(params, payoff, grid);
    let m = grid.n_space();
    let nu10 = params.nu10();
    let mut r0 = Vec::with_capacity(surface.values().len());
    let mut r1 = Vec::with_capacity(surface.values().len());
    for n in 0..surface.n_levels() {
        let tau = grid.tau(n);
        let (u, mem) = (surface.level(n), surface.memory_level(n));
        for i in 0..m {
            r0.push(u[i] + nu10 * tau);
            let arg = nu10 * mem[i] + (-gh[i]).exp();
            if !(arg > 0.0) || !arg.is_finite() {
                return Err(Error::Domain(format!(
                    "log argument nu10 I + e^(-gamma h) = {arg} at level {n}, node {i}"
                )));
            }
            r1.push(nu10 * tau - arg.ln());
        }
    }
    Ok((r0, r1))
}

/// `gamma p = nu10 (T - t) + ln F0(t) + u(S, T - t)` and
/// `gamma q = nu10 (T - t) + ln F1(t) - ln(nu10 I + e^{-gamma h})`.
pub fn indifference_prices(
    surface: &Surface,
    params: &ModelParams,
    factors: &MertonFactors,
    payoff: &PayoffSpec,
) -> Result<PriceSurfaces> {
    let grid = surface.grid();
    if (grid.horizon() - params.horizon()).abs() > 1e-12 * params.horizon().max(1.0) {
        return Err(Error::validation(
            "grid.horizon",
            format!("surface horizon {} differs from T = {}", grid.horizon(), params.horizon()),
        ));
    }
    let (r0_tau, r1_tau) = r_from_u(surface, params, payoff)?;
    let m = grid.n_space();
    let nt = grid.n_time();
    let g = params.gamma();
    let len = r0_tau.len();
    let (mut p, mut q, mut r0, mut r1) = (
        Vec::with_capacity(len),
        Vec::with_capacity(len),
        Vec::with_capacity(len),
        Vec::with_capacity(len),
    );
    for k in 0..=nt {
        let n = nt - k;
        let tau = grid.tau(n);
        let f = factors.evaluate((params.horizon() - tau).max(0.0))?;
        let (l0, l1) = (f.f0.ln(), f.f1.ln());
        for i in 0..m {
            let j = n * m + i;
            p.push((r0_tau[j] + l0) / g);
            q.push((r1_tau[j] + l1) / g);
            r0.push(r0_tau[j]);
            r1.push(r1_tau[j]);
        }
    }
    Ok(PriceSurfaces {
        grid: grid.clone(),
        p,
        q,
        r0,
        r1,
    })
}

/// Exponential-utility value `-e^{-gamma X} e^{-gamma R}`.
pub fn value_function(r: f64, wealth: f64, gamma: f64) -> Result<f64> {
    let e = -gamma * (wealth + r);
    if !e.is_finite() || e.abs() > U_CAP {
        return Err(Error::Overflow {
            node: 0,
            value: e.abs(),
            cap: U_CAP,
        });
    }
    Ok(-e.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{solve, SolverConfig};

    fn params() -> ModelParams {
        ModelParams::new(0.3, 0.06, 1.0, 2.0, 1.0, 1.0).unwrap()
    }

    fn small_grid() -> Grid {
        Grid::new(-3.0, 3.0, 61, 1.0, 50).unwrap()
    }

    #[test]
    fn value_function_examples() {
        assert_eq!(value_function(0.0, 0.0, 1.0).unwrap(), -1.0);
        assert!((value_function(1.0, 1.0, 1.0).unwrap() + (-2.0f64).exp()).abs() < 1e-15);
        assert!(value_function(2.0, 0.5, 1.0).unwrap() > value_function(1.0, 0.5, 1.0).unwrap());
        assert!(matches!(value_function(1e3, 0.0, 1.0), Err(Error::Overflow { .. })));
    }

    #[test]
    fn r_fields_at_tau_zero_equal_datum() {
        let p = params();
        let grid = small_grid();
        let h = PayoffSpec::call(1.0).unwrap();
        let (s, _) = solve(&p, &h, &grid, &SolverConfig::default()).unwrap();
        let (r0, r1) = r_from_u(&s, &p, &h).unwrap();
        let hs = h.sample(grid.s_nodes());
        for i in 0..grid.n_space() {
            assert!((r0[i] - hs[i]).abs() < 1e-14);
            assert!((r1[i] - hs[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn r1_constant_when_nu10_zero() {
        let p = ModelParams::new(0.3, 0.06, 1.0, 0.0, 1.0, 1.0).unwrap();
        let grid = small_grid();
        let h = PayoffSpec::put(1.0).unwrap();
        let (s, _) = solve(&p, &h, &grid, &SolverConfig::default()).unwrap();
        let (_, r1) = r_from_u(&s, &p, &h).unwrap();
        let hs = h.sample(grid.s_nodes());
        for (j, v) in r1.iter().enumerate() {
            assert!((v - hs[j % grid.n_space()]).abs() < 1e-12);
        }
    }

    #[test]
    fn r1_satisfies_its_ode_for_constant_payoff() {
        let p = params();
        let h = PayoffSpec::constant(0.7).unwrap();
        let mut residuals = Vec::new();
        for nt in [40, 80] {
            let grid = Grid::new(-2.0, 2.0, 21, 1.0, nt).unwrap();
            let (s, _) = solve(&p, &h, &grid, &SolverConfig::default()).unwrap();
            let (r0, r1) = r_from_u(&s, &p, &h).unwrap();
            let m = grid.n_space();
            let dt = grid.dtau();
            let mut worst = 0.0f64;
            for n in 0..nt {
                let (a, b) = (n * m + 10, (n + 1) * m + 10);
                let g = |j: usize| -p.nu10() * (-(r0[j] - r1[j])).exp() + p.nu10();
                let res = (r1[b] - r1[a]) / dt - 0.5 * (g(a) + g(b));
                worst = worst.max(res.abs());
            }
            residuals.push(worst);
        }
        assert!(residuals[0] < 1e-3, "{residuals:?}");
        assert!(residuals[0] / residuals[1] > 3.5, "{residuals:?}");
    }

    #[test]
    fn constant_payoff_prices_are_flat() {
        let p = params();
        let grid = Grid::new(-4.0, 4.0, 81, 1.0, 200).unwrap();
        let h = PayoffSpec::constant(0.7).unwrap();
        let f = MertonFactors::new(&p).unwrap();
        let (s, _) = solve(&p, &h, &grid, &SolverConfig::default()).unwrap();
        let ps = indifference_prices(&s, &p, &f, &h).unwrap();
        let worst = ps.p.iter().chain(&ps.q).fold(0.0f64, |m, v| m.max((v - 0.7).abs()));
        assert!(worst < 2e-3, "{worst}");
        let last = grid.n_time();
        for v in ps.row(&ps.p, last).iter().chain(ps.row(&ps.q, last)) {
            assert!((v - 0.7).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_shift_moves_prices_by_shift() {
        let p = params();
        let grid = Grid::new(-3.0, 3.0, 61, 1.0, 100).unwrap();
        let f = MertonFactors::new(&p).unwrap();
        let base = PayoffSpec::tabulated(vec![0.5, 1.0, 2.0], vec![0.2, 0.5, 0.1]).unwrap();
        let shifted = PayoffSpec::tabulated(vec![0.5, 1.0, 2.0], vec![0.5, 0.8, 0.4]).unwrap();
        let (s0, _) = solve(&p, &base, &grid, &SolverConfig::default()).unwrap();
        let (s1, _) = solve(&p, &shifted, &grid, &SolverConfig::default()).unwrap();
        let p0 = indifference_prices(&s0, &p, &f, &base).unwrap();
        let p1 = indifference_prices(&s1, &p, &f, &shifted).unwrap();
        for j in 0..p0.p.len() {
            assert!((p1.p[j] - p0.p[j] - 0.3).abs() < 2e-3);
            assert!((p1.q[j] - p0.q[j] - 0.3).abs() < 2e-3);
        }
    }

    #[test]
    fn horizon_mismatch_rejected() {
        let p = params();
        let grid = Grid::new(-1.0, 1.0, 11, 0.5, 10).unwrap();
        let h = PayoffSpec::constant(0.0).unwrap();
        let f = MertonFactors::new(&p).unwrap();
        let (s, _) = solve(&p, &h, &grid, &SolverConfig::default()).unwrap();
        assert!(matches!(indifference_prices(&s, &p, &f, &h), Err(Error::Validation { .. })));
    }

    #[test]
    fn csv_is_time_major_in_calendar_time() {
        let p = params();
        let grid = Grid::new(-1.0, 1.0, 3, 1.0, 2).unwrap();
        let h = PayoffSpec::constant(0.7).unwrap();
        let f = MertonFactors::new(&p).unwrap();
        let (s, _) = solve(&p, &h, &grid, &SolverConfig::default()).unwrap();
        let ps = indifference_prices(&s, &p, &f, &h).unwrap();
        let mut buf = Vec::new();
        ps.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x,S,t,p,q,r0,r1");
        assert_eq!(lines.len(), 1 + 9);
        assert!(lines[1].starts_with("-1,"));
        assert!(lines[1].split(',').nth(2).unwrap() == "0");
        assert!(lines[9].split(',').nth(2).unwrap() == "1");
    }
}
