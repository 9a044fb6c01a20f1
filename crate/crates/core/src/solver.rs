//! Time-marching solvers for the integro-differential initial value problem
//!
//! ```text
//! u_tau - 1/2 sigma^2 S^2 u_SS = -nu01 e^u (nu10 I + e^{-gamma h}) + kappa,
//! I(S, tau) = int_0^tau e^{-u(S,s)} ds,      u(S, 0) = gamma h(S).
//! ```
//!
//! Two schemes share one discretisation: Crank-Nicolson in the diffusion and
//! trapezoid weighting of the nonlinear source `F`.
//!
//! * [`Scheme::DirectImex`]: predictor-corrector. The predictor takes `F`
//!   explicitly; the corrector uses the average of the explicit and predicted
//!   `F` (Heun), which keeps the scheme second order in `tau`.
//! * [`Scheme::MonotoneIteration`]: upper-solution iteration of shifted linear
//!   problems. At each time level the iteration starts from a supersolution
//!   and produces a non-increasing sequence of supersolutions that converges
//!   to the fully implicit trapezoid solution.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analysis::{weighted_norms, WeightSpec};
use crate::error::{Error, Result};
use crate::grid::{Grid, Surface};
use crate::memory::{check_cap, trapezoid_increment, U_CAP};
use crate::params::ModelParams;
use crate::payoff::PayoffSpec;
use crate::tridiag::Tridiagonal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[serde(rename = "direct")]
    DirectImex,
    #[serde(rename = "monotone")]
    MonotoneIteration,
}

/// How the monotonising shift `N` of the iteration is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ShiftPolicy {
    /// Pointwise `N = -dF/du` at the current upper iterate. Because the
    /// exponential term is convex in `u`, this bounds the slope of `F` on the
    /// whole sector below the iterate.
    Adaptive,
    /// The constant from [`derive_bracket`].
    Bracket,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub scheme: Scheme,
    pub tol_iter: f64,
    pub max_iter: usize,
    pub shift: ShiftPolicy,
    /// Slope `M` of the bracket `[-c0 - M tau, c0 + M tau]`; derived if unset.
    pub bracket_m: Option<f64>,
    pub u_cap: f64,
    /// Weight for the a-priori estimate diagnostic.
    pub weight: WeightSpec,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::DirectImex,
            tol_iter: 1e-8,
            max_iter: 200,
            shift: ShiftPolicy::Adaptive,
            bracket_m: None,
            u_cap: U_CAP,
            weight: WeightSpec::Power { exponent: -4.0 },
        }
    }
}

impl SolverConfig {
    pub fn monotone() -> Self {
        Self {
            scheme: Scheme::MonotoneIteration,
            ..Self::default()
        }
    }

    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        if !(self.tol_iter > 0.0) {
            return Err(Error::validation("solver.tolIter", "must be > 0"));
        }
        if self.max_iter < 1 {
            return Err(Error::validation("solver.maxIter", "must be >= 1"));
        }
        if let ShiftPolicy::Fixed(n) = self.shift {
            if !(n >= 0.0 && n.is_finite()) {
                return Err(Error::validation("solver.shiftN", "must be >= 0"));
            }
        }
        if let Some(m) = self.bracket_m {
            if !(m >= params.kappa() && m.is_finite()) {
                return Err(Error::validation(
                    "solver.bracketM",
                    format!("must be >= kappa = {}", params.kappa()),
                ));
            }
        }
        if !(self.u_cap > 0.0) {
            return Err(Error::validation("solver.uCap", "must be > 0"));
        }
        Ok(())
    }
}

/// Sub/supersolution bracket `-c0 - M tau <= u <= c0 + M tau` and the shift
/// `N` making `N u + F[u]` non-decreasing on it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bracket {
    pub c0: f64,
    pub m: f64,
    pub n: f64,
    /// `N > 1e8`: a constant-shift iteration will crawl.
    pub slow: bool,
}

impl Bracket {
    pub fn upper(&self, tau: f64) -> f64 {
        self.c0 + self.m * tau
    }
    pub fn lower(&self, tau: f64) -> f64 {
        -self.c0 - self.m * tau
    }
}

/// `c0 = max |gamma h|` on the grid, `M = |kappa| + nu01 (1 + nu10) + 1` and
/// `N = nu01 e^{c0 + M T} (nu10 T e^{c0 + M T} + e^{c0})`.
pub fn derive_bracket(params: &ModelParams, payoff: &PayoffSpec, grid: &Grid) -> Result<Bracket> {
    let m = params.kappa().abs() + params.nu01() * (1.0 + params.nu10()) + 1.0;
    bracket_with_m(params, payoff, grid, m)
}

fn bracket_with_m(params: &ModelParams, payoff: &PayoffSpec, grid: &Grid, m: f64) -> Result<Bracket> {
    let c0 = payoff
        .sample(grid.s_nodes())
        .iter()
        .fold(0.0f64, |acc, h| acc.max((params.gamma() * h).abs()));
    if !c0.is_finite() {
        return Err(Error::UnboundedPayoff("gamma h is not finite on the grid".into()));
    }
    let t = grid.horizon();
    let e = (c0 + m * t).exp();
    let n = params.nu01() * e * (params.nu10() * t * e + c0.exp());
    Ok(Bracket {
        c0,
        m,
        n,
        slow: n > 1e8,
    })
}

/// Bookkeeping of the monotone iteration, for audits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MonotoneTrace {
    /// Largest `u_{k+1} - u_k` over all iterations, levels and nodes.
    pub max_rise: f64,
    /// Largest `u_k - (c0 + M tau)` over all iterates.
    pub max_above_upper: f64,
    /// Largest `(-c0 - M tau) - u_k` over all iterates.
    pub max_below_lower: f64,
    /// Largest `u_1 - (c0 + M tau)` over the first iterate of every level.
    pub first_iterate_excess: f64,
    pub total_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SolveReport {
    pub scheme: Scheme,
    pub iterations: usize,
    pub final_increment: f64,
    #[serde(rename = "maxAbsU")]
    pub max_abs_u: f64,
    /// `(||u'||_{L2(L2_w)} + max_t ||u||_1) / (||u(0)||_1 + 1)`.
    pub estimate_ratio: f64,
    pub wall_time_ms: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bracket: Option<Bracket>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monotone: Option<MonotoneTrace>,
}

/// `F = -nu01 e^u (nu10 I + e^{-gamma h}) + kappa` at every node.
pub fn f_rhs(params: &ModelParams, u: &[f64], memory: &[f64], gamma_h: &[f64]) -> Result<Vec<f64>> {
    check_cap(u, U_CAP)?;
    check_cap(gamma_h, U_CAP)?;
    let mut out = vec![0.0; u.len()];
    f_rhs_into(params, u, memory, gamma_h, &mut out);
    Ok(out)
}

fn f_rhs_into(params: &ModelParams, u: &[f64], memory: &[f64], gamma_h: &[f64], out: &mut [f64]) {
    let (nu01, nu10, kappa) = (params.nu01(), params.nu10(), params.kappa());
    if nu01 == 0.0 {
        out.iter_mut().for_each(|f| *f = kappa);
        return;
    }
    for i in 0..u.len() {
        // e^u e^{-gamma h} folded into one exponent
        let e = nu10 * memory[i] * u[i].exp() + (u[i] - gamma_h[i]).exp();
        out[i] = -nu01 * e + kappa;
    }
}

/// Diagonal shift of the implicit operator.
#[derive(Debug, Clone, Copy)]
pub enum Shift<'a> {
    Uniform(f64),
    Nodal(&'a [f64]),
}

impl Shift<'_> {
    fn at(&self, i: usize) -> f64 {
        match self {
            Shift::Uniform(n) => *n,
            Shift::Nodal(v) => v[i],
        }
    }
}

/// Crank-Nicolson stepper for `u_tau = L u - N u + g`:
/// `(1/dtau - L/2 + N) u_next = (1/dtau + L/2) u_prev + g`.
struct Stepper {
    sigma: f64,
    inv_dt: f64,
    stencil: (f64, f64, f64),
    tri: Tridiagonal,
    lu: Vec<f64>,
    grid: Grid,
}

impl Stepper {
    fn new(grid: &Grid, sigma: f64, dtau: f64) -> Self {
        Self {
            sigma,
            inv_dt: 1.0 / dtau,
            stencil: grid.bs_stencil(sigma),
            tri: Tridiagonal::new(grid.n_space()),
            lu: vec![0.0; grid.n_space()],
            grid: grid.clone(),
        }
    }

    /// `(1/dtau + L/2) u_prev` into `out`.
    fn explicit(&mut self, u_prev: &[f64], out: &mut [f64]) {
        self.grid.apply_bs_operator_into(self.sigma, u_prev, &mut self.lu);
        for i in 0..out.len() {
            out[i] = self.inv_dt * u_prev[i] + 0.5 * self.lu[i];
        }
    }

    /// Solves `(1/dtau - L/2 + N) x = rhs` in place.
    fn implicit_solve(&mut self, shift: Shift<'_>, rhs: &mut [f64]) -> Result<()> {
        let n = rhs.len();
        let (lo, di, up) = self.stencil;
        for i in 0..n {
            let s = shift.at(i);
            if i == 0 || i == n - 1 {
                // boundary rows carry no diffusion
                self.tri.lower[i] = 0.0;
                self.tri.upper[i] = 0.0;
                self.tri.diag[i] = self.inv_dt + s;
            } else {
                self.tri.lower[i] = -0.5 * lo;
                self.tri.diag[i] = self.inv_dt - 0.5 * di + s;
                self.tri.upper[i] = -0.5 * up;
            }
        }
        self.tri.solve_in_place(rhs)
    }
}

/// One shifted Crank-Nicolson step:
/// `(1/dtau - L/2 + N) u_next = (1/dtau + L/2) u_prev + g`.
pub fn linear_parabolic_step(
    grid: &Grid,
    sigma: f64,
    shift: Shift<'_>,
    u_prev: &[f64],
    g: &[f64],
    dtau: f64,
) -> Result<Vec<f64>> {
    if !(dtau > 0.0) {
        return Err(Error::validation("dtau", "must be > 0"));
    }
    match shift {
        Shift::Uniform(n) if !(n >= 0.0) => return Err(Error::validation("shift", "must be >= 0")),
        Shift::Nodal(v) if v.iter().any(|n| !(*n >= 0.0)) => {
            return Err(Error::validation("shift", "must be >= 0"))
        }
        _ => {}
    }
    let mut st = Stepper::new(grid, sigma, dtau);
    let mut out = vec![0.0; u_prev.len()];
    st.explicit(u_prev, &mut out);
    out.iter_mut().zip(g).for_each(|(o, g)| *o += g);
    st.implicit_solve(shift, &mut out)?;
    Ok(out)
}

fn check_level(u: &[f64], level: usize, cap: f64) -> Result<()> {
    if let Some(node) = u.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { level, node });
    }
    check_cap(u, cap)
}

fn initial_datum(params: &ModelParams, payoff: &PayoffSpec, grid: &Grid, cap: f64) -> Result<Vec<f64>> {
    let gh: Vec<f64> = payoff
        .sample(grid.s_nodes())
        .iter()
        .map(|h| params.gamma() * h)
        .collect();
    check_level(&gh, 0, cap)?;
    Ok(gh)
}

/// Dispatches on `config.scheme`.
pub fn solve(
    params: &ModelParams,
    payoff: &PayoffSpec,
    grid: &Grid,
    config: &SolverConfig,
) -> Result<(Surface, SolveReport)> {
    match config.scheme {
        Scheme::DirectImex => solve_direct(params, payoff, grid, config),
        Scheme::MonotoneIteration => solve_monotone(params, payoff, grid, config),
    }
}

/// Predictor-corrector march through `tau = horizon`.
pub fn solve_direct(
    params: &ModelParams,
    payoff: &PayoffSpec,
    grid: &Grid,
    config: &SolverConfig,
) -> Result<(Surface, SolveReport)> {
    config.validate(params)?;
    let start = Instant::now();
    let cap = config.u_cap;
    let gh = initial_datum(params, payoff, grid, cap)?;
    let m = grid.n_space();
    let dt = grid.dtau();
    let mut st = Stepper::new(grid, params.sigma(), dt);
    let mut surface = Surface::zeros(grid);
    surface.level_mut(0).copy_from_slice(&gh);

    let mut u = gh.clone();
    let mut mem = vec![0.0; m];
    let mut f_now = vec![0.0; m];
    f_rhs_into(params, &u, &mem, &gh, &mut f_now);
    let (mut expl, mut pred, mut mem_pred, mut f_pred) = (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);

    for n in 0..grid.n_time() {
        st.explicit(&u, &mut expl);
        for i in 0..m {
            pred[i] = expl[i] + f_now[i];
        }
        st.implicit_solve(Shift::Uniform(0.0), &mut pred)?;
        check_level(&pred, n + 1, cap)?;
        mem_pred.copy_from_slice(&mem);
        trapezoid_increment(&mut mem_pred, &u, &pred, dt);
        f_rhs_into(params, &pred, &mem_pred, &gh, &mut f_pred);

        let next = surface.level_mut(n + 1);
        for i in 0..m {
            next[i] = expl[i] + 0.5 * (f_now[i] + f_pred[i]);
        }
        st.implicit_solve(Shift::Uniform(0.0), next)?;
        check_level(next, n + 1, cap)?;
        trapezoid_increment(&mut mem, &u, next, dt);
        u.copy_from_slice(next);
        surface.memory_level_mut(n + 1).copy_from_slice(&mem);
        f_rhs_into(params, &u, &mem, &gh, &mut f_now);
    }

    let report = SolveReport {
        scheme: Scheme::DirectImex,
        iterations: 0,
        final_increment: 0.0,
        max_abs_u: surface.max_abs(),
        estimate_ratio: estimate_ratio(&surface, &config.weight),
        wall_time_ms: Some(start.elapsed().as_millis() as u64),
        bracket: None,
        monotone: None,
    };
    Ok((surface, report))
}

/// Upper-solution iteration, level by level.
///
/// With `v` the unknown level `tau_{m+1}` and everything at `tau_m` fixed,
/// the trapezoid scheme reads `A v - F(v)/2 = r` with `A = 1/dtau - L/2`
/// an M-matrix and `F(v) = -nu01 B e^v + const` (the memory update
/// contributes `e^v e^{-v} = 1`). The start `v_0` solves the problem with the
/// exponential term dropped, so it is a supersolution and lies below
/// `c0 + M tau`. Each step solves `(A + N/2) v_{k+1} = r + N v_k/2 + F(v_k)/2`
/// with `N >= -F'` on `[v_{k+1}, v_k]`.
pub fn solve_monotone(
    params: &ModelParams,
    payoff: &PayoffSpec,
    grid: &Grid,
    config: &SolverConfig,
) -> Result<(Surface, SolveReport)> {
    config.validate(params)?;
    if !payoff.is_bounded() {
        return Err(Error::UnboundedPayoff(
            "the monotone scheme needs bounded data; apply smooth_cutoff or truncate_below first".into(),
        ));
    }
    let start = Instant::now();
    let cap = config.u_cap;
    let bracket = match config.bracket_m {
        Some(m) => bracket_with_m(params, payoff, grid, m)?,
        None => derive_bracket(params, payoff, grid)?,
    };
    let fixed_shift = match config.shift {
        ShiftPolicy::Adaptive => None,
        ShiftPolicy::Bracket => {
            if !bracket.n.is_finite() {
                return Err(Error::validation("solver.shiftN", "bracket shift overflows; shrink the bracket"));
            }
            Some(bracket.n)
        }
        ShiftPolicy::Fixed(n) => Some(n),
    };
    let gh = initial_datum(params, payoff, grid, cap)?;
    let m = grid.n_space();
    let dt = grid.dtau();
    let (nu01, nu10) = (params.nu01(), params.nu10());
    let source_const = params.kappa() - 0.5 * nu01 * nu10 * dt;

    let mut st = Stepper::new(grid, params.sigma(), dt);
    let mut surface = Surface::zeros(grid);
    surface.level_mut(0).copy_from_slice(&gh);
    let mut u = gh.clone();
    let mut mem = vec![0.0; m];
    let mut f_now = vec![0.0; m];
    f_rhs_into(params, &u, &mem, &gh, &mut f_now);

    let mut trace = MonotoneTrace {
        max_rise: f64::NEG_INFINITY,
        max_above_upper: f64::NEG_INFINITY,
        max_below_lower: f64::NEG_INFINITY,
        first_iterate_excess: f64::NEG_INFINITY,
        total_iterations: 0,
    };
    let mut worst_iters = 0usize;
    let mut worst_final = 0.0f64;
    let (mut r, mut b_mem, mut b_pay) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    let (mut v, mut next, mut shift) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);

    for n in 0..grid.n_time() {
        let tau = grid.tau(n + 1);
        let (upper, lower) = (bracket.upper(tau), bracket.lower(tau));
        st.explicit(&u, &mut r);
        for i in 0..m {
            r[i] += 0.5 * f_now[i];
            // e^v B = b_mem e^v + e^{v - gamma h}
            b_mem[i] = nu10 * (mem[i] + 0.5 * dt * (-u[i]).exp());
            b_pay[i] = gh[i];
        }
        for i in 0..m {
            v[i] = r[i] + 0.5 * source_const;
        }
        st.implicit_solve(Shift::Uniform(0.0), &mut v)?;
        check_level(&v, n + 1, cap)?;
        let track = |it: &[f64], trace: &mut MonotoneTrace| {
            for &x in it {
                trace.max_above_upper = trace.max_above_upper.max(x - upper);
                trace.max_below_lower = trace.max_below_lower.max(lower - x);
            }
        };
        track(&v, &mut trace);
        for &x in &v {
            trace.first_iterate_excess = trace.first_iterate_excess.max(x - upper);
        }

        let mut history = Vec::new();
        let mut converged = nu01 == 0.0;
        let mut k = 0;
        while !converged {
            if k == config.max_iter {
                return Err(Error::NoConvergence {
                    iterations: k,
                    increment: history.last().copied().unwrap_or(f64::INFINITY),
                    history,
                });
            }
            k += 1;
            for i in 0..m {
                let ev = b_mem[i] * v[i].exp() + (v[i] - b_pay[i]).exp();
                let f = -nu01 * ev + source_const;
                let nn = fixed_shift.unwrap_or(nu01 * ev);
                shift[i] = 0.5 * nn;
                next[i] = r[i] + 0.5 * nn * v[i] + 0.5 * f;
            }
            st.implicit_solve(Shift::Nodal(&shift), &mut next)?;
            check_level(&next, n + 1, cap)?;
            let mut inc = 0.0f64;
            for i in 0..m {
                let d = next[i] - v[i];
                inc = inc.max(d.abs());
                trace.max_rise = trace.max_rise.max(d);
            }
            track(&next, &mut trace);
            std::mem::swap(&mut v, &mut next);
            history.push(inc);
            converged = inc < config.tol_iter;
        }
        trace.total_iterations += k;
        worst_iters = worst_iters.max(k);
        worst_final = worst_final.max(history.last().copied().unwrap_or(0.0));

        trapezoid_increment(&mut mem, &u, &v, dt);
        u.copy_from_slice(&v);
        surface.level_mut(n + 1).copy_from_slice(&u);
        surface.memory_level_mut(n + 1).copy_from_slice(&mem);
        f_rhs_into(params, &u, &mem, &gh, &mut f_now);
    }
    if trace.max_rise == f64::NEG_INFINITY {
        trace.max_rise = 0.0;
    }

    let report = SolveReport {
        scheme: Scheme::MonotoneIteration,
        iterations: worst_iters,
        final_increment: worst_final,
        max_abs_u: surface.max_abs(),
        estimate_ratio: estimate_ratio(&surface, &config.weight),
        wall_time_ms: Some(start.elapsed().as_millis() as u64),
        bracket: Some(bracket),
        monotone: Some(trace),
    };
    Ok((surface, report))
}

/// Discrete counterpart of the a-priori estimate: backward-difference
/// `u_tau` in `L^2(0,T; L^2_w)` plus `max_t ||u||_1`, over `||u(0)||_1 + 1`.
pub fn estimate_ratio(surface: &Surface, weight: &WeightSpec) -> f64 {
    let grid = surface.grid();
    let dt = grid.dtau();
    let mut dot_sq = 0.0;
    let mut h1_max = 0.0f64;
    let mut diff = vec![0.0; grid.n_space()];
    for n in 0..surface.n_levels() {
        h1_max = h1_max.max(weighted_norms(surface.level(n), weight, grid).h1);
        if n > 0 {
            for (d, (a, b)) in diff.iter_mut().zip(surface.level(n).iter().zip(surface.level(n - 1))) {
                *d = (a - b) / dt;
            }
            dot_sq += dt * weighted_norms(&diff, weight, grid).l2.powi(2);
        }
    }
    let init = weighted_norms(surface.level(0), weight, grid).h1;
    (dot_sq.sqrt() + h1_max) / (init + 1.0)
}

/// Outcome of a truncation ladder.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LadderReport {
    pub levels: Vec<f64>,
    /// `sup |u_{N_{j+1}} - u_{N_j}|` over the central region and all times.
    pub sup_differences: Vec<f64>,
    /// `max (u_{N_{j+1}} - u_{N_j})` over all nodes and times; <= 0 up to tolerance.
    pub max_increase: Vec<f64>,
    pub differences_nonincreasing: bool,
}

pub const LADDER_TOL: f64 = 1e-6;

/// Solves the problems with initial data `max{gamma h, -N}` for increasing
/// `N` (in parallel) and checks that the solutions decrease.
pub fn solve_unbounded(
    params: &ModelParams,
    payoff: &PayoffSpec,
    grid: &Grid,
    config: &SolverConfig,
    levels: &[f64],
) -> Result<(Surface, LadderReport)> {
    if levels.is_empty() {
        return Err(Error::validation("levels", "need at least one level"));
    }
    if levels.windows(2).any(|w| w[1] <= w[0]) || levels[0] <= 0.0 {
        return Err(Error::validation("levels", "must be positive and strictly increasing"));
    }
    let payoffs = levels
        .iter()
        .map(|&n| payoff.truncate_below(n, params.gamma()))
        .collect::<Result<Vec<_>>>()?;
    let results: Vec<Result<Surface>> = std::thread::scope(|scope| {
        let handles: Vec<_> = payoffs
            .iter()
            .map(|p| scope.spawn(move || solve(params, p, grid, config).map(|(s, _)| s)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("solver thread panicked"))
            .collect()
    });
    let surfaces = results.into_iter().collect::<Result<Vec<_>>>()?;

    let central = grid.central_nodes(0.5 * (grid.x_min() + grid.x_max()), 0.25 * (grid.x_max() - grid.x_min()));
    let mut sup_differences = Vec::new();
    let mut max_increase = Vec::new();
    for (j, pair) in surfaces.windows(2).enumerate() {
        let rise = pair[1]
            .values()
            .iter()
            .zip(pair[0].values())
            .fold(f64::NEG_INFINITY, |m, (a, b)| m.max(a - b));
        if rise > LADDER_TOL {
            return Err(Error::MonotonicityViolation {
                lower: levels[j],
                upper: levels[j + 1],
                excess: rise,
            });
        }
        max_increase.push(rise);
        sup_differences.push(pair[1].sup_diff(&pair[0], Some(&central)));
    }
    let differences_nonincreasing = sup_differences.windows(2).all(|w| w[1] <= w[0] + LADDER_TOL);
    let report = LadderReport {
        levels: levels.to_vec(),
        sup_differences,
        max_increase,
        differences_nonincreasing,
    };
    Ok((surfaces.into_iter().last().expect("non-empty"), report))
}
