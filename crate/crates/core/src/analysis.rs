//! Discrete weighted-Sobolev machinery on the log-price grid.
//!
//! Integrals over `(0, inf)` are truncated to the grid's `S` range and
//! evaluated with the trapezoid rule in `S`. `S u'(S)` is computed as
//! `du/dx` by central differences (second-order one-sided at the ends).
//! The same discrete derivative and quadrature are used by the norms and the
//! bilinear form, so the Young's-inequality bound behind the
//! semi-coercivity constants holds exactly for the discrete objects.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{BarrierParams, Grid, Surface};
use crate::payoff::PayoffSpec;

/// Weight `w(S)` for `L^2_w` / `H^1_w`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum WeightSpec {
    /// `(1 + S)^p`, `p < -3`.
    Power { exponent: f64 },
    /// Values of `w`, `w'` and `w''` at the grid nodes.
    Custom { w: Vec<f64>, dw: Vec<f64>, d2w: Vec<f64> },
}

impl WeightSpec {
    pub fn power(exponent: f64) -> Result<Self> {
        if !(exponent < -3.0) {
            return Err(Error::validation("weight.exponent", format!("must be < -3, got {exponent}")));
        }
        Ok(WeightSpec::Power { exponent })
    }

    fn check_len(&self, grid: &Grid) -> Result<()> {
        if let WeightSpec::Custom { w, dw, d2w } = self {
            let n = grid.n_space();
            if w.len() != n || dw.len() != n || d2w.len() != n {
                return Err(Error::validation("weight", "custom weight tables must match the grid"));
            }
        }
        Ok(())
    }

    /// `w` at the grid nodes.
    pub fn values(&self, grid: &Grid) -> Vec<f64> {
        match self {
            WeightSpec::Power { exponent } => grid.s_nodes().iter().map(|s| (1.0 + s).powf(*exponent)).collect(),
            WeightSpec::Custom { w, .. } => w.clone(),
        }
    }

    /// `S w'/w` at the grid nodes.
    pub fn log_slope(&self, grid: &Grid) -> Vec<f64> {
        match self {
            WeightSpec::Power { exponent } => grid.s_nodes().iter().map(|s| exponent * s / (1.0 + s)).collect(),
            WeightSpec::Custom { w, dw, .. } => grid
                .s_nodes()
                .iter()
                .zip(w.iter().zip(dw))
                .map(|(s, (w, dw))| s * dw / w)
                .collect(),
        }
    }

    /// `S^2 w''/w` at the grid nodes.
    pub fn log_curvature(&self, grid: &Grid) -> Vec<f64> {
        match self {
            WeightSpec::Power { exponent: p } => grid
                .s_nodes()
                .iter()
                .map(|s| p * (p - 1.0) * s * s / ((1.0 + s) * (1.0 + s)))
                .collect(),
            WeightSpec::Custom { w, d2w, .. } => grid
                .s_nodes()
                .iter()
                .zip(w.iter().zip(d2w))
                .map(|(s, (w, d2w))| s * s * d2w / w)
                .collect(),
        }
    }

    /// Bound `C` for both `|S w'/w|` and `|S^2 w''/w|`. Analytic suprema over
    /// `(0, inf)` for power weights, the grid maximum for custom weights.
    pub fn bound_c(&self, grid: &Grid) -> f64 {
        match self {
            WeightSpec::Power { exponent: p } => p.abs().max((p * (p - 1.0)).abs()),
            WeightSpec::Custom { .. } => measured_c(self, grid),
        }
    }
}

fn measured_c(ws: &WeightSpec, grid: &Grid) -> f64 {
    ws.log_slope(grid)
        .iter()
        .chain(ws.log_curvature(grid).iter())
        .fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Trapezoid rule in `S` over the grid nodes.
pub fn integrate_s(grid: &Grid, f: &[f64]) -> f64 {
    let s = grid.s_nodes();
    f.windows(2)
        .zip(s.windows(2))
        .map(|(fv, sv)| 0.5 * (fv[0] + fv[1]) * (sv[1] - sv[0]))
        .sum()
}

/// `S u'(S) = du/dx` at the nodes.
pub fn s_derivative(grid: &Grid, u: &[f64]) -> Vec<f64> {
    let n = u.len();
    let h = grid.dx();
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        d[i] = (u[i + 1] - u[i - 1]) / (2.0 * h);
    }
    d[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h);
    d[n - 1] = (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) / (2.0 * h);
    d
}

/// `(||u||_0, ||u||_1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Norms {
    pub l2: f64,
    pub h1: f64,
}

pub fn weighted_norms(u: &[f64], ws: &WeightSpec, grid: &Grid) -> Norms {
    let w = ws.values(grid);
    norms_with(u, &w, grid)
}

fn norms_with(u: &[f64], w: &[f64], grid: &Grid) -> Norms {
    let du = s_derivative(grid, u);
    let l2sq = integrate_s(grid, &u.iter().zip(w).map(|(u, w)| u * u * w).collect::<Vec<_>>());
    let dsq = integrate_s(grid, &du.iter().zip(w).map(|(d, w)| d * d * w).collect::<Vec<_>>());
    Norms {
        l2: l2sq.sqrt(),
        h1: (l2sq + dsq).sqrt(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct WeightReport {
    pub c: f64,
    pub c_measured: f64,
    pub theta: f64,
    pub theta_quadrature: f64,
    pub pass: bool,
}

/// Checks positivity, the log-derivative bounds and integrability of `w`.
pub fn weight_check(ws: &WeightSpec, grid: &Grid) -> Result<WeightReport> {
    ws.check_len(grid)?;
    let w = ws.values(grid);
    let c_measured = measured_c(ws, grid);
    let c = ws.bound_c(grid);
    let theta_quadrature = integrate_s(grid, &w);
    let theta = match ws {
        WeightSpec::Power { exponent } => -1.0 / (exponent + 1.0),
        WeightSpec::Custom { .. } => {
            // integrable at 0 iff S w'/w > -1 near 0, at infinity iff < -1
            let q = ws.log_slope(grid);
            if q[0] <= -1.0 || q[q.len() - 1] >= -1.0 {
                f64::INFINITY
            } else {
                theta_quadrature
            }
        }
    };
    let pass = w.iter().all(|&v| v > 0.0 && v.is_finite())
        && c_measured <= c + 1e-12
        && theta.is_finite()
        && theta > 0.0;
    Ok(WeightReport {
        c,
        c_measured,
        theta,
        theta_quadrature,
        pass,
    })
}

/// `a(u, v) = 1/2 sigma^2 int w S u' [S v' + (S w'/w + 2) v] dS`.
pub fn bilinear_form(u: &[f64], v: &[f64], ws: &WeightSpec, grid: &Grid, sigma: f64) -> f64 {
    let w = ws.values(grid);
    let q = ws.log_slope(grid);
    bilinear_with(u, v, &w, &q, grid, sigma)
}

fn bilinear_with(u: &[f64], v: &[f64], w: &[f64], q: &[f64], grid: &Grid, sigma: f64) -> f64 {
    let du = s_derivative(grid, u);
    let dv = s_derivative(grid, v);
    let integrand: Vec<f64> = (0..u.len())
        .map(|i| w[i] * du[i] * (dv[i] + (q[i] + 2.0) * v[i]))
        .collect();
    0.5 * sigma * sigma * integrate_s(grid, &integrand)
}

/// Semi-coercivity constants `alpha = sigma^2/4`, `beta = sigma^2 ((C+2)^2 + 1)/4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoercivityConstants {
    pub alpha: f64,
    pub beta: f64,
}

impl CoercivityConstants {
    pub fn new(sigma: f64, c: f64) -> Self {
        let s2 = sigma * sigma;
        Self {
            alpha: s2 / 4.0,
            beta: s2 * ((c + 2.0).powi(2) + 1.0) / 4.0,
        }
    }
}

/// Random test-function families for the audits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum Family {
    WhiteNoise,
    SmoothedNoise,
    Bump,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::WhiteNoise, Family::SmoothedNoise, Family::Bump];

    pub fn draw<R: Rng + ?Sized>(self, grid: &Grid, rng: &mut R) -> Vec<f64> {
        let n = grid.n_space();
        match self {
            Family::WhiteNoise => (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            Family::SmoothedNoise => {
                let raw: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let width = rng.random_range(2..=12usize);
                (0..n)
                    .map(|i| {
                        let lo = i.saturating_sub(width);
                        let hi = (i + width).min(n - 1);
                        raw[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
                    })
                    .collect()
            }
            Family::Bump => {
                let (a, b) = (grid.x_min(), grid.x_max());
                let center = rng.random_range(a..b);
                let width = rng.random_range(0.05..0.5) * (b - a);
                let amp = rng.random_range(-3.0..3.0);
                grid.x_nodes()
                    .iter()
                    .map(|x| amp * (-((x - center) / width).powi(2)).exp())
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CoercivityReport {
    pub alpha: f64,
    pub beta: f64,
    pub c: f64,
    pub trials: usize,
    /// `min (a(u,u) - alpha ||u||_1^2 + beta ||u||_0^2) / ||u||_1^2` over draws.
    pub worst_margin: f64,
    pub worst_family: Family,
    /// `max |a(u,v)| / (||u||_1 ||v||_1)` over draws.
    pub continuity_fit: f64,
    pub pass: bool,
}

/// Draws `trials` functions from each family and checks
/// `a(u,u) >= alpha ||u||_1^2 - beta ||u||_0^2 - 1e-10 ||u||_1^2`.
pub fn coercivity_audit<R: Rng + ?Sized>(
    ws: &WeightSpec,
    grid: &Grid,
    sigma: f64,
    trials: usize,
    rng: &mut R,
) -> Result<CoercivityReport> {
    if trials == 0 {
        return Err(Error::validation("trials", "must be >= 1"));
    }
    ws.check_len(grid)?;
    let c = ws.bound_c(grid);
    let k = CoercivityConstants::new(sigma, c);
    let w = ws.values(grid);
    let q = ws.log_slope(grid);
    let mut worst_margin = f64::INFINITY;
    let mut worst_family = Family::WhiteNoise;
    let mut continuity_fit = 0.0f64;
    for t in 0..trials {
        let family = Family::ALL[t % Family::ALL.len()];
        let u = family.draw(grid, rng);
        let v = family.draw(grid, rng);
        let nu = norms_with(&u, &w, grid);
        let nv = norms_with(&v, &w, grid);
        if nu.h1 == 0.0 {
            continue;
        }
        let auu = bilinear_with(&u, &u, &w, &q, grid, sigma);
        let margin = (auu - k.alpha * nu.h1 * nu.h1 + k.beta * nu.l2 * nu.l2) / (nu.h1 * nu.h1);
        if margin < worst_margin {
            worst_margin = margin;
            worst_family = family;
        }
        if margin < -1e-10 {
            return Err(Error::AuditFailure {
                check: "coercivity".into(),
                detail: serde_json::json!({ "family": family, "margin": margin, "u": u }).to_string(),
            });
        }
        if nv.h1 > 0.0 {
            let auv = bilinear_with(&u, &v, &w, &q, grid, sigma);
            continuity_fit = continuity_fit.max(auv.abs() / (nu.h1 * nv.h1));
        }
    }
    Ok(CoercivityReport {
        alpha: k.alpha,
        beta: k.beta,
        c,
        trials,
        worst_margin,
        worst_family,
        continuity_fit,
        pass: true,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PointwiseBound {
    /// `max_S |u(S)|^2 S e^{-C |ln S|} / ||u||_1^2`
    pub c0: f64,
    pub argmax_s: f64,
}

pub fn pointwise_bound_audit(u: &[f64], ws: &WeightSpec, grid: &Grid) -> Result<PointwiseBound> {
    ws.check_len(grid)?;
    let h1 = weighted_norms(u, ws, grid).h1;
    if !(h1 > 0.0) {
        return Err(Error::validation("u", "needs ||u||_1 > 0"));
    }
    let c = ws.bound_c(grid);
    let mut best = PointwiseBound {
        c0: 0.0,
        argmax_s: grid.s_nodes()[0],
    };
    for (&s, &v) in grid.s_nodes().iter().zip(u) {
        let r = v * v * s * (-c * s.ln().abs()).exp() / (h1 * h1);
        if r > best.c0 {
            best = PointwiseBound { c0: r, argmax_s: s };
        }
    }
    Ok(best)
}

/// Sharp discrete constant of the pointwise bound: the largest value of
/// `|u(S_i)|^2 S_i e^{-C |ln S_i|} / ||u||_1^2` over all nodal `u`.
///
/// With `||u||_1^2 = u^T G u`, the maximum of `u_i^2 / u^T G u` is `(G^-1)_ii`.
pub fn embedding_constant(ws: &WeightSpec, grid: &Grid) -> Result<f64> {
    ws.check_len(grid)?;
    let n = grid.n_space();
    let w = ws.values(grid);
    let s = grid.s_nodes();
    // trapezoid weights times w
    let mut qw = vec![0.0; n];
    for i in 0..n - 1 {
        let h = 0.5 * (s[i + 1] - s[i]);
        qw[i] += h * w[i];
        qw[i + 1] += h * w[i + 1];
    }
    let mut d = vec![vec![0.0; n]; n];
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        for (i, v) in s_derivative(grid, &e).into_iter().enumerate() {
            d[i][j] = v;
        }
        e[j] = 0.0;
    }
    let mut g = vec![vec![0.0; n]; n];
    for i in 0..n {
        g[i][i] += qw[i];
        let nz: Vec<usize> = (0..n).filter(|&j| d[i][j] != 0.0).collect();
        for &a in &nz {
            for &b in &nz {
                g[a][b] += qw[i] * d[i][a] * d[i][b];
            }
        }
    }
    let l = cholesky(g).ok_or_else(|| Error::AuditFailure {
        check: "pointwise".into(),
        detail: "Gram matrix of the H1_w norm is not positive definite".into(),
    })?;
    let c = ws.bound_c(grid);
    let mut best = 0.0f64;
    for i in 0..n {
        // (G^-1)_ii = |L^-1 e_i|^2
        let mut y = vec![0.0; n];
        for r in i..n {
            let mut acc = if r == i { 1.0 } else { 0.0 };
            for k in i..r {
                acc -= l[r][k] * y[k];
            }
            y[r] = acc / l[r][r];
        }
        let gii: f64 = y.iter().map(|v| v * v).sum();
        best = best.max(gii * s[i] * (-c * s[i].ln().abs()).exp());
    }
    Ok(best)
}

fn cholesky(mut a: Vec<Vec<f64>>) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    for j in 0..n {
        let mut d = a[j][j];
        for k in 0..j {
            d -= a[j][k] * a[j][k];
        }
        if !(d > 0.0) {
            return None;
        }
        let d = d.sqrt();
        a[j][j] = d;
        for i in j + 1..n {
            let mut v = a[i][j];
            for k in 0..j {
                v -= a[i][k] * a[j][k];
            }
            a[i][j] = v / d;
        }
        for k in j + 1..n {
            a[j][k] = 0.0;
        }
    }
    Some(a)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ComparisonVerdict {
    /// `gamma inf (h1 - h0)` over the grid.
    pub lower: f64,
    /// `gamma sup (h1 - h0)` over the grid.
    pub upper: f64,
    /// Largest amount by which `u1 - u0` leaves `[lower, upper]` (0 if never).
    pub worst_violation: f64,
    pub worst_level: usize,
    pub worst_node: usize,
    pub pass: bool,
}

/// Checks `gamma inf(h1-h0) <= u1 - u0 <= gamma sup(h1-h0)` at every node and
/// time level, within `tol`.
pub fn comparison_check(
    u1: &Surface,
    u0: &Surface,
    h1: &PayoffSpec,
    h0: &PayoffSpec,
    gamma: f64,
    tol: f64,
) -> Result<ComparisonVerdict> {
    if u1.grid() != u0.grid() {
        return Err(Error::validation("comparison", "surfaces must share a grid"));
    }
    let s = u1.grid().s_nodes();
    let (mut lower, mut upper) = (f64::INFINITY, f64::NEG_INFINITY);
    for &x in s {
        let d = gamma * (h1.evaluate(x) - h0.evaluate(x));
        lower = lower.min(d);
        upper = upper.max(d);
    }
    let mut v = ComparisonVerdict {
        lower,
        upper,
        worst_violation: 0.0,
        worst_level: 0,
        worst_node: 0,
        pass: true,
    };
    for n in 0..u1.n_levels() {
        for (i, (a, b)) in u1.level(n).iter().zip(u0.level(n)).enumerate() {
            let d = a - b;
            let excess = (lower - d).max(d - upper);
            if excess > v.worst_violation {
                v.worst_violation = excess;
                v.worst_level = n;
                v.worst_node = i;
            }
        }
    }
    v.pass = v.worst_violation <= tol;
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BarrierReport {
    pub n_space: Vec<usize>,
    /// `max |omega_tau - L_h omega|` over interior nodes, per grid.
    pub residuals: Vec<f64>,
    pub rates: Vec<f64>,
    /// `omega` strictly increasing in `tau` at every sampled `S`.
    pub increasing_in_tau: bool,
    pub pass: bool,
}

/// Node counts used by the barrier convergence audit.
pub const BARRIER_GRIDS: [usize; 4] = [81, 161, 321, 641];

/// Discrete residual of the barrier on `x in [-1, 1]` at time `tau` for each
/// node count, and monotonicity in `tau` on `[T1 - 4/sigma^2, T1)` at 20
/// values of `S`. Passes if every observed rate is at least `min_rate`.
pub fn barrier_audit(b: &BarrierParams, tau: f64, n_space: &[usize], min_rate: f64) -> Result<BarrierReport> {
    if n_space.len() < 2 {
        return Err(Error::validation("barrier.nSpace", "need at least two grids"));
    }
    let mut residuals = Vec::with_capacity(n_space.len());
    for &n in n_space {
        let g = Grid::new(-1.0, 1.0, n, 1.0, 1)?;
        let w = g.s_nodes().iter().map(|&s| b.omega(s, tau)).collect::<Result<Vec<_>>>()?;
        let lw = g.apply_bs_operator(b.sigma, &w);
        let mut worst = 0.0f64;
        for i in 1..n - 1 {
            worst = worst.max((b.omega_tau(g.s_nodes()[i], tau)? - lw[i]).abs());
        }
        residuals.push(worst);
    }
    let rates: Vec<f64> = residuals.windows(2).map(|r| (r[0] / r[1]).log2()).collect();

    let start = (b.t1 - 4.0 / (b.sigma * b.sigma)).max(0.0);
    let mut increasing = true;
    for k in 0..20 {
        let s = (-1.0 + 2.0 * k as f64 / 19.0).exp();
        let mut prev = f64::NEG_INFINITY;
        for j in 0..50 {
            let t = start + (b.t1 - start) * j as f64 / 50.0;
            let v = b.omega(s, t)?;
            if !(v > prev && b.omega_tau(s, t)? > 0.0) {
                increasing = false;
            }
            prev = v;
        }
    }
    let pass = increasing && rates.iter().all(|r| *r >= min_rate);
    Ok(BarrierReport {
        n_space: n_space.to_vec(),
        residuals,
        rates,
        increasing_in_tau: increasing,
        pass,
    })
}
