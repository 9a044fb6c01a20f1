//! Log-price grid, the discrete Black-Scholes operator and solution surfaces.
//!
//! All PDE work happens in `x = ln S`, where `1/2 sigma^2 S^2 d^2/dS^2`
//! becomes the constant-coefficient operator `1/2 sigma^2 (d^2/dx^2 - d/dx)`.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};

/// Uniform grid in `x = ln S` and in time-to-maturity `tau`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    n_space: usize,
    n_time: usize,
    horizon: f64,
    dx: f64,
    dtau: f64,
    #[serde(skip)]
    x_nodes: Vec<f64>,
    #[serde(skip)]
    s_nodes: Vec<f64>,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n_space: usize, horizon: f64, n_time: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) {
            return Err(Error::validation("grid.xMin", "need xMin < xMax"));
        }
        if n_space < 3 {
            return Err(Error::validation("grid.nSpace", "need at least 3 nodes"));
        }
        if n_time < 1 {
            return Err(Error::validation("grid.nTime", "need at least 1 step"));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::validation("grid.horizon", "must be > 0"));
        }
        let dx = (x_max - x_min) / (n_space - 1) as f64;
        let x_nodes: Vec<f64> = (0..n_space)
            .map(|i| if i + 1 == n_space { x_max } else { x_min + i as f64 * dx })
            .collect();
        let s_nodes = x_nodes.iter().map(|x| x.exp()).collect();
        Ok(Self {
            x_min,
            x_max,
            n_space,
            n_time,
            horizon,
            dx,
            dtau: horizon / n_time as f64,
            x_nodes,
            s_nodes,
        })
    }

    /// Desk-scale default: `x in [-4, 4]`, 201 nodes, 200 steps per unit horizon.
    pub fn desk(horizon: f64) -> Result<Self> {
        let n_time = (200.0 * horizon).ceil().max(1.0) as usize;
        Self::new(-4.0, 4.0, 201, horizon, n_time)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }
    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    pub fn n_space(&self) -> usize {
        self.n_space
    }
    pub fn n_time(&self) -> usize {
        self.n_time
    }
    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    pub fn dx(&self) -> f64 {
        self.dx
    }
    pub fn dtau(&self) -> f64 {
        self.dtau
    }
    pub fn x_nodes(&self) -> &[f64] {
        &self.x_nodes
    }
    pub fn s_nodes(&self) -> &[f64] {
        &self.s_nodes
    }
    pub fn tau(&self, level: usize) -> f64 {
        if level == self.n_time {
            self.horizon
        } else {
            level as f64 * self.dtau
        }
    }

    /// Same spatial grid with a different number of time steps.
    pub fn with_n_time(&self, n_time: usize) -> Result<Self> {
        Self::new(self.x_min, self.x_max, self.n_space, self.horizon, n_time)
    }

    /// Indices of nodes with `|x - center| <= half_width`.
    pub fn central_nodes(&self, center: f64, half_width: f64) -> Vec<usize> {
        (0..self.n_space)
            .filter(|&i| (self.x_nodes[i] - center).abs() <= half_width + 1e-12)
            .collect()
    }

    /// Stencil weights `(lower, diag, upper)` of the interior operator.
    pub fn bs_stencil(&self, sigma: f64) -> (f64, f64, f64) {
        let h = 0.5 * sigma * sigma;
        let a = 1.0 / (self.dx * self.dx);
        let b = 1.0 / (2.0 * self.dx);
        (h * (a + b), -2.0 * h * a, h * (a - b))
    }

    /// `1/2 sigma^2 S^2 u_SS` at every node.
    ///
    /// Interior nodes use second-order central differences in `x`. Boundary
    /// rows are closed with `S^2 u_SS = 0`, linear behaviour in `S` in the far
    /// field, which keeps the implicit matrix an M-matrix.
    pub fn apply_bs_operator(&self, sigma: f64, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        self.apply_bs_operator_into(sigma, u, &mut out);
        out
    }

    pub(crate) fn apply_bs_operator_into(&self, sigma: f64, u: &[f64], out: &mut [f64]) {
        assert_eq!(u.len(), self.n_space, "vector length must match grid");
        let n = u.len();
        out[0] = 0.0;
        out[n - 1] = 0.0;
        for i in 1..n - 1 {
            // the difference form annihilates constants exactly
            let d2 = u[i + 1] - u[i] - (u[i] - u[i - 1]);
            let d1 = u[i + 1] - u[i - 1];
            out[i] = 0.5 * sigma * sigma * (d2 / (self.dx * self.dx) - d1 / (2.0 * self.dx));
        }
    }
}

/// Solution field `u(S, tau)` with its memory integral `I(S, tau)`, stored
/// level-major: index `level * n_space + node`.
#[derive(Debug, Clone, PartialEq)]
pub struct Surface {
    grid: Grid,
    values: Vec<f64>,
    memory: Vec<f64>,
}

impl Surface {
    pub(crate) fn zeros(grid: &Grid) -> Self {
        let len = (grid.n_time + 1) * grid.n_space;
        Self {
            grid: grid.clone(),
            values: vec![0.0; len],
            memory: vec![0.0; len],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn n_levels(&self) -> usize {
        self.grid.n_time + 1
    }
    pub fn level(&self, n: usize) -> &[f64] {
        let m = self.grid.n_space;
        &self.values[n * m..(n + 1) * m]
    }
    pub fn memory_level(&self, n: usize) -> &[f64] {
        let m = self.grid.n_space;
        &self.memory[n * m..(n + 1) * m]
    }
    pub(crate) fn level_mut(&mut self, n: usize) -> &mut [f64] {
        let m = self.grid.n_space;
        &mut self.values[n * m..(n + 1) * m]
    }
    pub(crate) fn memory_level_mut(&mut self, n: usize) -> &mut [f64] {
        let m = self.grid.n_space;
        &mut self.memory[n * m..(n + 1) * m]
    }
    pub fn value(&self, level: usize, node: usize) -> f64 {
        self.values[level * self.grid.n_space + node]
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn memory(&self) -> &[f64] {
        &self.memory
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Largest `|self - other|` over all nodes and levels, optionally restricted
    /// to a subset of nodes.
    pub fn sup_diff(&self, other: &Surface, nodes: Option<&[usize]>) -> f64 {
        assert_eq!(self.values.len(), other.values.len(), "surfaces on different grids");
        let m = self.grid.n_space;
        let mut worst = 0.0f64;
        for n in 0..self.n_levels() {
            let (a, b) = (self.level(n), other.level(n));
            match nodes {
                Some(idx) => idx.iter().for_each(|&i| worst = worst.max((a[i] - b[i]).abs())),
                None => (0..m).for_each(|i| worst = worst.max((a[i] - b[i]).abs())),
            }
        }
        worst
    }

    /// CSV with header `x,S,tau,u,I`, one row per (level, node), level-major.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,S,tau,u,I")?;
        for n in 0..self.n_levels() {
            let tau = self.grid.tau(n);
            let (u, mem) = (self.level(n), self.memory_level(n));
            for i in 0..self.grid.n_space {
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    self.grid.x_nodes[i], self.grid.s_nodes[i], tau, u[i], mem[i]
                )?;
            }
        }
        Ok(())
    }
}

/// Barrier `omega(S, tau)` that solves the Black-Scholes equation and blows up
/// as `tau -> T1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BarrierParams {
    pub t1: f64,
    pub sigma: f64,
}

impl BarrierParams {
    pub fn new(t1: f64, sigma: f64) -> Result<Self> {
        if !(t1 > 0.0) {
            return Err(Error::validation("barrier.T1", "must be > 0"));
        }
        if !(sigma > 0.0) {
            return Err(Error::validation("barrier.sigma", "must be > 0"));
        }
        Ok(Self { t1, sigma })
    }

    /// Supremum of admissible window lengths for growth exponent `alpha`:
    /// `min{(2 sigma^2 alpha)^-1, 4 / sigma^2}`.
    pub fn window_bound(&self, alpha: f64) -> f64 {
        let s2 = self.sigma * self.sigma;
        (1.0 / (2.0 * s2 * alpha)).min(4.0 / s2)
    }

    fn remaining(&self, tau: f64) -> Result<f64> {
        if tau < 0.0 || tau >= self.t1 {
            return Err(Error::Domain(format!(
                "barrier needs 0 <= tau < T1 = {}, got {tau}",
                self.t1
            )));
        }
        Ok(self.t1 - tau)
    }

    pub fn omega(&self, s: f64, tau: f64) -> Result<f64> {
        let r = self.remaining(tau)?;
        let s2 = self.sigma * self.sigma;
        // ln S + s2 r / 2: with the opposite sign the residual is (ln S / r - s2 / 2) omega
        let z = s.ln() + 0.5 * s2 * r;
        Ok((z * z / (2.0 * s2 * r)).exp() / r.sqrt())
    }

    /// Analytic `d omega / d tau`.
    pub fn omega_tau(&self, s: f64, tau: f64) -> Result<f64> {
        let r = self.remaining(tau)?;
        let s2 = self.sigma * self.sigma;
        let x = s.ln();
        // ln omega = -ln r / 2 + x^2 / (2 s2 r) + x / 2 + s2 r / 8
        let dlog_dr = -0.5 / r - x * x / (2.0 * s2 * r * r) + s2 / 8.0;
        Ok(-dlog_dr * self.omega(s, tau)?)
    }
}
