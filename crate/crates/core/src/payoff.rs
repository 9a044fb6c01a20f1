//! Terminal payoffs `h(S)`, the growth-envelope report and the truncation
//! operators used to approximate unbounded data by bounded data.

use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of the terminal payoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PayoffKind {
    Call { strike: f64 },
    Put { strike: f64 },
    Constant { level: f64 },
    /// Sorted `(S, h)` nodes, linear in between, flat outside.
    Tabulated { s: Vec<f64>, h: Vec<f64> },
}

/// A payoff together with its growth envelope `A exp(alpha ln^2 S)` and any
/// truncation applied to it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PayoffSpec {
    kind: PayoffKind,
    growth_a: Option<f64>,
    growth_alpha: f64,
    /// `max{h, floor}`
    floor: Option<f64>,
    /// `xi_eps h + (1 - xi_eps) level`
    cutoff: Option<(f64, f64)>,
}

pub const DEFAULT_GROWTH_ALPHA: f64 = 0.25;

impl PayoffSpec {
    pub fn new(kind: PayoffKind) -> Result<Self> {
        match &kind {
            PayoffKind::Call { strike } | PayoffKind::Put { strike } => {
                if !(strike.is_finite() && *strike > 0.0) {
                    return Err(Error::validation("payoff.strike", format!("must be > 0, got {strike}")));
                }
            }
            PayoffKind::Constant { level } => {
                if !level.is_finite() {
                    return Err(Error::validation("payoff.level", "must be finite"));
                }
            }
            PayoffKind::Tabulated { s, h } => validate_table(s, h)?,
        }
        Ok(Self {
            kind,
            growth_a: None,
            growth_alpha: DEFAULT_GROWTH_ALPHA,
            floor: None,
            cutoff: None,
        })
    }

    pub fn call(strike: f64) -> Result<Self> {
        Self::new(PayoffKind::Call { strike })
    }
    pub fn put(strike: f64) -> Result<Self> {
        Self::new(PayoffKind::Put { strike })
    }
    pub fn constant(level: f64) -> Result<Self> {
        Self::new(PayoffKind::Constant { level })
    }
    pub fn tabulated(s: Vec<f64>, h: Vec<f64>) -> Result<Self> {
        Self::new(PayoffKind::Tabulated { s, h })
    }

    /// Reads a two-column `S,h` CSV. A non-numeric first line is taken as a header.
    pub fn tabulated_from_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut s = Vec::new();
        let mut h = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::validation("payoff.table", e.to_string()))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split(',').map(str::trim);
            let (a, b) = match (cols.next(), cols.next(), cols.next()) {
                (Some(a), Some(b), None) => (a, b),
                _ => {
                    return Err(Error::validation(
                        "payoff.table",
                        format!("line {}: expected two columns", lineno + 1),
                    ))
                }
            };
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(x), Ok(y)) => {
                    s.push(x);
                    h.push(y);
                }
                _ if s.is_empty() && lineno == 0 => continue,
                _ => {
                    return Err(Error::validation(
                        "payoff.table",
                        format!("line {}: not a number", lineno + 1),
                    ))
                }
            }
        }
        Self::tabulated(s, h)
    }

    pub fn with_growth(mut self, a: f64, alpha: f64) -> Result<Self> {
        if !(a > 0.0 && alpha > 0.0) {
            return Err(Error::validation("payoff.growth", "A and alpha must be > 0"));
        }
        self.growth_a = Some(a);
        self.growth_alpha = alpha;
        Ok(self)
    }

    pub fn kind(&self) -> &PayoffKind {
        &self.kind
    }

    pub fn floor(&self) -> Option<f64> {
        self.floor
    }

    pub fn evaluate(&self, s: f64) -> f64 {
        let mut v = match &self.kind {
            PayoffKind::Call { strike } => (s - strike).max(0.0),
            PayoffKind::Put { strike } => (strike - s).max(0.0),
            PayoffKind::Constant { level } => *level,
            PayoffKind::Tabulated { s: xs, h } => interpolate(xs, h, s),
        };
        if let Some((eps, level)) = self.cutoff {
            let xi = xi_epsilon_raw(eps, s);
            v = xi * v + (1.0 - xi) * level;
        }
        if let Some(f) = self.floor {
            v = v.max(f);
        }
        v
    }

    /// Values at every node of `s_nodes`.
    pub fn sample(&self, s_nodes: &[f64]) -> Vec<f64> {
        s_nodes.iter().map(|&s| self.evaluate(s)).collect()
    }

    /// Floors the payoff so the initial datum `gamma h` is floored at `-level`.
    pub fn truncate_below(&self, level: f64, gamma: f64) -> Result<Self> {
        if !(level > 0.0) {
            return Err(Error::validation("truncation.floorN", "must be > 0"));
        }
        let f = -level / gamma;
        let mut out = self.clone();
        if let (PayoffKind::Constant { level: c }, None, None) = (&self.kind, self.floor, self.cutoff) {
            out.kind = PayoffKind::Constant { level: c.max(f) };
            return Ok(out);
        }
        out.floor = Some(self.floor.map_or(f, |g| g.max(f)));
        Ok(out)
    }

    /// Replaces `h` by `xi_eps h + (1 - xi_eps) level`, which is bounded for
    /// any payoff continuous on `(0, inf)`.
    pub fn smooth_cutoff(&self, trunc: &TruncationParams, level: f64) -> Result<Self> {
        if self.cutoff.is_some() {
            return Err(Error::validation("payoff.truncation", "cutoff already applied"));
        }
        let mut out = self.clone();
        out.cutoff = Some((trunc.epsilon, level));
        Ok(out)
    }

    /// Whether the payoff is bounded on `(0, inf)` as a function, ignoring grids.
    pub fn is_bounded(&self) -> bool {
        match self.kind {
            PayoffKind::Call { .. } => self.cutoff.is_some(),
            _ => true,
        }
    }

    /// Ratio of `|h(S)|` to the envelope `A exp(alpha ln^2 S)` over `samples`.
    pub fn growth_check(&self, samples: &[f64]) -> GrowthReport {
        let values: Vec<f64> = samples.iter().map(|&s| self.evaluate(s)).collect();
        let a = self
            .growth_a
            .unwrap_or_else(|| 1.0 + values.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        let alpha = self.growth_alpha;
        let mut worst_ratio = 0.0;
        let mut worst_s = samples.first().copied().unwrap_or(f64::NAN);
        for (&s, v) in samples.iter().zip(&values) {
            let l = s.ln();
            // compare in log space; exp(alpha ln^2 S) overflows for large |ln S|
            let ratio = if *v == 0.0 {
                0.0
            } else {
                (v.abs().ln() - a.ln() - alpha * l * l).exp()
            };
            if ratio > worst_ratio {
                worst_ratio = ratio;
                worst_s = s;
            }
        }
        GrowthReport {
            amplitude: a,
            alpha,
            worst_ratio,
            worst_s,
            pass: worst_ratio <= 1.0,
        }
    }
}

fn validate_table(s: &[f64], h: &[f64]) -> Result<()> {
    if s.is_empty() || s.len() != h.len() {
        return Err(Error::validation(
            "payoff.table",
            "needs at least one (S, h) pair and equal column lengths",
        ));
    }
    if s.iter().chain(h).any(|v| !v.is_finite()) {
        return Err(Error::validation("payoff.table", "values must be finite"));
    }
    if s[0] <= 0.0 {
        return Err(Error::validation("payoff.table", "S must be > 0"));
    }
    if s.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::validation("payoff.table", "S must be strictly increasing"));
    }
    Ok(())
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let j = xs.partition_point(|&v| v <= x);
    let (x0, x1) = (xs[j - 1], xs[j]);
    let w = (x - x0) / (x1 - x0);
    ys[j - 1] + w * (ys[j] - ys[j - 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthReport {
    pub amplitude: f64,
    pub alpha: f64,
    pub worst_ratio: f64,
    pub worst_s: f64,
    pub pass: bool,
}

/// Cutoff scale for the smooth truncation and the lower floor level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationParams {
    pub epsilon: f64,
    pub floor_n: f64,
}

impl TruncationParams {
    pub fn new(epsilon: f64, floor_n: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::validation("truncation.epsilon", "must lie in (0, 1)"));
        }
        if !(floor_n > 0.0) {
            return Err(Error::validation("truncation.floorN", "must be > 0"));
        }
        Ok(Self { epsilon, floor_n })
    }

    pub fn xi_epsilon(&self, s: f64) -> f64 {
        xi_epsilon_raw(self.epsilon, s)
    }
}

/// Quintic smoothstep `6t^5 - 15t^4 + 10t^3`, C2 with zero first and second
/// derivatives at both ends.
fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

/// Base ramp: 0 on `[0, 1/2]`, 1 on `[1, inf)`.
pub fn xi(x: f64) -> f64 {
    smoothstep(2.0 * x - 1.0)
}

fn xi_epsilon_raw(eps: f64, s: f64) -> f64 {
    xi(s / eps) * (1.0 - xi(s * eps / 2.0))
}
