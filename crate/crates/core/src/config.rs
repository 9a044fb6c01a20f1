//! Run configuration: a TOML document with `model`, `payoff`, `grid`,
//! `solver`, `weight`, `output` and `verify` tables. Unknown keys are
//! rejected and errors carry the dotted path of the offending field.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::WeightSpec;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::params::ModelParams;
use crate::payoff::{PayoffSpec, TruncationParams};
use crate::solver::{Scheme, ShiftPolicy, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelBlock,
    pub payoff: PayoffBlock,
    #[serde(default)]
    pub grid: GridBlock,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(default)]
    pub weight: WeightBlock,
    #[serde(default)]
    pub output: OutputBlock,
    #[serde(default)]
    pub verify: VerifyBlock,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub sigma: f64,
    pub mu: f64,
    pub nu01: f64,
    pub nu10: f64,
    pub gamma: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PayoffKindName {
    Call,
    Put,
    Constant,
    Tabulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct PayoffBlock {
    pub kind: PayoffKindName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strike: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    /// Two-column `S,h` CSV, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<TruncationBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct TruncationBlock {
    /// Smooth cutoff scale; the payoff is blended towards `cutoffLevel`
    /// outside `[eps, 2/eps]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub cutoff_level: f64,
    /// Floor `gamma h >= -N`.
    #[serde(default, rename = "N", skip_serializing_if = "Option::is_none")]
    pub floor_n: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase", default)]
pub struct GridBlock {
    pub x_min: f64,
    pub x_max: f64,
    pub n_space: usize,
    /// Defaults to `ceil(200 T)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_time: Option<usize>,
}

impl Default for GridBlock {
    fn default() -> Self {
        Self {
            x_min: -4.0,
            x_max: 4.0,
            n_space: 201,
            n_time: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftName {
    Adaptive,
    Bracket,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase", default)]
pub struct SolverBlock {
    pub scheme: Scheme,
    pub tol_iter: f64,
    pub max_iter: usize,
    pub shift: ShiftName,
    /// Fixed monotonising shift; overrides `shift`.
    #[serde(default, rename = "N", skip_serializing_if = "Option::is_none")]
    pub n: Option<f64>,
    #[serde(default, rename = "M", skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    pub u_cap: f64,
}

impl Default for SolverBlock {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            scheme: d.scheme,
            tol_iter: d.tol_iter,
            max_iter: d.max_iter,
            shift: ShiftName::Adaptive,
            n: None,
            m: None,
            u_cap: d.u_cap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightBlock {
    pub exponent: f64,
}

impl Default for WeightBlock {
    fn default() -> Self {
        Self { exponent: -4.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<PathBuf>,
    pub formats: Vec<Format>,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            directory: None,
            formats: vec![Format::Csv, Format::Json],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase", default)]
pub struct VerifyBlock {
    /// Random functions per coercivity audit.
    pub trials: usize,
    /// Perturbation of the comparison partner: strike shift for calls and
    /// puts, level shift for constant and tabulated payoffs.
    pub comparison_shift: f64,
    pub tol: f64,
    /// Blow-up time of the barrier function; defaults to `T + 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub barrier_t1: Option<f64>,
}

impl Default for VerifyBlock {
    fn default() -> Self {
        Self {
            trials: 100,
            comparison_shift: 0.0,
            tol: 2e-3,
            barrier_t1: None,
        }
    }
}

/// Everything a run needs, validated.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub params: ModelParams,
    pub payoff: PayoffSpec,
    pub grid: Grid,
    pub solver: SolverConfig,
    pub weight: WeightSpec,
}

fn prefixed(section: &str, e: Error) -> Error {
    match e {
        Error::Validation { field, reason } if !field.contains('.') => Error::Validation {
            field: format!("{section}.{field}"),
            reason,
        },
        other => other,
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::de::Deserializer::parse(text).map_err(|e| Error::validation("config", e.to_string()))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::validation(if path == "." { "config".into() } else { path }, e.inner().to_string())
        })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::validation("config", format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Builds the module-level types; relative table paths resolve against `base`.
    pub fn resolve(&self, base: &Path) -> Result<Resolved> {
        let m = &self.model;
        let params = ModelParams::new(m.sigma, m.mu, m.nu01, m.nu10, m.gamma, m.horizon).map_err(|e| prefixed("model", e))?;
        let payoff = self.resolve_payoff(base, &params)?;
        let g = &self.grid;
        let n_time = g.n_time.unwrap_or_else(|| (200.0 * m.horizon).ceil().max(1.0) as usize);
        let grid = Grid::new(g.x_min, g.x_max, g.n_space, m.horizon, n_time)?;
        let weight = WeightSpec::power(self.weight.exponent).map_err(|e| prefixed("weight", e))?;
        let s = &self.solver;
        let solver = SolverConfig {
            scheme: s.scheme,
            tol_iter: s.tol_iter,
            max_iter: s.max_iter,
            shift: match (s.n, s.shift) {
                (Some(n), _) => ShiftPolicy::Fixed(n),
                (None, ShiftName::Adaptive) => ShiftPolicy::Adaptive,
                (None, ShiftName::Bracket) => ShiftPolicy::Bracket,
            },
            bracket_m: s.m,
            u_cap: s.u_cap,
            weight: weight.clone(),
        };
        solver.validate(&params).map_err(|e| match e {
            Error::Validation { field, reason } => Error::Validation {
                field: field.replace("shiftN", "N").replace("bracketM", "M"),
                reason,
            },
            other => other,
        })?;
        if self.verify.trials == 0 {
            return Err(Error::validation("verify.trials", "must be >= 1"));
        }
        if !(self.verify.tol >= 0.0) {
            return Err(Error::validation("verify.tol", "must be >= 0"));
        }
        Ok(Resolved {
            params,
            payoff,
            grid,
            solver,
            weight,
        })
    }

    fn resolve_payoff(&self, base: &Path, params: &ModelParams) -> Result<PayoffSpec> {
        let b = &self.payoff;
        let need = |v: Option<f64>, name: &str| v.ok_or_else(|| Error::validation(format!("payoff.{name}"), "required for this kind"));
        let mut h = match b.kind {
            PayoffKindName::Call => PayoffSpec::call(need(b.strike, "strike")?)?,
            PayoffKindName::Put => PayoffSpec::put(need(b.strike, "strike")?)?,
            PayoffKindName::Constant => PayoffSpec::constant(need(b.level, "level")?)?,
            PayoffKindName::Tabulated => {
                let rel = b
                    .table
                    .as_ref()
                    .ok_or_else(|| Error::validation("payoff.table", "required for this kind"))?;
                let path = base.join(rel);
                let file = std::fs::File::open(&path)
                    .map_err(|e| Error::validation("payoff.table", format!("{}: {e}", path.display())))?;
                PayoffSpec::tabulated_from_csv(std::io::BufReader::new(file))?
            }
        };
        if let Some(t) = &b.truncation {
            if let Some(eps) = t.epsilon {
                let tp = TruncationParams::new(eps, t.floor_n.unwrap_or(1.0)).map_err(|e| prefixed("payoff", e))?;
                h = h.smooth_cutoff(&tp, t.cutoff_level)?;
            }
            if let Some(n) = t.floor_n {
                h = h.truncate_below(n, params.gamma()).map_err(|e| prefixed("payoff", e))?;
            }
        }
        Ok(h)
    }

    /// The payoff block with its kind-specific parameter moved by `shift`.
    pub fn shifted_payoff(&self, base: &Path, params: &ModelParams, shift: f64) -> Result<PayoffSpec> {
        let mut c = self.clone();
        match c.payoff.kind {
            PayoffKindName::Call | PayoffKindName::Put => c.payoff.strike = c.payoff.strike.map(|k| k + shift),
            PayoffKindName::Constant => c.payoff.level = c.payoff.level.map(|l| l + shift),
            PayoffKindName::Tabulated => {
                let h = c.resolve_payoff(base, params)?;
                if let crate::payoff::PayoffKind::Tabulated { s, h: v } = h.kind() {
                    return PayoffSpec::tabulated(s.clone(), v.iter().map(|x| x + shift).collect());
                }
            }
        }
        c.resolve_payoff(base, params)
    }

    /// Resolved config as pretty JSON, for output sidecars.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }
}
