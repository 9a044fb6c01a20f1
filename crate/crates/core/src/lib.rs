//! Finite-difference engine for the integro-differential equation behind
//! buyer's indifference prices of European claims in a market subject to
//! liquidity shocks.
//!
//! The unknown `u(S, tau)` is solved in log-price `x = ln S` and
//! time-to-maturity `tau`; [`prices`] turns a solved surface into prices.

pub mod analysis;
pub mod config;
pub mod error;
pub mod grid;
pub mod memory;
pub mod oracle;
pub mod params;
pub mod payoff;
pub mod prices;
pub mod solver;
pub mod tridiag;

pub use error::{Error, Result};
pub use grid::{BarrierParams, Grid, Surface};
pub use params::{FactorValues, MertonFactors, ModelParams};
pub use payoff::{PayoffKind, PayoffSpec, TruncationParams};
pub use prices::{indifference_prices, PriceSurfaces};
pub use solver::{solve, Scheme, ShiftPolicy, SolveReport, SolverConfig};
