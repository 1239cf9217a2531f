//! Error type shared by all modules.

use thiserror::Error;

/// Library-wide error enum. Variants carry enough context to identify the
/// failing module and the offending quantity.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config parse error at line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    #[error("invalid config field `{field}`: {message}")]
    InvalidConfig { field: &'static str, message: String },

    #[error("user placement failed after {attempts} attempts (over-dense configuration?)")]
    PlacementFailure { attempts: usize },

    #[error("degenerate link: transmitter and receiver coincide")]
    DegenerateLink,

    #[error("rank-deficient channel: Gram condition number {condition:.3e} exceeds cap {cap:.3e}")]
    RankDeficientChannel { condition: f64, cap: f64 },

    #[error("infeasible power split: donor budget {donor_power_w} W must exceed backhaul power {backhaul_power_w} W")]
    InfeasiblePower {
        donor_power_w: f64,
        backhaul_power_w: f64,
    },

    #[error("precoder column {column} has zero norm: cannot scale to power")]
    ZeroProduct { column: usize },

    #[error("degenerate rates: terrestrial sum-SE plus backhaul SE is not positive")]
    DegenerateRates,

    #[error("SCA subproblem has no feasible candidate at iteration {iteration}")]
    ScaInfeasible { iteration: usize },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
