use thiserror::Error;

use crate::model::Behavior;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("enumeration of {strategies} deterministic strategies exceeds the cap of {cap}")]
    Capacity { strategies: u128, cap: u128 },

    #[error("setting block (x={x}, y={y}) has zero total count")]
    DegenerateData { x: usize, y: usize },

    #[error("divergence is infinite: model assigns zero probability to an observed event at (x={x}, y={y}, a={a}, b={b})")]
    InfiniteDivergence { x: usize, y: usize, a: usize, b: usize },

    #[error("no-signaling projection did not converge after {iterations} iterations")]
    Convergence {
        iterations: usize,
        best: Box<Behavior>,
    },

    #[error("invalid measurement: {0}")]
    Measurement(String),

    #[error("unsupported scenario: {0}")]
    UnsupportedScenario(String),

    #[error("behavior does not violate the canonical bound at unit efficiency (value {value}, bound {bound})")]
    NoViolation { value: f64, bound: f64 },

    #[error("no efficiency in (0, 1] solves the threshold equation")]
    Infeasible,

    #[error("every restart hit the denominator floor; objective is degenerate")]
    DegenerateObjective,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
