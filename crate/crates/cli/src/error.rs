use thiserror::Error;

/// Exit status for bad input: schema, shape, domain or I/O problems.
pub const EXIT_VALIDATION: i32 = 2;
/// Exit status for numerical failures on otherwise valid input.
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }
}

impl From<bellgap::Error> for CliError {
    fn from(e: bellgap::Error) -> Self {
        use bellgap::Error as E;
        let msg = e.to_string();
        match e {
            E::Shape(_)
            | E::Domain(_)
            | E::Capacity { .. }
            | E::DegenerateData { .. }
            | E::Measurement(_)
            | E::UnsupportedScenario(_) => CliError::Validation(msg),
            E::InfiniteDivergence { .. }
            | E::Convergence { .. }
            | E::NoViolation { .. }
            | E::Infeasible
            | E::DegenerateObjective => CliError::Numerical(msg),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
