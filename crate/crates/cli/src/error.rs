use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("io error: {0}")]
    Io(String),
}

impl CliError {
    /// 2 config, 3 numerical, 4 io.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<prkhs::Error> for CliError {
    fn from(e: prkhs::Error) -> Self {
        use prkhs::Error as E;
        match e {
            E::NotPositiveDefinite { .. } | E::DuplicatePoints { .. } | E::Overflow(_) => {
                CliError::Numerical(e.to_string())
            }
            E::Io(_) | E::Csv(_) | E::Json(_) => CliError::Io(e.to_string()),
            E::DimensionMismatch { .. }
            | E::Empty(_)
            | E::InvalidConfig(_)
            | E::ExplicitCapExceeded { .. }
            | E::Sampling(_) => CliError::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
