use thiserror::Error;

/// Every failure the CLI reports, tagged with the category printed in
/// `error: <category>: <detail>`.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("config: {0}")]
    Config(String),

    #[error("expression: {0}")]
    Expression(String),

    #[error("data: {0}")]
    Data(String),

    #[error("io: {0}")]
    Io(String),

    #[error("numeric: {0}")]
    Numeric(String),
}

impl CliError {
    /// 2 for numerical failures of a well-formed problem, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numeric(_) => 2,
            _ => 1,
        }
    }
}

impl From<relkit_core::Error> for CliError {
    fn from(e: relkit_core::Error) -> Self {
        use relkit_core::Error as E;
        match &e {
            E::Parse(p) => CliError::Expression(p.to_string()),
            E::ZeroGradient { .. } => CliError::Numeric(e.to_string()),
            _ if e.is_numerical() => CliError::Numeric(e.to_string()),
            _ => CliError::Config(e.to_string()),
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
