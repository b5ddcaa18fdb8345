use std::fmt;

/// Failure classes with their process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Parse or validation problems, one line each (exit 2).
    Config(Vec<String>),
    /// The simulation did not produce a result (exit 3).
    Numeric(String),
    /// Reading the config or writing outputs failed (exit 4).
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    /// Classifies a library error raised while running `experiment`.
    pub fn from_core(experiment: &str, e: stirap_core::Error) -> Self {
        use stirap_core::Error as E;
        match e {
            E::Io(e) => CliError::Io(e.to_string()),
            E::Csv(e) => CliError::Io(e.to_string()),
            E::InvalidParameter(m) | E::ContractViolation(m) => CliError::Config(vec![format!("{experiment}: {m}")]),
            other => CliError::Numeric(format!("{experiment}: {other}")),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(lines) => {
                for (i, l) in lines.iter().enumerate() {
                    if i > 0 {
                        writeln!(f)?;
                    }
                    write!(f, "error: {l}")?;
                }
                Ok(())
            }
            CliError::Numeric(m) => write!(f, "error: numeric failure: {m}"),
            CliError::Io(m) => write!(f, "error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}
