use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Core(#[from] dnls_core::Error),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("cannot parse {path}: {source}")]
    Config {
        path: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{failed} acceptance criteria failed")]
    Acceptance { failed: usize },
}

impl CliError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// 2 for bad input, 3 for numerical failure, 1 for anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_input_error() => 2,
            CliError::Core(_) => 3,
            CliError::Input(_) | CliError::Config { .. } => 2,
            CliError::Acceptance { .. } => 3,
            CliError::Io { .. } => 1,
        }
    }

    /// Name printed in diagnostics; the core error variant where there is one.
    pub fn name(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.name(),
            CliError::Input(_) => "InvalidInput",
            CliError::Config { .. } => "MalformedConfig",
            CliError::Io { .. } => "Io",
            CliError::Acceptance { .. } => "AcceptanceFailed",
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let outside = CliError::from(dnls_core::Error::OutsideOmega {
            omega0: 1.0,
            omega1: 2.5,
        });
        assert_eq!(outside.exit_code(), 2);
        let drift = CliError::from(dnls_core::Error::DriftExceeded {
            t: 1.0,
            quantity: "E",
            drift: 1.0,
            tolerance: 1e-7,
        });
        assert_eq!(drift.exit_code(), 3);
        assert_eq!(drift.name(), "DriftExceeded");
        assert_eq!(CliError::Input("x".into()).exit_code(), 2);
    }
}
