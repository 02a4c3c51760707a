use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),

    /// An upstream artifact is missing or was modified after it was written.
    #[error("{detail}; run `gravnet {command}` first")]
    Dependency { command: &'static str, detail: String },

    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: gravnet::Error,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn core(context: impl Into<String>) -> impl FnOnce(gravnet::Error) -> CliError {
        let context = context.into();
        move |source| CliError::Core { context, source }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    /// 2 validation, 3 convergence, 4 dependency, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        use gravnet::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Dependency { .. } => 4,
            CliError::Io { .. } => 1,
            CliError::Core { source, .. } => match source {
                E::Schema(_)
                | E::Validation { .. }
                | E::NotFound(_)
                | E::Precondition(_)
                | E::SingularDesign { .. }
                | E::InsufficientData(_)
                | E::Unsupported(_)
                | E::Alignment { .. }
                | E::Csv(_)
                | E::Json(_) => 2,
                E::Convergence { .. } | E::Separation { .. } | E::PredictionOverflow { .. } | E::Undefined(_) => 3,
                E::Io(_) => 1,
            },
        }
    }
}
