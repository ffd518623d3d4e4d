use std::fmt;
use std::path::PathBuf;

/// Failure of a CLI command, grouped by the exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// A config value that parses but violates its invariants.
    Config {
        field: String,
        message: String,
    },
    /// Malformed JSON in a config or a flag list.
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },
    /// A failing library call inside a stage.
    Stage {
        stage: &'static str,
        source: dphase::Error,
    },
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

pub type CliResult<T> = Result<T, CliError>;

pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

impl CliError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config { field: field.into(), message: message.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        use dphase::Error as E;
        match self {
            CliError::Config { .. } | CliError::Parse { .. } => EXIT_VALIDATION,
            CliError::Io { .. } => EXIT_IO,
            CliError::Stage { source, .. } => match source {
                E::Io(_) => EXIT_IO,
                E::Exponent(_)
                | E::Options(_)
                | E::Shape(_)
                | E::Scope(_)
                | E::Geometry(_)
                | E::Resolution(_)
                | E::Variant(_)
                | E::Index { .. }
                | E::Boundary(_)
                | E::Chart(_)
                | E::Json(_) => EXIT_VALIDATION,
                _ => EXIT_NUMERICAL,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config { field, message } => write!(f, "invalid config field `{field}`: {message}"),
            CliError::Parse { path, source } => {
                write!(f, "{}: line {}, column {}: {source}", path.display(), source.line(), source.column())
            }
            CliError::Stage { stage, source } => write!(f, "{stage} stage failed: {source}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

impl std::error::Error for CliError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            CliError::Config { .. } => None,
            CliError::Parse { source, .. } => Some(source),
            CliError::Stage { source, .. } => Some(source),
            CliError::Io { source, .. } => Some(source),
        }
    }
}

/// Attaches the stage name to library errors.
pub(crate) trait StageContext<T> {
    fn stage(self, stage: &'static str) -> CliResult<T>;
}

impl<T> StageContext<T> for dphase::Result<T> {
    fn stage(self, stage: &'static str) -> CliResult<T> {
        self.map_err(|source| CliError::Stage { stage, source })
    }
}
