use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{}{source}", path_prefix(.path))]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Numeric(_) => 4,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Attach `path` to a library error raised while reading or writing it.
    pub fn at(path: impl Into<PathBuf>, e: weighted_gibbs::Error) -> Self {
        match e {
            weighted_gibbs::Error::Io(source) => CliError::io(path, source),
            weighted_gibbs::Error::Parse(msg) => CliError::io(
                path,
                std::io::Error::new(std::io::ErrorKind::InvalidData, msg),
            ),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<weighted_gibbs::Error> for CliError {
    fn from(e: weighted_gibbs::Error) -> Self {
        CliError::at(PathBuf::new(), e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        match e.into_kind() {
            csv::ErrorKind::Io(source) => CliError::io(PathBuf::new(), source),
            other => CliError::Numeric(format!("csv: {other:?}")),
        }
    }
}

fn path_prefix(path: &std::path::Path) -> String {
    if path.as_os_str().is_empty() {
        String::new()
    } else {
        format!("{}: ", path.display())
    }
}

pub type CliResult<T> = Result<T, CliError>;
