use std::path::PathBuf;

/// Exit status for a successful run.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] hts_sr_core::Error),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed data file contents.
    #[error("{}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },

    /// Configuration problem; `field` is a dotted path into the config.
    #[error("config field `{field}`: {msg}")]
    Config { field: String, msg: String },

    #[error("{method} (seed {seed}): {source}")]
    Trial {
        method: String,
        seed: u64,
        #[source]
        source: hts_sr_core::Error,
    },

    #[error("{method}: {source}")]
    Method {
        method: String,
        #[source]
        source: hts_sr_core::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }

    pub(crate) fn config(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            msg: msg.into(),
        }
    }

    fn core_source(&self) -> Option<&hts_sr_core::Error> {
        match self {
            Error::Core(e) | Error::Trial { source: e, .. } | Error::Method { source: e, .. } => Some(e),
            _ => None,
        }
    }

    /// Process exit code: 2 for bad configuration or input data, 3 for a
    /// diverged training run, 4 for I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => EXIT_IO,
            _ if matches!(self.core_source(), Some(hts_sr_core::Error::Divergence { .. })) => EXIT_DIVERGENCE,
            _ => EXIT_CONFIG,
        }
    }
}
