use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("unknown config key(s): {}", .0.join(", "))]
    UnknownKeys(Vec<String>),

    #[error("config key `{key}` is required {reason}")]
    MissingKey { key: String, reason: String },

    #[error("config key `{key}`: {message}")]
    BadValue { key: String, message: String },

    #[error("{path}: {message}")]
    ConfigSyntax { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] isac_core::Error),

    #[error("self-test failed: {0}")]
    SelfTest(String),

    #[error("thread pool: {0}")]
    Threads(String),
}

impl CliError {
    pub fn category(&self) -> &'static str {
        match self {
            Self::UnknownKeys(_) | Self::MissingKey { .. } | Self::BadValue { .. } | Self::ConfigSyntax { .. } => {
                "config"
            }
            Self::Io { .. } => "io",
            Self::Core(isac_core::Error::Io(_) | isac_core::Error::Csv(_)) => "io",
            Self::Core(isac_core::Error::Format(_)) => "format",
            Self::Core(_) => "processing",
            Self::SelfTest(_) => "selftest",
            Self::Threads(_) => "runtime",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "config" => 2,
            "io" | "format" => 3,
            "processing" => 4,
            "selftest" => 5,
            _ => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub fn bad(key: &str, message: impl Into<String>) -> Self {
        Self::BadValue {
            key: key.to_string(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
