//! Error type shared by every module of the crate.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed inventory {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    /// A model invariant does not hold. `id` names the offending element.
    #[error("validation error: {message} ({id})")]
    Validation { message: String, id: String },

    #[error("invalid parameters: {}", .0.join("; "))]
    InvalidParams(Vec<String>),

    #[error("unknown scope '{0}'")]
    UnknownScope(String),

    #[error("unknown component '{0}'")]
    UnknownComponent(String),

    #[error("centrality requested on an empty graph")]
    EmptyGraph,

    #[error("asset '{0}' has no components")]
    NoComponents(String),

    #[error("no critical assets: every criticality score is at or below the threshold {0}")]
    NoCriticalAssets(f64),

    #[error("network risk requested but the model declares no entry points")]
    NoEntryPoints,

    #[error("unknown patch target {asset}:{cve}")]
    UnknownPatch { asset: String, cve: String },

    #[error("missing field '{0}'")]
    MissingField(&'static str),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("request to {url} failed: {message}")]
    Network { url: String, message: String },

    #[error("no recorded response for {url} (expected {path})")]
    MissingFixture { url: String, path: PathBuf },

    #[error("unparseable response from {source_name}: {message}")]
    UnparseableResponse { source_name: String, message: String },

    #[error("malformed flags file: {0}")]
    FlagsFormat(String),
}

impl Error {
    pub(crate) fn validation(message: impl Into<String>, id: impl Into<String>) -> Self {
        Error::Validation {
            message: message.into(),
            id: id.into(),
        }
    }

    /// True for failures of the environment (files, network, configuration)
    /// rather than of the analysed model.
    pub fn is_environmental(&self) -> bool {
        matches!(
            self,
            Error::Io { .. } | Error::Config(_) | Error::Network { .. } | Error::MissingFixture { .. }
        )
    }

    /// Transient failures that a caller may retry.
    pub fn is_retryable(&self) -> bool {
        matches!(self, Error::Network { .. })
    }
}
