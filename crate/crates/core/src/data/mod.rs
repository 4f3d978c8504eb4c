//! Conjoint survey ingestion, item catalogs, context encoding with
//! partial-information masks, and persistence of datasets and models.

mod catalog;
mod conjoint;
mod features;
mod io;

pub use catalog::{ItemAttribute, ItemCatalog};
pub use conjoint::{
    load_conjoint_log, read_conjoint_log, write_conjoint_log, ConjointLog, ConjointRow,
    ConjointSchema, LoggedTask, LoggedUser,
};
pub use io::{
    load_model, load_preference_dataset, load_users, read_model, read_preference_dataset,
    save_model, save_preference_dataset, save_users, write_model, write_preference_dataset,
    UsersHeader, DATASET_FORMAT, FORMAT_VERSION,
};
pub use features::{
    Attribute, AttributeKind, ContextEncoder, ContextMask, FeatureValue, MaskKind, Role,
    UserFeatureSpec, UserFeatures, DEFAULT_PARTIAL_PERSONAL,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("{}", match .line { Some(l) => format!("data error at line {l}: {message}"), None => format!("data error: {message}") })]
    Data { line: Option<u64>, message: String },
    #[error("format error: {0}")]
    Format(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl DataError {
    pub fn data(message: impl Into<String>) -> Self {
        DataError::Data {
            line: None,
            message: message.into(),
        }
    }

    pub fn at_line(line: u64, message: impl Into<String>) -> Self {
        DataError::Data {
            line: Some(line),
            message: message.into(),
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        DataError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
