//! Shared record types, JSONL dataset schemas, manifests and validation.

mod csv_import;
mod items;
mod jsonl;
mod lang;
mod manifest;

use std::path::Path;

pub use csv_import::{import_mmlu_csv, mmlu_domain};
pub use items::{CorpusDoc, DomainCategory, McqField, McqItem, McqLang, QaItem, OPTION_COUNT};
pub use jsonl::{
    read_jsonl, to_jsonl_string, validate_file, validate_mcq_dataset, write_jsonl, Record,
    ValidationReport,
};
pub use lang::{LanguageRegistry, LanguageSet, LanguageTag, DEFAULT_POOL, SEED_LANGUAGES};
pub use manifest::{creation_timestamp, sha256_hex, DatasetManifest, TOOL_NAME, TOOL_VERSION};

/// A single schema violation.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct SchemaError(String);

impl SchemaError {
    pub fn new(message: impl Into<String>) -> Self {
        Self(message.into())
    }

    pub fn message(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Schema {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Csv { path: String, message: String },
}

impl DataError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        DataError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
