//! JSONL reading, writing and per-line validation.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::items::{CorpusDoc, McqItem, QaItem};
use super::DataError;

/// Outcome of validating a dataset file line by line.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// Number of lines that parsed into valid records.
    pub count: usize,
    /// `(1-based line number, message)` for every rejected line.
    pub errors: Vec<(usize, String)>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.errors.is_empty()
    }
}

/// Record types with a string id, used for duplicate detection.
pub trait Record: DeserializeOwned + Serialize {
    fn record_id(&self) -> &str;
    /// Whether ids must be unique within one file.
    const UNIQUE_IDS: bool = false;
}

impl Record for McqItem {
    fn record_id(&self) -> &str {
        &self.id
    }
}

impl Record for QaItem {
    fn record_id(&self) -> &str {
        &self.id
    }
}

impl Record for CorpusDoc {
    fn record_id(&self) -> &str {
        &self.id
    }
    const UNIQUE_IDS: bool = true;
}

fn open(path: &Path) -> Result<BufReader<File>, DataError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })
}

/// Parses one JSONL line: malformed JSON and schema problems get distinct
/// messages.
fn parse_line<T: DeserializeOwned>(line: &str) -> Result<T, String> {
    let value: serde_json::Value =
        serde_json::from_str(line).map_err(|e| format!("malformed JSON: {e}"))?;
    serde_json::from_value(value).map_err(|e| e.to_string())
}

/// Iterates non-blank lines as `(line_no, text)`.
fn lines(path: &Path) -> Result<Vec<(usize, String)>, DataError> {
    let reader = open(path)?;
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push((i + 1, line));
    }
    Ok(out)
}

/// Validates every line without stopping at the first problem.
pub fn validate_file<T: Record>(path: &Path) -> Result<ValidationReport, DataError> {
    let mut report = ValidationReport::default();
    let mut seen = HashSet::new();
    for (line_no, line) in lines(path)? {
        match parse_line::<T>(&line) {
            Ok(rec) => {
                if T::UNIQUE_IDS && !seen.insert(rec.record_id().to_string()) {
                    report
                        .errors
                        .push((line_no, format!("duplicate id {:?}", rec.record_id())));
                } else {
                    report.count += 1;
                }
            }
            Err(msg) => report.errors.push((line_no, msg)),
        }
    }
    Ok(report)
}

pub fn validate_mcq_dataset(path: &Path) -> Result<ValidationReport, DataError> {
    validate_file::<McqItem>(path)
}

/// Reads a whole file, failing on the first invalid line.
pub fn read_jsonl<T: Record>(path: &Path) -> Result<Vec<T>, DataError> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (line_no, line) in lines(path)? {
        let rec: T = parse_line(&line).map_err(|message| DataError::Schema {
            path: path.display().to_string(),
            line: line_no,
            message,
        })?;
        if T::UNIQUE_IDS && !seen.insert(rec.record_id().to_string()) {
            return Err(DataError::Schema {
                path: path.display().to_string(),
                line: line_no,
                message: format!("duplicate id {:?}", rec.record_id()),
            });
        }
        out.push(rec);
    }
    Ok(out)
}

/// Serializes records one per line (LF terminated).
pub fn to_jsonl_string<T: Serialize>(records: &[T]) -> String {
    let mut out = String::new();
    for rec in records {
        out.push_str(&serde_json::to_string(rec).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), DataError> {
    let io_err = |source| DataError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    for rec in records {
        serde_json::to_writer(&mut w, rec).expect("records serialize");
        w.write_all(b"\n").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item_line(id: &str, options: &[&str]) -> String {
        let opts: Vec<String> = options.iter().map(|o| format!("{o:?}")).collect();
        let tags = vec!["\"en\""; options.len()].join(",");
        format!(
            r#"{{"id":"{id}","subject":"s","domain_category":"Others","question":"q?","options":[{}],"answer":0,"lang":{{"question":"en","options":[{tags}]}}}}"#,
            opts.join(",")
        )
    }

    #[test]
    fn empty_file_is_vacuously_valid() {
        let f = tempfile::NamedTempFile::new().unwrap();
        let rep = validate_mcq_dataset(f.path()).unwrap();
        assert_eq!(rep, ValidationReport::default());
    }

    #[test]
    fn three_option_line_is_reported_exactly() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "{}", item_line("a", &["1", "2", "3", "4"])).unwrap();
        writeln!(f, "{}", item_line("b", &["1", "2", "3"])).unwrap();
        writeln!(f, "{}", item_line("c", &["1", "2", "3", "4"])).unwrap();
        let rep = validate_mcq_dataset(f.path()).unwrap();
        assert_eq!(rep.count, 2);
        assert_eq!(rep.errors, vec![(2, "expected 4 options".to_string())]);
    }

    #[test]
    fn malformed_json_is_per_line() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "{{not json").unwrap();
        writeln!(f, "{}", item_line("a", &["1", "2", "3", "4"])).unwrap();
        let rep = validate_mcq_dataset(f.path()).unwrap();
        assert_eq!(rep.count, 1);
        assert_eq!(rep.errors.len(), 1);
        assert_eq!(rep.errors[0].0, 1);
        assert!(rep.errors[0].1.starts_with("malformed JSON"));
    }

    #[test]
    fn duplicate_corpus_ids_rejected() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, r#"{{"id":"d","text":"x"}}"#).unwrap();
        writeln!(f, r#"{{"id":"d","text":"y"}}"#).unwrap();
        let rep = validate_file::<CorpusDoc>(f.path()).unwrap();
        assert_eq!(rep.count, 1);
        assert_eq!(rep.errors[0].0, 2);
        assert!(read_jsonl::<CorpusDoc>(f.path()).is_err());
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = validate_mcq_dataset(Path::new("/nonexistent/x.jsonl")).unwrap_err();
        assert!(matches!(err, DataError::Io { .. }));
    }
}
