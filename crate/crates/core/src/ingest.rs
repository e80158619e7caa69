//! Loading raw log files and their ground-truth templates.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl IngestError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        IngestError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn format(path: &Path, message: impl Into<String>) -> Self {
        IngestError::Format {
            path: path.to_path_buf(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogFormat {
    /// One message per line.
    Plain,
    /// Comma separated with a header row that has a `Content` column.
    StructuredCsv,
}

impl FromStr for LogFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "plain" => Ok(LogFormat::Plain),
            "structured-csv" | "csv" => Ok(LogFormat::StructuredCsv),
            other => Err(format!("unknown log format `{other}`")),
        }
    }
}

/// Splits on runs of whitespace. No other delimiter is applied.
pub fn tokenize(content: &str) -> Vec<String> {
    content.split_whitespace().map(str::to_owned).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogRecord {
    pub line_id: usize,
    pub content: String,
    pub tokens: Vec<String>,
}

impl LogRecord {
    pub fn new(line_id: usize, content: &str) -> Self {
        let content = content.trim().to_owned();
        let tokens = tokenize(&content);
        LogRecord {
            line_id,
            content,
            tokens,
        }
    }

    pub fn token_count(&self) -> usize {
        self.tokens.len()
    }
}

/// Ordered set of records. `records[i].line_id == i` always holds.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LogSet {
    records: Vec<LogRecord>,
}

impl LogSet {
    /// Builds a set from raw lines, dropping blank ones.
    pub fn from_lines<I, S>(lines: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut records = Vec::new();
        for line in lines {
            let line = line.as_ref();
            if line.trim().is_empty() {
                continue;
            }
            records.push(LogRecord::new(records.len(), line));
        }
        LogSet { records }
    }

    pub fn records(&self) -> &[LogRecord] {
        &self.records
    }

    pub fn get(&self, line_id: usize) -> Option<&LogRecord> {
        self.records.get(line_id)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, LogRecord> {
        self.records.iter()
    }
}

impl std::ops::Index<usize> for LogSet {
    type Output = LogRecord;

    fn index(&self, line_id: usize) -> &LogRecord {
        &self.records[line_id]
    }
}

impl<'a> IntoIterator for &'a LogSet {
    type Item = &'a LogRecord;
    type IntoIter = std::slice::Iter<'a, LogRecord>;

    fn into_iter(self) -> Self::IntoIter {
        self.records.iter()
    }
}

pub fn load_logs(path: &Path, format: LogFormat) -> Result<LogSet, IngestError> {
    let file = File::open(path).map_err(|e| IngestError::io(path, e))?;
    match format {
        LogFormat::Plain => {
            let mut lines = Vec::new();
            for line in BufReader::new(file).lines() {
                lines.push(line.map_err(|e| IngestError::io(path, e))?);
            }
            Ok(LogSet::from_lines(lines))
        }
        LogFormat::StructuredCsv => {
            let contents = read_column(path, file, "Content")?;
            Ok(LogSet::from_lines(contents))
        }
    }
}

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader)
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim() == name)
}

fn read_column<R: Read>(path: &Path, reader: R, name: &str) -> Result<Vec<String>, IngestError> {
    let mut rdr = csv_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| IngestError::format(path, e.to_string()))?
        .clone();
    let idx = column_index(&headers, name)
        .ok_or_else(|| IngestError::format(path, format!("missing `{name}` column")))?;
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| IngestError::format(path, e.to_string()))?;
        out.push(row.get(idx).unwrap_or("").to_owned());
    }
    Ok(out)
}

/// Oracle templates keyed by line id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroundTruth {
    templates: BTreeMap<usize, String>,
}

impl GroundTruth {
    pub fn new(templates: BTreeMap<usize, String>) -> Self {
        GroundTruth { templates }
    }

    /// Line ids are assigned in order, `0..templates.len()`.
    pub fn from_ordered<I, S>(templates: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        GroundTruth {
            templates: templates
                .into_iter()
                .enumerate()
                .map(|(i, t)| (i, t.into()))
                .collect(),
        }
    }

    pub fn get(&self, line_id: usize) -> Option<&str> {
        self.templates.get(&line_id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &str)> {
        self.templates.iter().map(|(k, v)| (*k, v.as_str()))
    }

    /// Checks that the line ids are exactly those of `logs`.
    pub fn covers(&self, logs: &LogSet) -> bool {
        self.templates.len() == logs.len()
            && self
                .templates
                .keys()
                .zip(logs.iter())
                .all(|(id, rec)| *id == rec.line_id)
    }
}

/// Reads an `EventTemplate` column. When the file also carries a `Content`
/// column, rows with blank content are skipped the same way `load_logs`
/// skips them, so line ids stay aligned with the log file.
pub fn load_ground_truth(path: &Path) -> Result<GroundTruth, IngestError> {
    let file = File::open(path).map_err(|e| IngestError::io(path, e))?;
    let mut rdr = csv_reader(file);
    let headers = rdr
        .headers()
        .map_err(|e| IngestError::format(path, e.to_string()))?
        .clone();
    let tpl_idx = column_index(&headers, "EventTemplate")
        .ok_or_else(|| IngestError::format(path, "missing `EventTemplate` column"))?;
    let content_idx = column_index(&headers, "Content");

    let mut templates = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| IngestError::format(path, e.to_string()))?;
        if let Some(ci) = content_idx {
            if row.get(ci).unwrap_or("").trim().is_empty() {
                continue;
            }
        }
        templates.push(row.get(tpl_idx).unwrap_or("").trim().to_owned());
    }
    Ok(GroundTruth::from_ordered(templates))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn tokenize_examples() {
        assert_eq!(
            tokenize("session opened for user news"),
            vec!["session", "opened", "for", "user", "news"]
        );
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("a  b\tc"), vec!["a", "b", "c"]);
    }

    #[test]
    fn plain_file_skips_blank_lines() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, "a b\n\nc\n").unwrap();
        let logs = load_logs(f.path(), LogFormat::Plain).unwrap();
        assert_eq!(logs.len(), 2);
        assert_eq!(logs[0].content, "a b");
        assert_eq!(logs[1].content, "c");
        assert_eq!(logs[1].line_id, 1);
    }

    #[test]
    fn structured_csv_keeps_rows() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(
            f,
            "LineId,Content,EventTemplate\n1,x 1,x <*>\n2,\"y, z\",\"y, z\"\n3,x 2,x <*>\n"
        )
        .unwrap();
        let logs = load_logs(f.path(), LogFormat::StructuredCsv).unwrap();
        assert_eq!(logs.len(), 3);
        assert_eq!(logs[1].tokens, vec!["y,", "z"]);

        let truth = load_ground_truth(f.path()).unwrap();
        assert!(truth.covers(&logs));
        assert_eq!(truth.get(2), Some("x <*>"));
    }

    #[test]
    fn missing_content_column_is_format_error() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, "LineId,Message\n1,hello\n").unwrap();
        let err = load_logs(f.path(), LogFormat::StructuredCsv).unwrap_err();
        assert!(matches!(err, IngestError::Format { .. }), "{err}");
    }

    #[test]
    fn unreadable_file_is_io_error() {
        let err = load_logs(Path::new("/nonexistent/logs.txt"), LogFormat::Plain).unwrap_err();
        assert!(matches!(err, IngestError::Io { .. }));
    }

    #[test]
    fn truth_skips_blank_content_rows() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, "Content,EventTemplate\na 1,a <*>\n  ,\nb,b\n").unwrap();
        let truth = load_ground_truth(f.path()).unwrap();
        assert_eq!(truth.len(), 2);
        assert_eq!(truth.get(1), Some("b"));
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn retokenizing_joined_tokens_is_identity(s in "[ a-z\t0-9]{0,40}") {
                let tokens = tokenize(&s);
                prop_assert!(tokens.iter().all(|t| !t.is_empty()));
                prop_assert_eq!(tokenize(&tokens.join(" ")), tokens);
            }

            #[test]
            fn from_lines_is_deterministic(lines in proptest::collection::vec("[ a-c]{0,6}", 0..20)) {
                let a = LogSet::from_lines(&lines);
                let b = LogSet::from_lines(&lines);
                prop_assert_eq!(&a, &b);
                for (i, r) in a.iter().enumerate() {
                    prop_assert_eq!(r.line_id, i);
                }
            }
        }
    }
}
