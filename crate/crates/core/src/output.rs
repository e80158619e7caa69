//! CSV outputs: per-line assignments, the template table, and the metric
//! breakdown.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use crate::metrics::TemplateRow;
use crate::parser::{ParseAssignment, TemplateStore};
use crate::template::Template;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> OutputError + '_ {
    move |source| OutputError::Csv {
        path: path.display().to_string(),
        source,
    }
}

/// `line_id,template_id,template`, one row per line.
pub fn write_assignment(path: &Path, assign: &ParseAssignment) -> Result<(), OutputError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["line_id", "template_id", "template"])
        .map_err(csv_err(path))?;
    for (line_id, a) in assign.iter() {
        w.write_record([
            line_id.to_string(),
            a.template_id.to_string(),
            a.template.text(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| csv_err(path)(e.into()))?;
    Ok(())
}

pub fn read_assignment(path: &Path) -> Result<ParseAssignment, OutputError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let headers = r.headers().map_err(csv_err(path))?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| OutputError::Format {
            path: path.display().to_string(),
            message: format!("missing `{name}` column"),
        })
    };
    let (line_col, id_col, text_col) = (col("line_id")?, col("template_id")?, col("template")?);

    let mut shared: HashMap<usize, Arc<Template>> = HashMap::new();
    let mut out = ParseAssignment::default();
    for row in r.records() {
        let row = row.map_err(csv_err(path))?;
        let parse = |i: usize| {
            row.get(i)
                .and_then(|v| v.trim().parse::<usize>().ok())
                .ok_or_else(|| OutputError::Format {
                    path: path.display().to_string(),
                    message: format!("bad integer in row {:?}", row.position().map(|p| p.line())),
                })
        };
        let line_id = parse(line_col)?;
        let template_id = parse(id_col)?;
        if out.get(line_id).is_some() {
            return Err(OutputError::Format {
                path: path.display().to_string(),
                message: format!("line {line_id} listed twice"),
            });
        }
        let text = row.get(text_col).unwrap_or("");
        let t = shared
            .entry(template_id)
            .or_insert_with(|| Arc::new(Template::parse(text)))
            .clone();
        out.assign(line_id, template_id, t);
    }
    Ok(out)
}

/// `template_id,template,count`.
pub fn write_templates(path: &Path, store: &TemplateStore) -> Result<(), OutputError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["template_id", "template", "count"])
        .map_err(csv_err(path))?;
    for t in store.iter() {
        w.write_record([t.id.to_string(), t.template.text(), t.matched.to_string()])
            .map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| csv_err(path)(e.into()))?;
    Ok(())
}

pub fn write_breakdown(path: &Path, rows: &[TemplateRow]) -> Result<(), OutputError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record([
        "oracle_template",
        "log_count",
        "predicted_ids",
        "grouping_correct",
        "template_correct",
    ])
    .map_err(csv_err(path))?;
    for r in rows {
        let ids: Vec<String> = r.predicted_ids.iter().map(ToString::to_string).collect();
        w.write_record([
            r.oracle_template.clone(),
            r.log_count.to_string(),
            ids.join(" "),
            r.grouping_correct.to_string(),
            r.template_correct.to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| csv_err(path)(e.into()))?;
    Ok(())
}
