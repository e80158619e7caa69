//! Grouping accuracy (GA), parsing accuracy (PA), and the template-level F1
//! scores FGA and FTA.
//!
//! A predicted group is the set of line ids sharing a template id; an oracle
//! group is the set sharing a (normalized) oracle template string. Template
//! strings are compared after whitespace and adjacent-placeholder
//! normalization on both sides.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::ingest::GroundTruth;
use crate::parser::ParseAssignment;
use crate::scalar::Score;
use crate::template::normalize_template_text;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("prediction covers {predicted} lines but ground truth has {truth}")]
    LengthMismatch { predicted: usize, truth: usize },
    #[error("line {0} is in the prediction but not in the ground truth")]
    UnknownLine(usize),
}

/// Per oracle template: size and whether it was recovered.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TemplateRow {
    pub oracle_template: String,
    pub log_count: usize,
    /// Predicted templates its logs were spread over.
    pub predicted_ids: Vec<usize>,
    pub grouping_correct: bool,
    pub template_correct: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport<S> {
    pub ga: S,
    pub pa: S,
    pub fga: S,
    pub fta: S,
    pub predicted_template_count: usize,
    pub oracle_template_count: usize,
    pub rows: Vec<TemplateRow>,
}

/// Group structure shared by all four metrics.
struct Groups {
    /// template id -> (line ids, normalized predicted text)
    predicted: BTreeMap<usize, (BTreeSet<usize>, String)>,
    /// normalized oracle text -> line ids
    oracle: BTreeMap<String, BTreeSet<usize>>,
    oracle_of_line: BTreeMap<usize, String>,
    pred_text_of_line: BTreeMap<usize, String>,
}

impl Groups {
    fn build(pred: &ParseAssignment, truth: &GroundTruth) -> Result<Self, MetricsError> {
        if pred.len() != truth.len() {
            return Err(MetricsError::LengthMismatch {
                predicted: pred.len(),
                truth: truth.len(),
            });
        }
        let mut g = Groups {
            predicted: BTreeMap::new(),
            oracle: BTreeMap::new(),
            oracle_of_line: BTreeMap::new(),
            pred_text_of_line: BTreeMap::new(),
        };
        for (line_id, a) in pred.iter() {
            let oracle = truth
                .get(line_id)
                .map(normalize_template_text)
                .ok_or(MetricsError::UnknownLine(line_id))?;
            let text = normalize_template_text(&a.template.text());
            g.predicted
                .entry(a.template_id)
                .or_insert_with(|| (BTreeSet::new(), text.clone()))
                .0
                .insert(line_id);
            g.oracle.entry(oracle.clone()).or_default().insert(line_id);
            g.oracle_of_line.insert(line_id, oracle);
            g.pred_text_of_line.insert(line_id, text);
        }
        Ok(g)
    }

    /// The oracle group equal to this predicted group, if any.
    fn matching_oracle(&self, members: &BTreeSet<usize>) -> Option<&str> {
        let first = members.iter().next()?;
        let key = &self.oracle_of_line[first];
        (self.oracle[key] == *members).then_some(key.as_str())
    }
}

fn harmonic<S: Score>(correct: usize, predicted: usize, oracle: usize) -> S {
    if predicted == 0 && oracle == 0 {
        return S::one();
    }
    if correct == 0 || predicted == 0 || oracle == 0 {
        return S::zero();
    }
    let p = S::from_ratio(correct as u64, predicted as u64);
    let r = S::from_ratio(correct as u64, oracle as u64);
    let two = S::one() + S::one();
    two * p * r / (p + r)
}

fn ratio_or_one<S: Score>(num: usize, den: usize) -> S {
    if den == 0 {
        S::one()
    } else {
        S::from_ratio(num as u64, den as u64)
    }
}

pub fn grouping_accuracy<S: Score>(pred: &ParseAssignment, truth: &GroundTruth) -> Result<S, MetricsError> {
    let g = Groups::build(pred, truth)?;
    let correct: usize = g
        .predicted
        .values()
        .filter(|(m, _)| g.matching_oracle(m).is_some())
        .map(|(m, _)| m.len())
        .sum();
    Ok(ratio_or_one(correct, pred.len()))
}

pub fn parsing_accuracy<S: Score>(pred: &ParseAssignment, truth: &GroundTruth) -> Result<S, MetricsError> {
    let g = Groups::build(pred, truth)?;
    let correct = g
        .pred_text_of_line
        .iter()
        .filter(|(id, text)| g.oracle_of_line[*id] == **text)
        .count();
    Ok(ratio_or_one(correct, pred.len()))
}

pub fn fga<S: Score>(pred: &ParseAssignment, truth: &GroundTruth) -> Result<S, MetricsError> {
    let g = Groups::build(pred, truth)?;
    let correct = g
        .predicted
        .values()
        .filter(|(m, _)| g.matching_oracle(m).is_some())
        .count();
    Ok(harmonic(correct, g.predicted.len(), g.oracle.len()))
}

pub fn fta<S: Score>(pred: &ParseAssignment, truth: &GroundTruth) -> Result<S, MetricsError> {
    let g = Groups::build(pred, truth)?;
    let correct = g
        .predicted
        .values()
        .filter(|(m, text)| g.matching_oracle(m) == Some(text.as_str()))
        .count();
    Ok(harmonic(correct, g.predicted.len(), g.oracle.len()))
}

/// All four metrics plus the per-oracle-template breakdown.
pub fn evaluate<S: Score>(pred: &ParseAssignment, truth: &GroundTruth) -> Result<EvaluationReport<S>, MetricsError> {
    let g = Groups::build(pred, truth)?;

    let mut ga_correct = 0;
    let mut fga_correct = 0;
    let mut fta_correct = 0;
    for (members, text) in g.predicted.values() {
        if let Some(oracle) = g.matching_oracle(members) {
            ga_correct += members.len();
            fga_correct += 1;
            if oracle == text {
                fta_correct += 1;
            }
        }
    }
    let pa_correct = g
        .pred_text_of_line
        .iter()
        .filter(|(id, text)| g.oracle_of_line[*id] == **text)
        .count();

    let mut pred_of_line = BTreeMap::new();
    for (id, (members, _)) in &g.predicted {
        for m in members {
            pred_of_line.insert(*m, *id);
        }
    }
    let rows = g
        .oracle
        .iter()
        .map(|(oracle, members)| {
            let predicted_ids: BTreeSet<usize> = members.iter().map(|m| pred_of_line[m]).collect();
            let grouping_correct =
                predicted_ids.len() == 1 && g.predicted[predicted_ids.first().unwrap()].0 == *members;
            let template_correct = grouping_correct
                && g.predicted[predicted_ids.first().unwrap()].1 == *oracle;
            TemplateRow {
                oracle_template: oracle.clone(),
                log_count: members.len(),
                predicted_ids: predicted_ids.into_iter().collect(),
                grouping_correct,
                template_correct,
            }
        })
        .collect();

    Ok(EvaluationReport {
        ga: ratio_or_one(ga_correct, pred.len()),
        pa: ratio_or_one(pa_correct, pred.len()),
        fga: harmonic(fga_correct, g.predicted.len(), g.oracle.len()),
        fta: harmonic(fta_correct, g.predicted.len(), g.oracle.len()),
        predicted_template_count: g.predicted.len(),
        oracle_template_count: g.oracle.len(),
        rows,
    })
}

#[derive(Serialize)]
struct JsonReport<'a> {
    ga: f64,
    pa: f64,
    fga: f64,
    fta: f64,
    predicted_template_count: usize,
    oracle_template_count: usize,
    templates: &'a [TemplateRow],
}

impl<S: Score> EvaluationReport<S> {
    /// `key: value` per line.
    pub fn to_text(&self) -> String {
        format!(
            "GA: {:.6}\nPA: {:.6}\nFGA: {:.6}\nFTA: {:.6}\npredicted_templates: {}\noracle_templates: {}\n",
            self.ga.to_f64(),
            self.pa.to_f64(),
            self.fga.to_f64(),
            self.fta.to_f64(),
            self.predicted_template_count,
            self.oracle_template_count
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&JsonReport {
            ga: self.ga.to_f64(),
            pa: self.pa.to_f64(),
            fga: self.fga.to_f64(),
            fta: self.fta.to_f64(),
            predicted_template_count: self.predicted_template_count,
            oracle_template_count: self.oracle_template_count,
            templates: &self.rows,
        })
        .expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::template::Template;
    use num_rational::Rational64;
    use std::sync::Arc;

    fn pred(rows: &[(usize, &str)]) -> ParseAssignment {
        let mut a = ParseAssignment::default();
        for (line, (id, text)) in rows.iter().enumerate() {
            a.assign(line, *id, Arc::new(Template::parse(text)));
        }
        a
    }

    fn truth(rows: &[&str]) -> GroundTruth {
        GroundTruth::from_ordered(rows.iter().copied())
    }

    #[test]
    fn perfect_prediction() {
        let t = truth(&["A <*>", "A <*>", "B"]);
        let p = pred(&[(0, "A <*>"), (0, "A <*>"), (1, "B")]);
        let r = evaluate::<f64>(&p, &t).unwrap();
        assert_eq!((r.ga, r.pa, r.fga, r.fta), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn merging_everything_breaks_every_group() {
        let t = truth(&["A", "A", "B"]);
        let p = pred(&[(0, "X"), (0, "X"), (0, "X")]);
        assert_eq!(grouping_accuracy::<f64>(&p, &t).unwrap(), 0.0);
    }

    #[test]
    fn template_names_do_not_matter_for_grouping() {
        let t = truth(&["A", "A", "B"]);
        let p = pred(&[(7, "X"), (7, "X"), (3, "Y")]);
        assert_eq!(grouping_accuracy::<f64>(&p, &t).unwrap(), 1.0);
        assert_eq!(fga::<f64>(&p, &t).unwrap(), 1.0);
        assert_eq!(fta::<f64>(&p, &t).unwrap(), 0.0);
    }

    #[test]
    fn one_wrong_placeholder() {
        let t = truth(&["a <*> c", "a <*> c", "d e <*>"]);
        let p = pred(&[(0, "a <*> c"), (0, "a <*> c"), (1, "d <*> <*>")]);
        assert_eq!(parsing_accuracy::<Rational64>(&p, &t).unwrap(), Rational64::new(2, 3));
    }

    #[test]
    fn empty_inputs_are_vacuously_perfect() {
        let r = evaluate::<f64>(&ParseAssignment::default(), &GroundTruth::default()).unwrap();
        assert_eq!((r.ga, r.pa, r.fga, r.fta), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn fga_harmonic_mean() {
        // oracle {A: 0,1} {B: 2,3}; predicted {0,1} correct, {2} and {3} split
        let t = truth(&["A", "A", "B", "B"]);
        let p = pred(&[(0, "A"), (0, "A"), (1, "B"), (2, "B")]);
        assert_eq!(fga::<Rational64>(&p, &t).unwrap(), Rational64::new(2, 5));
        assert!((fga::<f64>(&p, &t).unwrap() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn fta_one_wrong_string() {
        let t = truth(&["A <*>", "A <*>", "B"]);
        let p = pred(&[(0, "A <*>"), (0, "A <*>"), (1, "B <*>")]);
        assert_eq!(fta::<f64>(&p, &t).unwrap(), 0.5);
        assert_eq!(fga::<f64>(&p, &t).unwrap(), 1.0);
    }

    #[test]
    fn no_correct_templates() {
        let t = truth(&["A", "A", "B"]);
        let p = pred(&[(0, "A"), (1, "A"), (1, "A")]);
        assert_eq!(fga::<f64>(&p, &t).unwrap(), 0.0);
        assert_eq!(fta::<f64>(&p, &t).unwrap(), 0.0);
    }

    #[test]
    fn right_strings_wrong_groups() {
        let t = truth(&["A", "A", "B"]);
        let p = pred(&[(0, "A"), (1, "A"), (1, "A")]);
        assert_eq!(fta::<f64>(&p, &t).unwrap(), 0.0);
    }

    #[test]
    fn normalizes_spacing_and_adjacent_placeholders() {
        let t = truth(&["port  <*><*>  open"]);
        let p = pred(&[(0, "port <*> open")]);
        assert_eq!(parsing_accuracy::<f64>(&p, &t).unwrap(), 1.0);
    }

    #[test]
    fn coverage_mismatch_is_an_error() {
        let t = truth(&["A", "A"]);
        let p = pred(&[(0, "A")]);
        assert_eq!(
            evaluate::<f64>(&p, &t).unwrap_err(),
            MetricsError::LengthMismatch { predicted: 1, truth: 2 }
        );
    }

    #[test]
    fn breakdown_rows() {
        let t = truth(&["A", "A", "B"]);
        let p = pred(&[(0, "A"), (0, "A"), (1, "C")]);
        let r = evaluate::<f64>(&p, &t).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert!(r.rows[0].grouping_correct && r.rows[0].template_correct);
        assert!(r.rows[1].grouping_correct && !r.rows[1].template_correct);
        assert!(r.to_text().contains("FTA: 0.500000"));
        assert!(r.to_json().contains("\"fta\": 0.5"));
    }
}
