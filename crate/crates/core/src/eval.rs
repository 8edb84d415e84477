//! Grouping accuracy and template counts.
//!
//! A message counts as correctly parsed when the set of messages sharing its
//! predicted template equals the set sharing its ground-truth group.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::error::{Error, Result};
use crate::ingest::GroundTruth;
use crate::model::Assignment;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    pub predicted_template_count: usize,
    pub truth_template_count: usize,
    /// truth group -> fraction of its messages parsed correctly
    pub per_truth_group_accuracy: BTreeMap<String, f64>,
}

/// Grouping accuracy of `assignment` against `truth`.
pub fn grouping_accuracy(assignment: &Assignment, truth: &GroundTruth) -> Result<EvalReport> {
    if assignment.len() != truth.labels.len() {
        return Err(Error::Eval(format!(
            "assignment covers {} records but truth has {}",
            assignment.len(),
            truth.labels.len()
        )));
    }
    let mut predicted = Vec::with_capacity(assignment.len());
    for (position, (&index, &id)) in assignment.entries.iter().enumerate() {
        if index != position {
            return Err(Error::Eval(format!(
                "record index {index} has no ground-truth label"
            )));
        }
        predicted.push(id);
    }
    let labels: Vec<&str> = truth.labels.iter().map(String::as_str).collect();
    Ok(partition_accuracy(&predicted, &labels))
}

/// Accuracy of two aligned labelings of the same messages.
pub fn partition_accuracy<P, T>(predicted: &[P], truth: &[T]) -> EvalReport
where
    P: Eq + std::hash::Hash + Copy,
    T: Eq + std::hash::Hash + Copy + fmt::Display,
{
    assert_eq!(predicted.len(), truth.len());
    let mut truth_sizes: HashMap<T, usize> = HashMap::new();
    for &t in truth {
        *truth_sizes.entry(t).or_default() += 1;
    }
    // predicted cluster -> (size, single truth label if the cluster is pure)
    let mut clusters: HashMap<P, (usize, Option<T>, bool)> = HashMap::new();
    for (&p, &t) in predicted.iter().zip(truth) {
        let entry = clusters.entry(p).or_insert((0, Some(t), true));
        entry.0 += 1;
        if entry.1 != Some(t) {
            entry.2 = false;
        }
    }
    let exact = |p: &P| -> bool {
        let (size, label, pure) = clusters[p];
        pure && label.map(|l| truth_sizes[&l] == size).unwrap_or(false)
    };

    let mut correct = 0usize;
    let mut per_group: HashMap<T, usize> = HashMap::new();
    for (p, &t) in predicted.iter().zip(truth) {
        if exact(p) {
            correct += 1;
            *per_group.entry(t).or_default() += 1;
        }
    }
    let per_truth_group_accuracy = truth_sizes
        .iter()
        .map(|(t, &n)| {
            let ok = per_group.get(t).copied().unwrap_or(0);
            (t.to_string(), ok as f64 / n as f64)
        })
        .collect();

    EvalReport {
        accuracy: if predicted.is_empty() {
            0.0
        } else {
            correct as f64 / predicted.len() as f64
        },
        predicted_template_count: clusters.len(),
        truth_template_count: truth_sizes.len(),
        per_truth_group_accuracy,
    }
}

/// `with / without`, or unbounded when `without` is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ratio {
    Finite(f64),
    Unbounded,
}

impl Ratio {
    fn of(with: f64, without: f64, decimals: i32) -> Self {
        if without == 0.0 {
            return Ratio::Unbounded;
        }
        let scale = 10f64.powi(decimals);
        Ratio::Finite((with / without * scale).round() / scale)
    }

    pub fn value(&self) -> Option<f64> {
        match *self {
            Ratio::Finite(v) => Some(v),
            Ratio::Unbounded => None,
        }
    }
}

impl fmt::Display for Ratio {
    /// `x1.5`, `x0.42`, `x1`, or `x∞`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Ratio::Finite(v) => {
                let s = format!("{v:.2}");
                let s = s.trim_end_matches('0').trim_end_matches('.');
                write!(f, "x{s}")
            }
            Ratio::Unbounded => f.write_str("x∞"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImprovementRatio {
    /// Rounded to one decimal.
    pub accuracy: Ratio,
    /// Rounded to two decimals.
    pub templates: Ratio,
}

/// Ratios of a with-preprocessing report over a without-preprocessing one.
pub fn improvement_ratio(with: &EvalReport, without: &EvalReport) -> ImprovementRatio {
    ImprovementRatio {
        accuracy: Ratio::of(with.accuracy, without.accuracy, 1),
        templates: Ratio::of(
            with.predicted_template_count as f64,
            without.predicted_template_count as f64,
            2,
        ),
    }
}

/// Identifies an evaluated run in CSV output.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLabel {
    pub dataset: String,
    pub parser: String,
    pub preprocessing: bool,
    /// e.g. `tau=0.5` or `depth=4;st=0.4`
    pub parameters: String,
}

pub const EVAL_CSV_HEADER: [&str; 7] = [
    "dataset",
    "parser",
    "preprocessing",
    "parameters",
    "accuracy",
    "predicted_templates",
    "truth_templates",
];

impl EvalReport {
    /// Row matching [`EVAL_CSV_HEADER`].
    pub fn csv_row(&self, label: &RunLabel) -> Vec<String> {
        vec![
            label.dataset.clone(),
            label.parser.clone(),
            on_off(label.preprocessing).to_owned(),
            label.parameters.clone(),
            format!("{:.4}", self.accuracy),
            self.predicted_template_count.to_string(),
            self.truth_template_count.to_string(),
        ]
    }
}

pub(crate) fn on_off(flag: bool) -> &'static str {
    if flag {
        "on"
    } else {
        "off"
    }
}
