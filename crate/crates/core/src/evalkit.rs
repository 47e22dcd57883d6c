//! WER and sequence-accuracy scoring, and the per-test-set report table.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("reference is empty")]
    EmptyReference,
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("no hypothesis for reference id `{0}`")]
    MissingHypothesis(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct WerBreakdown {
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
    pub reference_words: usize,
    /// percent
    pub wer: f64,
}

impl WerBreakdown {
    fn from_counts(
        substitutions: usize,
        insertions: usize,
        deletions: usize,
        reference_words: usize,
    ) -> Self {
        let errors = substitutions + insertions + deletions;
        Self {
            substitutions,
            insertions,
            deletions,
            reference_words,
            wer: if reference_words == 0 {
                0.0
            } else {
                100.0 * errors as f64 / reference_words as f64
            },
        }
    }

    pub fn errors(&self) -> usize {
        self.substitutions + self.insertions + self.deletions
    }
}

/// Scoring tokenization: lowercase, whitespace split, punctuation kept.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_lowercase).collect()
}

/// Unit-cost Levenshtein alignment counts. On ties the backtrace takes the
/// diagonal first, so a substitution is preferred over an insertion plus a
/// deletion.
fn align_counts<S: AsRef<str>>(reference: &[S], hypothesis: &[S]) -> (usize, usize, usize) {
    let n = reference.len();
    let m = hypothesis.len();
    let mut d = vec![0usize; (n + 1) * (m + 1)];
    let at = |i: usize, j: usize| i * (m + 1) + j;
    for i in 0..=n {
        d[at(i, 0)] = i;
    }
    for j in 0..=m {
        d[at(0, j)] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let cost = usize::from(reference[i - 1].as_ref() != hypothesis[j - 1].as_ref());
            d[at(i, j)] = (d[at(i - 1, j - 1)] + cost)
                .min(d[at(i - 1, j)] + 1)
                .min(d[at(i, j - 1)] + 1);
        }
    }
    let (mut s, mut ins, mut del) = (0, 0, 0);
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        if i > 0 && j > 0 {
            let cost = usize::from(reference[i - 1].as_ref() != hypothesis[j - 1].as_ref());
            if d[at(i, j)] == d[at(i - 1, j - 1)] + cost {
                s += cost;
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && d[at(i, j)] == d[at(i - 1, j)] + 1 {
            del += 1;
            i -= 1;
        } else {
            ins += 1;
            j -= 1;
        }
    }
    (s, ins, del)
}

pub fn wer<S: AsRef<str>>(reference: &[S], hypothesis: &[S]) -> Result<WerBreakdown, EvalError> {
    if reference.is_empty() {
        return Err(EvalError::EmptyReference);
    }
    let (s, i, d) = align_counts(reference, hypothesis);
    Ok(WerBreakdown::from_counts(s, i, d, reference.len()))
}

pub fn wer_text(reference: &str, hypothesis: &str) -> Result<WerBreakdown, EvalError> {
    wer(&tokenize(reference), &tokenize(hypothesis))
}

/// Pooled counts over `(reference, hypothesis)` text pairs.
pub fn corpus_wer<R: AsRef<str>, H: AsRef<str>>(
    pairs: &[(R, H)],
) -> Result<WerBreakdown, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    let (mut s, mut i, mut d, mut n) = (0, 0, 0, 0);
    for (r, h) in pairs {
        let b = wer_text(r.as_ref(), h.as_ref())?;
        s += b.substitutions;
        i += b.insertions;
        d += b.deletions;
        n += b.reference_words;
    }
    Ok(WerBreakdown::from_counts(s, i, d, n))
}

/// Fraction of exact matches after whitespace normalization.
pub fn sequence_accuracy<R: AsRef<str>, H: AsRef<str>>(pairs: &[(R, H)]) -> Result<f64, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    let norm = |s: &str| s.split_whitespace().collect::<Vec<_>>().join(" ");
    let hits = pairs
        .iter()
        .filter(|(r, h)| norm(r.as_ref()) == norm(h.as_ref()))
        .count();
    Ok(hits as f64 / pairs.len() as f64)
}

/// One line of a reference or hypothesis file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextRecord {
    pub id: String,
    pub text: String,
}

/// Join references and hypotheses on id, in reference order.
pub fn join_on_id(
    references: &[TextRecord],
    hypotheses: &[TextRecord],
) -> Result<Vec<(String, String)>, EvalError> {
    let by_id: BTreeMap<&str, &str> = hypotheses
        .iter()
        .map(|r| (r.id.as_str(), r.text.as_str()))
        .collect();
    references
        .iter()
        .map(|r| {
            by_id
                .get(r.id.as_str())
                .map(|h| (r.text.clone(), h.to_string()))
                .ok_or_else(|| EvalError::MissingHypothesis(r.id.clone()))
        })
        .collect()
}

/// Rows are test sets, columns are systems; both keep insertion order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub systems: Vec<String>,
    pub test_sets: Vec<String>,
    pub rows: BTreeMap<String, BTreeMap<String, WerBreakdown>>,
    /// average numeric length per test set
    pub avg_numeric_length: BTreeMap<String, f64>,
}

impl EvalReport {
    pub fn insert(&mut self, test_set: &str, system: &str, cell: WerBreakdown) {
        if !self.test_sets.iter().any(|t| t == test_set) {
            self.test_sets.push(test_set.to_string());
        }
        if !self.systems.iter().any(|s| s == system) {
            self.systems.push(system.to_string());
        }
        self.rows
            .entry(test_set.to_string())
            .or_default()
            .insert(system.to_string(), cell);
    }

    pub fn set_avg_length(&mut self, test_set: &str, len: f64) {
        if !self.test_sets.iter().any(|t| t == test_set) {
            self.test_sets.push(test_set.to_string());
        }
        self.avg_numeric_length.insert(test_set.to_string(), len);
    }

    pub fn get(&self, test_set: &str, system: &str) -> Option<&WerBreakdown> {
        self.rows.get(test_set)?.get(system)
    }
}

/// Fixed-width table: one row per test set, one WER column per system, one
/// decimal place. Missing cells print `-`.
pub fn render_report(report: &EvalReport) -> String {
    let first = report
        .test_sets
        .iter()
        .map(String::len)
        .chain(["Test set".len()])
        .max()
        .unwrap_or(0);
    let len_col = "Avg Num Len".len();
    let widths: Vec<usize> = report.systems.iter().map(|s| s.len().max(6)).collect();

    let mut out = String::new();
    let _ = write!(out, "{:<first$}  {:>len_col$}", "Test set", "Avg Num Len");
    for (s, w) in report.systems.iter().zip(&widths) {
        let _ = write!(out, "  {s:>w$}");
    }
    out.push('\n');
    for t in &report.test_sets {
        let len = report
            .avg_numeric_length
            .get(t)
            .map(|v| format!("{v:.1}"))
            .unwrap_or_default();
        let _ = write!(out, "{t:<first$}  {len:>len_col$}");
        for (s, w) in report.systems.iter().zip(&widths) {
            let cell = report
                .get(t, s)
                .map(|b| format!("{:.1}", b.wer))
                .unwrap_or_else(|| "-".to_string());
            let _ = write!(out, "  {cell:>w$}");
        }
        out.push('\n');
    }
    out
}
