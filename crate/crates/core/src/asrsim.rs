//! Simulated recognizer errors on written-domain transcripts.
//!
//! Each token draws at most one rewrite. Numeric tokens (any token with a
//! digit) can be split, confused for another category, substituted or
//! deleted; other tokens can only be substituted or deleted.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ErrorModelError {
    #[error("rate `{name}` = {value} is outside [0, 1]")]
    InvalidRate { name: &'static str, value: f64 },
    #[error("confusion entry for `{0}` has no usable alternatives")]
    EmptyAlternatives(String),
    #[error("bad error model file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alternative {
    pub token: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorModel {
    pub sub_rate: f64,
    pub del_rate: f64,
    pub split_rate: f64,
    pub category_confusion_rate: f64,
    #[serde(default)]
    pub confusion_table: BTreeMap<String, Vec<Alternative>>,
}

impl ErrorModel {
    /// All rates zero: `corrupt` is the identity.
    pub fn identity() -> Self {
        Self {
            sub_rate: 0.0,
            del_rate: 0.0,
            split_rate: 0.0,
            category_confusion_rate: 0.0,
            confusion_table: BTreeMap::new(),
        }
    }

    /// Moderate rates with a small homophone table.
    pub fn standard() -> Self {
        let pairs: &[(&str, &[&str])] = &[
            ("for", &["four"]),
            ("four", &["for"]),
            ("to", &["two", "too"]),
            ("two", &["to"]),
            ("won", &["one"]),
            ("one", &["won"]),
            ("ate", &["eight"]),
            ("eight", &["ate"]),
            ("in", &["inn"]),
            ("at", &["add"]),
            ("the", &["a"]),
            ("a", &["the"]),
            ("is", &["as"]),
            ("rent", &["rant"]),
        ];
        let confusion_table = pairs
            .iter()
            .map(|(k, alts)| {
                let w = 1.0 / alts.len() as f64;
                let alts = alts
                    .iter()
                    .map(|t| Alternative {
                        token: t.to_string(),
                        weight: w,
                    })
                    .collect();
                (k.to_string(), alts)
            })
            .collect();
        Self {
            sub_rate: 0.05,
            del_rate: 0.02,
            split_rate: 0.15,
            category_confusion_rate: 0.15,
            confusion_table,
        }
    }

    pub fn validate(&self) -> Result<(), ErrorModelError> {
        for (name, value) in [
            ("sub_rate", self.sub_rate),
            ("del_rate", self.del_rate),
            ("split_rate", self.split_rate),
            ("category_confusion_rate", self.category_confusion_rate),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(ErrorModelError::InvalidRate { name, value });
            }
        }
        for (k, alts) in &self.confusion_table {
            let usable = alts.iter().any(|a| a.weight > 0.0 && !a.token.is_empty());
            if !usable || alts.iter().any(|a| a.weight.is_nan() || a.weight < 0.0) {
                return Err(ErrorModelError::EmptyAlternatives(k.clone()));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, ErrorModelError> {
        let m: Self = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self, ErrorModelError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Corrupted text plus the token-level edit cost of the rewrites applied.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corruption {
    pub text: String,
    pub edits: usize,
}

pub fn corrupt(written: &str, model: &ErrorModel, seed: u64) -> String {
    corrupt_counted(written, model, seed).text
}

pub fn corrupt_counted(written: &str, model: &ErrorModel, seed: u64) -> Corruption {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<String> = Vec::new();
    let mut edits = 0;
    for tok in written.split_whitespace() {
        let numeric = tok.bytes().any(|b| b.is_ascii_digit());
        // one uniform per operation keeps the stream layout independent of outcomes
        let draws: [f64; 4] = rng.gen();
        let pick: f64 = rng.gen();
        if numeric && draws[0] < model.split_rate {
            if let Some(parts) = split_number(tok) {
                edits += parts.len();
                out.extend(parts);
                continue;
            }
        }
        if numeric && draws[1] < model.category_confusion_rate {
            if let Some(t) = confuse_category(tok) {
                edits += 1;
                out.push(t);
                continue;
            }
        }
        if draws[2] < model.sub_rate {
            if let Some(t) = substitute(tok, model, pick) {
                edits += 1;
                out.push(t);
                continue;
            }
        }
        if draws[3] < model.del_rate {
            edits += 1;
            continue;
        }
        out.push(tok.to_string());
    }
    Corruption {
        text: out.join(" "),
        edits,
    }
}

fn substitute(tok: &str, model: &ErrorModel, u: f64) -> Option<String> {
    let alts = model.confusion_table.get(&tok.to_lowercase())?;
    let total: f64 = alts.iter().map(|a| a.weight.max(0.0)).sum();
    if total <= 0.0 {
        return None;
    }
    let mut acc = 0.0;
    let target = u * total;
    for a in alts {
        acc += a.weight.max(0.0);
        if target < acc && !a.token.is_empty() {
            return Some(a.token.clone());
        }
    }
    alts.iter()
        .rev()
        .find(|a| a.weight > 0.0)
        .map(|a| a.token.clone())
}

/// Break a numeric token at its internal separator, or mid-way through a
/// plain digit run. Currency halves keep the dollar sign and are joined by a
/// dash: `$180.50` becomes `$180 - $50`.
fn split_number(tok: &str) -> Option<Vec<String>> {
    if let Some(rest) = tok.strip_prefix('$') {
        let (a, b) = rest.split_once('.')?;
        if a.is_empty() || b.is_empty() {
            return None;
        }
        return Some(vec![format!("${a}"), "-".into(), format!("${b}")]);
    }
    for sep in [':', '.'] {
        if let Some((a, b)) = tok.split_once(sep) {
            if !a.is_empty() && !b.is_empty() {
                return Some(vec![a.to_string(), b.to_string()]);
            }
        }
    }
    if tok.len() >= 3 && tok.bytes().all(|b| b.is_ascii_digit()) {
        let cut = tok.len() / 2;
        return Some(vec![tok[..cut].to_string(), tok[cut..].to_string()]);
    }
    None
}

/// Reformat a numeric token as a neighbouring category. A plain digit string
/// turns into a dollar amount with one repeated digit dropped, so `60003`
/// becomes `$6003`.
fn confuse_category(tok: &str) -> Option<String> {
    let bytes = tok.as_bytes();
    if !bytes.is_empty() && bytes.iter().all(u8::is_ascii_digit) {
        let mut digits = tok.to_string();
        if let Some(i) = (1..bytes.len()).find(|&i| bytes[i] == bytes[i - 1]) {
            digits.remove(i);
        }
        return Some(format!("${digits}"));
    }
    if let Some(rest) = tok.strip_prefix('$') {
        return Some(format!("{rest}%"));
    }
    if let Some(rest) = tok.strip_suffix('%') {
        return Some(format!("${rest}"));
    }
    if let Some((h, m)) = tok.split_once(':') {
        return Some(format!("{h}{m}"));
    }
    for suffix in ["st", "nd", "rd", "th"] {
        if let Some(rest) = tok.strip_suffix(suffix) {
            if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) {
                return Some(rest.to_string());
            }
        }
    }
    None
}
