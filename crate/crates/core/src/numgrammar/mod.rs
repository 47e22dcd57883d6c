//! Weighted rule grammar for numeric entities.
//!
//! The same rule table drives both directions: written -> spoken verbalization
//! (with weighted sampling) and spoken -> written rule denorming.

mod pattern;
mod renderer;
pub mod words;

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use pattern::{Bindings, SpokenTemplate, WrittenPattern};
pub use renderer::Renderer;

/// The rule table shipped with the crate.
pub const DEFAULT_RULES: &str = include_str!("../../data/numeric.rules");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum NumericCategory {
    Day,
    Percent,
    Postalcode,
    Time,
    Year,
    Cardinal,
    Currency,
}

impl NumericCategory {
    pub const ALL: [NumericCategory; 7] = [
        NumericCategory::Day,
        NumericCategory::Percent,
        NumericCategory::Postalcode,
        NumericCategory::Time,
        NumericCategory::Year,
        NumericCategory::Cardinal,
        NumericCategory::Currency,
    ];

    /// The categories used for default corpus generation.
    pub const SAMPLED: [NumericCategory; 5] = [
        NumericCategory::Day,
        NumericCategory::Percent,
        NumericCategory::Postalcode,
        NumericCategory::Time,
        NumericCategory::Year,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NumericCategory::Day => "DAY",
            NumericCategory::Percent => "PERCENT",
            NumericCategory::Postalcode => "POSTALCODE",
            NumericCategory::Time => "TIME",
            NumericCategory::Year => "YEAR",
            NumericCategory::Cardinal => "CARDINAL",
            NumericCategory::Currency => "CURRENCY",
        }
    }
}

impl fmt::Display for NumericCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NumericCategory {
    type Err = GrammarError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NumericCategory::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| GrammarError::UnknownCategory(s.to_string()))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GrammarError {
    #[error("`{written}` is not a valid {category} value")]
    UnparsableWritten {
        written: String,
        category: NumericCategory,
    },
    #[error("no {category} rules are enabled")]
    EmptyRuleSet { category: NumericCategory },
    #[error("unknown category `{0}`")]
    UnknownCategory(String),
    #[error("rule file line {line}: {message}")]
    BadRule { line: usize, message: String },
    #[error("cannot read rule file: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerbalizationRule {
    pub category: NumericCategory,
    pub weight: f64,
    pub tail_only: bool,
    pub written_pattern: WrittenPattern,
    pub spoken_template: SpokenTemplate,
}

impl VerbalizationRule {
    pub fn new(
        category: NumericCategory,
        weight: f64,
        tail_only: bool,
        written_pattern: &str,
        spoken_template: &str,
    ) -> Result<Self, String> {
        if !(weight.is_finite() && weight > 0.0) {
            return Err(format!("weight must be positive, got {weight}"));
        }
        let written_pattern = WrittenPattern::parse(written_pattern)?;
        let spoken_template = SpokenTemplate::parse(spoken_template)?;
        for field in written_pattern.fields() {
            if !spoken_template.slot_fields().any(|s| s == field.name) {
                return Err(format!("field `{}` is never spoken", field.name));
            }
        }
        for slot in spoken_template.slot_fields() {
            if !written_pattern.fields().any(|f| f.name == slot) {
                return Err(format!("slot `{slot}` has no written field"));
            }
        }
        Ok(Self {
            category,
            weight,
            tail_only,
            written_pattern,
            spoken_template,
        })
    }

    pub fn verbalize(&self, written: &str) -> Option<Vec<String>> {
        self.spoken_template
            .render(&self.written_pattern.matches(written)?)
    }

    /// Exact readings of a prefix of `tokens`: `(consumed, written)`.
    pub fn match_spoken(&self, tokens: &[String]) -> Vec<(usize, String)> {
        let mut out: Vec<(usize, String)> = Vec::new();
        for (used, bindings) in self.spoken_template.parse_prefixes(tokens) {
            let Some(written) = self.written_pattern.format(&bindings) else {
                continue;
            };
            if self.verbalize(&written).as_deref() == Some(&tokens[..used])
                && !out.iter().any(|(u, w)| *u == used && *w == written)
            {
                out.push((used, written));
            }
        }
        out
    }

    pub fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}",
            self.category,
            self.weight,
            u8::from(self.tail_only),
            self.written_pattern,
            self.spoken_template
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedCandidate {
    pub tokens: Vec<String>,
    pub weight: f64,
}

impl WeightedCandidate {
    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }
}

/// A detected numeric region of a spoken token sequence, half-open.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NumericSpan {
    pub start: usize,
    pub end: usize,
    pub category: NumericCategory,
    pub written: String,
}

/// Category order used to arbitrate between categories matching at the same
/// position. Postal codes come first: their five digit readings would
/// otherwise be claimed by digit-by-digit years and "oh" clock times. Percent
/// and currency follow because their unit words make them unambiguous, while
/// their leading amounts ("two thousand seventy seven dollars") also read as
/// years.
pub const DEFAULT_PRIORITY: [NumericCategory; 7] = [
    NumericCategory::Postalcode,
    NumericCategory::Percent,
    NumericCategory::Currency,
    NumericCategory::Time,
    NumericCategory::Day,
    NumericCategory::Year,
    NumericCategory::Cardinal,
];

/// The bundled grammar, built once per process.
pub fn default_grammar() -> &'static Grammar {
    static GRAMMAR: OnceLock<Grammar> = OnceLock::new();
    GRAMMAR.get_or_init(Grammar::default)
}

/// An immutable rule table plus category priority.
#[derive(Debug, Clone)]
pub struct Grammar {
    rules: Vec<VerbalizationRule>,
    priority: Vec<NumericCategory>,
}

impl Default for Grammar {
    fn default() -> Self {
        Self::parse_rules(DEFAULT_RULES).expect("bundled rule file is valid")
    }
}

impl Grammar {
    pub fn new(rules: Vec<VerbalizationRule>) -> Self {
        Self {
            rules,
            priority: DEFAULT_PRIORITY.to_vec(),
        }
    }

    /// Parse the line-oriented rule format:
    /// `category TAB weight TAB tail_flag TAB written_pattern TAB spoken_template`.
    pub fn parse_rules(src: &str) -> Result<Self, GrammarError> {
        let mut rules = Vec::new();
        for (idx, raw) in src.lines().enumerate() {
            let line = idx + 1;
            let text = raw.trim_end_matches('\r');
            if text.trim().is_empty() || text.trim_start().starts_with('#') {
                continue;
            }
            let bad = |message: String| GrammarError::BadRule { line, message };
            let cols: Vec<&str> = text.split('\t').collect();
            if cols.len() != 5 {
                return Err(bad(format!(
                    "expected 5 tab-separated columns, got {}",
                    cols.len()
                )));
            }
            let category: NumericCategory = cols[0]
                .trim()
                .parse()
                .map_err(|e: GrammarError| bad(e.to_string()))?;
            let weight: f64 = cols[1]
                .trim()
                .parse()
                .map_err(|_| bad(format!("bad weight `{}`", cols[1])))?;
            let tail_only = match cols[2].trim() {
                "0" | "false" => false,
                "1" | "true" => true,
                other => return Err(bad(format!("bad tail flag `{other}`"))),
            };
            rules.push(
                VerbalizationRule::new(category, weight, tail_only, cols[3].trim(), cols[4].trim())
                    .map_err(bad)?,
            );
        }
        Ok(Self::new(rules))
    }

    pub fn load(path: &Path) -> Result<Self, GrammarError> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| GrammarError::Io(format!("{}: {e}", path.display())))?;
        Self::parse_rules(&src)
    }

    pub fn to_rules_text(&self) -> String {
        let mut out = String::new();
        for rule in &self.rules {
            out.push_str(&rule.to_line());
            out.push('\n');
        }
        out
    }

    pub fn rules(&self) -> &[VerbalizationRule] {
        &self.rules
    }

    pub fn priority(&self) -> &[NumericCategory] {
        &self.priority
    }

    /// Replace the category priority. Categories left out rank last, in
    /// their default order.
    pub fn with_priority(mut self, priority: &[NumericCategory]) -> Self {
        let mut order: Vec<NumericCategory> = Vec::new();
        for c in priority.iter().chain(DEFAULT_PRIORITY.iter()) {
            if !order.contains(c) {
                order.push(*c);
            }
        }
        self.priority = order;
        self
    }

    /// The same grammar with every tail-only rule removed.
    pub fn without_tail(&self) -> Self {
        Self {
            rules: self
                .rules
                .iter()
                .filter(|r| !r.tail_only)
                .cloned()
                .collect(),
            priority: self.priority.clone(),
        }
    }

    fn rank(&self, category: NumericCategory) -> usize {
        self.priority
            .iter()
            .position(|c| *c == category)
            .unwrap_or(self.priority.len())
    }

    /// All spoken candidates for a written value, weights normalized to 1.
    pub fn verbalize(
        &self,
        written: &str,
        category: NumericCategory,
        tail_mode: bool,
    ) -> Result<Vec<WeightedCandidate>, GrammarError> {
        let mut enabled = self
            .rules
            .iter()
            .filter(|r| r.category == category && (tail_mode || !r.tail_only))
            .peekable();
        if enabled.peek().is_none() {
            return Err(GrammarError::EmptyRuleSet { category });
        }
        let mut out: Vec<WeightedCandidate> = Vec::new();
        for rule in enabled {
            let Some(tokens) = rule.verbalize(written) else {
                continue;
            };
            match out.iter_mut().find(|c| c.tokens == tokens) {
                Some(c) => c.weight += rule.weight,
                None => out.push(WeightedCandidate {
                    tokens,
                    weight: rule.weight,
                }),
            }
        }
        if out.is_empty() {
            return Err(GrammarError::UnparsableWritten {
                written: written.to_string(),
                category,
            });
        }
        let total: f64 = out.iter().map(|c| c.weight).sum();
        for c in &mut out {
            c.weight /= total;
        }
        Ok(out)
    }

    /// Draw one candidate proportionally to weight; deterministic in `seed`.
    pub fn sample_verbalization(
        &self,
        written: &str,
        category: NumericCategory,
        tail_mode: bool,
        seed: u64,
    ) -> Result<WeightedCandidate, GrammarError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(written, category, tail_mode, &mut rng)
    }

    pub fn sample_with<R: Rng + ?Sized>(
        &self,
        written: &str,
        category: NumericCategory,
        tail_mode: bool,
        rng: &mut R,
    ) -> Result<WeightedCandidate, GrammarError> {
        let mut candidates = self.verbalize(written, category, tail_mode)?;
        let mut u: f64 = rng.gen();
        let last = candidates.len() - 1;
        let mut pick = last;
        for (i, c) in candidates.iter().enumerate() {
            if u < c.weight {
                pick = i;
                break;
            }
            u -= c.weight;
        }
        Ok(candidates.swap_remove(pick))
    }

    /// Greedy left-to-right span detection.
    ///
    /// At each position the region extent is the longest match of any rule.
    /// The region is assigned to the highest-priority category with a match
    /// there, using that category's longest match (ties: heavier rule, then
    /// earlier rule). Region tokens beyond the winning match are skipped, so a
    /// shorter winner leaves part of the region untouched.
    pub fn detect_numeric_spans<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<NumericSpan> {
        let tokens: Vec<String> = tokens.iter().map(|t| t.as_ref().to_string()).collect();
        let mut spans = Vec::new();
        let mut pos = 0;
        while pos < tokens.len() {
            let rest = &tokens[pos..];
            let mut region_end = 0;
            // (rank, -len, -weight, rule index) ordering, smallest wins
            let mut best: Option<(usize, usize, f64, usize, String)> = None;
            for (ri, rule) in self.rules.iter().enumerate() {
                for (used, written) in rule.match_spoken(rest) {
                    region_end = region_end.max(used);
                    let rank = self.rank(rule.category);
                    let better = match &best {
                        None => true,
                        Some((br, bu, bw, _, _)) => {
                            (rank, std::cmp::Reverse(used)) < (*br, std::cmp::Reverse(*bu))
                                || (rank == *br && used == *bu && rule.weight > *bw)
                        }
                    };
                    if better {
                        best = Some((rank, used, rule.weight, ri, written));
                    }
                }
            }
            match best {
                None => pos += 1,
                Some((_, used, _, ri, written)) => {
                    spans.push(NumericSpan {
                        start: pos,
                        end: pos + used,
                        category: self.rules[ri].category,
                        written,
                    });
                    pos += region_end;
                }
            }
        }
        spans
    }

    /// Rule denorming: every detected span is replaced by its written form,
    /// everything else is copied verbatim.
    pub fn denorm<S: AsRef<str>>(&self, tokens: &[S]) -> String {
        let spans = self.detect_numeric_spans(tokens);
        let mut out: Vec<&str> = Vec::with_capacity(tokens.len());
        let mut next = spans.iter().peekable();
        let mut i = 0;
        while i < tokens.len() {
            match next.peek() {
                Some(span) if span.start == i => {
                    out.push(&span.written);
                    i = span.end;
                    next.next();
                }
                _ => {
                    out.push(tokens[i].as_ref());
                    i += 1;
                }
            }
        }
        out.join(" ")
    }

    pub fn denorm_text(&self, text: &str) -> String {
        let tokens: Vec<&str> = text.split_whitespace().collect();
        self.denorm(&tokens)
    }
}
