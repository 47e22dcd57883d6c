//! LCS alignment between an input and an output transcript.
//!
//! Tokens on the common subsequence are trivial (copied through); every other
//! input token belongs to a non-trivial span whose target is the output text
//! that replaces it. Each gap between aligned tokens is one span. When output
//! words are inserted between two trivial tokens, the preceding token is
//! demoted into a span of its own carrying the insertion (the following token
//! at sequence start), so every span is anchored to at least one input token
//! unless the input is empty.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AlignError {
    #[error("expected {expected} span outputs, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("invalid aligned example: {0}")]
    Invalid(String),
    #[error("unknown tag `{0}`")]
    UnknownTag(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Triviality {
    Trivial,
    NonTrivial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Position {
    Start,
    Continuation,
}

/// Joint triviality × position tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Tag {
    pub triviality: Triviality,
    pub position: Position,
}

impl Tag {
    pub const COUNT: usize = 4;
    pub const ALL: [Tag; 4] = [
        Tag::new(Triviality::Trivial, Position::Start),
        Tag::new(Triviality::Trivial, Position::Continuation),
        Tag::new(Triviality::NonTrivial, Position::Start),
        Tag::new(Triviality::NonTrivial, Position::Continuation),
    ];

    pub const fn new(triviality: Triviality, position: Position) -> Self {
        Self {
            triviality,
            position,
        }
    }

    pub fn index(self) -> usize {
        let t = usize::from(self.triviality == Triviality::NonTrivial);
        let p = usize::from(self.position == Position::Continuation);
        2 * t + p
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn is_trivial(self) -> bool {
        self.triviality == Triviality::Trivial
    }

    pub fn is_start(self) -> bool {
        self.position == Position::Start
    }

    /// Whether `self` may follow `prev` (`None` at sequence start).
    pub fn may_follow(self, prev: Option<Tag>) -> bool {
        match (self.position, prev) {
            (Position::Start, _) => true,
            (Position::Continuation, None) => false,
            (Position::Continuation, Some(p)) => p.triviality == self.triviality,
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = if self.is_trivial() { "T" } else { "N" };
        let p = if self.is_start() { "START" } else { "CONT" };
        write!(f, "{t}-{p}")
    }
}

impl FromStr for Tag {
    type Err = AlignError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|t| t.to_string() == s)
            .ok_or_else(|| AlignError::UnknownTag(s.to_string()))
    }
}

impl TryFrom<String> for Tag {
    type Error = AlignError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Tag> for String {
    fn from(t: Tag) -> Self {
        t.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub s: usize,
    pub e: usize,
    pub target: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignedExample {
    pub input_tokens: Vec<String>,
    pub tags: Vec<Tag>,
    pub spans: Vec<Span>,
}

impl AlignedExample {
    /// Check tag/span consistency.
    pub fn validate(&self) -> Result<(), AlignError> {
        let bad = |m: String| Err(AlignError::Invalid(m));
        if self.tags.len() != self.input_tokens.len() {
            return bad(format!(
                "{} tags for {} tokens",
                self.tags.len(),
                self.input_tokens.len()
            ));
        }
        let mut prev = None;
        for (i, t) in self.tags.iter().enumerate() {
            if !t.may_follow(prev) {
                return bad(format!("tag {t} at {i} cannot follow {prev:?}"));
            }
            prev = Some(*t);
        }
        if self.input_tokens.is_empty() {
            return match self.spans.as_slice() {
                [] => Ok(()),
                [Span { s: 0, e: 0, .. }] => Ok(()),
                _ => bad("empty input allows at most one zero-width span".into()),
            };
        }
        let expected = segments(&self.tags);
        let got: Vec<(usize, usize)> = self.spans.iter().map(|s| (s.s, s.e)).collect();
        if expected != got {
            return bad(format!(
                "spans {got:?} do not match tag segments {expected:?}"
            ));
        }
        Ok(())
    }

    /// Input with each span's tokens replaced by its gold target.
    pub fn output(&self) -> Vec<String> {
        let gold: Vec<Vec<String>> = self.spans.iter().map(|s| s.target.clone()).collect();
        reconstruct(self, &gold).expect("gold arity always matches")
    }
}

/// `[s, e)` ranges of the non-trivial segments encoded by a tag sequence.
pub fn segments(tags: &[Tag]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut open: Option<usize> = None;
    for (i, t) in tags.iter().enumerate() {
        if t.is_start() || t.is_trivial() {
            if let Some(s) = open.take() {
                out.push((s, i));
            }
        }
        if !t.is_trivial() && t.is_start() {
            open = Some(i);
        }
    }
    if let Some(s) = open {
        out.push((s, tags.len()));
    }
    out
}

/// Pairs `(i, j)` of a longest common subsequence, preferring the earliest
/// input positions.
pub fn lcs_pairs<S: AsRef<str>>(input: &[S], output: &[S]) -> Vec<(usize, usize)> {
    let (n, m) = (input.len(), output.len());
    // suffix table so a forward walk can commit to the earliest match
    let mut l = vec![0u32; (n + 1) * (m + 1)];
    let at = |i: usize, j: usize| i * (m + 1) + j;
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            l[at(i, j)] = if input[i].as_ref() == output[j].as_ref() {
                l[at(i + 1, j + 1)] + 1
            } else {
                l[at(i + 1, j)].max(l[at(i, j + 1)])
            };
        }
    }
    let mut pairs = Vec::with_capacity(l[0] as usize);
    let (mut i, mut j) = (0, 0);
    while i < n && j < m {
        if input[i].as_ref() == output[j].as_ref() && l[at(i, j)] == l[at(i + 1, j + 1)] + 1 {
            pairs.push((i, j));
            i += 1;
            j += 1;
        } else if l[at(i + 1, j)] == l[at(i, j)] {
            i += 1;
        } else {
            j += 1;
        }
    }
    pairs
}

pub fn align<S: AsRef<str>>(input: &[S], output: &[S]) -> AlignedExample {
    let input_tokens: Vec<String> = input.iter().map(|s| s.as_ref().to_string()).collect();
    let out: Vec<String> = output.iter().map(|s| s.as_ref().to_string()).collect();
    let n = input.len();

    if n == 0 {
        let spans = if out.is_empty() {
            vec![]
        } else {
            vec![Span {
                s: 0,
                e: 0,
                target: out,
            }]
        };
        return AlignedExample {
            input_tokens,
            tags: vec![],
            spans,
        };
    }

    let pairs = lcs_pairs(input, output);
    // anchors with sentinels at both ends
    let mut anchors: Vec<(isize, isize)> = vec![(-1, -1)];
    anchors.extend(pairs.iter().map(|&(i, j)| (i as isize, j as isize)));
    anchors.push((n as isize, out.len() as isize));

    // demoted[k] = (prefix, suffix) for the k-th matched token, if demoted
    let mut demoted: Vec<Option<(Vec<String>, Vec<String>)>> = vec![None; pairs.len()];
    let mut gap_spans: Vec<Span> = Vec::new();
    for w in 0..anchors.len() - 1 {
        let (i0, j0) = anchors[w];
        let (i1, j1) = anchors[w + 1];
        let in_gap = ((i0 + 1) as usize, i1 as usize);
        let out_gap: Vec<String> = out[(j0 + 1) as usize..j1 as usize].to_vec();
        if in_gap.0 < in_gap.1 {
            gap_spans.push(Span {
                s: in_gap.0,
                e: in_gap.1,
                target: out_gap,
            });
        } else if !out_gap.is_empty() {
            // insertion between trivial tokens: fold into a neighbour
            let k = if w > 0 { w - 1 } else { 0 };
            let entry = demoted[k].get_or_insert_with(Default::default);
            if w > 0 {
                entry.1.extend(out_gap);
            } else {
                entry.0.extend(out_gap);
            }
        }
    }

    let mut spans = gap_spans;
    for (k, d) in demoted.into_iter().enumerate() {
        if let Some((mut prefix, suffix)) = d {
            let (i, j) = pairs[k];
            prefix.push(out[j].clone());
            prefix.extend(suffix);
            spans.push(Span {
                s: i,
                e: i + 1,
                target: prefix,
            });
        }
    }
    spans.sort_by_key(|s| s.s);

    let mut tags = vec![Tag::new(Triviality::Trivial, Position::Continuation); n];
    let mut nontrivial = vec![false; n];
    for s in &spans {
        tags[s.s] = Tag::new(Triviality::NonTrivial, Position::Start);
        tags[s.s + 1..s.e].fill(Tag::new(Triviality::NonTrivial, Position::Continuation));
        nontrivial[s.s..s.e].iter_mut().for_each(|x| *x = true);
    }
    for i in 0..n {
        if !nontrivial[i] && (i == 0 || nontrivial[i - 1]) {
            tags[i] = Tag::new(Triviality::Trivial, Position::Start);
        }
    }
    AlignedExample {
        input_tokens,
        tags,
        spans,
    }
}

/// Splice `span_outputs` into the trivial skeleton of `example`.
pub fn reconstruct(
    example: &AlignedExample,
    span_outputs: &[Vec<String>],
) -> Result<Vec<String>, AlignError> {
    if span_outputs.len() != example.spans.len() {
        return Err(AlignError::ArityMismatch {
            expected: example.spans.len(),
            got: span_outputs.len(),
        });
    }
    let toks = &example.input_tokens;
    let mut out = Vec::with_capacity(toks.len());
    let mut cursor = 0;
    for (span, replacement) in example.spans.iter().zip(span_outputs) {
        out.extend_from_slice(&toks[cursor..span.s]);
        out.extend(replacement.iter().cloned());
        cursor = span.e;
    }
    out.extend_from_slice(&toks[cursor.min(toks.len())..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn tags(s: &str) -> Vec<Tag> {
        s.split_whitespace().map(|t| t.parse().unwrap()).collect()
    }

    #[test]
    fn identity_has_no_spans() {
        let ex = align(&w("a b c"), &w("a b c"));
        assert_eq!(ex.tags, tags("T-START T-CONT T-CONT"));
        assert!(ex.spans.is_empty());
        assert_eq!(reconstruct(&ex, &[]).unwrap(), w("a b c"));
    }

    #[test]
    fn time_span() {
        let ex = align(&w("set alarm for ten fifteen"), &w("set alarm for 10:15"));
        assert_eq!(ex.tags, tags("T-START T-CONT T-CONT N-START N-CONT"));
        assert_eq!(
            ex.spans,
            vec![Span {
                s: 3,
                e: 5,
                target: w("10:15")
            }]
        );
        assert_eq!(ex.output(), w("set alarm for 10:15"));
        assert_eq!(reconstruct(&ex, &[w("X")]).unwrap(), w("set alarm for X"));
        ex.validate().unwrap();
    }

    #[test]
    fn empty_input_insertion() {
        let ex = align(&w(""), &w("x"));
        assert!(ex.tags.is_empty());
        assert_eq!(
            ex.spans,
            vec![Span {
                s: 0,
                e: 0,
                target: w("x")
            }]
        );
        assert_eq!(ex.output(), w("x"));
        ex.validate().unwrap();
    }

    #[test]
    fn insertion_and_deletion_handling() {
        let ex = align(&w("a b"), &w("a x b"));
        assert_eq!(ex.tags, tags("N-START T-START"));
        assert_eq!(
            ex.spans,
            vec![Span {
                s: 0,
                e: 1,
                target: w("a x")
            }]
        );

        let ex = align(&w("a b"), &w("x a b"));
        assert_eq!(
            ex.spans,
            vec![Span {
                s: 0,
                e: 1,
                target: w("x a")
            }]
        );

        let ex = align(&w("a"), &w("x a y"));
        assert_eq!(
            ex.spans,
            vec![Span {
                s: 0,
                e: 1,
                target: w("x a y")
            }]
        );

        let ex = align(&w("a b c"), &w("a c"));
        assert_eq!(ex.tags, tags("T-START N-START T-START"));
        assert_eq!(
            ex.spans,
            vec![Span {
                s: 1,
                e: 2,
                target: vec![]
            }]
        );
    }

    #[test]
    fn adjacent_segments_get_separate_starts() {
        // gap span [1,2) followed by a demoted token carrying an insertion
        let ex = align(&w("a q b c"), &w("a r b x c"));
        assert_eq!(ex.tags, tags("T-START N-START N-START T-START"));
        assert_eq!(
            ex.spans,
            vec![
                Span {
                    s: 1,
                    e: 2,
                    target: w("r")
                },
                Span {
                    s: 2,
                    e: 3,
                    target: w("b x")
                }
            ]
        );
        ex.validate().unwrap();
    }

    #[test]
    fn arity_mismatch() {
        let ex = align(&w("a b"), &w("a c"));
        assert_eq!(
            reconstruct(&ex, &[]),
            Err(AlignError::ArityMismatch {
                expected: 1,
                got: 0
            })
        );
    }

    #[test]
    fn jsonl_shape() {
        let ex = align(&w("at ten"), &w("at 10"));
        let line = serde_json::to_string(&ex).unwrap();
        assert_eq!(
            line,
            r#"{"input_tokens":["at","ten"],"tags":["T-START","N-START"],"spans":[{"s":1,"e":2,"target":["10"]}]}"#
        );
        assert_eq!(serde_json::from_str::<AlignedExample>(&line).unwrap(), ex);
        assert!(serde_json::from_str::<Tag>("\"X-START\"").is_err());
    }

    #[test]
    fn validate_rejects_broken_examples() {
        let mut ex = align(&w("a b c"), &w("a x c"));
        ex.tags[1] = Tag::new(Triviality::NonTrivial, Position::Continuation);
        assert!(ex.validate().is_err());
        let mut ex = align(&w("a b c"), &w("a x c"));
        ex.spans.clear();
        assert!(ex.validate().is_err());
    }

    /// All lists over `{a, b, c}` of length at most `max`.
    fn all_lists(max: usize) -> Vec<Vec<String>> {
        let mut out = vec![vec![]];
        let mut frontier = vec![vec![]];
        for _ in 0..max {
            let mut next = Vec::new();
            for l in &frontier {
                for sym in ["a", "b", "c"] {
                    let mut l2: Vec<String> = l.clone();
                    l2.push(sym.to_string());
                    next.push(l2);
                }
            }
            out.extend(next.iter().cloned());
            frontier = next;
        }
        out
    }

    fn lcs_len_oracle(a: &[String], b: &[String]) -> usize {
        match (a.split_first(), b.split_first()) {
            (None, _) | (_, None) => 0,
            (Some((x, ra)), Some((y, rb))) => {
                if x == y {
                    1 + lcs_len_oracle(ra, rb)
                } else {
                    lcs_len_oracle(ra, b).max(lcs_len_oracle(a, rb))
                }
            }
        }
    }

    #[test]
    fn exhaustive_small_alphabet_sweep() {
        let lists = all_lists(5);
        assert_eq!(lists.len(), 364);
        for x in &lists {
            for y in &lists {
                let ex = align(x, y);
                assert_eq!(&ex.output(), y, "{x:?} -> {y:?}");
                ex.validate().unwrap();
                let pairs = lcs_pairs(x, y);
                if x.len() <= 3 && y.len() <= 3 {
                    assert_eq!(pairs.len(), lcs_len_oracle(x, y));
                }
                let trivial = ex.tags.iter().filter(|t| t.is_trivial()).count();
                assert!(trivial <= pairs.len());
            }
        }
    }

    proptest! {
        #[test]
        fn align_self_has_no_spans(x in proptest::collection::vec("[a-d]", 0..12)) {
            let ex = align(&x, &x);
            prop_assert!(ex.spans.is_empty());
            prop_assert!(ex.tags.iter().all(|t| t.is_trivial()));
        }

        #[test]
        fn round_trip_and_tag_validity(
            x in proptest::collection::vec("[a-e]", 0..15),
            y in proptest::collection::vec("[a-e]", 0..15),
        ) {
            let ex = align(&x, &y);
            prop_assert_eq!(&ex.output(), &y);
            let mut prev: Option<Tag> = None;
            for t in &ex.tags {
                let run_start = prev.is_none_or(|p| p.triviality != t.triviality);
                if run_start { prop_assert!(t.is_start()); }
                prev = Some(*t);
            }
            prop_assert!(ex.validate().is_ok());
        }
    }
}
