//! Parallel spoken/written corpus synthesis from utterance templates.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numgrammar::{default_grammar, Grammar, GrammarError, NumericCategory};

/// The template table shipped with the crate.
pub const DEFAULT_TEMPLATES: &str = include_str!("../data/templates.tsv");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("invalid template at line {line}: {message}")]
    InvalidTemplate { line: usize, message: String },
    #[error("per_template must be at least 1")]
    ZeroPerTemplate,
    #[error("no templates given")]
    NoTemplates,
    #[error("bad split spec: need 0 < short_max < medium_max, got {short_max}/{medium_max}")]
    BadSplitSpec { short_max: usize, medium_max: usize },
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error("cannot read templates: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "TRAIN",
            Split::Test => "TEST",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Template {
    pub id: String,
    pub text: String,
    pub category: NumericCategory,
    pub split: Split,
}

impl Template {
    fn placeholder(&self) -> String {
        format!("${}", self.category)
    }

    fn validate(&self) -> Result<(), String> {
        let holes: Vec<&str> = self
            .text
            .split_whitespace()
            .filter(|w| w.starts_with('$'))
            .collect();
        let want = self.placeholder();
        match holes.as_slice() {
            [only] if *only == want => {}
            [only] => {
                return Err(format!(
                    "placeholder {only} does not match category {}",
                    self.category
                ))
            }
            [] => return Err("no placeholder".into()),
            _ => {
                return Err(format!(
                    "{} placeholders, expected exactly one",
                    holes.len()
                ))
            }
        }
        if self.text.bytes().any(|b| b.is_ascii_digit()) {
            return Err("template text must be digit-free".into());
        }
        Ok(())
    }

    pub fn fill(&self, value: &str) -> String {
        self.text
            .split_whitespace()
            .map(|w| if w.starts_with('$') { value } else { w })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Parse `category TAB split TAB text` lines; ids are `CATEGORY-SPLIT-NNN`.
pub fn parse_templates(src: &str) -> Result<Vec<Template>, DataError> {
    let mut out = Vec::new();
    let mut counters: BTreeMap<(NumericCategory, Split), usize> = BTreeMap::new();
    for (idx, raw) in src.lines().enumerate() {
        let line = idx + 1;
        let text = raw.trim_end_matches('\r');
        if text.trim().is_empty() || text.trim_start().starts_with('#') {
            continue;
        }
        let bad = |message: String| DataError::InvalidTemplate { line, message };
        let cols: Vec<&str> = text.split('\t').collect();
        let [cat, split, body] = cols.as_slice() else {
            return Err(bad(format!(
                "expected 3 tab-separated columns, got {}",
                cols.len()
            )));
        };
        let category: NumericCategory = cat
            .trim()
            .parse()
            .map_err(|e: GrammarError| bad(e.to_string()))?;
        let split = match split.trim() {
            "TRAIN" => Split::Train,
            "TEST" => Split::Test,
            other => return Err(bad(format!("bad split `{other}`"))),
        };
        let n = counters.entry((category, split)).or_default();
        *n += 1;
        let t = Template {
            id: format!("{category}-{split}-{n:03}"),
            text: body.trim().to_string(),
            category,
            split,
        };
        t.validate().map_err(bad)?;
        out.push(t);
    }
    Ok(out)
}

pub fn load_templates(path: &Path) -> Result<Vec<Template>, DataError> {
    let src = std::fs::read_to_string(path)
        .map_err(|e| DataError::Io(format!("{}: {e}", path.display())))?;
    parse_templates(&src)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UtterancePair {
    pub written: String,
    pub spoken: String,
    pub category: NumericCategory,
    pub numeric_value: String,
    pub numeric_length: usize,
    pub tail: bool,
    pub template_id: String,
}

/// Count of digit characters in a written value that parses under `category`.
pub fn numeric_length(written: &str, category: NumericCategory) -> Result<usize, DataError> {
    default_grammar().verbalize(written, category, false)?;
    Ok(written.bytes().filter(u8::is_ascii_digit).count())
}

/// Draw a written value for `category`.
pub fn sample_value_with<R: Rng + ?Sized>(category: NumericCategory, rng: &mut R) -> String {
    match category {
        NumericCategory::Day => {
            let d: u64 = rng.gen_range(1..=31);
            format!("{d}{}", crate::numgrammar::words::ordinal_suffix(d))
        }
        NumericCategory::Time => {
            format!("{}:{:02}", rng.gen_range(1..=12), rng.gen_range(0..60))
        }
        NumericCategory::Year => rng.gen_range(1000..=2099).to_string(),
        NumericCategory::Percent => {
            if rng.gen_bool(0.8) {
                format!("{}%", rng.gen_range(0..=100))
            } else {
                format!("{}.{:02}%", rng.gen_range(0..100), rng.gen_range(0..100))
            }
        }
        NumericCategory::Postalcode => format!("{:05}", rng.gen_range(0..100_000)),
        NumericCategory::Currency => {
            let dollars: u64 = rng.gen_range(0..10_000);
            if rng.gen_bool(0.5) {
                format!("${dollars}.{:02}", rng.gen_range(1..100))
            } else {
                format!("${dollars}")
            }
        }
        NumericCategory::Cardinal => rng.gen_range(0..1000).to_string(),
    }
}

/// Deterministic single draw, convenient for tests and sweeps.
pub fn sample_value(category: NumericCategory, seed: u64) -> String {
    sample_value_with(category, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Splits the value space of every category into a held-out part and the
/// rest, by a stable hash of `(category, value)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Holdout {
    pub fraction: f64,
    pub salt: u64,
}

impl Holdout {
    pub fn is_held_out(&self, category: NumericCategory, value: &str) -> bool {
        // FNV-1a keeps the split stable across platforms and releases
        let mut h = Fnv(0xcbf2_9ce4_8422_2325 ^ self.salt);
        category.name().hash(&mut h);
        value.hash(&mut h);
        (h.finish() % 1_000_000) as f64 / 1_000_000.0 < self.fraction
    }
}

struct Fnv(u64);

impl Hasher for Fnv {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 ^= u64::from(*b);
            self.0 = self.0.wrapping_mul(0x100_0000_01b3);
        }
    }
}

/// Which side of a [`Holdout`] a generator draws values from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueSide {
    Any,
    Kept,
    HeldOut,
}

pub struct CorpusGenerator<'a> {
    grammar: &'a Grammar,
    per_template: usize,
    tail_mode: bool,
    seed: u64,
    holdout: Option<(Holdout, ValueSide)>,
}

impl<'a> CorpusGenerator<'a> {
    pub fn new(grammar: &'a Grammar, per_template: usize, tail_mode: bool, seed: u64) -> Self {
        Self {
            grammar,
            per_template,
            tail_mode,
            seed,
            holdout: None,
        }
    }

    pub fn holdout(mut self, holdout: Holdout, side: ValueSide) -> Self {
        self.holdout = Some((holdout, side));
        self
    }

    fn draw_value(&self, category: NumericCategory, rng: &mut ChaCha8Rng) -> String {
        loop {
            let v = sample_value_with(category, rng);
            let keep = match self.holdout {
                None | Some((_, ValueSide::Any)) => true,
                Some((h, ValueSide::Kept)) => !h.is_held_out(category, &v),
                Some((h, ValueSide::HeldOut)) => h.is_held_out(category, &v),
            };
            if keep {
                return v;
            }
        }
    }

    /// `per_template` pairs for every template, in template order. Each
    /// template draws from its own ChaCha stream so output does not depend on
    /// how many templates precede it.
    pub fn generate(&self, templates: &[Template]) -> Result<Vec<UtterancePair>, DataError> {
        if self.per_template == 0 {
            return Err(DataError::ZeroPerTemplate);
        }
        if templates.is_empty() {
            return Err(DataError::NoTemplates);
        }
        if let Some((h, ValueSide::Kept | ValueSide::HeldOut)) = self.holdout {
            if !(h.fraction > 0.0 && h.fraction < 1.0) {
                return Err(DataError::Io(format!(
                    "holdout fraction {} outside (0,1)",
                    h.fraction
                )));
            }
        }
        let mut out = Vec::with_capacity(templates.len() * self.per_template);
        for (idx, t) in templates.iter().enumerate() {
            t.validate().map_err(|message| DataError::InvalidTemplate {
                line: idx + 1,
                message,
            })?;
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            rng.set_stream(idx as u64);
            for _ in 0..self.per_template {
                let value = self.draw_value(t.category, &mut rng);
                let cand =
                    self.grammar
                        .sample_with(&value, t.category, self.tail_mode, &mut rng)?;
                out.push(UtterancePair {
                    written: t.fill(&value),
                    spoken: t.fill(&cand.text()),
                    category: t.category,
                    numeric_length: numeric_length(&value, t.category)?,
                    numeric_value: value,
                    tail: self.tail_mode,
                    template_id: t.id.clone(),
                });
            }
        }
        Ok(out)
    }
}

pub fn generate_corpus(
    grammar: &Grammar,
    templates: &[Template],
    per_template: usize,
    tail_mode: bool,
    seed: u64,
) -> Result<Vec<UtterancePair>, DataError> {
    CorpusGenerator::new(grammar, per_template, tail_mode, seed).generate(templates)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub short_max: usize,
    pub medium_max: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            short_max: 2,
            medium_max: 4,
        }
    }
}

impl SplitSpec {
    pub fn new(short_max: usize, medium_max: usize) -> Result<Self, DataError> {
        if short_max == 0 || short_max >= medium_max {
            return Err(DataError::BadSplitSpec {
                short_max,
                medium_max,
            });
        }
        Ok(Self {
            short_max,
            medium_max,
        })
    }

    pub fn bucket(&self, length: usize) -> LengthBucket {
        if length <= self.short_max {
            LengthBucket::Short
        } else if length <= self.medium_max {
            LengthBucket::Medium
        } else {
            LengthBucket::Long
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum LengthBucket {
    Short,
    Medium,
    Long,
}

impl LengthBucket {
    pub const ALL: [LengthBucket; 3] = [
        LengthBucket::Short,
        LengthBucket::Medium,
        LengthBucket::Long,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LengthBucket::Short => "SHORT",
            LengthBucket::Medium => "MEDIUM",
            LengthBucket::Long => "LONG",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Partition {
    pub short: Vec<UtterancePair>,
    pub medium: Vec<UtterancePair>,
    pub long: Vec<UtterancePair>,
}

impl Partition {
    pub fn bucket(&self, b: LengthBucket) -> &[UtterancePair] {
        match b {
            LengthBucket::Short => &self.short,
            LengthBucket::Medium => &self.medium,
            LengthBucket::Long => &self.long,
        }
    }

    /// Mean numeric length of a bucket, `None` when empty.
    pub fn mean_length(&self, b: LengthBucket) -> Option<f64> {
        let pairs = self.bucket(b);
        (!pairs.is_empty()).then(|| {
            pairs.iter().map(|p| p.numeric_length as f64).sum::<f64>() / pairs.len() as f64
        })
    }
}

pub fn partition_by_length(pairs: &[UtterancePair], spec: SplitSpec) -> Partition {
    let mut out = Partition::default();
    for p in pairs {
        match spec.bucket(p.numeric_length) {
            LengthBucket::Short => out.short.push(p.clone()),
            LengthBucket::Medium => out.medium.push(p.clone()),
            LengthBucket::Long => out.long.push(p.clone()),
        }
    }
    out
}

/// What makes a test pair collide with training data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DisjointKey {
    /// same category and numeric value
    #[default]
    Value,
    /// same numeric value and same spoken transcript
    ValueAndSpoken,
}

/// Drop test pairs that collide with any training pair. Returns the kept
/// pairs and the number removed.
pub fn enforce_disjointness(
    train: &[UtterancePair],
    test: &[UtterancePair],
    key: DisjointKey,
) -> (Vec<UtterancePair>, usize) {
    let k = |p: &UtterancePair| match key {
        DisjointKey::Value => (p.category, p.numeric_value.clone(), String::new()),
        DisjointKey::ValueAndSpoken => (p.category, p.numeric_value.clone(), p.spoken.clone()),
    };
    let seen: HashSet<_> = train.iter().map(k).collect();
    let kept: Vec<UtterancePair> = test
        .iter()
        .filter(|p| !seen.contains(&k(p)))
        .cloned()
        .collect();
    let removed = test.len() - kept.len();
    (kept, removed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn templates() -> Vec<Template> {
        parse_templates(DEFAULT_TEMPLATES).unwrap()
    }

    fn of(cat: NumericCategory, split: Split) -> Vec<Template> {
        templates()
            .into_iter()
            .filter(|t| t.category == cat && t.split == split)
            .collect()
    }

    #[test]
    fn bundled_templates_are_balanced() {
        let t = templates();
        for cat in NumericCategory::ALL {
            assert_eq!(of(cat, Split::Train).len(), 200, "{cat}");
            assert_eq!(of(cat, Split::Test).len(), 40, "{cat}");
        }
        let texts: HashSet<_> = t.iter().map(|t| (&t.text, t.split)).collect();
        assert_eq!(texts.len(), t.len());
        for a in t.iter().filter(|t| t.split == Split::Test) {
            assert!(!t
                .iter()
                .any(|b| b.split == Split::Train && b.text == a.text));
        }
    }

    #[test]
    fn template_words_are_not_numeric() {
        let g = Grammar::default();
        for t in templates() {
            let filled = t.fill("X");
            assert_eq!(g.denorm_text(&filled), filled, "{}", t.text);
        }
    }

    #[test]
    fn template_validation() {
        let bad = [
            "TIME\tTRAIN\twake me at",
            "TIME\tTRAIN\twake me at $YEAR",
            "TIME\tTRAIN\t$TIME and $TIME",
            "TIME\tTRAIN\twake me at $TIME on the 3rd",
            "TIME\tLATER\twake me at $TIME",
            "TIME\twake me at $TIME",
        ];
        for line in bad {
            assert!(
                matches!(
                    parse_templates(line),
                    Err(DataError::InvalidTemplate { line: 1, .. })
                ),
                "{line}"
            );
        }
    }

    #[test]
    fn full_run_sizes() {
        let g = Grammar::default();
        let t = of(NumericCategory::Time, Split::Train);
        let pairs = generate_corpus(&g, &t, 100, false, 1).unwrap();
        assert_eq!(pairs.len(), 20_000);
    }

    #[test]
    fn single_pair_is_reproducible() {
        let g = Grammar::default();
        let t = &of(NumericCategory::Postalcode, Split::Train)[..1];
        let a = serde_json::to_string(&generate_corpus(&g, t, 1, false, 42).unwrap()).unwrap();
        let b = serde_json::to_string(&generate_corpus(&g, t, 1, false, 42).unwrap()).unwrap();
        assert_eq!(a, b);
        let c = serde_json::to_string(&generate_corpus(&g, t, 1, false, 43).unwrap()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn postal_values_nearly_unique() {
        // birthday bound: expected collisions among 20k draws from 1e5 values is
        // n^2 / 2N = 2000, i.e. ~90% unique draws; the check is on the sampler
        // producing genuine 5-digit values with that uniqueness, not duplicates
        let g = Grammar::default();
        let t = of(NumericCategory::Postalcode, Split::Train);
        let pairs = generate_corpus(&g, &t, 100, false, 5).unwrap();
        assert!(pairs.iter().all(|p| p.numeric_value.len() == 5));
        let distinct: HashSet<_> = pairs.iter().map(|p| &p.numeric_value).collect();
        let n = pairs.len() as f64;
        let space = 100_000f64;
        let expected_distinct = space * (1.0 - (1.0 - 1.0 / space).powf(n));
        let got = distinct.len() as f64;
        assert!(
            (got - expected_distinct).abs() < 4.0 * expected_distinct.sqrt(),
            "{got} vs {expected_distinct}"
        );
    }

    #[test]
    fn numeric_length_examples() {
        assert_eq!(
            numeric_length("86952", NumericCategory::Postalcode).unwrap(),
            5
        );
        assert_eq!(numeric_length("31st", NumericCategory::Day).unwrap(), 2);
        assert_eq!(
            numeric_length("20.22%", NumericCategory::Percent).unwrap(),
            4
        );
        for cat in NumericCategory::ALL {
            assert!(numeric_length("", cat).is_err());
        }
        assert!(numeric_length("86952", NumericCategory::Day).is_err());
    }

    fn pair_with_len(len: usize) -> UtterancePair {
        UtterancePair {
            written: String::new(),
            spoken: String::new(),
            category: NumericCategory::Cardinal,
            numeric_value: "1".repeat(len),
            numeric_length: len,
            tail: false,
            template_id: String::new(),
        }
    }

    #[test]
    fn partition_thresholds() {
        let spec = SplitSpec::new(2, 4).unwrap();
        let p = partition_by_length(
            &[pair_with_len(1), pair_with_len(3), pair_with_len(7)],
            spec,
        );
        assert_eq!((p.short.len(), p.medium.len(), p.long.len()), (1, 1, 1));
        assert_eq!(p.mean_length(LengthBucket::Long), Some(7.0));
        let empty = partition_by_length(&[], spec);
        assert_eq!(empty, Partition::default());
        assert_eq!(empty.mean_length(LengthBucket::Short), None);
        assert!(SplitSpec::new(0, 3).is_err());
        assert!(SplitSpec::new(3, 3).is_err());
    }

    #[test]
    fn default_split_means() {
        let g = Grammar::default();
        let t: Vec<Template> = templates()
            .into_iter()
            .filter(|t| t.split == Split::Test && NumericCategory::SAMPLED.contains(&t.category))
            .collect();
        let pairs = generate_corpus(&g, &t, 20, false, 3).unwrap();
        let p = partition_by_length(&pairs, SplitSpec::default());
        let short = p.mean_length(LengthBucket::Short).unwrap();
        let medium = p.mean_length(LengthBucket::Medium).unwrap();
        let long = p.mean_length(LengthBucket::Long).unwrap();
        assert!((1.5..=2.1).contains(&short), "{short}");
        assert!((3.0..=3.8).contains(&medium), "{medium}");
        assert_eq!(long, 5.0);
    }

    #[test]
    fn disjointness_edge_cases() {
        let g = Grammar::default();
        let t = &of(NumericCategory::Postalcode, Split::Train)[..10];
        let train = generate_corpus(&g, t, 10, false, 1).unwrap();
        let (kept, removed) = enforce_disjointness(&train, &train, DisjointKey::Value);
        assert!(kept.is_empty());
        assert_eq!(removed, train.len());
        let (kept, removed) = enforce_disjointness(&train, &[], DisjointKey::Value);
        assert!(kept.is_empty() && removed == 0);
    }

    #[test]
    fn disjointness_matches_set_oracle() {
        let g = Grammar::default();
        let t = of(NumericCategory::Postalcode, Split::Train);
        let train = generate_corpus(&g, &t, 50, false, 11).unwrap();
        let test = generate_corpus(&g, &t, 50, false, 12).unwrap();
        assert_eq!((train.len(), test.len()), (10_000, 10_000));
        for key in [DisjointKey::Value, DisjointKey::ValueAndSpoken] {
            let (kept, removed) = enforce_disjointness(&train, &test, key);
            let oracle: HashSet<(String, String)> = train
                .iter()
                .map(|p| {
                    (
                        p.numeric_value.clone(),
                        if key == DisjointKey::Value {
                            String::new()
                        } else {
                            p.spoken.clone()
                        },
                    )
                })
                .collect();
            let expected = test
                .iter()
                .filter(|p| {
                    oracle.contains(&(
                        p.numeric_value.clone(),
                        if key == DisjointKey::Value {
                            String::new()
                        } else {
                            p.spoken.clone()
                        },
                    ))
                })
                .count();
            assert_eq!(removed, expected);
            assert_eq!(kept.len() + removed, test.len());
            assert!(removed > 0);
        }
    }

    #[test]
    fn holdout_sides_are_value_disjoint() {
        let g = Grammar::default();
        let h = Holdout {
            fraction: 0.2,
            salt: 9,
        };
        for cat in NumericCategory::SAMPLED {
            let train = CorpusGenerator::new(&g, 20, false, 1)
                .holdout(h, ValueSide::Kept)
                .generate(&of(cat, Split::Train))
                .unwrap();
            let test = CorpusGenerator::new(&g, 20, true, 2)
                .holdout(h, ValueSide::HeldOut)
                .generate(&of(cat, Split::Test))
                .unwrap();
            let (_, removed) = enforce_disjointness(&train, &test, DisjointKey::Value);
            assert_eq!(removed, 0, "{cat}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn pair_invariants(cat_idx in 0usize..7, seed in any::<u64>(), tail in any::<bool>()) {
            let g = default_grammar();
            let cat = NumericCategory::ALL[cat_idx];
            let t = of(cat, Split::Train);
            let pairs = generate_corpus(g, &t[..3], 3, tail, seed).unwrap();
            for p in pairs {
                prop_assert!(!p.spoken.bytes().any(|b| b.is_ascii_digit()));
                prop_assert!(p.written.split_whitespace().any(|w| w == p.numeric_value));
                let tmpl = t.iter().find(|t| t.id == p.template_id).unwrap();
                prop_assert_eq!(&tmpl.fill(&p.numeric_value), &p.written);
                prop_assert_eq!(p.numeric_length, numeric_length(&p.numeric_value, cat).unwrap());
            }
        }
    }
}
