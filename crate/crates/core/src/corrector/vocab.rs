use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::spanalign::AlignedExample;

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const BOS: usize = 0;
pub const EOS: usize = 1;
pub const CHAR_UNK: usize = 2;

const RESERVED_WORDS: [&str; 2] = ["<pad>", "<unk>"];
const RESERVED_CHARS: usize = 3;
/// Printed for the output-side unknown symbol.
pub const UNK_CHAR: char = '\u{fffd}';

/// Input words and output characters, each with dense ids and fixed
/// reserved entries (`<pad>`, `<unk>` for words; BOS, EOS, UNK for chars).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabFile", into = "VocabFile")]
pub struct Vocabulary {
    words: Vec<String>,
    chars: Vec<char>,
    word_ids: HashMap<String, usize>,
    char_ids: HashMap<char, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    words: Vec<String>,
    chars: Vec<char>,
}

impl From<VocabFile> for Vocabulary {
    fn from(f: VocabFile) -> Self {
        Self::from_parts(f.words, f.chars)
    }
}

impl From<Vocabulary> for VocabFile {
    fn from(v: Vocabulary) -> Self {
        VocabFile {
            words: v.words,
            chars: v.chars,
        }
    }
}

impl Vocabulary {
    /// `words` and `chars` exclude the reserved entries.
    pub fn from_parts(words: Vec<String>, chars: Vec<char>) -> Self {
        let words: Vec<String> = RESERVED_WORDS
            .iter()
            .map(|s| s.to_string())
            .chain(
                words
                    .into_iter()
                    .filter(|w| !RESERVED_WORDS.contains(&w.as_str())),
            )
            .collect();
        let word_ids = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        let char_ids = chars
            .iter()
            .enumerate()
            .map(|(i, c)| (*c, i + RESERVED_CHARS))
            .collect();
        Self {
            words,
            chars,
            word_ids,
            char_ids,
        }
    }

    /// Words seen at least `min_count` times in inputs (most frequent first,
    /// capped at `max_words`), and every character in span targets.
    pub fn build(examples: &[AlignedExample], min_count: usize, max_words: Option<usize>) -> Self {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        let mut chars = BTreeSet::new();
        for ex in examples {
            for w in &ex.input_tokens {
                *counts.entry(w.as_str()).or_default() += 1;
            }
            for s in &ex.spans {
                chars.extend(s.target.join(" ").chars());
            }
        }
        let mut ranked: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|(_, c)| *c >= min_count.max(1))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        if let Some(m) = max_words {
            ranked.truncate(m);
        }
        Self::from_parts(
            ranked.into_iter().map(|(w, _)| w.to_string()).collect(),
            chars.into_iter().collect(),
        )
    }

    pub fn num_words(&self) -> usize {
        self.words.len()
    }

    /// Output classes: reserved symbols plus characters.
    pub fn num_chars(&self) -> usize {
        self.chars.len() + RESERVED_CHARS
    }

    pub fn word_id(&self, w: &str) -> usize {
        self.word_ids.get(w).copied().unwrap_or(UNK)
    }

    pub fn word(&self, id: usize) -> Option<&str> {
        self.words.get(id).map(String::as_str)
    }

    pub fn char_id(&self, c: char) -> usize {
        self.char_ids.get(&c).copied().unwrap_or(CHAR_UNK)
    }

    /// `None` for BOS/EOS.
    pub fn char(&self, id: usize) -> Option<char> {
        match id {
            BOS | EOS => None,
            CHAR_UNK => Some(UNK_CHAR),
            _ => self.chars.get(id - RESERVED_CHARS).copied(),
        }
    }

    /// Char ids of `text` followed by EOS.
    pub fn encode_target(&self, text: &str) -> Vec<usize> {
        text.chars().map(|c| self.char_id(c)).chain([EOS]).collect()
    }
}
