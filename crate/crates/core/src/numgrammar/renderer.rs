//! Slot renderers: turn a captured numeric field into spoken words and back.

use std::fmt;
use std::str::FromStr;

use super::words;

/// Longest token run a renderer will try to consume when parsing.
const MAX_SLOT_TOKENS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Renderer {
    /// "one hundred eighty"
    Card,
    /// "one hundred and eighty"
    CardAnd,
    /// "thirty first"
    Ordinal,
    /// digit by digit, zero as "zero"
    Digits,
    /// digit by digit, zero as "oh"
    DigitsOh,
    /// digit runs as "double"/"triple", zero as "oh"
    Grouped,
    /// cardinal of the following clock hour ("quarter to five" for 4:45)
    NextHour,
}

impl Renderer {
    pub fn name(self) -> &'static str {
        match self {
            Renderer::Card => "card",
            Renderer::CardAnd => "cardand",
            Renderer::Ordinal => "ordinal",
            Renderer::Digits => "digits",
            Renderer::DigitsOh => "digitsoh",
            Renderer::Grouped => "grouped",
            Renderer::NextHour => "nexthour",
        }
    }

    /// Render a field value (a digit string) as spoken tokens. `None` when the
    /// renderer does not apply to the value.
    pub fn render(self, value: &str) -> Option<Vec<String>> {
        if value.is_empty() || !value.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        match self {
            Renderer::Card => words::cardinal(value.parse().ok()?),
            Renderer::CardAnd => words::cardinal_with_and(value.parse().ok()?),
            Renderer::Ordinal => words::ordinal(value.parse().ok()?),
            Renderer::Digits => Some(spell_digits(value, false)),
            Renderer::DigitsOh => Some(spell_digits(value, true)),
            Renderer::Grouped => Some(spell_grouped(value)),
            Renderer::NextHour => {
                let h: u64 = value.parse().ok()?;
                if !(1..=12).contains(&h) {
                    return None;
                }
                words::cardinal(h % 12 + 1)
            }
        }
    }

    /// All `(consumed, value)` readings of a prefix of `tokens`. Over-generates;
    /// the owning rule re-renders to keep only exact readings.
    pub fn parse_prefixes(self, tokens: &[String]) -> Vec<(usize, String)> {
        let limit = tokens.len().min(MAX_SLOT_TOKENS);
        let mut out = Vec::new();
        match self {
            Renderer::Card | Renderer::CardAnd => {
                for len in 1..=limit {
                    if let Some(v) = words::parse_cardinal(&tokens[..len]) {
                        out.push((len, v.to_string()));
                    }
                }
            }
            Renderer::Ordinal => {
                for len in 1..=limit {
                    if let Some(v) = words::parse_ordinal(&tokens[..len]) {
                        out.push((len, v.to_string()));
                    }
                }
            }
            Renderer::NextHour => {
                for len in 1..=limit.min(2) {
                    if let Some(v @ 1..=12) = words::parse_cardinal(&tokens[..len]) {
                        let h = if v == 1 { 12 } else { v - 1 };
                        out.push((len, h.to_string()));
                    }
                }
            }
            Renderer::Digits | Renderer::DigitsOh => {
                let mut digits = String::new();
                for (i, tok) in tokens[..limit].iter().enumerate() {
                    match words::digit_value(tok) {
                        Some(d) => {
                            digits.push((b'0' + d) as char);
                            out.push((i + 1, digits.clone()));
                        }
                        None => break,
                    }
                }
            }
            Renderer::Grouped => {
                let mut digits = String::new();
                let mut i = 0;
                while i < limit {
                    let (repeat, at) = match tokens[i].as_str() {
                        "double" => (2, i + 1),
                        "triple" => (3, i + 1),
                        _ => (1, i),
                    };
                    let Some(d) = tokens.get(at).and_then(|t| words::digit_value(t)) else {
                        break;
                    };
                    for _ in 0..repeat {
                        digits.push((b'0' + d) as char);
                    }
                    i = at + 1;
                    out.push((i, digits.clone()));
                }
            }
        }
        out
    }
}

impl fmt::Display for Renderer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Renderer {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "card" => Renderer::Card,
            "cardand" => Renderer::CardAnd,
            "ordinal" => Renderer::Ordinal,
            "digits" => Renderer::Digits,
            "digitsoh" => Renderer::DigitsOh,
            "grouped" => Renderer::Grouped,
            "nexthour" => Renderer::NextHour,
            other => return Err(format!("unknown renderer `{other}`")),
        })
    }
}

fn spell_digits(value: &str, zero_as_oh: bool) -> Vec<String> {
    value
        .bytes()
        .map(|b| words::digit_word(b - b'0', zero_as_oh).to_string())
        .collect()
}

fn spell_grouped(value: &str) -> Vec<String> {
    let bytes = value.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let mut run = 1;
        while i + run < bytes.len() && bytes[i + run] == bytes[i] {
            run += 1;
        }
        let word = words::digit_word(bytes[i] - b'0', true);
        let mut left = run;
        while left > 0 {
            // a run of four reads "double X double X", otherwise triples first
            let take = match left {
                1 => 1,
                2 | 4 => 2,
                _ => 3,
            };
            match take {
                2 => out.push("double".to_string()),
                3 => out.push("triple".to_string()),
                _ => {}
            }
            out.push(word.to_string());
            left -= take;
        }
        i += run;
    }
    out
}
