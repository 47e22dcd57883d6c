//! English number words: cardinals, ordinals and digit names.

const UNITS: [&str; 20] = [
    "zero",
    "one",
    "two",
    "three",
    "four",
    "five",
    "six",
    "seven",
    "eight",
    "nine",
    "ten",
    "eleven",
    "twelve",
    "thirteen",
    "fourteen",
    "fifteen",
    "sixteen",
    "seventeen",
    "eighteen",
    "nineteen",
];

const TENS: [&str; 10] = [
    "", "", "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety",
];

const SCALES: [(u64, &str); 2] = [(1_000_000, "million"), (1_000, "thousand")];

/// Largest value the cardinal renderer accepts.
pub const MAX_CARDINAL: u64 = 999_999_999;

fn push_below_thousand(n: u64, with_and: bool, out: &mut Vec<String>) {
    debug_assert!(n > 0 && n < 1000);
    let hundreds = n / 100;
    let rest = n % 100;
    if hundreds > 0 {
        out.push(UNITS[hundreds as usize].to_string());
        out.push("hundred".to_string());
        if rest > 0 && with_and {
            out.push("and".to_string());
        }
    }
    if rest >= 20 {
        out.push(TENS[(rest / 10) as usize].to_string());
        if !rest.is_multiple_of(10) {
            out.push(UNITS[(rest % 10) as usize].to_string());
        }
    } else if rest > 0 {
        out.push(UNITS[rest as usize].to_string());
    }
}

fn render_cardinal(n: u64, with_and: bool) -> Option<Vec<String>> {
    if n > MAX_CARDINAL {
        return None;
    }
    if n == 0 {
        return Some(vec!["zero".to_string()]);
    }
    let mut out = Vec::new();
    let mut rest = n;
    for (scale, name) in SCALES {
        if rest >= scale {
            push_below_thousand(rest / scale, false, &mut out);
            out.push(name.to_string());
            rest %= scale;
        }
    }
    if rest > 0 {
        push_below_thousand(rest, with_and, &mut out);
    }
    Some(out)
}

/// Canonical cardinal reading, e.g. 1648 -> "one thousand six hundred forty eight".
pub fn cardinal(n: u64) -> Option<Vec<String>> {
    render_cardinal(n, false)
}

/// Cardinal reading with "and" after the final hundred ("one hundred and five").
pub fn cardinal_with_and(n: u64) -> Option<Vec<String>> {
    render_cardinal(n, true)
}

fn unit_value(word: &str) -> Option<u64> {
    UNITS.iter().position(|w| *w == word).map(|v| v as u64)
}

fn tens_value(word: &str) -> Option<u64> {
    TENS.iter()
        .position(|w| !w.is_empty() && *w == word)
        .map(|v| v as u64 * 10)
}

/// Accumulating parse of a cardinal phrase. Accepts a superset of the canonical
/// forms; callers re-render to reject non-canonical phrasings.
pub fn parse_cardinal<S: AsRef<str>>(tokens: &[S]) -> Option<u64> {
    if tokens.is_empty() {
        return None;
    }
    let mut total: u64 = 0;
    let mut current: u64 = 0;
    for tok in tokens {
        let tok = tok.as_ref();
        if let Some(v) = unit_value(tok) {
            current = current.checked_add(v)?;
        } else if let Some(v) = tens_value(tok) {
            current = current.checked_add(v)?;
        } else if tok == "hundred" {
            if current == 0 {
                return None;
            }
            current = current.checked_mul(100)?;
        } else if tok == "and" {
            continue;
        } else if let Some((scale, _)) = SCALES.iter().find(|(_, name)| *name == tok) {
            if current == 0 {
                return None;
            }
            total = total.checked_add(current.checked_mul(*scale)?)?;
            current = 0;
        } else {
            return None;
        }
    }
    total.checked_add(current)
}

fn ordinalize_word(word: &str) -> String {
    match word {
        "one" => "first".into(),
        "two" => "second".into(),
        "three" => "third".into(),
        "five" => "fifth".into(),
        "eight" => "eighth".into(),
        "nine" => "ninth".into(),
        "twelve" => "twelfth".into(),
        w if w.ends_with('y') => format!("{}ieth", &w[..w.len() - 1]),
        w => format!("{w}th"),
    }
}

fn cardinalize_word(word: &str) -> Option<String> {
    let w = match word {
        "first" => "one".to_string(),
        "second" => "two".to_string(),
        "third" => "three".to_string(),
        "fifth" => "five".to_string(),
        "eighth" => "eight".to_string(),
        "ninth" => "nine".to_string(),
        "twelfth" => "twelve".to_string(),
        w if w.ends_with("ieth") => format!("{}y", &w[..w.len() - 4]),
        w if w.ends_with("th") => w[..w.len() - 2].to_string(),
        _ => return None,
    };
    Some(w)
}

/// Ordinal reading, e.g. 32 -> "thirty second".
pub fn ordinal(n: u64) -> Option<Vec<String>> {
    if n == 0 {
        return None;
    }
    let mut words = cardinal(n)?;
    let last = words.pop()?;
    words.push(ordinalize_word(&last));
    Some(words)
}

pub fn parse_ordinal<S: AsRef<str>>(tokens: &[S]) -> Option<u64> {
    let (last, head) = tokens.split_last()?;
    let mut words: Vec<String> = head.iter().map(|t| t.as_ref().to_string()).collect();
    words.push(cardinalize_word(last.as_ref())?);
    parse_cardinal(&words)
}

/// Written ordinal suffix: 1 -> "st", 12 -> "th", 22 -> "nd".
pub fn ordinal_suffix(n: u64) -> &'static str {
    match (n % 10, n % 100) {
        (_, 11..=13) => "th",
        (1, _) => "st",
        (2, _) => "nd",
        (3, _) => "rd",
        _ => "th",
    }
}

pub fn digit_word(d: u8, zero_as_oh: bool) -> &'static str {
    if d == 0 && zero_as_oh {
        "oh"
    } else {
        UNITS[d as usize]
    }
}

/// Digit value of a single spoken digit ("oh" counts as zero).
pub fn digit_value(word: &str) -> Option<u8> {
    match word {
        "oh" => Some(0),
        w => unit_value(w).filter(|v| *v < 10).map(|v| v as u8),
    }
}

/// True for any token the number lexicon can produce.
pub fn is_number_word(word: &str) -> bool {
    unit_value(word).is_some()
        || tens_value(word).is_some()
        || matches!(
            word,
            "hundred" | "thousand" | "million" | "oh" | "double" | "triple"
        )
        || cardinalize_word(word).is_some_and(|w| parse_cardinal(&[w]).is_some())
}
