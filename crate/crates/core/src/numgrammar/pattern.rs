//! Written-side matchers and spoken-side templates of a verbalization rule.
//!
//! A written pattern mixes literal text with typed fields:
//! `{h:int:1-12}:{m:d2:10-59}` matches "4:15" binding `h=4, m=15`.
//! Field kinds are `int` (no leading zeros), `dN` (exactly N digits) and
//! `ord` (integer plus the matching English suffix, "31st"). An optional
//! inclusive range restricts the numeric value.
//!
//! A spoken template is a whitespace-separated list of literal words and
//! slots `{field:renderer}`: `{h:card} {m:card}`.

use std::collections::BTreeMap;
use std::fmt;

use regex::Regex;

use super::renderer::Renderer;
use super::words::ordinal_suffix;

pub type Bindings = BTreeMap<String, String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Int,
    Fixed(usize),
    Ord,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Field {
    pub name: String,
    pub kind: FieldKind,
    pub range: Option<(u64, u64)>,
}

impl Field {
    fn regex(&self) -> String {
        match self.kind {
            FieldKind::Int => "(0|[1-9][0-9]*)".to_string(),
            FieldKind::Fixed(n) => format!("([0-9]{{{n}}})"),
            FieldKind::Ord => "([1-9][0-9]*(?:st|nd|rd|th))".to_string(),
        }
    }

    /// Captured text -> bound value (digits only).
    fn bind(&self, captured: &str) -> Option<String> {
        let digits = match self.kind {
            FieldKind::Ord => {
                let split = captured.len() - 2;
                let (digits, suffix) = captured.split_at(split);
                if ordinal_suffix(digits.parse().ok()?) != suffix {
                    return None;
                }
                digits
            }
            _ => captured,
        };
        self.in_range(digits).then(|| digits.to_string())
    }

    fn in_range(&self, digits: &str) -> bool {
        match (self.range, digits.parse::<u64>()) {
            (_, Err(_)) => false,
            (None, Ok(_)) => true,
            (Some((lo, hi)), Ok(v)) => lo <= v && v <= hi,
        }
    }

    /// Bound value -> written text; `None` if the value cannot be expressed.
    fn format(&self, value: &str) -> Option<String> {
        let v: u64 = value.parse().ok()?;
        if !self.in_range(value) {
            return None;
        }
        match self.kind {
            FieldKind::Int => Some(v.to_string()),
            FieldKind::Fixed(n) => {
                let s = format!("{v:0n$}");
                (s.len() == n).then_some(s)
            }
            FieldKind::Ord => (v > 0).then(|| format!("{v}{}", ordinal_suffix(v))),
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            FieldKind::Int => "int".to_string(),
            FieldKind::Fixed(n) => format!("d{n}"),
            FieldKind::Ord => "ord".to_string(),
        };
        write!(f, "{{{}:{kind}", self.name)?;
        if let Some((lo, hi)) = self.range {
            write!(f, ":{lo}-{hi}")?;
        }
        f.write_str("}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WrittenPart {
    Literal(String),
    Field(Field),
}

#[derive(Debug, Clone)]
pub struct WrittenPattern {
    parts: Vec<WrittenPart>,
    regex: Regex,
}

fn parse_field(body: &str) -> Result<Field, String> {
    let mut it = body.splitn(3, ':');
    let name = it.next().unwrap_or_default();
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return Err(format!("bad field name in `{{{body}}}`"));
    }
    let kind = match it.next() {
        Some("int") => FieldKind::Int,
        Some("ord") => FieldKind::Ord,
        Some(k) if k.starts_with('d') => {
            let n: usize = k[1..]
                .parse()
                .map_err(|_| format!("bad field kind `{k}`"))?;
            if n == 0 {
                return Err("zero-width digit field".into());
            }
            FieldKind::Fixed(n)
        }
        Some(k) => return Err(format!("bad field kind `{k}`")),
        None => return Err(format!("field `{name}` has no kind")),
    };
    let range = match it.next() {
        None => None,
        Some(r) => {
            let (lo, hi) = r
                .split_once('-')
                .ok_or_else(|| format!("bad range `{r}`"))?;
            let lo: u64 = lo.parse().map_err(|_| format!("bad range `{r}`"))?;
            let hi: u64 = hi.parse().map_err(|_| format!("bad range `{r}`"))?;
            if lo > hi {
                return Err(format!("empty range `{r}`"));
            }
            Some((lo, hi))
        }
    };
    Ok(Field {
        name: name.to_string(),
        kind,
        range,
    })
}

impl WrittenPattern {
    pub fn parse(src: &str) -> Result<Self, String> {
        let mut parts = Vec::new();
        let mut literal = String::new();
        let mut rest = src;
        while let Some(open) = rest.find('{') {
            literal.push_str(&rest[..open]);
            let close = rest[open..]
                .find('}')
                .ok_or_else(|| format!("unclosed field in `{src}`"))?;
            if !literal.is_empty() {
                parts.push(WrittenPart::Literal(std::mem::take(&mut literal)));
            }
            parts.push(WrittenPart::Field(parse_field(
                &rest[open + 1..open + close],
            )?));
            rest = &rest[open + close + 1..];
        }
        literal.push_str(rest);
        if !literal.is_empty() {
            parts.push(WrittenPart::Literal(literal));
        }
        if parts.is_empty() {
            return Err("empty written pattern".into());
        }
        if src.contains('}') && src.matches('}').count() != src.matches('{').count() {
            return Err(format!("unbalanced braces in `{src}`"));
        }
        let mut names = Vec::new();
        let mut re = String::from("^");
        for part in &parts {
            match part {
                WrittenPart::Literal(l) => re.push_str(&regex::escape(l)),
                WrittenPart::Field(f) => {
                    if names.contains(&f.name) {
                        return Err(format!("field `{}` repeated", f.name));
                    }
                    names.push(f.name.clone());
                    re.push_str(&f.regex());
                }
            }
        }
        re.push('$');
        let regex = Regex::new(&re).map_err(|e| e.to_string())?;
        Ok(Self { parts, regex })
    }

    pub fn fields(&self) -> impl Iterator<Item = &Field> {
        self.parts.iter().filter_map(|p| match p {
            WrittenPart::Field(f) => Some(f),
            WrittenPart::Literal(_) => None,
        })
    }

    /// Match a written value, returning its field bindings.
    pub fn matches(&self, written: &str) -> Option<Bindings> {
        let caps = self.regex.captures(written)?;
        let mut out = Bindings::new();
        for (i, field) in self.fields().enumerate() {
            let captured = caps.get(i + 1)?.as_str();
            out.insert(field.name.clone(), field.bind(captured)?);
        }
        Some(out)
    }

    /// Inverse of `matches`.
    pub fn format(&self, bindings: &Bindings) -> Option<String> {
        let mut out = String::new();
        for part in &self.parts {
            match part {
                WrittenPart::Literal(l) => out.push_str(l),
                WrittenPart::Field(f) => out.push_str(&f.format(bindings.get(&f.name)?)?),
            }
        }
        Some(out)
    }
}

impl fmt::Display for WrittenPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for part in &self.parts {
            match part {
                WrittenPart::Literal(l) => f.write_str(l)?,
                WrittenPart::Field(field) => write!(f, "{field}")?,
            }
        }
        Ok(())
    }
}

impl PartialEq for WrittenPattern {
    fn eq(&self, other: &Self) -> bool {
        self.parts == other.parts
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SpokenPart {
    Word(String),
    Slot { field: String, renderer: Renderer },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpokenTemplate {
    parts: Vec<SpokenPart>,
}

impl SpokenTemplate {
    pub fn parse(src: &str) -> Result<Self, String> {
        let mut parts = Vec::new();
        for tok in src.split_whitespace() {
            if let Some(body) = tok.strip_prefix('{') {
                let body = body
                    .strip_suffix('}')
                    .ok_or_else(|| format!("bad slot `{tok}`"))?;
                let (field, renderer) = body
                    .split_once(':')
                    .ok_or_else(|| format!("slot `{tok}` needs a renderer"))?;
                parts.push(SpokenPart::Slot {
                    field: field.to_string(),
                    renderer: renderer.parse()?,
                });
            } else if tok.contains(['{', '}']) || tok.bytes().any(|b| b.is_ascii_digit()) {
                return Err(format!("bad spoken word `{tok}`"));
            } else {
                parts.push(SpokenPart::Word(tok.to_string()));
            }
        }
        if parts.is_empty() {
            return Err("empty spoken template".into());
        }
        Ok(Self { parts })
    }

    pub fn parts(&self) -> &[SpokenPart] {
        &self.parts
    }

    pub fn slot_fields(&self) -> impl Iterator<Item = &str> {
        self.parts.iter().filter_map(|p| match p {
            SpokenPart::Slot { field, .. } => Some(field.as_str()),
            SpokenPart::Word(_) => None,
        })
    }

    pub fn render(&self, bindings: &Bindings) -> Option<Vec<String>> {
        let mut out = Vec::new();
        for part in &self.parts {
            match part {
                SpokenPart::Word(w) => out.push(w.clone()),
                SpokenPart::Slot { field, renderer } => {
                    out.extend(renderer.render(bindings.get(field)?)?)
                }
            }
        }
        Some(out)
    }

    /// Every way a prefix of `tokens` can be read by this template, as
    /// `(consumed, bindings)`. Bindings are raw parses and may be inexact.
    pub fn parse_prefixes(&self, tokens: &[String]) -> Vec<(usize, Bindings)> {
        let mut out = Vec::new();
        self.walk(0, tokens, 0, Bindings::new(), &mut out);
        out
    }

    fn walk(
        &self,
        part: usize,
        tokens: &[String],
        pos: usize,
        bindings: Bindings,
        out: &mut Vec<(usize, Bindings)>,
    ) {
        let Some(p) = self.parts.get(part) else {
            out.push((pos, bindings));
            return;
        };
        match p {
            SpokenPart::Word(w) => {
                if tokens.get(pos) == Some(w) {
                    self.walk(part + 1, tokens, pos + 1, bindings, out);
                }
            }
            SpokenPart::Slot { field, renderer } => {
                for (used, value) in renderer.parse_prefixes(&tokens[pos.min(tokens.len())..]) {
                    if let Some(prev) = bindings.get(field) {
                        if prev.parse::<u64>().ok() != value.parse::<u64>().ok() {
                            continue;
                        }
                    }
                    let mut next = bindings.clone();
                    next.insert(field.clone(), value);
                    self.walk(part + 1, tokens, pos + used, next, out);
                }
            }
        }
    }
}

impl fmt::Display for SpokenTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for part in &self.parts {
            if !first {
                f.write_str(" ")?;
            }
            first = false;
            match part {
                SpokenPart::Word(w) => f.write_str(w)?,
                SpokenPart::Slot { field, renderer } => write!(f, "{{{field}:{renderer}}}")?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_pattern_binds_fields() {
        let p = WrittenPattern::parse("{h:int:1-12}:{m:d2:10-59}").unwrap();
        let b = p.matches("4:15").unwrap();
        assert_eq!(b["h"], "4");
        assert_eq!(b["m"], "15");
        assert!(p.matches("13:15").is_none());
        assert!(p.matches("4:05").is_none());
        assert!(p.matches("04:15").is_none());
        assert_eq!(p.format(&b).unwrap(), "4:15");
        assert_eq!(p.to_string(), "{h:int:1-12}:{m:d2:10-59}");
    }

    #[test]
    fn fixed_width_pads_on_format() {
        let p = WrittenPattern::parse("{h:int:1-12}:{m:d2:1-9}").unwrap();
        let mut b = Bindings::new();
        b.insert("h".into(), "10".into());
        b.insert("m".into(), "5".into());
        assert_eq!(p.format(&b).unwrap(), "10:05");
        assert_eq!(p.matches("10:05").unwrap()["m"], "05");
    }

    #[test]
    fn ordinal_suffix_must_agree() {
        let p = WrittenPattern::parse("{d:ord:1-99}").unwrap();
        assert_eq!(p.matches("31st").unwrap()["d"], "31");
        assert!(p.matches("31th").is_none());
        assert!(p.matches("12nd").is_none());
        assert!(p.matches("31").is_none());
    }

    #[test]
    fn literals_are_escaped() {
        let p = WrittenPattern::parse("${d:int}.{c:d2}").unwrap();
        assert!(p.matches("$180.50").is_some());
        assert!(p.matches("$180x50").is_none());
    }

    #[test]
    fn malformed_patterns() {
        for bad in [
            "",
            "{x",
            "{:int}",
            "{x:float}",
            "{x:int:5-1}",
            "{x:int}{x:int}",
            "{x:d0}",
        ] {
            assert!(WrittenPattern::parse(bad).is_err(), "{bad}");
        }
        for bad in ["", "{h}", "{h:words}", "4 o'clock", "{h:card"] {
            assert!(SpokenTemplate::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn spoken_parse_prefixes() {
        let t = SpokenTemplate::parse("{h:card} oh {m:card}").unwrap();
        let toks: Vec<String> = "ten oh five door".split(' ').map(String::from).collect();
        let parses = t.parse_prefixes(&toks);
        assert_eq!(parses.len(), 1);
        assert_eq!(parses[0].0, 3);
        assert_eq!(t.render(&parses[0].1).unwrap().join(" "), "ten oh five");
    }
}
