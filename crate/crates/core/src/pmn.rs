//! Public MeSH Note parsing.
//!
//! A note is a run of semicolon-separated sentences. The sentences of
//! interest have the shape `X was indexed under Y1 1990-2000, Y2 2001-2005`,
//! where `X` names the predecessor record and each `Yi` is a heading the
//! topic was indexed under during the given period. Real notes are
//! irregular; every irregularity is reported as a [`ParseWarning`] and
//! parsing never fails.

use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

pub const MIN_YEAR: i32 = 1900;
pub const MAX_YEAR: i32 = 2100;

static INDEXED_UNDER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)was\s+indexed\s+under").unwrap());

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearRange {
    pub start: i32,
    pub end: Option<i32>,
}

impl fmt::Display for YearRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.end {
            Some(end) => write!(f, "{}-{}", self.start, end),
            None => write!(f, "{}", self.start),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HostMention {
    pub name: String,
    pub period: Option<YearRange>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexedClause {
    pub x_text: String,
    pub hosts: Vec<HostMention>,
}

impl IndexedClause {
    /// Renders the clause back into note form, hosts joined by `", "`.
    pub fn render(&self) -> String {
        let hosts: Vec<String> = self
            .hosts
            .iter()
            .map(|h| match (&h.period, h.name.is_empty()) {
                (Some(p), true) => p.to_string(),
                (Some(p), false) => format!("{} {}", h.name, p),
                (None, _) => h.name.clone(),
            })
            .collect();
        let mut out = String::new();
        if !self.x_text.is_empty() {
            out.push_str(&self.x_text);
            out.push(' ');
        }
        out.push_str("was indexed under");
        if !hosts.is_empty() {
            out.push(' ');
            out.push_str(&hosts.join(", "));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ParseWarning {
    EmptyX,
    MissingHosts,
    EmptyHostName,
    NoIntroYear,
    UnparsedSentence,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PmnParse {
    pub intro_year: Option<i32>,
    pub clauses: Vec<IndexedClause>,
    pub warnings: Vec<ParseWarning>,
}

impl PmnParse {
    pub fn hosts(&self) -> impl Iterator<Item = &HostMention> {
        self.clauses.iter().flat_map(|c| c.hosts.iter())
    }
}

/// Case-insensitive, whitespace-tolerant test for the indexed-under keyword.
pub fn matches_indexed_pattern(pmn: &str) -> bool {
    INDEXED_UNDER.is_match(pmn)
}

pub fn split_sentences(pmn: &str) -> Vec<&str> {
    pmn.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect()
}

fn parse_intro_year(sentence: &str) -> Option<i32> {
    if sentence.len() != 4 || !sentence.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let year: i32 = sentence.parse().ok()?;
    (MIN_YEAR..=MAX_YEAR).contains(&year).then_some(year)
}

struct YearToken {
    start: usize,
    end: usize,
    range: YearRange,
}

fn in_year_bounds(y: i32) -> bool {
    (MIN_YEAR..=MAX_YEAR).contains(&y)
}

/// Finds `YYYY` and `YYYY-YYYY` tokens that stand alone between
/// non-alphanumeric boundaries. Half-open ranges such as `1987-` and
/// numbers outside the year bounds are left as plain text.
fn year_tokens(text: &str, warnings: &mut Vec<ParseWarning>) -> Vec<YearToken> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let n = chars.len();
    let byte_at = |i: usize| if i < n { chars[i].0 } else { text.len() };
    let is_alnum = |i: usize| i < n && chars[i].1.is_alphanumeric();
    let digit_run = |from: usize| {
        let mut j = from;
        while j < n && chars[j].1.is_ascii_digit() {
            j += 1;
        }
        j
    };
    let number = |from: usize, to: usize| -> i32 { text[byte_at(from)..byte_at(to)].parse().unwrap() };

    let mut tokens = Vec::new();
    let mut i = 0;
    while i < n {
        if !chars[i].1.is_ascii_digit() {
            i += 1;
            continue;
        }
        let j = digit_run(i);
        let standalone = j - i == 4
            && (i == 0 || !(chars[i - 1].1.is_alphanumeric() || chars[i - 1].1 == '-'))
            && !is_alnum(j);
        if !standalone {
            i = j;
            continue;
        }
        let start = number(i, j);
        if j < n && chars[j].1 == '-' {
            let k = digit_run(j + 1);
            if k - (j + 1) == 4 && !is_alnum(k) {
                let end = number(j + 1, k);
                if in_year_bounds(start) && in_year_bounds(end) {
                    if start <= end {
                        tokens.push(YearToken {
                            start: byte_at(i),
                            end: byte_at(k),
                            range: YearRange {
                                start,
                                end: Some(end),
                            },
                        });
                    } else {
                        warnings.push(ParseWarning::UnparsedSentence);
                    }
                }
                i = k;
            } else {
                i = j;
            }
            continue;
        }
        if in_year_bounds(start) {
            tokens.push(YearToken {
                start: byte_at(i),
                end: byte_at(j),
                range: YearRange { start, end: None },
            });
        }
        i = j;
    }
    tokens
}

fn strip_leading_separators(mut s: &str) -> &str {
    loop {
        s = s.trim_start();
        if let Some(rest) = s.strip_prefix(',') {
            s = rest;
            continue;
        }
        if s.get(..3).is_some_and(|w| w.eq_ignore_ascii_case("and")) {
            let rest = &s[3..];
            if rest.is_empty() || rest.starts_with(|c: char| c.is_whitespace() || c == ',') {
                s = rest;
                continue;
            }
        }
        return s;
    }
}

fn parse_hosts(remainder: &str, warnings: &mut Vec<ParseWarning>) -> Vec<HostMention> {
    let mut hosts = Vec::new();
    let mut cursor = 0;
    for token in year_tokens(remainder, warnings) {
        let name = strip_leading_separators(&remainder[cursor..token.start]).trim_end();
        if name.is_empty() {
            warnings.push(ParseWarning::EmptyHostName);
        }
        hosts.push(HostMention {
            name: name.to_string(),
            period: Some(token.range),
        });
        cursor = token.end;
    }
    let tail = strip_leading_separators(&remainder[cursor..]).trim_end();
    if tail.chars().any(char::is_alphanumeric) {
        hosts.push(HostMention {
            name: tail.to_string(),
            period: None,
        });
    }
    if hosts.is_empty() {
        warnings.push(ParseWarning::MissingHosts);
    }
    hosts
}

fn parse_clause(sentence: &str, warnings: &mut Vec<ParseWarning>) -> Option<IndexedClause> {
    let keyword = INDEXED_UNDER.find(sentence)?;
    let x_text = sentence[..keyword.start()].trim();
    if x_text.is_empty() {
        warnings.push(ParseWarning::EmptyX);
    }
    let mut remainder = &sentence[keyword.end()..];
    if let Some(again) = INDEXED_UNDER.find(remainder) {
        // Only the first keyword of a sentence is structured.
        warnings.push(ParseWarning::UnparsedSentence);
        remainder = &remainder[..again.start()];
    }
    let hosts = parse_hosts(remainder, warnings);
    Some(IndexedClause {
        x_text: x_text.to_string(),
        hosts,
    })
}

pub fn parse_pmn(pmn: &str) -> PmnParse {
    let sentences = split_sentences(pmn);
    let mut parse = PmnParse {
        intro_year: sentences.first().and_then(|s| parse_intro_year(s)),
        ..PmnParse::default()
    };
    if parse.intro_year.is_none() {
        parse.warnings.push(ParseWarning::NoIntroYear);
    }
    for sentence in sentences {
        if let Some(clause) = parse_clause(sentence, &mut parse.warnings) {
            parse.clauses.push(clause);
        }
    }
    parse
}
