//! Company mention detection.
//!
//! Matching is biased towards precision: a missed mention is preferred over
//! attributing an article to a company it does not discuss. Three pattern
//! families exist per company:
//!
//! * exchange-qualified tickers, `(NASDAQ:TSLA)`, with optional whitespace;
//! * bare tickers at word boundaries, case-sensitive, and only for tickers
//!   longer than [`MatcherConfig::short_ticker_max_len`];
//! * company names (display name, declared variants and legal-suffix
//!   stripped forms) matched word by word at word boundaries. Names are
//!   case-insensitive except that the first letter must be a capital, so
//!   ordinary prose like "the apple pie" is not a mention of Apple Inc.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;

use rayon::prelude::*;
use regex::{Regex, RegexBuilder, RegexSet, RegexSetBuilder};
use serde::{Deserialize, Serialize};

use crate::corpus::{Article, EntityUniverse, Polarity, Quarter};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatcherConfig {
    pub case_sensitive_tickers: bool,
    pub require_exchange_prefix_for_short_tickers: bool,
    pub short_ticker_max_len: usize,
    pub legal_suffixes: Vec<String>,
}

impl Default for MatcherConfig {
    fn default() -> Self {
        MatcherConfig {
            case_sensitive_tickers: true,
            require_exchange_prefix_for_short_tickers: true,
            short_ticker_max_len: 2,
            legal_suffixes: [
                "Inc", "Inc.", "Corp", "Corp.", "Co", "Co.", "Group", "Ltd", "PLC", "Company",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PatternKind {
    ExchangeTicker,
    BareTicker,
    Name,
}

#[derive(Debug, Clone)]
struct Pattern {
    company: usize,
    kind: PatternKind,
    literal: String,
    regex: Regex,
}

/// Compiled matchers for a whole universe. Immutable and `Sync`.
#[derive(Debug, Clone)]
pub struct MatcherSet {
    ids: Vec<String>,
    patterns: Vec<Pattern>,
    set: RegexSet,
}

/// One located company mention.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityMatch {
    pub canonical_id: String,
    pub matched_literal: String,
    pub byte_offset: usize,
}

/// The companies mentioned in one article, each at most once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccurrenceSet {
    pub article_id: String,
    pub quarter: Quarter,
    pub polarity: Polarity,
    pub companies: BTreeSet<String>,
    pub matches: Vec<EntityMatch>,
}

const WORD_BOUNDARY: &str = r"(?-u:\b)";

fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Wraps `body` in word-boundary assertions wherever the literal's edge is a
/// word character. A literal ending in `.` needs no trailing boundary.
fn bounded(literal: &str, body: String) -> String {
    let mut out = String::new();
    if literal.chars().next().is_some_and(is_word_char) {
        out.push_str(WORD_BOUNDARY);
    }
    out.push_str(&body);
    if literal.chars().last().is_some_and(is_word_char) {
        out.push_str(WORD_BOUNDARY);
    }
    out
}

fn normalize_name(name: &str) -> String {
    name.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

fn name_pattern(name: &str) -> String {
    let words: Vec<&str> = name.split_whitespace().collect();
    let mut parts = Vec::with_capacity(words.len());
    for (i, word) in words.iter().enumerate() {
        let mut chars = word.chars();
        let first = chars
            .next()
            .expect("split_whitespace yields non-empty words");
        let rest: String = chars.collect();
        if i == 0 && first.is_alphabetic() {
            let upper: String = first.to_uppercase().collect();
            let mut part = regex::escape(&upper);
            if !rest.is_empty() {
                part.push_str(&format!("(?i:{})", regex::escape(&rest)));
            }
            parts.push(part);
        } else {
            parts.push(format!("(?i:{})", regex::escape(word)));
        }
    }
    bounded(name, parts.join(r"\s+"))
}

fn ticker_pattern(ticker: &str, case_sensitive: bool) -> String {
    let body = if case_sensitive {
        regex::escape(ticker)
    } else {
        format!("(?i:{})", regex::escape(ticker))
    };
    bounded(ticker, body)
}

fn exchange_pattern(ticker: &str, case_sensitive: bool) -> String {
    let t = if case_sensitive {
        regex::escape(ticker)
    } else {
        format!("(?i:{})", regex::escape(ticker))
    };
    format!(r"\(\s*[A-Z][A-Za-z]{{1,9}}\s*:\s*{t}\s*\)")
}

/// All suffix-stripped forms of `name`, longest first, excluding `name`
/// itself. "Goldman Sachs Group Inc." yields "Goldman Sachs Group" and
/// "Goldman Sachs".
pub fn stripped_variants(name: &str, suffixes: &[String]) -> Vec<String> {
    let mut words: Vec<&str> = name.split_whitespace().collect();
    let mut out = Vec::new();
    loop {
        if words.len() < 2 {
            break;
        }
        let last = words[words.len() - 1].trim_start_matches(',');
        let is_suffix = suffixes.iter().any(|s| s.eq_ignore_ascii_case(last));
        if !is_suffix {
            break;
        }
        words.pop();
        let mut form = words.join(" ");
        while form.ends_with(',') {
            form.pop();
        }
        if let Some(last) = words.last_mut() {
            *last = last.trim_end_matches(',');
        }
        if form.is_empty() {
            break;
        }
        out.push(form);
    }
    out
}

pub fn compile_matchers(universe: &EntityUniverse, config: &MatcherConfig) -> Result<MatcherSet> {
    let mut ids = Vec::with_capacity(universe.len());
    let mut patterns = Vec::new();
    let mut name_owner: HashMap<String, usize> = HashMap::new();

    for (company, rec) in universe.records().iter().enumerate() {
        ids.push(rec.canonical_id.clone());
        let mut mine: Vec<(PatternKind, String, String)> = Vec::new();

        for ticker in rec.tickers() {
            mine.push((
                PatternKind::ExchangeTicker,
                format!("({}:{})", rec.exchange, ticker),
                exchange_pattern(ticker, config.case_sensitive_tickers),
            ));
            let short = ticker.chars().count() <= config.short_ticker_max_len;
            if !(short && config.require_exchange_prefix_for_short_tickers) {
                mine.push((
                    PatternKind::BareTicker,
                    ticker.to_owned(),
                    ticker_pattern(ticker, config.case_sensitive_tickers),
                ));
            }
        }

        let mut names: BTreeMap<String, String> = BTreeMap::new();
        for declared in std::iter::once(&rec.display_name).chain(&rec.name_variants) {
            let declared = declared.trim();
            if declared.is_empty() {
                continue;
            }
            let forms = std::iter::once(declared.to_owned())
                .chain(stripped_variants(declared, &config.legal_suffixes));
            for form in forms {
                names.entry(normalize_name(&form)).or_insert(form);
            }
        }
        for (key, form) in names {
            match name_owner.get(&key) {
                Some(&other) if other != company => {
                    return Err(Error::PatternCollision {
                        literal: form,
                        first: ids[other].clone(),
                        second: rec.canonical_id.clone(),
                    });
                }
                _ => {
                    name_owner.insert(key, company);
                }
            }
            let pattern = name_pattern(&form);
            mine.push((PatternKind::Name, form, pattern));
        }

        // Longest literal first; the first hit per company is reported.
        mine.sort_by(|a, b| {
            b.1.chars()
                .count()
                .cmp(&a.1.chars().count())
                .then(a.0.cmp(&b.0))
                .then(a.1.cmp(&b.1))
        });
        for (kind, literal, pattern) in mine {
            let regex = RegexBuilder::new(&pattern).build()?;
            patterns.push(Pattern {
                company,
                kind,
                literal,
                regex,
            });
        }
    }

    let set = RegexSetBuilder::new(patterns.iter().map(|p| p.regex.as_str()))
        .size_limit(1 << 30)
        .dfa_size_limit(1 << 28)
        .build()?;
    Ok(MatcherSet { ids, patterns, set })
}

impl MatcherSet {
    pub fn company_count(&self) -> usize {
        self.ids.len()
    }

    pub fn pattern_count(&self) -> usize {
        self.patterns.len()
    }

    /// Literals compiled for `id` together with their kind, longest first.
    pub fn literals_for(&self, id: &str) -> Vec<(PatternKind, &str)> {
        self.patterns
            .iter()
            .filter(|p| self.ids[p.company] == id)
            .map(|p| (p.kind, p.literal.as_str()))
            .collect()
    }

    /// Finds company mentions in `text`, one per company, ordered by id.
    pub fn find(&self, text: &str) -> Vec<EntityMatch> {
        let mut seen = vec![false; self.ids.len()];
        let mut found = Vec::new();
        for idx in self.set.matches(text).iter() {
            let pattern = &self.patterns[idx];
            if seen[pattern.company] {
                continue;
            }
            if let Some(m) = pattern.regex.find(text) {
                seen[pattern.company] = true;
                found.push(EntityMatch {
                    canonical_id: self.ids[pattern.company].clone(),
                    matched_literal: m.as_str().to_owned(),
                    byte_offset: m.start(),
                });
            }
        }
        found.sort_by(|a, b| a.canonical_id.cmp(&b.canonical_id));
        found
    }
}

/// Title and body joined as matched.
pub fn article_text(article: &Article) -> String {
    format!("{}\n{}", article.title, article.body)
}

pub fn extract_occurrences(article: &Article, matchers: &MatcherSet) -> OccurrenceSet {
    let matches = matchers.find(&article_text(article));
    OccurrenceSet {
        article_id: article.id.clone(),
        quarter: article.quarter(),
        polarity: article.polarity,
        companies: matches.iter().map(|m| m.canonical_id.clone()).collect(),
        matches,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuarterSummary {
    pub quarter: Quarter,
    pub articles: usize,
    pub positive: usize,
    pub negative: usize,
    pub with_mentions: usize,
    pub mentions: usize,
}

/// Occurrence sets grouped by quarter, one per article.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedCorpus {
    pub by_quarter: BTreeMap<Quarter, Vec<OccurrenceSet>>,
}

impl ParsedCorpus {
    pub fn from_sets(sets: Vec<OccurrenceSet>) -> Self {
        let mut by_quarter: BTreeMap<Quarter, Vec<OccurrenceSet>> = BTreeMap::new();
        for set in sets {
            by_quarter.entry(set.quarter).or_default().push(set);
        }
        ParsedCorpus { by_quarter }
    }

    pub fn quarter(&self, q: Quarter) -> &[OccurrenceSet] {
        self.by_quarter.get(&q).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn is_empty(&self) -> bool {
        self.by_quarter.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &OccurrenceSet> {
        self.by_quarter.values().flatten()
    }

    pub fn summary(&self) -> Vec<QuarterSummary> {
        self.by_quarter
            .iter()
            .map(|(&quarter, sets)| QuarterSummary {
                quarter,
                articles: sets.len(),
                positive: sets
                    .iter()
                    .filter(|s| s.polarity == Polarity::Positive)
                    .count(),
                negative: sets
                    .iter()
                    .filter(|s| s.polarity == Polarity::Negative)
                    .count(),
                with_mentions: sets.iter().filter(|s| !s.companies.is_empty()).count(),
                mentions: sets.iter().map(|s| s.companies.len()).sum(),
            })
            .collect()
    }
}

pub fn parse_corpus(articles: &[Article], matchers: &MatcherSet) -> ParsedCorpus {
    let sets: Vec<OccurrenceSet> = articles
        .par_iter()
        .map(|a| extract_occurrences(a, matchers))
        .collect();
    let parsed = ParsedCorpus::from_sets(sets);
    for s in parsed.summary() {
        log::info!(
            "{}: {} articles ({} positive, {} negative), {} with mentions, {} mentions",
            s.quarter,
            s.articles,
            s.positive,
            s.negative,
            s.with_mentions,
            s.mentions
        );
    }
    parsed
}

/// Debug dump: `article_id,canonical_id,matched_literal,byte_offset`.
pub fn write_match_dump<W: Write>(parsed: &ParsedCorpus, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "article_id",
        "canonical_id",
        "matched_literal",
        "byte_offset",
    ])?;
    for set in parsed.iter() {
        for m in &set.matches {
            w.write_record([
                set.article_id.as_str(),
                m.canonical_id.as_str(),
                m.matched_literal.as_str(),
                &m.byte_offset.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<matches>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::EntityRecord;

    fn rec(id: &str, name: &str, ticker: &str, exchange: &str, variants: &[&str]) -> EntityRecord {
        let mut name_variants = vec![name.to_owned()];
        name_variants.extend(variants.iter().map(|s| s.to_string()));
        EntityRecord {
            canonical_id: id.into(),
            display_name: name.into(),
            primary_ticker: ticker.into(),
            exchange: exchange.into(),
            name_variants,
            merged_tickers: vec![],
        }
    }

    fn universe() -> EntityUniverse {
        EntityUniverse::from_records(vec![
            rec("AAPL", "Apple Inc.", "AAPL", "NASDAQ", &[]),
            rec("TSLA", "Tesla Motors Inc.", "TSLA", "NASDAQ", &["Tesla"]),
            rec("GS", "Goldman Sachs Group Inc.", "GS", "NYSE", &[]),
            rec("T", "AT&T Inc.", "T", "NYSE", &[]),
        ])
        .unwrap()
    }

    fn find(text: &str) -> Vec<String> {
        let m = compile_matchers(&universe(), &MatcherConfig::default()).unwrap();
        m.find(text).into_iter().map(|m| m.canonical_id).collect()
    }

    #[test]
    fn exchange_qualified_ticker_tolerates_whitespace() {
        assert_eq!(find("I am long (NASDAQ:TSLA) this quarter"), vec!["TSLA"]);
        assert_eq!(find("see (NASDAQ: TSLA)"), vec!["TSLA"]);
        assert_eq!(find("see ( NASDAQ : TSLA )"), vec!["TSLA"]);
    }

    #[test]
    fn repeated_mentions_count_once() {
        let m = compile_matchers(&universe(), &MatcherConfig::default()).unwrap();
        let found = m.find("AAPL AAPL Apple Inc.");
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].canonical_id, "AAPL");
        // longest variant wins the report
        assert_eq!(found[0].matched_literal, "Apple Inc.");
    }

    #[test]
    fn lowercase_prose_is_not_a_mention() {
        assert!(find("the apple pie was great").is_empty());
        assert!(find("pineapple and snapple").is_empty());
        assert!(find("aapl is lowercase here").is_empty());
        assert!(find("AAPLX is another symbol").is_empty());
    }

    #[test]
    fn short_tickers_need_exchange_prefix() {
        assert!(find("GS said T was up").is_empty());
        assert_eq!(find("(NYSE:GS) and (NYSE:T)"), vec!["GS", "T"]);
        let cfg = MatcherConfig {
            require_exchange_prefix_for_short_tickers: false,
            ..MatcherConfig::default()
        };
        let m = compile_matchers(&universe(), &cfg).unwrap();
        assert_eq!(m.find("GS rallied").len(), 1);
    }

    #[test]
    fn suffix_stripping_generates_partial_names() {
        let s = MatcherConfig::default().legal_suffixes;
        assert_eq!(
            stripped_variants("Goldman Sachs Group Inc.", &s),
            vec!["Goldman Sachs Group", "Goldman Sachs"]
        );
        assert_eq!(stripped_variants("Apple, Inc.", &s), vec!["Apple"]);
        assert!(stripped_variants("Inc.", &s).is_empty());
        assert_eq!(
            find("An article mentioning Goldman Sachs today"),
            vec!["GS"]
        );
        assert_eq!(find("GOLDMAN   SACHS beat estimates"), vec!["GS"]);
        assert_eq!(find("AT&T raised its dividend"), vec!["T"]);
    }

    #[test]
    fn variant_collision_is_an_error() {
        let u = EntityUniverse::from_records(vec![
            rec("A", "National Foods Corp", "NFC", "NYSE", &["National"]),
            rec("B", "National Oilwell Inc", "NOV", "NYSE", &["National"]),
        ])
        .unwrap();
        match compile_matchers(&u, &MatcherConfig::default()) {
            Err(Error::PatternCollision { first, second, .. }) => {
                assert_eq!((first.as_str(), second.as_str()), ("A", "B"));
            }
            other => panic!("expected collision, got {other:?}"),
        }
    }

    #[test]
    fn literals_are_longest_first() {
        let m = compile_matchers(&universe(), &MatcherConfig::default()).unwrap();
        let lits = m.literals_for("GS");
        let lens: Vec<usize> = lits.iter().map(|(_, l)| l.chars().count()).collect();
        let mut sorted = lens.clone();
        sorted.sort_by(|a, b| b.cmp(a));
        assert_eq!(lens, sorted);
        assert!(lits.iter().all(|(k, _)| *k != PatternKind::BareTicker));
    }
}
