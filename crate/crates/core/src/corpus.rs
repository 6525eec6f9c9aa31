//! Article corpus, entity universe, market caps and daily prices.
//!
//! Everything here is loaded once and treated as immutable afterwards.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, Datelike, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Author-assigned article label. The source data has no neutral class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Positive => "positive",
            Polarity::Negative => "negative",
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Article {
    pub id: String,
    pub published_at: DateTime<Utc>,
    pub author_id: String,
    pub polarity: Polarity,
    pub title: String,
    pub body: String,
}

impl Article {
    pub fn quarter(&self) -> Quarter {
        quarter_of(self.published_at)
    }
}

/// A calendar quarter in UTC, written `YYYYQn`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Quarter {
    year: i32,
    index: u8,
}

impl Quarter {
    pub fn new(year: i32, index: u8) -> Result<Self> {
        if !(1..=4).contains(&index) {
            return Err(Error::Validation(format!(
                "quarter index {index} outside 1..4"
            )));
        }
        Ok(Quarter { year, index })
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn index(self) -> u8 {
        self.index
    }

    pub fn first_day(self) -> NaiveDate {
        let month = 3 * (self.index as u32 - 1) + 1;
        NaiveDate::from_ymd_opt(self.year, month, 1).expect("valid quarter start")
    }

    pub fn last_day(self) -> NaiveDate {
        self.next()
            .first_day()
            .pred_opt()
            .expect("valid quarter end")
    }

    pub fn next(self) -> Quarter {
        if self.index == 4 {
            Quarter {
                year: self.year + 1,
                index: 1,
            }
        } else {
            Quarter {
                year: self.year,
                index: self.index + 1,
            }
        }
    }

    /// Inclusive range of quarters; empty when `to < from`.
    pub fn range(from: Quarter, to: Quarter) -> Vec<Quarter> {
        let mut out = Vec::new();
        let mut q = from;
        while q <= to {
            out.push(q);
            q = q.next();
        }
        out
    }
}

impl fmt::Display for Quarter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}Q{}", self.year, self.index)
    }
}

impl FromStr for Quarter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Validation(format!("malformed quarter `{s}`, expected YYYYQn"));
        let (year, index) = s.trim().split_once('Q').ok_or_else(bad)?;
        if year.len() != 4 || index.len() != 1 {
            return Err(bad());
        }
        let year: i32 = year.parse().map_err(|_| bad())?;
        let index: u8 = index.parse().map_err(|_| bad())?;
        Quarter::new(year, index).map_err(|_| bad())
    }
}

impl Serialize for Quarter {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Quarter {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn quarter_of(ts: DateTime<Utc>) -> Quarter {
    quarter_of_date(ts.date_naive())
}

pub fn quarter_of_date(date: NaiveDate) -> Quarter {
    Quarter {
        year: date.year(),
        index: (date.month0() / 3 + 1) as u8,
    }
}

/// Quarters that take part in the analysis. Articles outside it are kept on
/// load and reported as excluded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisWindow {
    pub start: Quarter,
    pub end: Quarter,
}

impl Default for AnalysisWindow {
    fn default() -> Self {
        AnalysisWindow {
            start: Quarter {
                year: 2011,
                index: 1,
            },
            end: Quarter {
                year: 2016,
                index: 2,
            },
        }
    }
}

impl AnalysisWindow {
    pub fn contains(&self, q: Quarter) -> bool {
        self.start <= q && q <= self.end
    }

    pub fn quarters(&self) -> Vec<Quarter> {
        Quarter::range(self.start, self.end)
    }
}

impl FromStr for AnalysisWindow {
    type Err = Error;

    /// Parses `FROM..TO`, e.g. `2011Q1..2016Q2`.
    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once("..")
            .ok_or_else(|| Error::Validation(format!("malformed quarter range `{s}`")))?;
        let window = AnalysisWindow {
            start: a.parse()?,
            end: b.parse()?,
        };
        if window.end < window.start {
            return Err(Error::Validation(format!("empty quarter range `{s}`")));
        }
        Ok(window)
    }
}

/// Reads line-delimited JSON articles and returns them sorted by
/// publication time (ties by id).
pub fn load_articles(path: impl AsRef<Path>) -> Result<Vec<Article>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut articles = Vec::new();
    let mut seen = HashSet::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let article: Article =
            serde_json::from_str(&line).map_err(|e| Error::parse(path, n + 1, e.to_string()))?;
        if article.id.is_empty() {
            return Err(Error::parse(path, n + 1, "empty article id"));
        }
        if !seen.insert(article.id.clone()) {
            return Err(Error::DuplicateArticle(article.id));
        }
        articles.push(article);
    }
    sort_articles(&mut articles);
    log::info!("loaded {} articles from {}", articles.len(), path.display());
    Ok(articles)
}

pub fn sort_articles(articles: &mut [Article]) {
    articles.sort_by(|a, b| {
        a.published_at
            .cmp(&b.published_at)
            .then_with(|| a.id.cmp(&b.id))
    });
}

pub fn write_articles<W: Write>(articles: &[Article], mut out: W) -> Result<()> {
    for article in articles {
        serde_json::to_writer(&mut out, article)?;
        out.write_all(b"\n")
            .map_err(|e| Error::io("<articles>", e))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityRecord {
    pub canonical_id: String,
    pub display_name: String,
    pub primary_ticker: String,
    pub exchange: String,
    pub name_variants: Vec<String>,
    /// Every ticker that resolves to this company, primary included.
    pub merged_tickers: Vec<String>,
}

impl EntityRecord {
    pub fn tickers(&self) -> impl Iterator<Item = &str> {
        self.merged_tickers.iter().map(String::as_str)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct UniverseRow {
    canonical_id: String,
    display_name: String,
    primary_ticker: String,
    exchange: String,
    name_variants: String,
    merged_tickers: String,
}

/// Companies keyed by canonical id, sorted by id.
#[derive(Debug, Clone, Default)]
pub struct EntityUniverse {
    records: Vec<EntityRecord>,
    by_id: HashMap<String, usize>,
    by_ticker: HashMap<String, usize>,
    by_variant: HashMap<String, usize>,
}

impl EntityUniverse {
    /// Merges records sharing a canonical id and builds the lookup maps.
    pub fn from_records(records: Vec<EntityRecord>) -> Result<Self> {
        let mut merged: BTreeMap<String, EntityRecord> = BTreeMap::new();
        for rec in records {
            if rec.canonical_id.trim().is_empty() {
                return Err(Error::Validation("empty canonical_id".into()));
            }
            if rec.primary_ticker.trim().is_empty() {
                return Err(Error::Validation(format!(
                    "{}: empty primary_ticker",
                    rec.canonical_id
                )));
            }
            if rec.name_variants.iter().all(|v| v.trim().is_empty()) {
                return Err(Error::Validation(format!(
                    "{}: name_variants must not be empty",
                    rec.canonical_id
                )));
            }
            match merged.get_mut(&rec.canonical_id) {
                Some(existing) => {
                    for v in rec.name_variants {
                        if !existing.name_variants.contains(&v) {
                            existing.name_variants.push(v);
                        }
                    }
                    let extra = std::iter::once(rec.primary_ticker).chain(rec.merged_tickers);
                    for t in extra {
                        if !existing.merged_tickers.contains(&t) {
                            existing.merged_tickers.push(t);
                        }
                    }
                }
                None => {
                    let mut rec = rec;
                    if !rec.merged_tickers.contains(&rec.primary_ticker) {
                        rec.merged_tickers.insert(0, rec.primary_ticker.clone());
                    }
                    merged.insert(rec.canonical_id.clone(), rec);
                }
            }
        }

        let mut universe = EntityUniverse::default();
        for (idx, (_, mut rec)) in merged.into_iter().enumerate() {
            rec.name_variants.retain(|v| !v.trim().is_empty());
            let tickers: BTreeSet<String> = rec.merged_tickers.iter().cloned().collect();
            rec.merged_tickers = tickers.into_iter().collect();
            for t in &rec.merged_tickers {
                if let Some(&other) = universe.by_ticker.get(t) {
                    return Err(Error::TickerConflict {
                        ticker: t.clone(),
                        first: universe.records[other].canonical_id.clone(),
                        second: rec.canonical_id.clone(),
                    });
                }
                universe.by_ticker.insert(t.clone(), idx);
            }
            for v in std::iter::once(&rec.display_name).chain(&rec.name_variants) {
                universe.by_variant.entry(v.to_lowercase()).or_insert(idx);
            }
            universe.by_id.insert(rec.canonical_id.clone(), idx);
            universe.records.push(rec);
        }
        Ok(universe)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[EntityRecord] {
        &self.records
    }

    pub fn ids(&self) -> Vec<String> {
        self.records
            .iter()
            .map(|r| r.canonical_id.clone())
            .collect()
    }

    pub fn get(&self, id: &str) -> Option<&EntityRecord> {
        self.by_id.get(id).map(|&i| &self.records[i])
    }

    pub fn resolve_ticker(&self, ticker: &str) -> Option<&EntityRecord> {
        self.by_ticker.get(ticker).map(|&i| &self.records[i])
    }

    pub fn resolve_name(&self, name: &str) -> Option<&EntityRecord> {
        self.by_variant
            .get(&name.to_lowercase())
            .map(|&i| &self.records[i])
    }

    /// A copy of the universe without `id`.
    pub fn without(&self, id: &str) -> Result<Self> {
        EntityUniverse::from_records(
            self.records
                .iter()
                .filter(|r| r.canonical_id != id)
                .cloned()
                .collect(),
        )
    }
}

fn split_pipe(cell: &str) -> Vec<String> {
    cell.split('|')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_owned)
        .collect()
}

pub fn load_universe(path: impl AsRef<Path>) -> Result<EntityUniverse> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path)?;
    let mut records = Vec::new();
    for (n, row) in reader.deserialize::<UniverseRow>().enumerate() {
        // header occupies line 1
        let line = n + 2;
        let row = row.map_err(|e| Error::parse(path, line, e.to_string()))?;
        let name_variants = split_pipe(&row.name_variants);
        if name_variants.is_empty() {
            return Err(Error::parse(
                path,
                line,
                format!("{}: name_variants must not be empty", row.canonical_id),
            ));
        }
        records.push(EntityRecord {
            canonical_id: row.canonical_id.trim().to_owned(),
            display_name: row.display_name.trim().to_owned(),
            primary_ticker: row.primary_ticker.trim().to_owned(),
            exchange: row.exchange.trim().to_owned(),
            name_variants,
            merged_tickers: split_pipe(&row.merged_tickers),
        });
    }
    let universe = EntityUniverse::from_records(records)?;
    log::info!(
        "loaded {} companies from {}",
        universe.len(),
        path.display()
    );
    Ok(universe)
}

pub fn write_universe<W: Write>(universe: &EntityUniverse, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for rec in universe.records() {
        w.serialize(UniverseRow {
            canonical_id: rec.canonical_id.clone(),
            display_name: rec.display_name.clone(),
            primary_ticker: rec.primary_ticker.clone(),
            exchange: rec.exchange.clone(),
            name_variants: rec.name_variants.join("|"),
            merged_tickers: rec.merged_tickers.join("|"),
        })?;
    }
    w.flush().map_err(|e| Error::io("<universe>", e))?;
    Ok(())
}

/// Quarter-end market capitalisation in USD billions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MarketCapTable {
    entries: BTreeMap<(String, Quarter), f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct MarketCapRow {
    canonical_id: String,
    quarter: Quarter,
    market_cap_usd_billions: f64,
}

impl MarketCapTable {
    pub fn insert(&mut self, id: impl Into<String>, quarter: Quarter, cap: f64) -> Result<()> {
        let id = id.into();
        if !(cap > 0.0 && cap.is_finite()) {
            return Err(Error::Validation(format!(
                "{id} {quarter}: market cap must be positive, got {cap}"
            )));
        }
        if self.entries.insert((id.clone(), quarter), cap).is_some() {
            return Err(Error::Validation(format!(
                "{id} {quarter}: duplicate market cap"
            )));
        }
        Ok(())
    }

    pub fn get(&self, id: &str, quarter: Quarter) -> Option<f64> {
        self.entries.get(&(id.to_owned(), quarter)).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Quarter, f64)> {
        self.entries
            .iter()
            .map(|((id, q), cap)| (id.as_str(), *q, *cap))
    }
}

pub fn load_marketcaps(path: impl AsRef<Path>) -> Result<MarketCapTable> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path)?;
    let mut table = MarketCapTable::default();
    for (n, row) in reader.deserialize::<MarketCapRow>().enumerate() {
        let line = n + 2;
        let row = row.map_err(|e| Error::parse(path, line, e.to_string()))?;
        table
            .insert(row.canonical_id, row.quarter, row.market_cap_usd_billions)
            .map_err(|e| Error::parse(path, line, e.to_string()))?;
    }
    Ok(table)
}

pub fn write_marketcaps<W: Write>(table: &MarketCapTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (id, quarter, cap) in table.iter() {
        w.serialize(MarketCapRow {
            canonical_id: id.to_owned(),
            quarter,
            market_cap_usd_billions: cap,
        })?;
    }
    w.flush().map_err(|e| Error::io("<marketcaps>", e))?;
    Ok(())
}

/// Adjusted daily closes for one ticker, strictly increasing in date.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PriceSeries {
    points: Vec<(NaiveDate, f64)>,
}

impl PriceSeries {
    pub fn new(points: Vec<(NaiveDate, f64)>) -> Result<Self> {
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::Validation(format!(
                    "price dates not strictly increasing at {}",
                    w[1].0
                )));
            }
        }
        if let Some((d, p)) = points.iter().find(|(_, p)| !(*p > 0.0 && p.is_finite())) {
            return Err(Error::Validation(format!(
                "non-positive adjusted close {p} on {d}"
            )));
        }
        Ok(PriceSeries { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[(NaiveDate, f64)] {
        &self.points
    }

    /// Most recent close at or before `date`.
    pub fn on_or_before(&self, date: NaiveDate) -> Option<(NaiveDate, f64)> {
        let idx = self.points.partition_point(|(d, _)| *d <= date);
        idx.checked_sub(1).map(|i| self.points[i])
    }
}

/// Price series keyed by ticker.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PriceBook {
    series: BTreeMap<String, PriceSeries>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PriceRow {
    ticker: String,
    date: NaiveDate,
    adjusted_close: f64,
}

impl PriceBook {
    pub fn insert(&mut self, ticker: impl Into<String>, series: PriceSeries) {
        self.series.insert(ticker.into(), series);
    }

    pub fn get(&self, ticker: &str) -> Option<&PriceSeries> {
        self.series.get(ticker)
    }

    /// The company's primary-ticker series, falling back to any merged
    /// share class that has prices.
    pub fn series_for(&self, record: &EntityRecord) -> Option<&PriceSeries> {
        self.series
            .get(&record.primary_ticker)
            .or_else(|| record.tickers().find_map(|t| self.series.get(t)))
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &PriceSeries)> {
        self.series.iter().map(|(t, s)| (t.as_str(), s))
    }
}

pub fn load_prices(path: impl AsRef<Path>) -> Result<PriceBook> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path)?;
    let mut raw: BTreeMap<String, Vec<(NaiveDate, f64)>> = BTreeMap::new();
    for (n, row) in reader.deserialize::<PriceRow>().enumerate() {
        let line = n + 2;
        let row = row.map_err(|e| Error::parse(path, line, e.to_string()))?;
        if !(row.adjusted_close > 0.0 && row.adjusted_close.is_finite()) {
            return Err(Error::parse(
                path,
                line,
                format!("non-positive adjusted close {}", row.adjusted_close),
            ));
        }
        let points = raw.entry(row.ticker.clone()).or_default();
        if let Some((last, _)) = points.last() {
            if row.date <= *last {
                return Err(Error::parse(
                    path,
                    line,
                    format!(
                        "{}: dates not strictly increasing at {}",
                        row.ticker, row.date
                    ),
                ));
            }
        }
        points.push((row.date, row.adjusted_close));
    }
    let mut book = PriceBook::default();
    for (ticker, points) in raw {
        book.insert(ticker, PriceSeries::new(points)?);
    }
    Ok(book)
}

pub fn write_prices<W: Write>(book: &PriceBook, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (ticker, series) in book.iter() {
        for &(date, adjusted_close) in series.points() {
            w.serialize(PriceRow {
                ticker: ticker.to_owned(),
                date,
                adjusted_close,
            })?;
        }
    }
    w.flush().map_err(|e| Error::io("<prices>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn ts(s: &str) -> DateTime<Utc> {
        DateTime::parse_from_rfc3339(s).unwrap().with_timezone(&Utc)
    }

    #[test]
    fn quarter_of_calendar_boundaries() {
        assert_eq!(quarter_of(ts("2016-05-15T12:00:00Z")).to_string(), "2016Q2");
        assert_eq!(quarter_of(ts("2011-01-01T00:00:00Z")).to_string(), "2011Q1");
        assert_eq!(quarter_of(ts("2015-12-31T23:59:00Z")).to_string(), "2015Q4");
        // offsets are normalised to UTC before bucketing
        assert_eq!(
            quarter_of(ts("2016-03-31T22:00:00-05:00")).to_string(),
            "2016Q2"
        );
    }

    #[test]
    fn quarter_dates_and_parse() {
        let q: Quarter = "2016Q1".parse().unwrap();
        assert_eq!(q.first_day(), NaiveDate::from_ymd_opt(2016, 1, 1).unwrap());
        assert_eq!(q.last_day(), NaiveDate::from_ymd_opt(2016, 3, 31).unwrap());
        let q4: Quarter = "2015Q4".parse().unwrap();
        assert_eq!(q4.next(), Quarter::new(2016, 1).unwrap());
        assert_eq!(
            q4.last_day(),
            NaiveDate::from_ymd_opt(2015, 12, 31).unwrap()
        );
        assert!("2016Q5".parse::<Quarter>().is_err());
        assert!("16Q1".parse::<Quarter>().is_err());
        assert!("2016-1".parse::<Quarter>().is_err());
        let w = AnalysisWindow::default();
        assert_eq!(w.quarters().len(), 22);
    }

    #[test]
    fn quarter_of_is_monotone() {
        let start = Utc.with_ymd_and_hms(2010, 1, 1, 0, 0, 0).unwrap();
        let mut prev = quarter_of(start);
        for h in (0..24 * 365 * 3).step_by(7) {
            let q = quarter_of(start + chrono::Duration::hours(h));
            assert!(q >= prev);
            prev = q;
        }
    }

    #[test]
    fn price_lookup_backwards() {
        let d = |s: &str| NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap();
        let s = PriceSeries::new(vec![(d("2016-03-30"), 10.0), (d("2016-04-01"), 11.0)]).unwrap();
        assert_eq!(
            s.on_or_before(d("2016-03-31")),
            Some((d("2016-03-30"), 10.0))
        );
        assert_eq!(
            s.on_or_before(d("2016-04-01")),
            Some((d("2016-04-01"), 11.0))
        );
        assert_eq!(s.on_or_before(d("2016-03-29")), None);
        assert!(PriceSeries::new(vec![(d("2016-03-30"), 0.0)]).is_err());
        assert!(PriceSeries::new(vec![(d("2016-03-30"), 1.0), (d("2016-03-30"), 1.0)]).is_err());
    }

    fn rec(id: &str, ticker: &str, variants: &[&str]) -> EntityRecord {
        EntityRecord {
            canonical_id: id.into(),
            display_name: variants.first().copied().unwrap_or("").into(),
            primary_ticker: ticker.into(),
            exchange: "NASDAQ".into(),
            name_variants: variants.iter().map(|s| s.to_string()).collect(),
            merged_tickers: vec![],
        }
    }

    #[test]
    fn share_classes_merge() {
        let u = EntityUniverse::from_records(vec![
            rec("alphabet", "GOOGL", &["Alphabet Inc."]),
            rec("alphabet", "GOOG", &["Alphabet Inc.", "Google"]),
            rec("apple", "AAPL", &["Apple Inc."]),
        ])
        .unwrap();
        assert_eq!(u.len(), 2);
        let a = u.get("alphabet").unwrap();
        assert_eq!(a.merged_tickers, vec!["GOOG", "GOOGL"]);
        assert_eq!(a.primary_ticker, "GOOGL");
        assert_eq!(u.resolve_ticker("GOOG").unwrap().canonical_id, "alphabet");
        assert_eq!(u.resolve_name("google").unwrap().canonical_id, "alphabet");
    }

    #[test]
    fn ticker_conflict_is_an_error() {
        let err = EntityUniverse::from_records(vec![
            rec("a", "XYZ", &["A Corp"]),
            rec("b", "XYZ", &["B Corp"]),
        ])
        .unwrap_err();
        assert!(matches!(err, Error::TickerConflict { .. }), "{err}");
    }

    #[test]
    fn empty_variants_rejected() {
        let err = EntityUniverse::from_records(vec![rec("a", "XYZ", &[])]).unwrap_err();
        assert!(err.to_string().contains("name_variants"));
    }

    #[test]
    fn marketcap_positivity() {
        let mut t = MarketCapTable::default();
        let q = Quarter::new(2012, 3).unwrap();
        assert!(t.insert("a", q, 0.0).is_err());
        assert!(t.insert("a", q, -1.0).is_err());
        t.insert("a", q, 2.5).unwrap();
        assert!(t.insert("a", q, 2.5).is_err());
        assert_eq!(t.get("a", q), Some(2.5));
        assert_eq!(t.get("a", q.next()), None);
    }
}
