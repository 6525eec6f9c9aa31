//! Seeded synthetic corpus, universe, prices and market caps.
//!
//! Companies belong to sectors and most articles stay within one sector.
//! Each company-quarter gets a mood, usually its sector's. Bearish companies only appear in
//! negative articles and bullish ones only in positive articles, so their
//! relative sentiment is exactly 1 or 0; the rest appear in both. Prices
//! follow a common market random walk plus an idiosyncratic one. An optional
//! planted drift lowers the log price of every company-quarter whose
//! relative sentiment ended up at 1, on trading days inside a window of
//! calendar days after its measurement date.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use chrono::{DateTime, Datelike, Duration, NaiveDate, TimeZone, Utc, Weekday};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus::{
    write_articles, write_marketcaps, write_prices, write_universe, Article, EntityRecord,
    EntityUniverse, MarketCapTable, Polarity, PriceBook, PriceSeries, Quarter,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FixtureSpec {
    pub seed: u64,
    pub companies: usize,
    pub quarters: usize,
    pub start: Quarter,
    pub articles: usize,
    pub negative_share: f64,
    pub bearish_share: f64,
    pub bullish_share: f64,
    pub max_companies_per_article: usize,
    /// Companies are assigned to sectors round-robin; moods are drawn per
    /// sector and quarter.
    pub sectors: usize,
    /// Chance that a company ignores its sector mood and draws its own.
    pub mood_noise: f64,
    /// Chance that an article's co-mentions are drawn across sectors.
    pub cross_sector_share: f64,
    /// Log-price change per trading day inside the drift window.
    pub drift_per_day: f64,
    /// Calendar-day offsets after the measurement date, inclusive.
    pub drift_window: (u32, u32),
    pub market_vol: f64,
    pub idio_vol: f64,
    /// Companies (taken from the end of the list) without any prices.
    pub companies_without_prices: usize,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec {
            seed: 7,
            companies: 60,
            quarters: 8,
            start: Quarter::new(2011, 1).expect("valid"),
            articles: 2000,
            negative_share: 0.45,
            bearish_share: 0.2,
            bullish_share: 0.3,
            max_companies_per_article: 4,
            sectors: 6,
            mood_noise: 0.1,
            cross_sector_share: 0.05,
            drift_per_day: -0.01,
            drift_window: (1, 30),
            market_vol: 0.01,
            idio_vol: 0.01,
            companies_without_prices: 1,
        }
    }
}

impl FixtureSpec {
    pub fn null(mut self) -> Self {
        self.drift_per_day = 0.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Validation(format!("fixture: {m}")));
        if self.companies < 2 || self.companies > 2000 {
            return bad("companies must lie in 2..=2000");
        }
        if self.quarters == 0 || self.articles == 0 {
            return bad("quarters and articles must be positive");
        }
        if !(0.0..=1.0).contains(&self.negative_share)
            || self.bearish_share < 0.0
            || self.bullish_share < 0.0
            || self.bearish_share + self.bullish_share > 1.0
        {
            return bad("shares must be probabilities");
        }
        if self.sectors == 0 || self.sectors > self.companies {
            return bad("sectors must lie in 1..=companies");
        }
        if !(0.0..=1.0).contains(&self.mood_noise)
            || !(0.0..=1.0).contains(&self.cross_sector_share)
        {
            return bad("mood_noise and cross_sector_share must be probabilities");
        }
        if self.max_companies_per_article == 0 {
            return bad("max_companies_per_article must be positive");
        }
        if self.drift_window.0 > self.drift_window.1 {
            return bad("drift window is empty");
        }
        if self.market_vol < 0.0 || self.idio_vol < 0.0 {
            return bad("volatilities must be non-negative");
        }
        if self.companies_without_prices >= self.companies {
            return bad("at least one company needs prices");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mood {
    Bearish,
    Bullish,
    Mixed,
}

/// How a company was written into an article.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MentionForm {
    ExchangeTicker,
    BareTicker,
    FullName,
    ShortName,
}

/// What the generator planted, for use as a test oracle.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FixtureTruth {
    pub positive_articles: usize,
    pub negative_articles: usize,
    /// article id → companies planted in it
    pub mentions: BTreeMap<String, BTreeSet<String>>,
    pub mention_forms: BTreeMap<String, usize>,
    /// `(company, quarter)` pairs with relative sentiment exactly 1
    pub all_negative: Vec<(String, Quarter)>,
    pub drifted: Vec<(String, Quarter)>,
    pub companies_without_prices: Vec<String>,
    pub missing_marketcaps: Vec<(String, Quarter)>,
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub spec: FixtureSpec,
    pub universe: EntityUniverse,
    pub articles: Vec<Article>,
    pub prices: PriceBook,
    pub marketcaps: MarketCapTable,
    pub truth: FixtureTruth,
}

const ONSETS: [&str; 16] = [
    "B", "C", "D", "F", "G", "K", "L", "M", "N", "P", "R", "S", "T", "V", "Z", "Qu",
];
const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];
const CODAS: [&str; 12] = [
    "rnex", "lvar", "dris", "ntor", "xis", "mbry", "ltic", "rvo", "nyx", "stra", "quin", "vel",
];
const SECOND_WORDS: [&str; 8] = [
    "Holdings",
    "Dynamics",
    "Systems",
    "Energy",
    "Foods",
    "Networks",
    "Materials",
    "Logistics",
];
const SUFFIXES: [&str; 5] = ["Inc.", "Corp.", "Group Inc.", "Co.", "Ltd"];
const EXCHANGES: [&str; 2] = ["NYSE", "NASDAQ"];

/// Prose that never contains a company mention; some all-caps words are
/// there on purpose.
const FILLER: [&str; 16] = [
    "Shares moved higher after the earnings call.",
    "Analysts expect margins to improve next year.",
    "The CEO said guidance remains unchanged.",
    "EPS came in ahead of consensus estimates.",
    "Management reiterated its outlook for the USD business.",
    "Investors should watch free cash flow closely.",
    "The balance sheet carries little net debt.",
    "Revenue growth slowed in the last quarter.",
    "I would wait for a better entry point.",
    "Valuation looks stretched on a forward basis.",
    "The dividend appears safe for now.",
    "Competition in the sector keeps getting tougher.",
    "A weaker dollar could help overseas sales.",
    "The stock trades near its 52-week high.",
    "Buybacks continue to support the share count.",
    "Q&A on the call focused on capital spending.",
];
const FILLER_CAPS: [&str; 4] = ["CEO", "EPS", "USD", "Q&A"];

struct Company {
    id: String,
    display_name: String,
    short_name: String,
    ticker: String,
    extra_ticker: Option<String>,
    exchange: &'static str,
}

fn make_companies(n: usize, rng: &mut ChaCha8Rng) -> Vec<Company> {
    let filler_words: HashSet<String> = FILLER
        .iter()
        .flat_map(|s| s.split(|c: char| !c.is_alphanumeric()))
        .map(str::to_lowercase)
        .collect();
    let mut stems = BTreeSet::new();
    let mut order: Vec<String> = Vec::new();
    while order.len() < n {
        let stem = format!(
            "{}{}{}",
            ONSETS.choose(rng).unwrap(),
            VOWELS.choose(rng).unwrap(),
            CODAS.choose(rng).unwrap()
        );
        if !filler_words.contains(&stem.to_lowercase()) && stems.insert(stem.clone()) {
            order.push(stem);
        }
    }
    let mut tickers: HashSet<String> = FILLER_CAPS.iter().map(|s| s.to_string()).collect();
    let mut out = Vec::with_capacity(n);
    for (i, stem) in order.into_iter().enumerate() {
        let letters: Vec<char> = stem
            .to_uppercase()
            .chars()
            .filter(|c| c.is_ascii_alphabetic())
            .collect();
        // every tenth company gets a two-letter ticker
        let len = if i % 10 == 3 { 2 } else { 3 + i % 2 };
        let mut ticker: String = letters.iter().take(len).collect();
        let mut bump = 0u8;
        while tickers.contains(&ticker) || ticker.len() < len {
            ticker = letters.iter().take(len - 1).collect::<String>();
            ticker.push((b'A' + bump % 26) as char);
            bump += 1;
        }
        tickers.insert(ticker.clone());
        let extra_ticker = (i % 25 == 1).then(|| {
            let mut t = format!("{ticker}A");
            while tickers.contains(&t) {
                t.push('A');
            }
            tickers.insert(t.clone());
            t
        });
        let second = (i % 3 != 0).then(|| SECOND_WORDS[i % SECOND_WORDS.len()]);
        let base = match second {
            Some(w) => format!("{stem} {w}"),
            None => stem.clone(),
        };
        let suffix = SUFFIXES[i % SUFFIXES.len()];
        out.push(Company {
            id: format!("C{:03}", i),
            display_name: format!("{base} {suffix}"),
            short_name: base,
            ticker,
            extra_ticker,
            exchange: EXCHANGES[i % 2],
        });
    }
    out
}

fn business_days(from: NaiveDate, to: NaiveDate) -> Vec<NaiveDate> {
    let mut days = Vec::new();
    let mut d = from;
    while d <= to {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            days.push(d);
        }
        d += Duration::days(1);
    }
    days
}

fn weighted_pick(
    candidates: &[usize],
    weights: &[f64],
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let mut pool: Vec<usize> = candidates.to_vec();
    let mut picked = Vec::with_capacity(k);
    while picked.len() < k && !pool.is_empty() {
        let total: f64 = pool.iter().map(|&c| weights[c]).sum();
        let mut u = rng.random::<f64>() * total;
        let mut chosen = pool.len() - 1;
        for (pos, &c) in pool.iter().enumerate() {
            u -= weights[c];
            if u <= 0.0 {
                chosen = pos;
                break;
            }
        }
        picked.push(pool.swap_remove(chosen));
    }
    picked
}

fn mention(c: &Company, form: MentionForm) -> String {
    match form {
        MentionForm::ExchangeTicker => format!("({}:{})", c.exchange, c.ticker),
        MentionForm::BareTicker => c.ticker.clone(),
        MentionForm::FullName => c.display_name.clone(),
        MentionForm::ShortName => c.short_name.clone(),
    }
}

pub fn generate(spec: &FixtureSpec) -> Result<Fixture> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let companies = make_companies(spec.companies, &mut rng);
    let quarters: Vec<Quarter> = {
        let mut q = spec.start;
        (0..spec.quarters)
            .map(|_| {
                let cur = q;
                q = q.next();
                cur
            })
            .collect()
    };

    // popularity, heavy tailed
    let mut popularity: Vec<f64> = (0..spec.companies)
        .map(|r| 1.0 / (r as f64 + 1.0).powf(0.8))
        .collect();
    popularity.shuffle(&mut rng);

    let mut truth = FixtureTruth::default();
    let mut articles = Vec::with_capacity(spec.articles);
    let mut counts: BTreeMap<(usize, Quarter), (u32, u32)> = BTreeMap::new();
    let per_quarter = spec.articles / spec.quarters;
    let forms_all = [
        MentionForm::ExchangeTicker,
        MentionForm::BareTicker,
        MentionForm::FullName,
        MentionForm::ShortName,
    ];

    for (qi, &quarter) in quarters.iter().enumerate() {
        let n_articles = if qi + 1 == quarters.len() {
            spec.articles - per_quarter * (quarters.len() - 1)
        } else {
            per_quarter
        };
        let draw = |rng: &mut ChaCha8Rng| {
            let u: f64 = rng.random();
            if u < spec.bearish_share {
                Mood::Bearish
            } else if u < spec.bearish_share + spec.bullish_share {
                Mood::Bullish
            } else {
                Mood::Mixed
            }
        };
        let sector_moods: Vec<Mood> = (0..spec.sectors).map(|_| draw(&mut rng)).collect();
        let moods: Vec<Mood> = (0..spec.companies)
            .map(|c| {
                if rng.random::<f64>() < spec.mood_noise {
                    draw(&mut rng)
                } else {
                    sector_moods[c % spec.sectors]
                }
            })
            .collect();
        let negative_pool: Vec<usize> = (0..spec.companies)
            .filter(|&c| moods[c] != Mood::Bullish)
            .collect();
        let positive_pool: Vec<usize> = (0..spec.companies)
            .filter(|&c| moods[c] != Mood::Bearish)
            .collect();
        let start =
            Utc.from_utc_datetime(&quarter.first_day().and_hms_opt(0, 0, 0).expect("midnight"));
        let span = (quarter.last_day() - quarter.first_day()).num_seconds() + 86_399;

        for _ in 0..n_articles {
            let id = format!("a{:05}", articles.len());
            let polarity = if rng.random::<f64>() < spec.negative_share {
                Polarity::Negative
            } else {
                Polarity::Positive
            };
            let pool = match polarity {
                Polarity::Negative => &negative_pool,
                Polarity::Positive => &positive_pool,
            };
            let k = {
                let u: f64 = rng.random();
                let k = if u < 0.35 {
                    1
                } else if u < 0.7 {
                    2
                } else if u < 0.9 {
                    3
                } else {
                    4
                };
                k.min(spec.max_companies_per_article)
            };
            let mut picked = weighted_pick(pool, &popularity, 1, &mut rng);
            let rest: Vec<usize> = if rng.random::<f64>() < spec.cross_sector_share {
                pool.iter().copied().filter(|&c| c != picked[0]).collect()
            } else {
                let sector = picked[0] % spec.sectors;
                pool.iter()
                    .copied()
                    .filter(|&c| c != picked[0] && c % spec.sectors == sector)
                    .collect()
            };
            picked.extend(weighted_pick(&rest, &popularity, k - 1, &mut rng));

            let mut sentences: Vec<String> = Vec::new();
            let mut planted = BTreeSet::new();
            for &c in &picked {
                let company = &companies[c];
                let allowed: Vec<MentionForm> = forms_all
                    .iter()
                    .copied()
                    .filter(|f| *f != MentionForm::BareTicker || company.ticker.len() > 2)
                    .collect();
                let form = *allowed.choose(&mut rng).unwrap();
                let mut text = mention(company, form);
                if form == MentionForm::BareTicker {
                    if let Some(extra) = company
                        .extra_ticker
                        .as_ref()
                        .filter(|_| rng.random_bool(0.5))
                    {
                        text = extra.clone();
                    }
                }
                *truth.mention_forms.entry(format!("{form:?}")).or_insert(0) += 1;
                let verb = match polarity {
                    Polarity::Negative => "looks vulnerable here",
                    Polarity::Positive => "remains a buy",
                };
                sentences.push(format!("{text} {verb}."));
                sentences.push(FILLER.choose(&mut rng).unwrap().to_string());
                planted.insert(company.id.clone());
                let e = counts.entry((c, quarter)).or_insert((0, 0));
                match polarity {
                    Polarity::Positive => e.0 += 1,
                    Polarity::Negative => e.1 += 1,
                }
            }
            sentences.push(FILLER.choose(&mut rng).unwrap().to_string());
            let title = match polarity {
                Polarity::Negative => "Why I am cautious on this name",
                Polarity::Positive => "Why I am adding to my position",
            };
            match polarity {
                Polarity::Positive => truth.positive_articles += 1,
                Polarity::Negative => truth.negative_articles += 1,
            }
            let published_at: DateTime<Utc> = start + Duration::seconds(rng.random_range(0..span));
            truth.mentions.insert(id.clone(), planted);
            articles.push(Article {
                id,
                published_at,
                author_id: format!("u{:03}", rng.random_range(0..150)),
                polarity,
                title: title.to_string(),
                body: sentences.join(" "),
            });
        }
    }
    crate::corpus::sort_articles(&mut articles);

    for (&(c, q), &(pos, neg)) in &counts {
        if pos == 0 && neg > 0 {
            truth.all_negative.push((companies[c].id.clone(), q));
        }
    }

    // prices
    let first = quarters[0].first_day() - Duration::days(14);
    let last = quarters[quarters.len() - 1].last_day() + Duration::days(120);
    let days = business_days(first, last);
    let market_step =
        Normal::new(0.0, spec.market_vol.max(0.0)).map_err(|e| Error::Validation(e.to_string()))?;
    let idio_step =
        Normal::new(0.0, spec.idio_vol.max(0.0)).map_err(|e| Error::Validation(e.to_string()))?;
    let mut market = Vec::with_capacity(days.len());
    let mut level = 0.0;
    for _ in &days {
        market.push(level);
        level += market_step.sample(&mut rng);
    }
    let measurement: BTreeMap<Quarter, NaiveDate> = quarters
        .iter()
        .map(|&q| {
            let end = q.last_day();
            let m = *days
                .iter()
                .rev()
                .find(|d| **d <= end)
                .expect("calendar covers quarter");
            (q, m)
        })
        .collect();
    let drift_quarters: BTreeMap<usize, Vec<NaiveDate>> = {
        let mut map: BTreeMap<usize, Vec<NaiveDate>> = BTreeMap::new();
        if spec.drift_per_day != 0.0 {
            for (id, q) in &truth.all_negative {
                let c = companies
                    .iter()
                    .position(|x| &x.id == id)
                    .expect("known id");
                map.entry(c).or_default().push(measurement[q]);
                truth.drifted.push((id.clone(), *q));
            }
        }
        map
    };

    let priced = spec.companies - spec.companies_without_prices;
    let mut prices = PriceBook::default();
    let mut caps = MarketCapTable::default();
    for (c, company) in companies.iter().enumerate() {
        let base = rng.random_range(15.0_f64..150.0).ln();
        let cap0 = (rng.random_range(0.0_f64..4.0)).exp();
        let mut idio = 0.0;
        let mut points = Vec::with_capacity(days.len());
        let mut planted = 0.0;
        let mut log_price_at: BTreeMap<NaiveDate, f64> = BTreeMap::new();
        let windows = drift_quarters.get(&c);
        for (t, &day) in days.iter().enumerate() {
            if t > 0 {
                idio += idio_step.sample(&mut rng);
                if let Some(ws) = windows {
                    for &m in ws {
                        let offset = (day - m).num_days();
                        if offset >= spec.drift_window.0 as i64
                            && offset <= spec.drift_window.1 as i64
                        {
                            planted += spec.drift_per_day;
                        }
                    }
                }
            }
            let lp = base + market[t] + idio + planted;
            log_price_at.insert(day, lp);
            let price = (lp.exp() * 10_000.0).round() / 10_000.0;
            points.push((day, price.max(0.0001)));
        }
        if c < priced {
            prices.insert(company.ticker.clone(), PriceSeries::new(points)?);
        } else {
            truth.companies_without_prices.push(company.id.clone());
        }
        for (qi, q) in quarters.iter().enumerate() {
            if c == 2 && qi == 2 {
                truth.missing_marketcaps.push((company.id.clone(), *q));
                continue;
            }
            let m = measurement[q];
            let growth = (log_price_at[&m] - base).exp();
            let cap = ((cap0 * growth) * 1000.0).round() / 1000.0;
            caps.insert(company.id.clone(), *q, cap.max(0.001))?;
        }
    }

    let mut records = Vec::new();
    for company in &companies {
        records.push(EntityRecord {
            canonical_id: company.id.clone(),
            display_name: company.display_name.clone(),
            primary_ticker: company.ticker.clone(),
            exchange: company.exchange.to_string(),
            name_variants: vec![company.display_name.clone()],
            merged_tickers: vec![company.ticker.clone()],
        });
        if let Some(extra) = &company.extra_ticker {
            // second share class on its own row
            records.push(EntityRecord {
                canonical_id: company.id.clone(),
                display_name: company.display_name.clone(),
                primary_ticker: extra.clone(),
                exchange: company.exchange.to_string(),
                name_variants: vec![company.display_name.clone()],
                merged_tickers: vec![extra.clone()],
            });
        }
    }
    let universe = EntityUniverse::from_records(records)?;

    Ok(Fixture {
        spec: spec.clone(),
        universe,
        articles,
        prices,
        marketcaps: caps,
        truth,
    })
}

/// Universe rows as written to disk, one per share class.
fn universe_rows(fixture: &Fixture) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_universe(&fixture.universe, &mut buf)?;
    Ok(buf)
}

/// File names written by [`write_fixture`].
pub const FIXTURE_FILES: [&str; 5] = [
    "universe.csv",
    "articles.jsonl",
    "prices.csv",
    "marketcaps.csv",
    "fixture_truth.json",
];

pub fn write_fixture(fixture: &Fixture, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut articles = Vec::new();
    write_articles(&fixture.articles, &mut articles)?;
    let mut prices = Vec::new();
    write_prices(&fixture.prices, &mut prices)?;
    let mut caps = Vec::new();
    write_marketcaps(&fixture.marketcaps, &mut caps)?;
    let truth = serde_json::to_vec_pretty(&fixture.truth)?;
    let files: [(&str, Vec<u8>); 5] = [
        ("universe.csv", universe_rows(fixture)?),
        ("articles.jsonl", articles),
        ("prices.csv", prices),
        ("marketcaps.csv", caps),
        ("fixture_truth.json", truth),
    ];
    for (name, bytes) in files {
        crate::artifacts::write_atomic(&dir.join(name), &bytes)?;
    }
    Ok(())
}

/// A universe of `n` companies where every fifth company has a second share
/// class row, for loader tests at index scale.
pub fn index_universe_rows(n: usize) -> Vec<EntityRecord> {
    let mut rows = Vec::with_capacity(n);
    let mut company = 0;
    while rows.len() < n {
        let id = format!("X{company:04}");
        let name = format!("Company{company:04} Inc.");
        rows.push(EntityRecord {
            canonical_id: id.clone(),
            display_name: name.clone(),
            primary_ticker: format!("T{company:04}"),
            exchange: "NYSE".into(),
            name_variants: vec![name.clone()],
            merged_tickers: vec![],
        });
        if company % 5 == 0 && rows.len() < n {
            rows.push(EntityRecord {
                canonical_id: id,
                display_name: name.clone(),
                primary_ticker: format!("T{company:04}B"),
                exchange: "NYSE".into(),
                name_variants: vec![name],
                merged_tickers: vec![],
            });
        }
        company += 1;
    }
    rows
}
