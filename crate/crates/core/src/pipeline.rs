//! Stage orchestration. Every stage has a pure `compute_*` function and a
//! `cmd_*` wrapper that reads the previous stage's exports from the output
//! directory, writes its own artifacts atomically and records them in
//! `manifest.json`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifacts::{file_sha256, sha256_hex, write_atomic};
use crate::backtest::{
    best_single_delay, build_table2, build_table3, proportion_stderr, render_table2, render_table3,
    risk_histogram, write_histogram, write_table2_csv, write_table3_csv, ComparisonTable,
    DailyRate, DeclineTable, EventTable, HistogramRow, RiskKind, THRESHOLDS,
};
use crate::centrality::{
    average_rank, information_centrality_with_cap, kendall_tau, minmax_rescale, normalized_score,
    write_series, write_tables, AverageRank, CentralityTable, ScoreMode, DEFAULT_CONDITION_CAP,
};
use crate::conet::{
    build_networks, network_stats, smooth, write_article_counts, write_edges, write_nodes,
    NetworkKind, NodeSet, QuarterNetwork, QuarterNetworks,
};
use crate::corpus::{
    load_articles, load_marketcaps, load_prices, load_universe, AnalysisWindow, Article,
    EntityUniverse, MarketCapTable, Polarity, PriceBook, Quarter,
};
use crate::entity::{
    compile_matchers, parse_corpus, write_match_dump, MatcherConfig, OccurrenceSet, ParsedCorpus,
};
use crate::error::{Error, Result};
use crate::fixture::{generate, write_fixture, Fixture, FixtureSpec};
use crate::riskrank::{
    read_risk, riskrank_quarter, select_universe, sentiments_from_networks, write_risk,
    write_sentiments, RiskCalibration, RiskDatapoint, SentimentRecord,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub articles: PathBuf,
    pub universe: PathBuf,
    pub prices: PathBuf,
    pub marketcaps: PathBuf,
    pub output: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            articles: "data/articles.jsonl".into(),
            universe: "data/universe.csv".into(),
            prices: "data/prices.csv".into(),
            marketcaps: "data/marketcaps.csv".into(),
            output: "out".into(),
        }
    }
}

impl Paths {
    /// Inputs laid out the way [`write_fixture`] writes them.
    pub fn from_data_dir(data: &Path, output: &Path) -> Self {
        Paths {
            articles: data.join("articles.jsonl"),
            universe: data.join("universe.csv"),
            prices: data.join("prices.csv"),
            marketcaps: data.join("marketcaps.csv"),
            output: output.to_path_buf(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub window: AnalysisWindow,
    /// Laplace smoothing added to every pair before the centrality solve.
    pub alpha: f64,
    /// Second smoothing value for the rank sensitivity export.
    pub comparison_alpha: f64,
    pub calibration: RiskCalibration,
    /// Size of each average-rank list feeding the RiskRank universe.
    pub top_k: usize,
    /// Companies per centrality time-series export.
    pub series_top_k: usize,
    pub thresholds: Vec<f64>,
    pub min_delay: u32,
    pub max_delay: u32,
    pub condition_cap: f64,
    pub seed: u64,
    pub fixture: FixtureSpec,
    pub matcher: MatcherConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            paths: Paths::default(),
            window: AnalysisWindow::default(),
            alpha: 0.1,
            comparison_alpha: 1.0,
            calibration: RiskCalibration::default(),
            top_k: 50,
            series_top_k: 10,
            thresholds: THRESHOLDS.to_vec(),
            min_delay: 3,
            max_delay: 90,
            condition_cap: DEFAULT_CONDITION_CAP,
            seed: 7,
            fixture: FixtureSpec::default(),
            matcher: MatcherConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Validation(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.comparison_alpha > 0.0 && self.comparison_alpha.is_finite()) {
            return bad(format!(
                "comparison_alpha must be positive, got {}",
                self.comparison_alpha
            ));
        }
        self.calibration.validate()?;
        if self.top_k == 0 || self.series_top_k == 0 {
            return bad("top_k and series_top_k must be positive".into());
        }
        if self.thresholds.is_empty()
            || self.thresholds.iter().any(|t| !(0.0..=1.0).contains(t))
            || self.thresholds.windows(2).any(|w| w[0] >= w[1])
        {
            return bad("thresholds must be increasing values in [0, 1]".into());
        }
        if self.min_delay == 0 || self.max_delay < self.min_delay {
            return bad(format!(
                "delay bounds {}..{} are invalid",
                self.min_delay, self.max_delay
            ));
        }
        if self.window.end < self.window.start {
            return bad("analysis window is empty".into());
        }
        if self.condition_cap.is_nan() || self.condition_cap <= 1.0 {
            return bad("condition_cap must exceed 1".into());
        }
        self.fixture.validate()
    }

    /// Hash of every setting except file locations; inputs enter the
    /// manifest through their digests instead.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("paths");
        }
        sha256_hex(&serde_json::to_vec(&value).expect("value serializes"))
    }

    /// The threshold used for the aggregated-vs-individual comparison.
    pub fn comparison_threshold(&self) -> f64 {
        *self.thresholds.last().expect("validated non-empty")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Fixture,
    Parse,
    Networks,
    Rank,
    Risk,
    Backtest,
    Report,
}

impl Stage {
    pub fn command(self) -> &'static str {
        match self {
            Stage::Fixture => "fixture",
            Stage::Parse => "parse",
            Stage::Networks => "networks",
            Stage::Rank => "rank",
            Stage::Risk => "risk",
            Stage::Backtest => "backtest",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.command())
    }
}

// ---------------------------------------------------------------------------
// manifest

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub sha256: String,
    pub rows: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub config_hash: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, OutputRecord>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stages: BTreeMap<String, StageRecord>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        if !path.exists() {
            return Ok(Manifest::default());
        }
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_slice(&bytes)?)
    }
}

fn row_count(name: &str, bytes: &[u8]) -> Option<usize> {
    let lines = bytes.iter().filter(|&&b| b == b'\n').count();
    if name.ends_with(".csv") {
        Some(lines.saturating_sub(1))
    } else if name.ends_with(".jsonl") {
        Some(lines)
    } else {
        None
    }
}

/// Collects one stage's inputs and outputs, then records them.
struct StageWriter<'a> {
    stage: Stage,
    dir: &'a Path,
    record: StageRecord,
}

impl<'a> StageWriter<'a> {
    fn new(stage: Stage, dir: &'a Path, config: &RunConfig) -> Self {
        StageWriter {
            stage,
            dir,
            record: StageRecord {
                config_hash: config.hash(),
                ..StageRecord::default()
            },
        }
    }

    fn input(&mut self, role: &str, path: &Path) -> Result<()> {
        self.record
            .inputs
            .insert(role.to_owned(), file_sha256(path)?);
        Ok(())
    }

    fn write(&mut self, name: &str, bytes: Vec<u8>) -> Result<()> {
        write_atomic(&self.dir.join(name), &bytes)?;
        self.record.outputs.insert(
            name.to_owned(),
            OutputRecord {
                sha256: sha256_hex(&bytes),
                rows: row_count(name, &bytes),
            },
        );
        Ok(())
    }

    fn finish(self) -> Result<()> {
        let mut manifest = Manifest::load(self.dir)?;
        log::info!(
            "{}: wrote {} artifacts to {}",
            self.stage,
            self.record.outputs.len(),
            self.dir.display()
        );
        manifest
            .stages
            .insert(self.stage.command().to_owned(), self.record);
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        write_atomic(&self.dir.join(MANIFEST), &bytes)
    }
}

fn render<F>(f: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut Vec<u8>) -> Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

/// Path of an upstream artifact, or a dependency error naming its command.
fn require(dir: &Path, name: &str, producer: Stage) -> Result<PathBuf> {
    let path = dir.join(name);
    if path.is_file() {
        Ok(path)
    } else {
        Err(Error::MissingArtifact {
            path,
            command: producer.command(),
        })
    }
}

fn require_input(path: &Path, role: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Validation(format!(
            "{role} input {} does not exist",
            path.display()
        )))
    }
}

// ---------------------------------------------------------------------------
// parse

pub const OCCURRENCES: &str = "occurrences.csv";

/// Parses every article; `in_window` holds the sets inside the analysis
/// window and `excluded` the rest.
#[derive(Debug, Clone)]
pub struct ParseOutput {
    pub in_window: ParsedCorpus,
    pub excluded: ParsedCorpus,
}

pub fn compute_parse(
    articles: &[Article],
    universe: &EntityUniverse,
    config: &RunConfig,
) -> Result<ParseOutput> {
    let matchers = compile_matchers(universe, &config.matcher)?;
    log::info!(
        "{} patterns for {} companies",
        matchers.pattern_count(),
        matchers.company_count()
    );
    let parsed = parse_corpus(articles, &matchers);
    let (inside, outside): (Vec<OccurrenceSet>, Vec<OccurrenceSet>) = parsed
        .by_quarter
        .into_values()
        .flatten()
        .partition(|s| config.window.contains(s.quarter));
    if !outside.is_empty() {
        log::warn!(
            "{} articles fall outside {}..{} and are excluded",
            outside.len(),
            config.window.start,
            config.window.end
        );
    }
    Ok(ParseOutput {
        in_window: ParsedCorpus::from_sets(inside),
        excluded: ParsedCorpus::from_sets(outside),
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct OccurrenceRow {
    quarter: Quarter,
    article_id: String,
    polarity: Polarity,
    in_window: bool,
    companies: String,
}

#[derive(Debug, Serialize)]
struct SummaryRow {
    quarter: Quarter,
    in_window: bool,
    articles: usize,
    positive: usize,
    negative: usize,
    with_mentions: usize,
    mentions: usize,
}

fn write_occurrences(out: &ParseOutput, buf: &mut Vec<u8>) -> Result<()> {
    let mut w = csv::Writer::from_writer(buf);
    let tagged = out
        .in_window
        .iter()
        .map(|s| (s, true))
        .chain(out.excluded.iter().map(|s| (s, false)));
    let mut rows: Vec<(&OccurrenceSet, bool)> = tagged.collect();
    rows.sort_by(|a, b| (a.0.quarter, &a.0.article_id).cmp(&(b.0.quarter, &b.0.article_id)));
    for (s, in_window) in rows {
        w.serialize(OccurrenceRow {
            quarter: s.quarter,
            article_id: s.article_id.clone(),
            polarity: s.polarity,
            in_window,
            companies: s
                .companies
                .iter()
                .map(String::as_str)
                .collect::<Vec<_>>()
                .join("|"),
        })?;
    }
    w.flush().map_err(|e| Error::io("<occurrences>", e))?;
    Ok(())
}

/// Occurrence sets inside the analysis window, as exported by `parse`.
pub fn read_occurrences(path: &Path) -> Result<Vec<OccurrenceSet>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (n, row) in reader.deserialize::<OccurrenceRow>().enumerate() {
        let row = row.map_err(|e| Error::parse(path, n + 2, e.to_string()))?;
        if !row.in_window {
            continue;
        }
        out.push(OccurrenceSet {
            article_id: row.article_id,
            quarter: row.quarter,
            polarity: row.polarity,
            companies: row
                .companies
                .split('|')
                .filter(|s| !s.is_empty())
                .map(str::to_owned)
                .collect(),
            matches: Vec::new(),
        });
    }
    Ok(out)
}

pub fn cmd_parse(config: &RunConfig) -> Result<()> {
    config.validate()?;
    let p = &config.paths;
    require_input(&p.articles, "articles")?;
    require_input(&p.universe, "universe")?;
    let articles = load_articles(&p.articles)?;
    let universe = load_universe(&p.universe)?;
    let out = compute_parse(&articles, &universe, config)?;

    let mut w = StageWriter::new(Stage::Parse, &p.output, config);
    w.input("articles", &p.articles)?;
    w.input("universe", &p.universe)?;
    w.write(OCCURRENCES, render(|b| write_occurrences(&out, b))?)?;
    w.write(
        "matches.csv",
        render(|b| {
            let all = ParsedCorpus::from_sets(
                out.in_window
                    .iter()
                    .chain(out.excluded.iter())
                    .cloned()
                    .collect(),
            );
            write_match_dump(&all, b)
        })?,
    )?;
    w.write(
        "parse_summary.csv",
        render(|b| {
            let mut csv = csv::Writer::from_writer(b);
            for (corpus, in_window) in [(&out.in_window, true), (&out.excluded, false)] {
                for s in corpus.summary() {
                    csv.serialize(SummaryRow {
                        quarter: s.quarter,
                        in_window,
                        articles: s.articles,
                        positive: s.positive,
                        negative: s.negative,
                        with_mentions: s.with_mentions,
                        mentions: s.mentions,
                    })?;
                }
            }
            csv.flush().map_err(|e| Error::io("<summary>", e))?;
            Ok(())
        })?,
    )?;
    w.finish()
}

// ---------------------------------------------------------------------------
// networks

pub const NODES: &str = "nodes.csv";
pub const EDGES: &str = "edges.csv";
pub const ARTICLE_COUNTS: &str = "article_counts.csv";

pub type NetworkSeries = BTreeMap<Quarter, QuarterNetworks>;

/// One set of networks per window quarter over the full universe.
pub fn compute_networks(
    sets: &[OccurrenceSet],
    nodes: &Arc<NodeSet>,
    window: &AnalysisWindow,
) -> NetworkSeries {
    let mut by_quarter: BTreeMap<Quarter, Vec<OccurrenceSet>> = BTreeMap::new();
    for s in sets.iter().filter(|s| window.contains(s.quarter)) {
        by_quarter.entry(s.quarter).or_default().push(s.clone());
    }
    window
        .quarters()
        .into_par_iter()
        .map(|q| {
            let sets = by_quarter.get(&q).map(Vec::as_slice).unwrap_or(&[]);
            (q, build_networks(sets, q, nodes))
        })
        .collect()
}

fn all_networks(series: &NetworkSeries) -> impl Iterator<Item = &QuarterNetwork> {
    series.values().flat_map(QuarterNetworks::iter)
}

pub fn cmd_networks(config: &RunConfig) -> Result<()> {
    config.validate()?;
    let p = &config.paths;
    let occ = require(&p.output, OCCURRENCES, Stage::Parse)?;
    require_input(&p.universe, "universe")?;
    let sets = read_occurrences(&occ)?;
    let universe = load_universe(&p.universe)?;
    let nodes = NodeSet::new(universe.ids());
    let series = compute_networks(&sets, &nodes, &config.window);

    let mut w = StageWriter::new(Stage::Networks, &p.output, config);
    w.input(OCCURRENCES, &occ)?;
    w.input("universe", &p.universe)?;
    w.write(NODES, render(|b| write_nodes(all_networks(&series), b))?)?;
    w.write(EDGES, render(|b| write_edges(all_networks(&series), b))?)?;
    w.write(
        ARTICLE_COUNTS,
        render(|b| write_article_counts(all_networks(&series), b))?,
    )?;
    w.write(
        "network_stats.csv",
        render(|b| {
            let mut csv = csv::Writer::from_writer(b);
            for net in all_networks(&series) {
                csv.serialize(network_stats(net))?;
            }
            csv.flush().map_err(|e| Error::io("<stats>", e))?;
            Ok(())
        })?,
    )?;
    w.finish()
}

#[derive(Debug, Deserialize)]
struct NodeRow {
    quarter: Quarter,
    polarity: NetworkKind,
    id: String,
    #[serde(rename = "S")]
    s: u32,
}

#[derive(Debug, Deserialize)]
struct EdgeRow {
    quarter: Quarter,
    polarity: NetworkKind,
    i: String,
    j: String,
    weight: u32,
}

#[derive(Debug, Deserialize)]
struct CountRow {
    quarter: Quarter,
    polarity: NetworkKind,
    articles: usize,
}

/// Rebuilds the networks exported by `networks`.
pub fn read_networks(dir: &Path) -> Result<NetworkSeries> {
    let nodes_path = require(dir, NODES, Stage::Networks)?;
    let edges_path = require(dir, EDGES, Stage::Networks)?;
    let counts_path = require(dir, ARTICLE_COUNTS, Stage::Networks)?;

    let mut node_rows = Vec::new();
    for (n, row) in csv::Reader::from_path(&nodes_path)?
        .deserialize::<NodeRow>()
        .enumerate()
    {
        node_rows.push(row.map_err(|e| Error::parse(&nodes_path, n + 2, e.to_string()))?);
    }
    let ids: BTreeSet<String> = node_rows.iter().map(|r| r.id.clone()).collect();
    let nodes = NodeSet::new(ids.into_iter().collect());
    let index = |id: &str, path: &Path, line: usize| {
        nodes
            .index_of(id)
            .ok_or_else(|| Error::parse(path, line, format!("unknown node {id}")))
    };

    let mut series = NetworkSeries::new();
    for (n, row) in node_rows.into_iter().enumerate() {
        let i = index(&row.id, &nodes_path, n + 2)?;
        network_mut(&mut series, &nodes, row.quarter, row.polarity).set_node_weight(i, row.s);
    }
    for (n, row) in csv::Reader::from_path(&edges_path)?
        .deserialize::<EdgeRow>()
        .enumerate()
    {
        let row = row.map_err(|e| Error::parse(&edges_path, n + 2, e.to_string()))?;
        let i = index(&row.i, &edges_path, n + 2)?;
        let j = index(&row.j, &edges_path, n + 2)?;
        network_mut(&mut series, &nodes, row.quarter, row.polarity).set_edge(i, j, row.weight);
    }
    for (n, row) in csv::Reader::from_path(&counts_path)?
        .deserialize::<CountRow>()
        .enumerate()
    {
        let row = row.map_err(|e| Error::parse(&counts_path, n + 2, e.to_string()))?;
        network_mut(&mut series, &nodes, row.quarter, row.polarity).set_article_count(row.articles);
    }
    Ok(series)
}

fn network_mut<'s>(
    series: &'s mut NetworkSeries,
    nodes: &Arc<NodeSet>,
    q: Quarter,
    kind: NetworkKind,
) -> &'s mut QuarterNetwork {
    series
        .entry(q)
        .or_insert_with(|| QuarterNetworks {
            positive: QuarterNetwork::empty(q, NetworkKind::Positive, nodes.clone()),
            negative: QuarterNetwork::empty(q, NetworkKind::Negative, nodes.clone()),
            mixed: QuarterNetwork::empty(q, NetworkKind::Mixed, nodes.clone()),
        })
        .get_mut(kind)
}

// ---------------------------------------------------------------------------
// rank

pub const CENTRALITY: &str = "centrality.csv";
pub const AVERAGE_RANK: &str = "average_rank.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothingComparison {
    pub quarter: Quarter,
    pub polarity: NetworkKind,
    pub alpha: f64,
    pub comparison_alpha: f64,
    pub kendall_tau: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AverageRankRow {
    pub polarity: NetworkKind,
    pub mode: ScoreMode,
    pub position: usize,
    pub canonical_id: String,
    pub mean_rank: f64,
    pub quarters: u32,
}

#[derive(Debug, Clone)]
pub struct RankOutput {
    /// Absolute then normalized, by quarter and polarity.
    pub tables: Vec<CentralityTable>,
    pub averages: Vec<AverageRankRow>,
    pub smoothing: Vec<SmoothingComparison>,
}

impl RankOutput {
    pub fn average(&self, polarity: NetworkKind, mode: ScoreMode) -> Vec<AverageRank> {
        averages_for(&self.averages, polarity, mode)
    }
}

fn averages_for(
    rows: &[AverageRankRow],
    polarity: NetworkKind,
    mode: ScoreMode,
) -> Vec<AverageRank> {
    let mut out: Vec<&AverageRankRow> = rows
        .iter()
        .filter(|r| r.polarity == polarity && r.mode == mode)
        .collect();
    out.sort_by_key(|r| r.position);
    out.into_iter()
        .map(|r| AverageRank {
            canonical_id: r.canonical_id.clone(),
            mean_rank: r.mean_rank,
            quarters: r.quarters,
        })
        .collect()
}

struct RankedNetwork {
    absolute: CentralityTable,
    normalized: CentralityTable,
    comparison: SmoothingComparison,
}

fn rank_network(
    net: &QuarterNetwork,
    caps: &MarketCapTable,
    config: &RunConfig,
) -> Result<RankedNetwork> {
    let solve = |alpha: f64| -> Result<CentralityTable> {
        let smoothed = smooth(net, alpha)?;
        let raw = information_centrality_with_cap(&smoothed, config.condition_cap)?;
        let rescaled = minmax_rescale(&raw);
        if rescaled.degenerate {
            log::warn!(
                "{} {}: all centralities equal, rescaled to 0",
                net.quarter,
                net.kind
            );
        }
        let scores = net
            .nodes()
            .ids()
            .iter()
            .cloned()
            .zip(rescaled.values)
            .collect();
        Ok(CentralityTable::new(
            net.quarter,
            net.kind,
            ScoreMode::Absolute,
            scores,
        ))
    };
    let absolute = solve(config.alpha)?;
    let other = solve(config.comparison_alpha)?;
    let normalized = CentralityTable::new(
        net.quarter,
        net.kind,
        ScoreMode::Normalized,
        normalized_score(&absolute.scores, caps, net.quarter)?,
    );
    let comparison = SmoothingComparison {
        quarter: net.quarter,
        polarity: net.kind,
        alpha: config.alpha,
        comparison_alpha: config.comparison_alpha,
        kendall_tau: kendall_tau(&absolute.ranks, &other.ranks),
    };
    Ok(RankedNetwork {
        absolute,
        normalized,
        comparison,
    })
}

pub fn compute_rank(
    series: &NetworkSeries,
    caps: &MarketCapTable,
    config: &RunConfig,
) -> Result<RankOutput> {
    let jobs: Vec<&QuarterNetwork> = series
        .values()
        .flat_map(QuarterNetworks::iter)
        .filter(|net| {
            let keep = net.article_count() > 0;
            if !keep {
                log::warn!("{} {}: no articles, not ranked", net.quarter, net.kind);
            }
            keep
        })
        .collect();
    let ranked: Vec<RankedNetwork> = jobs
        .par_iter()
        .map(|net| rank_network(net, caps, config))
        .collect::<Result<_>>()?;

    let mut tables = Vec::with_capacity(ranked.len() * 2);
    let mut smoothing = Vec::with_capacity(ranked.len());
    for r in &ranked {
        tables.push(r.absolute.clone());
        smoothing.push(r.comparison.clone());
    }
    for r in ranked {
        tables.push(r.normalized);
    }
    let mut averages = Vec::new();
    for polarity in NetworkKind::ALL {
        for mode in [ScoreMode::Absolute, ScoreMode::Normalized] {
            let list = average_rank(
                tables
                    .iter()
                    .filter(|t| t.polarity == polarity && t.mode == mode),
                usize::MAX,
            );
            averages.extend(list.into_iter().enumerate().map(|(i, a)| AverageRankRow {
                polarity,
                mode,
                position: i + 1,
                canonical_id: a.canonical_id,
                mean_rank: a.mean_rank,
                quarters: a.quarters,
            }));
        }
    }
    Ok(RankOutput {
        tables,
        averages,
        smoothing,
    })
}

fn write_rows<T: Serialize>(rows: impl IntoIterator<Item = T>, buf: &mut Vec<u8>) -> Result<()> {
    let mut w = csv::Writer::from_writer(buf);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn cmd_rank(config: &RunConfig) -> Result<()> {
    config.validate()?;
    let p = &config.paths;
    let series = read_networks(&p.output)?;
    require_input(&p.marketcaps, "marketcaps")?;
    let caps = load_marketcaps(&p.marketcaps)?;
    let out = compute_rank(&series, &caps, config)?;

    let mut w = StageWriter::new(Stage::Rank, &p.output, config);
    for name in [NODES, EDGES, ARTICLE_COUNTS] {
        w.input(name, &p.output.join(name))?;
    }
    w.input("marketcaps", &p.marketcaps)?;
    w.write(CENTRALITY, render(|b| write_tables(&out.tables, b))?)?;
    w.write(AVERAGE_RANK, render(|b| write_rows(&out.averages, b))?)?;
    w.write(
        "smoothing_sensitivity.csv",
        render(|b| write_rows(&out.smoothing, b))?,
    )?;
    w.finish()
}

#[derive(Debug, Deserialize)]
struct CentralityRow {
    quarter: Quarter,
    polarity: NetworkKind,
    mode: ScoreMode,
    canonical_id: String,
    score: f64,
}

fn read_average_rank(path: &Path) -> Result<Vec<AverageRankRow>> {
    let mut out = Vec::new();
    for (n, row) in csv::Reader::from_path(path)?
        .deserialize::<AverageRankRow>()
        .enumerate()
    {
        out.push(row.map_err(|e| Error::parse(path, n + 2, e.to_string()))?);
    }
    Ok(out)
}

type CentralityGroup = (NetworkKind, ScoreMode, BTreeMap<String, f64>);

fn read_centrality(path: &Path) -> Result<Vec<CentralityTable>> {
    let mut grouped: BTreeMap<(Quarter, String, String), CentralityGroup> = BTreeMap::new();
    for (n, row) in csv::Reader::from_path(path)?
        .deserialize::<CentralityRow>()
        .enumerate()
    {
        let row = row.map_err(|e| Error::parse(path, n + 2, e.to_string()))?;
        grouped
            .entry((row.quarter, row.polarity.to_string(), row.mode.to_string()))
            .or_insert_with(|| (row.polarity, row.mode, BTreeMap::new()))
            .2
            .insert(row.canonical_id, row.score);
    }
    Ok(grouped
        .into_iter()
        .map(|((q, _, _), (polarity, mode, scores))| {
            CentralityTable::new(q, polarity, mode, scores)
        })
        .collect())
}

// ---------------------------------------------------------------------------
// risk

pub const RISK: &str = "risk.csv";

#[derive(Debug, Clone)]
pub struct RiskOutput {
    pub universe: BTreeSet<String>,
    pub sentiments: Vec<SentimentRecord>,
    pub datapoints: Vec<RiskDatapoint>,
}

pub fn compute_risk(
    series: &NetworkSeries,
    absolute: &[AverageRank],
    normalized: &[AverageRank],
    universe: &EntityUniverse,
    prices: &PriceBook,
    config: &RunConfig,
) -> Result<RiskOutput> {
    let selection = select_universe(absolute, normalized, config.top_k);
    log::info!("RiskRank universe: {} companies", selection.len());
    let mut sentiments = Vec::new();
    let mut datapoints = Vec::new();
    for (&q, nets) in series {
        let sent = sentiments_from_networks(nets);
        let mut dps = riskrank_quarter(&nets.mixed, &sent, &selection, &config.calibration)?;
        for dp in &mut dps {
            let series = universe
                .get(&dp.canonical_id)
                .and_then(|r| prices.series_for(r));
            dp.measurement_date = crate::backtest::measurement_date(q, series);
        }
        sentiments.extend(sent.into_values().filter(|s| s.s_rel.is_some()));
        datapoints.extend(dps);
    }
    Ok(RiskOutput {
        universe: selection,
        sentiments,
        datapoints,
    })
}

pub fn cmd_risk(config: &RunConfig) -> Result<()> {
    config.validate()?;
    let p = &config.paths;
    let avg_path = require(&p.output, AVERAGE_RANK, Stage::Rank)?;
    let series = read_networks(&p.output)?;
    require_input(&p.universe, "universe")?;
    require_input(&p.prices, "prices")?;
    let averages = read_average_rank(&avg_path)?;
    let universe = load_universe(&p.universe)?;
    let prices = load_prices(&p.prices)?;
    let out = compute_risk(
        &series,
        &averages_for(&averages, NetworkKind::Mixed, ScoreMode::Absolute),
        &averages_for(&averages, NetworkKind::Mixed, ScoreMode::Normalized),
        &universe,
        &prices,
        config,
    )?;

    let mut w = StageWriter::new(Stage::Risk, &p.output, config);
    for name in [NODES, EDGES, ARTICLE_COUNTS, AVERAGE_RANK] {
        w.input(name, &p.output.join(name))?;
    }
    w.input("universe", &p.universe)?;
    w.input("prices", &p.prices)?;
    w.write(
        "risk_universe.csv",
        render(|b| {
            let mut csv = csv::Writer::from_writer(b);
            csv.write_record(["canonical_id"])?;
            for id in &out.universe {
                csv.write_record([id])?;
            }
            csv.flush().map_err(|e| Error::io("<universe>", e))?;
            Ok(())
        })?,
    )?;
    w.write(
        "sentiment.csv",
        render(|b| write_sentiments(&out.sentiments, b))?,
    )?;
    w.write(
        RISK,
        render(|b| write_risk(&out.datapoints, &config.calibration, b))?,
    )?;
    w.finish()
}

// ---------------------------------------------------------------------------
// backtest

pub const TABLES: &str = "tables.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyRateRow {
    pub series: String,
    pub threshold: Option<f64>,
    pub delay: u32,
    pub members: usize,
    pub defined: usize,
    pub decreased: usize,
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestDelay {
    pub kind: RiskKind,
    pub threshold: f64,
    pub delay: u32,
    pub diff: f64,
    pub subset_rate: f64,
    pub subset_events: usize,
    pub benchmark_rate: f64,
    pub benchmark_events: usize,
    /// Two-proportion standard error of the difference, as a fraction.
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestOutput {
    pub valid_datapoints: usize,
    pub disqualified: usize,
    pub table2: Vec<DeclineTable>,
    pub table2_individual: Vec<DeclineTable>,
    pub table3: ComparisonTable,
    pub histogram: Vec<HistogramRow>,
    pub best_delays: Vec<BestDelay>,
    pub daily: Vec<DailyRateRow>,
}

impl BacktestOutput {
    pub fn table2_at(&self, threshold: f64) -> Option<&DeclineTable> {
        self.table2
            .iter()
            .find(|t| (t.threshold - threshold).abs() < 1e-9)
    }
}

fn daily_rows<'a>(
    name: &str,
    threshold: Option<f64>,
    members: usize,
    rates: &'a [DailyRate],
) -> impl Iterator<Item = DailyRateRow> + 'a {
    let name = name.to_owned();
    rates.iter().map(move |r| DailyRateRow {
        series: name.clone(),
        threshold,
        delay: r.delay,
        members,
        defined: r.defined,
        decreased: r.decreased,
        rate: r.rate,
    })
}

pub fn compute_backtest(
    datapoints: &[RiskDatapoint],
    universe: &EntityUniverse,
    prices: &PriceBook,
    config: &RunConfig,
) -> Result<BacktestOutput> {
    let events = EventTable::build(
        datapoints,
        |id| universe.get(id).and_then(|r| prices.series_for(r)),
        config.min_delay,
        config.max_delay,
    )?;
    let bench_members = events.benchmark();
    let bench = events.daily_rates(&bench_members);
    let mut daily: Vec<DailyRateRow> =
        daily_rows("benchmark", None, bench_members.len(), &bench).collect();

    let mut table2 = Vec::new();
    let mut table2_individual = Vec::new();
    let mut best_delays = Vec::new();
    let mut at_comparison: BTreeMap<&'static str, Vec<DailyRate>> = BTreeMap::new();
    let comparison = config.comparison_threshold();
    for kind in [RiskKind::Aggregated, RiskKind::Individual] {
        for &t in &config.thresholds {
            let members = events.subset(kind, t);
            let rates = events.daily_rates(&members);
            daily.extend(daily_rows(kind.as_str(), Some(t), members.len(), &rates));
            let table = build_table2(&rates, &bench, t);
            match kind {
                RiskKind::Aggregated => table2.push(table),
                RiskKind::Individual => table2_individual.push(table),
            }
            if let Some((delay, diff)) = best_single_delay(&rates, &bench) {
                let i = (delay - config.min_delay) as usize;
                let (s, b) = (rates[i], bench[i]);
                let p1 = s.rate.unwrap_or(0.0) / 100.0;
                let p2 = b.rate.unwrap_or(0.0) / 100.0;
                best_delays.push(BestDelay {
                    kind,
                    threshold: t,
                    delay,
                    diff,
                    subset_rate: 100.0 * p1,
                    subset_events: s.defined,
                    benchmark_rate: 100.0 * p2,
                    benchmark_events: b.defined,
                    stderr: proportion_stderr(p1, s.defined, p2, b.defined),
                });
            }
            if (t - comparison).abs() < 1e-12 {
                at_comparison.insert(kind.as_str(), rates);
            }
        }
    }
    let table3 = build_table3(
        &at_comparison[RiskKind::Aggregated.as_str()],
        &at_comparison[RiskKind::Individual.as_str()],
        &bench,
        comparison,
    );
    Ok(BacktestOutput {
        valid_datapoints: events.valid_count(),
        disqualified: events.disqualified(),
        table2,
        table2_individual,
        table3,
        histogram: risk_histogram(events.datapoints()),
        best_delays,
        daily,
    })
}

pub fn cmd_backtest(config: &RunConfig) -> Result<()> {
    config.validate()?;
    let p = &config.paths;
    let risk_path = require(&p.output, RISK, Stage::Risk)?;
    require_input(&p.universe, "universe")?;
    require_input(&p.prices, "prices")?;
    let (datapoints, _) = read_risk(&risk_path)?;
    let universe = load_universe(&p.universe)?;
    let prices = load_prices(&p.prices)?;
    let out = compute_backtest(&datapoints, &universe, &prices, config)?;

    let mut w = StageWriter::new(Stage::Backtest, &p.output, config);
    w.input(RISK, &risk_path)?;
    w.input("universe", &p.universe)?;
    w.input("prices", &p.prices)?;
    w.write("daily_rates.csv", render(|b| write_rows(&out.daily, b))?)?;
    w.write(
        "table2.csv",
        render(|b| {
            for (i, t) in out.table2.iter().enumerate() {
                let mut part = Vec::new();
                write_table2_csv(t, RiskKind::Aggregated, &mut part)?;
                append_csv(b, &part, i == 0);
            }
            for t in &out.table2_individual {
                let mut part = Vec::new();
                write_table2_csv(t, RiskKind::Individual, &mut part)?;
                append_csv(b, &part, false);
            }
            Ok(())
        })?,
    )?;
    w.write("table3.csv", render(|b| write_table3_csv(&out.table3, b))?)?;
    w.write(
        "best_delay.csv",
        render(|b| write_rows(&out.best_delays, b))?,
    )?;
    let mut tables = serde_json::to_vec_pretty(&out)?;
    tables.push(b'\n');
    w.write(TABLES, tables)?;
    w.finish()
}

/// Appends CSV `part`, dropping its header unless `keep_header`.
fn append_csv(buf: &mut Vec<u8>, part: &[u8], keep_header: bool) {
    let body = if keep_header {
        part
    } else {
        match part.iter().position(|&b| b == b'\n') {
            Some(i) => &part[i + 1..],
            None => &[],
        }
    };
    buf.extend_from_slice(body);
}

// ---------------------------------------------------------------------------
// report

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskPriceRow {
    pub canonical_id: String,
    pub quarter: Quarter,
    pub measurement_date: Option<NaiveDate>,
    pub close: Option<f64>,
    pub x_own: f64,
    pub rr_total: f64,
}

pub fn risk_price_series(
    datapoints: &[RiskDatapoint],
    universe: &EntityUniverse,
    prices: &PriceBook,
) -> Vec<RiskPriceRow> {
    datapoints
        .iter()
        .map(|dp| {
            let close = dp.measurement_date.and_then(|m| {
                universe
                    .get(&dp.canonical_id)
                    .and_then(|r| prices.series_for(r))
                    .and_then(|s| s.on_or_before(m))
                    .map(|(_, p)| p)
            });
            RiskPriceRow {
                canonical_id: dp.canonical_id.clone(),
                quarter: dp.quarter,
                measurement_date: dp.measurement_date,
                close,
                x_own: dp.x_own,
                rr_total: dp.rr_total,
            }
        })
        .collect()
}

pub fn render_report(out: &BacktestOutput) -> (String, String) {
    let mut t2 = format!(
        "{} valid datapoints, {} disqualified for lack of prices\n\n",
        out.valid_datapoints, out.disqualified
    );
    for t in &out.table2 {
        t2.push_str(&render_table2(t));
        t2.push('\n');
    }
    (t2, render_table3(&out.table3))
}

pub fn cmd_report(config: &RunConfig) -> Result<()> {
    config.validate()?;
    let p = &config.paths;
    let tables_path = require(&p.output, TABLES, Stage::Backtest)?;
    let risk_path = require(&p.output, RISK, Stage::Risk)?;
    let centrality_path = require(&p.output, CENTRALITY, Stage::Rank)?;
    let avg_path = require(&p.output, AVERAGE_RANK, Stage::Rank)?;
    require_input(&p.universe, "universe")?;
    require_input(&p.prices, "prices")?;
    let bytes = fs::read(&tables_path).map_err(|e| Error::io(&tables_path, e))?;
    let out: BacktestOutput = serde_json::from_slice(&bytes)?;
    let (datapoints, _) = read_risk(&risk_path)?;
    let tables = read_centrality(&centrality_path)?;
    let averages = read_average_rank(&avg_path)?;
    let universe = load_universe(&p.universe)?;
    let prices = load_prices(&p.prices)?;

    let mut w = StageWriter::new(Stage::Report, &p.output, config);
    for (role, path) in [
        (TABLES, &tables_path),
        (RISK, &risk_path),
        (CENTRALITY, &centrality_path),
        (AVERAGE_RANK, &avg_path),
    ] {
        w.input(role, path)?;
    }
    w.input("universe", &p.universe)?;
    w.input("prices", &p.prices)?;
    let (t2, t3) = render_report(&out);
    w.write("table2.txt", t2.into_bytes())?;
    w.write("table3.txt", t3.into_bytes())?;
    for (name, mode) in [
        ("figure1_absolute.csv", ScoreMode::Absolute),
        ("figure2_normalized.csv", ScoreMode::Normalized),
    ] {
        let ids: Vec<String> = averages_for(&averages, NetworkKind::Mixed, mode)
            .into_iter()
            .take(config.series_top_k)
            .map(|a| a.canonical_id)
            .collect();
        let selected = tables
            .iter()
            .filter(|t| t.polarity == NetworkKind::Mixed && t.mode == mode);
        w.write(name, render(|b| write_series(selected, &ids, b))?)?;
    }
    w.write(
        "figure3_risk_price.csv",
        render(|b| write_rows(risk_price_series(&datapoints, &universe, &prices), b))?,
    )?;
    w.write(
        "figure4_histogram.csv",
        render(|b| write_histogram(&out.histogram, b))?,
    )?;
    w.finish()
}

// ---------------------------------------------------------------------------
// fixture and whole runs

/// Writes the synthetic inputs to the directories named in `config.paths`
/// (all inputs must share one directory).
pub fn cmd_fixture(config: &RunConfig, dir: &Path) -> Result<Fixture> {
    config.validate()?;
    let spec = FixtureSpec {
        seed: config.seed,
        ..config.fixture.clone()
    };
    let fixture = generate(&spec)?;
    write_fixture(&fixture, dir)?;
    log::info!(
        "fixture: {} companies, {} articles, {} priced tickers in {}",
        fixture.universe.len(),
        fixture.articles.len(),
        fixture.prices.len(),
        dir.display()
    );
    Ok(fixture)
}

pub fn cmd_run_all(config: &RunConfig) -> Result<()> {
    cmd_parse(config)?;
    cmd_networks(config)?;
    cmd_rank(config)?;
    cmd_risk(config)?;
    cmd_backtest(config)?;
    cmd_report(config)
}

/// Every stage's in-memory result.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub parse: ParseOutput,
    pub networks: NetworkSeries,
    pub rank: RankOutput,
    pub risk: RiskOutput,
    pub backtest: BacktestOutput,
}

/// The whole pipeline without touching the file system.
pub fn run_in_memory(fixture: &Fixture, config: &RunConfig) -> Result<PipelineRun> {
    config.validate()?;
    let parse = compute_parse(&fixture.articles, &fixture.universe, config)?;
    let sets: Vec<OccurrenceSet> = parse.in_window.iter().cloned().collect();
    let nodes = NodeSet::new(fixture.universe.ids());
    let networks = compute_networks(&sets, &nodes, &config.window);
    let rank = compute_rank(&networks, &fixture.marketcaps, config)?;
    let risk = compute_risk(
        &networks,
        &rank.average(NetworkKind::Mixed, ScoreMode::Absolute),
        &rank.average(NetworkKind::Mixed, ScoreMode::Normalized),
        &fixture.universe,
        &fixture.prices,
        config,
    )?;
    let backtest = compute_backtest(&risk.datapoints, &fixture.universe, &fixture.prices, config)?;
    Ok(PipelineRun {
        parse,
        networks,
        rank,
        risk,
        backtest,
    })
}

/// Config whose window covers exactly the fixture's quarters.
pub fn fixture_config(spec: &FixtureSpec) -> RunConfig {
    let mut end = spec.start;
    for _ in 1..spec.quarters {
        end = end.next();
    }
    RunConfig {
        window: AnalysisWindow {
            start: spec.start,
            end,
        },
        seed: spec.seed,
        fixture: spec.clone(),
        ..RunConfig::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation_rejects_out_of_range() {
        let ok = RunConfig::default();
        ok.validate().unwrap();
        for bad in [
            RunConfig {
                alpha: 0.0,
                ..ok.clone()
            },
            RunConfig {
                top_k: 0,
                ..ok.clone()
            },
            RunConfig {
                thresholds: vec![0.6, 0.5],
                ..ok.clone()
            },
            RunConfig {
                min_delay: 10,
                max_delay: 5,
                ..ok.clone()
            },
            RunConfig {
                calibration: RiskCalibration {
                    lambda: 1.5,
                    ..ok.calibration
                },
                ..ok.clone()
            },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Validation(_))));
        }
    }

    #[test]
    fn config_toml_round_trip_and_hash() {
        let text = r#"
alpha = 0.2
top_k = 30
[window]
start = "2012Q1"
end = "2013Q4"
[calibration]
lambda = 0.4
[paths]
output = "elsewhere"
"#;
        let cfg = RunConfig::from_toml(text).unwrap();
        assert_eq!(cfg.alpha, 0.2);
        assert_eq!(cfg.window.start, Quarter::new(2012, 1).unwrap());
        assert_eq!(cfg.calibration.lambda, 0.4);
        assert_eq!(cfg.calibration.mu, 0.5);
        // paths do not enter the hash
        let moved = RunConfig {
            paths: Paths::default(),
            ..cfg.clone()
        };
        assert_eq!(cfg.hash(), moved.hash());
        assert_ne!(cfg.hash(), RunConfig::default().hash());
        assert!(RunConfig::from_toml("bogus = 1").is_err());
    }

    #[test]
    fn missing_upstream_names_command() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            paths: Paths::from_data_dir(dir.path(), &dir.path().join("out")),
            ..RunConfig::default()
        };
        let err = cmd_backtest(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("newsrisk risk"), "{err}");
        let err = cmd_networks(&cfg).unwrap_err();
        assert!(err.to_string().contains("newsrisk parse"), "{err}");
    }

    #[test]
    fn csv_append_drops_repeated_headers() {
        let mut buf = Vec::new();
        append_csv(&mut buf, b"a,b\n1,2\n", true);
        append_csv(&mut buf, b"a,b\n3,4\n", false);
        assert_eq!(buf, b"a,b\n1,2\n3,4\n");
    }
}
