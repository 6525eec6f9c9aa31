//! Price-decline backtest of quarterly risk measurements.
//!
//! A datapoint is measured at the last trading day of its quarter. For each
//! calendar-day delay the close at (or most recently before) the delayed
//! date is compared with the close at measurement; a strictly lower price is
//! a decline. Threshold subsets are compared with the benchmark of all valid
//! datapoints, day by day and over delay ranges.

use std::fmt::Write as _;
use std::io::Write;

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::corpus::{PriceSeries, Quarter};
use crate::error::{Error, Result};
use crate::riskrank::RiskDatapoint;

pub const THRESHOLDS: [f64; 6] = [0.5, 0.6, 0.7, 0.8, 0.9, 1.0];
pub const THRESHOLD_EPS: f64 = 1e-9;

/// Delay ranges reported in the decline tables, in display order.
pub const REPORT_RANGES: [(u32, u32); 12] = [
    (3, 90),
    (3, 45),
    (45, 90),
    (3, 10),
    (11, 20),
    (21, 30),
    (31, 40),
    (41, 50),
    (51, 60),
    (61, 70),
    (71, 80),
    (81, 90),
];

/// The disjoint ranges that tile 3..=90.
pub const DECADE_RANGES: [(u32, u32); 9] = [
    (3, 10),
    (11, 20),
    (21, 30),
    (31, 40),
    (41, 50),
    (51, 60),
    (61, 70),
    (71, 80),
    (81, 90),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RiskKind {
    Aggregated,
    Individual,
}

impl RiskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RiskKind::Aggregated => "aggregated",
            RiskKind::Individual => "individual",
        }
    }

    pub fn value(self, dp: &RiskDatapoint) -> f64 {
        match self {
            RiskKind::Aggregated => dp.rr_total,
            RiskKind::Individual => dp.x_own,
        }
    }
}

/// Last price date inside `quarter`, or `None` without prices that quarter.
pub fn measurement_date(quarter: Quarter, series: Option<&PriceSeries>) -> Option<NaiveDate> {
    let (date, _) = series?.on_or_before(quarter.last_day())?;
    (date >= quarter.first_day()).then_some(date)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeclineEvent {
    pub canonical_id: String,
    pub quarter: Quarter,
    pub delay_days: u32,
    pub decreased: Option<bool>,
}

fn decreased_after(series: &PriceSeries, measured: NaiveDate, delay: u32) -> Option<bool> {
    let (d0, p0) = series.on_or_before(measured)?;
    if d0 != measured {
        return None;
    }
    let (d1, p1) = series.on_or_before(measured + Duration::days(delay as i64))?;
    (d1 > measured).then_some(p1 < p0)
}

pub fn decline_event(
    datapoint: &RiskDatapoint,
    delay: u32,
    series: Option<&PriceSeries>,
) -> DeclineEvent {
    let decreased = match (datapoint.measurement_date, series) {
        (Some(m), Some(s)) => decreased_after(s, m, delay),
        _ => None,
    };
    DeclineEvent {
        canonical_id: datapoint.canonical_id.clone(),
        quarter: datapoint.quarter,
        delay_days: delay,
        decreased,
    }
}

/// Decline rate of one subset at one delay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailyRate {
    pub delay: u32,
    pub defined: usize,
    pub decreased: usize,
    /// Percentage; `None` without defined events.
    pub rate: Option<f64>,
}

/// Events for all valid datapoints.
#[derive(Debug, Clone)]
pub struct EventTable {
    pub min_delay: u32,
    pub max_delay: u32,
    datapoints: Vec<RiskDatapoint>,
    /// `events[i][d - min_delay]`
    events: Vec<Vec<Option<bool>>>,
    disqualified: usize,
}

impl EventTable {
    /// Computes events for every datapoint; datapoints without a measurement
    /// date or without any defined event are disqualified.
    pub fn build<'a>(
        datapoints: &[RiskDatapoint],
        prices: impl Fn(&str) -> Option<&'a PriceSeries>,
        min_delay: u32,
        max_delay: u32,
    ) -> Result<Self> {
        if min_delay == 0 || max_delay < min_delay {
            return Err(Error::Validation(format!(
                "delay bounds {min_delay}..{max_delay} are invalid"
            )));
        }
        let mut table = EventTable {
            min_delay,
            max_delay,
            datapoints: Vec::new(),
            events: Vec::new(),
            disqualified: 0,
        };
        for dp in datapoints {
            let series = prices(&dp.canonical_id);
            let row: Vec<Option<bool>> = (min_delay..=max_delay)
                .map(|d| decline_event(dp, d, series).decreased)
                .collect();
            if row.iter().any(Option::is_some) {
                table.datapoints.push(dp.clone());
                table.events.push(row);
            } else {
                table.disqualified += 1;
            }
        }
        log::info!(
            "{} valid datapoints, {} disqualified for lack of prices",
            table.datapoints.len(),
            table.disqualified
        );
        Ok(table)
    }

    pub fn datapoints(&self) -> &[RiskDatapoint] {
        &self.datapoints
    }

    pub fn valid_count(&self) -> usize {
        self.datapoints.len()
    }

    pub fn disqualified(&self) -> usize {
        self.disqualified
    }

    pub fn event(&self, i: usize, delay: u32) -> Option<bool> {
        if delay < self.min_delay || delay > self.max_delay {
            return None;
        }
        self.events[i][(delay - self.min_delay) as usize]
    }

    pub fn benchmark(&self) -> Vec<usize> {
        (0..self.datapoints.len()).collect()
    }

    /// Valid datapoints with risk at least `threshold` (less a 1e-9 slack).
    pub fn subset(&self, kind: RiskKind, threshold: f64) -> Vec<usize> {
        self.datapoints
            .iter()
            .enumerate()
            .filter(|(_, dp)| kind.value(dp) >= threshold - THRESHOLD_EPS)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn daily_rate(&self, subset: &[usize], delay: u32) -> DailyRate {
        let mut defined = 0;
        let mut decreased = 0;
        for &i in subset {
            if let Some(dec) = self.event(i, delay) {
                defined += 1;
                decreased += dec as usize;
            }
        }
        DailyRate {
            delay,
            defined,
            decreased,
            rate: (defined > 0).then(|| 100.0 * decreased as f64 / defined as f64),
        }
    }

    pub fn daily_rates(&self, subset: &[usize]) -> Vec<DailyRate> {
        (self.min_delay..=self.max_delay)
            .map(|d| self.daily_rate(subset, d))
            .collect()
    }

    /// Datapoints of `subset` with at least one defined event in `[a, b]`.
    pub fn members_in_range(&self, subset: &[usize], (a, b): (u32, u32)) -> usize {
        subset
            .iter()
            .filter(|&&i| (a..=b).any(|d| self.event(i, d).is_some()))
            .count()
    }
}

/// `abs_diff / std`, undefined for a zero or non-finite dispersion.
pub fn std_outperformance(abs_diff: f64, std: f64) -> Option<f64> {
    (std > 0.0 && std.is_finite()).then(|| abs_diff / std)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeStat {
    pub start: u32,
    pub end: u32,
    pub subset_rate: f64,
    pub benchmark_rate: f64,
    pub abs_diff: f64,
    pub rel_diff: Option<f64>,
    pub benchmark_daily_std: f64,
    pub std_outperformance: Option<f64>,
}

impl RangeStat {
    pub fn from_rates(
        (start, end): (u32, u32),
        subset_rate: f64,
        benchmark_rate: f64,
        benchmark_daily_std: f64,
    ) -> Self {
        let abs_diff = subset_rate - benchmark_rate;
        RangeStat {
            start,
            end,
            subset_rate,
            benchmark_rate,
            abs_diff,
            rel_diff: (benchmark_rate != 0.0).then(|| 100.0 * abs_diff / benchmark_rate),
            benchmark_daily_std,
            std_outperformance: std_outperformance(abs_diff, benchmark_daily_std),
        }
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn population_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Range statistics from per-delay rates (as returned by
/// [`EventTable::daily_rates`]). Days where either side has no defined
/// event are skipped; `None` when no day remains.
pub fn range_stat(
    subset: &[DailyRate],
    benchmark: &[DailyRate],
    range: (u32, u32),
) -> Option<RangeStat> {
    let (a, b) = range;
    let mut sub = Vec::new();
    let mut bench = Vec::new();
    for (s, m) in subset.iter().zip(benchmark) {
        debug_assert_eq!(s.delay, m.delay);
        if s.delay < a || s.delay > b {
            continue;
        }
        if let (Some(x), Some(y)) = (s.rate, m.rate) {
            sub.push(x);
            bench.push(y);
        }
    }
    if sub.is_empty() {
        log::warn!("no defined events for delays {a}..{b}; row omitted");
        return None;
    }
    Some(RangeStat::from_rates(
        range,
        mean(&sub),
        mean(&bench),
        population_std(&bench),
    ))
}

/// Largest single-day `subset - benchmark` gap; ties go to the shorter delay.
pub fn best_single_delay(subset: &[DailyRate], benchmark: &[DailyRate]) -> Option<(u32, f64)> {
    let mut best: Option<(u32, f64)> = None;
    for (s, m) in subset.iter().zip(benchmark) {
        if let (Some(x), Some(y)) = (s.rate, m.rate) {
            let diff = x - y;
            if best.is_none_or(|(_, b)| diff > b) {
                best = Some((s.delay, diff));
            }
        }
    }
    best
}

/// Standard error of the difference of two independent proportions.
pub fn proportion_stderr(p1: f64, n1: usize, p2: f64, n2: usize) -> f64 {
    (p1 * (1.0 - p1) / n1 as f64 + p2 * (1.0 - p2) / n2 as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeclineTable {
    pub threshold: f64,
    pub rows: Vec<RangeStat>,
    pub average: Option<RangeStat>,
}

fn mean_opt(xs: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = xs.flatten().collect();
    (!v.is_empty()).then(|| mean(&v))
}

/// Column-wise mean of the listed rows.
fn average_row(rows: &[RangeStat]) -> Option<RangeStat> {
    if rows.is_empty() {
        return None;
    }
    let col = |f: fn(&RangeStat) -> f64| mean(&rows.iter().map(f).collect::<Vec<_>>());
    Some(RangeStat {
        start: rows.iter().map(|r| r.start).min().unwrap_or(0),
        end: rows.iter().map(|r| r.end).max().unwrap_or(0),
        subset_rate: col(|r| r.subset_rate),
        benchmark_rate: col(|r| r.benchmark_rate),
        abs_diff: col(|r| r.abs_diff),
        rel_diff: mean_opt(rows.iter().map(|r| r.rel_diff)),
        benchmark_daily_std: col(|r| r.benchmark_daily_std),
        std_outperformance: mean_opt(rows.iter().map(|r| r.std_outperformance)),
    })
}

pub fn build_table2(subset: &[DailyRate], benchmark: &[DailyRate], threshold: f64) -> DeclineTable {
    let rows: Vec<RangeStat> = REPORT_RANGES
        .iter()
        .filter_map(|&r| range_stat(subset, benchmark, r))
        .collect();
    DeclineTable {
        threshold,
        average: average_row(&rows),
        rows,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub start: u32,
    pub end: u32,
    pub agg_rate: f64,
    pub ind_rate: f64,
    pub benchmark_rate: f64,
    pub agg_diff: f64,
    pub ind_diff: f64,
    pub benchmark_daily_std: f64,
    pub agg_std_outperformance: Option<f64>,
    pub ind_std_outperformance: Option<f64>,
    /// `agg_std_outperformance - ind_std_outperformance`
    pub agg_outperformance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub threshold: f64,
    pub rows: Vec<ComparisonRow>,
    pub average: Option<ComparisonRow>,
}

pub fn build_table3(
    aggregated: &[DailyRate],
    individual: &[DailyRate],
    benchmark: &[DailyRate],
    threshold: f64,
) -> ComparisonTable {
    let mut rows = Vec::new();
    for &r in &REPORT_RANGES {
        let (Some(agg), Some(ind)) = (
            range_stat(aggregated, benchmark, r),
            range_stat(individual, benchmark, r),
        ) else {
            continue;
        };
        let agg_out = agg.std_outperformance;
        let ind_out = ind.std_outperformance;
        rows.push(ComparisonRow {
            start: r.0,
            end: r.1,
            agg_rate: agg.subset_rate,
            ind_rate: ind.subset_rate,
            benchmark_rate: agg.benchmark_rate,
            agg_diff: agg.abs_diff,
            ind_diff: ind.abs_diff,
            benchmark_daily_std: agg.benchmark_daily_std,
            agg_std_outperformance: agg_out,
            ind_std_outperformance: ind_out,
            agg_outperformance: agg_out.zip(ind_out).map(|(a, b)| a - b),
        });
    }
    let average = (!rows.is_empty()).then(|| {
        let col = |f: fn(&ComparisonRow) -> f64| mean(&rows.iter().map(f).collect::<Vec<_>>());
        ComparisonRow {
            start: rows.iter().map(|r| r.start).min().unwrap_or(0),
            end: rows.iter().map(|r| r.end).max().unwrap_or(0),
            agg_rate: col(|r| r.agg_rate),
            ind_rate: col(|r| r.ind_rate),
            benchmark_rate: col(|r| r.benchmark_rate),
            agg_diff: col(|r| r.agg_diff),
            ind_diff: col(|r| r.ind_diff),
            benchmark_daily_std: col(|r| r.benchmark_daily_std),
            agg_std_outperformance: mean_opt(rows.iter().map(|r| r.agg_std_outperformance)),
            ind_std_outperformance: mean_opt(rows.iter().map(|r| r.ind_std_outperformance)),
            agg_outperformance: mean_opt(rows.iter().map(|r| r.agg_outperformance)),
        }
    });
    ComparisonTable {
        threshold,
        rows,
        average,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub edge: f64,
    pub aggregated: usize,
    pub individual: usize,
    pub aggregated_pct: f64,
    pub individual_pct: f64,
}

/// Counts of datapoints with risk at least each edge 0.0, 0.1, ..., 1.0.
pub fn risk_histogram(datapoints: &[RiskDatapoint]) -> Vec<HistogramRow> {
    let total = datapoints.len();
    let pct = |n: usize| {
        if total == 0 {
            0.0
        } else {
            100.0 * n as f64 / total as f64
        }
    };
    (0..=10)
        .map(|k| {
            let edge = k as f64 / 10.0;
            let count = |kind: RiskKind| {
                datapoints
                    .iter()
                    .filter(|dp| kind.value(dp) >= edge - THRESHOLD_EPS)
                    .count()
            };
            let aggregated = count(RiskKind::Aggregated);
            let individual = count(RiskKind::Individual);
            HistogramRow {
                edge,
                aggregated,
                individual,
                aggregated_pct: pct(aggregated),
                individual_pct: pct(individual),
            }
        })
        .collect()
}

fn fmt_opt(v: Option<f64>, prec: usize) -> String {
    v.map(|x| format!("{x:.prec$}"))
        .unwrap_or_else(|| "-".into())
}

fn range_label(start: u32, end: u32) -> String {
    format!("{start} to {end}")
}

pub fn write_table2_csv<W: Write>(table: &DeclineTable, kind: RiskKind, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "kind",
        "threshold",
        "range",
        "subset_rate",
        "benchmark_rate",
        "abs_diff",
        "rel_diff",
        "benchmark_daily_std",
        "std_outperformance",
    ])?;
    let rows = table
        .rows
        .iter()
        .map(|r| (range_label(r.start, r.end), r))
        .chain(table.average.iter().map(|r| ("average".to_string(), r)));
    for (label, r) in rows {
        w.write_record([
            kind.as_str(),
            &format!("{:.1}", table.threshold),
            &label,
            &r.subset_rate.to_string(),
            &r.benchmark_rate.to_string(),
            &r.abs_diff.to_string(),
            &r.rel_diff.map(|v| v.to_string()).unwrap_or_default(),
            &r.benchmark_daily_std.to_string(),
            &r.std_outperformance
                .map(|v| v.to_string())
                .unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<table2>", e))?;
    Ok(())
}

/// Aligned text rendering with the decline-table column order.
pub fn render_table2(table: &DeclineTable) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "Stock price decrease at risk threshold {:.1} (aggregated risk vs. all valid datapoints)",
        table.threshold
    );
    let _ = writeln!(s, "Average row = mean of all rows listed above it.");
    let _ = writeln!(
        s,
        "{:<10} {:>10} {:>11} {:>10} {:>10} {:>9} {:>10}",
        "Days", "Aggregate%", "Comparison%", "Abs.diff", "Rel.diff%", "St.dev", "St.dev.diff"
    );
    let rows = table
        .rows
        .iter()
        .map(|r| (range_label(r.start, r.end), r))
        .chain(table.average.iter().map(|r| ("Average".to_string(), r)));
    for (label, r) in rows {
        let _ = writeln!(
            s,
            "{:<10} {:>10.2} {:>11.2} {:>10.2} {:>10} {:>9.2} {:>10}",
            label,
            r.subset_rate,
            r.benchmark_rate,
            r.abs_diff,
            fmt_opt(r.rel_diff, 2),
            r.benchmark_daily_std,
            fmt_opt(r.std_outperformance, 2),
        );
    }
    s
}

pub fn write_table3_csv<W: Write>(table: &ComparisonTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "threshold",
        "range",
        "agg_rate",
        "ind_rate",
        "benchmark_rate",
        "agg_diff",
        "ind_diff",
        "benchmark_daily_std",
        "agg_std_outperformance",
        "ind_std_outperformance",
        "agg_outperformance",
    ])?;
    let rows = table
        .rows
        .iter()
        .map(|r| (range_label(r.start, r.end), r))
        .chain(table.average.iter().map(|r| ("average".to_string(), r)));
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for (label, r) in rows {
        w.write_record([
            format!("{:.1}", table.threshold),
            label,
            r.agg_rate.to_string(),
            r.ind_rate.to_string(),
            r.benchmark_rate.to_string(),
            r.agg_diff.to_string(),
            r.ind_diff.to_string(),
            r.benchmark_daily_std.to_string(),
            opt(r.agg_std_outperformance),
            opt(r.ind_std_outperformance),
            opt(r.agg_outperformance),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<table3>", e))?;
    Ok(())
}

pub fn render_table3(table: &ComparisonTable) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "Aggregated vs. individual stock price decrease at risk threshold {:.1}",
        table.threshold
    );
    let _ = writeln!(
        s,
        "{:<10} {:>8} {:>8} {:>8} {:>9} {:>9} {:>8} {:>9} {:>9} {:>9}",
        "Days",
        "Agg.%",
        "Ind.%",
        "Comp.%",
        "Agg.diff",
        "Ind.diff",
        "St.dev",
        "Agg.sd",
        "Ind.sd",
        "Outperf."
    );
    let rows = table
        .rows
        .iter()
        .map(|r| (range_label(r.start, r.end), r))
        .chain(table.average.iter().map(|r| ("Average".to_string(), r)));
    for (label, r) in rows {
        let _ = writeln!(
            s,
            "{:<10} {:>8.2} {:>8.2} {:>8.2} {:>9.2} {:>9.2} {:>8.2} {:>9} {:>9} {:>9}",
            label,
            r.agg_rate,
            r.ind_rate,
            r.benchmark_rate,
            r.agg_diff,
            r.ind_diff,
            r.benchmark_daily_std,
            fmt_opt(r.agg_std_outperformance, 2),
            fmt_opt(r.ind_std_outperformance, 2),
            fmt_opt(r.agg_outperformance, 2),
        );
    }
    s
}

pub fn write_histogram<W: Write>(rows: &[HistogramRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<histogram>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn dp(id: &str, measured: Option<NaiveDate>, rr: f64, x: f64) -> RiskDatapoint {
        RiskDatapoint {
            canonical_id: id.into(),
            quarter: Quarter::new(2016, 1).unwrap(),
            x_own: x,
            rr_own: 0.0,
            rr_direct: 0.0,
            rr_indirect: 0.0,
            rr_total: rr,
            measurement_date: measured,
        }
    }

    #[test]
    fn measurement_date_lookup() {
        let q = Quarter::new(2016, 1).unwrap();
        let s = PriceSeries::new(vec![(d("2016-03-30"), 1.0), (d("2016-03-31"), 1.0)]).unwrap();
        assert_eq!(measurement_date(q, Some(&s)), Some(d("2016-03-31")));
        // 2012Q3 ends on Sunday 2012-09-30
        let q = Quarter::new(2012, 3).unwrap();
        let s = PriceSeries::new(vec![(d("2012-09-28"), 1.0), (d("2012-10-01"), 1.0)]).unwrap();
        assert_eq!(measurement_date(q, Some(&s)), Some(d("2012-09-28")));
        let s = PriceSeries::new(vec![(d("2012-06-29"), 1.0)]).unwrap();
        assert_eq!(measurement_date(q, Some(&s)), None);
        assert_eq!(measurement_date(q, None), None);
    }

    #[test]
    fn strict_decline() {
        let m = d("2016-03-31");
        let down = PriceSeries::new(vec![(m, 100.0), (d("2016-04-04"), 99.0)]).unwrap();
        let flat = PriceSeries::new(vec![(m, 100.0), (d("2016-04-04"), 100.0)]).unwrap();
        let p = dp("a", Some(m), 1.0, 1.0);
        assert_eq!(decline_event(&p, 4, Some(&down)).decreased, Some(true));
        assert_eq!(decline_event(&p, 4, Some(&flat)).decreased, Some(false));
        // lookup lands on the measurement day itself: undefined
        assert_eq!(decline_event(&p, 3, Some(&down)).decreased, None);
        assert_eq!(
            decline_event(&dp("a", None, 1.0, 1.0), 4, Some(&down)).decreased,
            None
        );
    }

    #[test]
    fn published_arithmetic() {
        let so = |a, s| std_outperformance(a, s).unwrap();
        assert!((so(4.82, 2.82) - 1.71).abs() <= 0.01);
        assert!((so(7.03, 3.09) - 2.28).abs() <= 0.01);
        assert!((so(9.59, 0.72) - 13.41).abs() <= 0.1);
        let r = RangeStat::from_rates((21, 30), 51.59, 42.00, 0.72);
        assert!((r.abs_diff - 9.59).abs() < 1e-9);
        assert!((r.rel_diff.unwrap() - 22.83).abs() < 0.01);
        assert!((13.41_f64 - 5.46 - 7.95).abs() < 1e-9);
        let same = RangeStat::from_rates((3, 90), 40.0, 40.0, 2.0);
        assert_eq!(same.abs_diff, 0.0);
        assert_eq!(same.std_outperformance, Some(0.0));
        assert_eq!(std_outperformance(1.0, 0.0), None);
    }

    #[test]
    fn stderr_closed_forms() {
        assert!((proportion_stderr(0.5, 50, 0.5, 50) - 0.1).abs() < 1e-12);
        let se = proportion_stderr(0.42, 18640, 0.47, 1752);
        let expected = (0.42 * 0.58 / 18640.0 + 0.47 * 0.53 / 1752.0_f64).sqrt();
        assert_eq!(se, expected);
        assert!((se - 0.012).abs() < 0.0005);
        assert!(proportion_stderr(0.3, usize::MAX, 0.6, usize::MAX) < 1e-9);
    }

    #[test]
    fn decade_ranges_tile_three_to_ninety() {
        let mut covered = Vec::new();
        for (a, b) in DECADE_RANGES {
            covered.extend(a..=b);
        }
        assert_eq!(covered, (3..=90).collect::<Vec<_>>());
    }

    #[test]
    fn histogram_all_zero() {
        let dps: Vec<_> = (0..5).map(|i| dp(&i.to_string(), None, 0.0, 0.0)).collect();
        let h = risk_histogram(&dps);
        assert_eq!(h.len(), 11);
        assert_eq!(h[0].aggregated, 5);
        assert_eq!(h[0].aggregated_pct, 100.0);
        assert!(h[1..]
            .iter()
            .all(|r| r.aggregated == 0 && r.individual == 0));
    }

    #[test]
    fn best_delay_ties_prefer_shorter() {
        let rate = |delay, r| DailyRate {
            delay,
            defined: 10,
            decreased: 0,
            rate: Some(r),
        };
        let sub = vec![rate(3, 60.0), rate(4, 70.0), rate(5, 70.0)];
        let bench = vec![rate(3, 50.0), rate(4, 50.0), rate(5, 50.0)];
        assert_eq!(best_single_delay(&sub, &bench), Some((4, 20.0)));
    }

    #[test]
    fn event_table_and_subsets() {
        let m = d("2016-03-31");
        let mut pts = vec![(m, 100.0)];
        for k in 1..=95 {
            pts.push((m + Duration::days(k), 100.0 - k as f64 * 0.1));
        }
        let falling = PriceSeries::new(pts).unwrap();
        let dps = vec![
            dp("a", Some(m), 1.0, 1.0),
            dp("b", Some(m), 0.55, 0.2),
            dp("c", None, 0.9, 0.9),
        ];
        let table = EventTable::build(&dps, |_| Some(&falling), 3, 90).unwrap();
        assert_eq!(table.valid_count(), 2);
        assert_eq!(table.disqualified(), 1);
        assert_eq!(table.subset(RiskKind::Aggregated, 1.0), vec![0]);
        assert_eq!(table.subset(RiskKind::Aggregated, 0.5), vec![0, 1]);
        assert_eq!(table.subset(RiskKind::Individual, 0.5), vec![0]);
        let bench = table.daily_rates(&table.benchmark());
        let zero = table.daily_rates(&table.subset(RiskKind::Aggregated, 0.0));
        assert_eq!(bench, zero);
        assert!(bench.iter().all(|r| r.rate == Some(100.0)));
        let st = range_stat(&zero, &bench, (3, 90)).unwrap();
        assert_eq!(st.abs_diff, 0.0);
        assert_eq!(st.benchmark_daily_std, 0.0);
        assert_eq!(st.std_outperformance, None);
    }
}
