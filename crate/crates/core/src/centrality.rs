//! Information centrality, market-cap normalisation and rankings.
//!
//! Weights of the smoothed network are rescaled by the largest pair weight
//! so that every off-diagonal entry of the pseudo-adjacency matrix
//! `B(i,j) = 1 - ŵ(i,j)` lies in `[0, 1)`. The diagonal is `1 + Ŝ(i)` where
//! `Ŝ(i) = Σ_j ŵ(i,j)` is the rescaled node strength, which makes `B` the
//! weighted Laplacian plus the all-ones matrix: symmetric positive definite
//! for any connected (in particular any smoothed) network.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::conet::{NetworkKind, SmoothedNetwork};
use crate::corpus::{MarketCapTable, Quarter};
use crate::error::{Error, Result};

pub const DEFAULT_CONDITION_CAP: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreMode {
    Absolute,
    Normalized,
}

impl ScoreMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreMode::Absolute => "absolute",
            ScoreMode::Normalized => "normalized",
        }
    }
}

impl fmt::Display for ScoreMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScoreMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "absolute" => Ok(ScoreMode::Absolute),
            "normalized" => Ok(ScoreMode::Normalized),
            _ => Err(Error::Validation(format!("unknown score mode `{s}`"))),
        }
    }
}

/// The pseudo-adjacency matrix of a smoothed network.
pub fn pseudo_adjacency(network: &SmoothedNetwork) -> Result<DMatrix<f64>> {
    let n = network.len();
    let numerical = |message: String| Error::Numerical {
        quarter: network.quarter,
        polarity: network.kind.to_string(),
        message,
    };
    if n < 2 {
        return Err(numerical(format!("need at least 2 nodes, got {n}")));
    }
    let w = network.weights();
    let max = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| w[(i, j)])
        .fold(0.0_f64, f64::max);
    if max <= 0.0 {
        return Err(numerical("network has no edges".into()));
    }
    let mut b = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut strength = 0.0;
        for j in 0..n {
            if i != j {
                let scaled = w[(i, j)] / max;
                strength += scaled;
                b[(i, j)] = 1.0 - scaled;
            }
        }
        b[(i, i)] = 1.0 + strength;
    }
    Ok(b)
}

fn norm_1(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Information centrality per node, aligned with `network.nodes()`.
pub fn information_centrality(network: &SmoothedNetwork) -> Result<Vec<f64>> {
    information_centrality_with_cap(network, DEFAULT_CONDITION_CAP)
}

pub fn information_centrality_with_cap(
    network: &SmoothedNetwork,
    condition_cap: f64,
) -> Result<Vec<f64>> {
    let numerical = |message: String| Error::Numerical {
        quarter: network.quarter,
        polarity: network.kind.to_string(),
        message,
    };
    let b = pseudo_adjacency(network)?;
    let n = b.nrows();
    let b_norm = norm_1(&b);
    let c = b
        .cholesky()
        .ok_or_else(|| numerical("pseudo-adjacency matrix is not positive definite".into()))?
        .inverse();
    let cond = b_norm * norm_1(&c);
    if !cond.is_finite() || cond > condition_cap {
        return Err(numerical(format!(
            "condition estimate {cond:.3e} exceeds cap {condition_cap:.1e}"
        )));
    }
    let trace: f64 = c.diagonal().sum();
    let nf = n as f64;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let row_sum: f64 = c.row(i).sum();
        let denom = nf * c[(i, i)] + trace - 2.0 * row_sum;
        let value = nf / denom;
        if !(value.is_finite() && value > 0.0) {
            return Err(numerical(format!(
                "non-positive centrality for {}",
                network.nodes().id(i)
            )));
        }
        out.push(value);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rescaled {
    pub values: Vec<f64>,
    /// All inputs were equal and everything mapped to 0.
    pub degenerate: bool,
}

/// `(v - min) / (max - min)`; identical inputs map to 0 with a warning.
pub fn minmax_rescale(values: &[f64]) -> Rescaled {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() || max <= min {
        if values.len() > 1 {
            log::warn!("min-max rescale over {} identical values", values.len());
        }
        return Rescaled {
            values: vec![0.0; values.len()],
            degenerate: true,
        };
    }
    let span = max - min;
    Rescaled {
        values: values.iter().map(|v| (v - min) / span).collect(),
        degenerate: false,
    }
}

/// Rescaled centrality divided by quarter-end market cap (USD billions).
/// Companies without a cap for `quarter` are left out.
pub fn normalized_score(
    rescaled: &BTreeMap<String, f64>,
    caps: &MarketCapTable,
    quarter: Quarter,
) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for (id, &value) in rescaled {
        let Some(cap) = caps.get(id, quarter) else {
            continue;
        };
        if cap.is_nan() || cap <= 0.0 {
            return Err(Error::Validation(format!(
                "{id} {quarter}: market cap must be positive, got {cap}"
            )));
        }
        out.insert(id.clone(), value / cap);
    }
    Ok(out)
}

/// Rank 1 is the largest score; ties go to the lexicographically smaller id.
pub fn rank(scores: &BTreeMap<String, f64>) -> BTreeMap<String, u32> {
    let mut order: Vec<(&String, f64)> = scores.iter().map(|(k, &v)| (k, v)).collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    order
        .into_iter()
        .enumerate()
        .map(|(i, (id, _))| (id.clone(), i as u32 + 1))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralityTable {
    pub quarter: Quarter,
    pub polarity: NetworkKind,
    pub mode: ScoreMode,
    pub scores: BTreeMap<String, f64>,
    pub ranks: BTreeMap<String, u32>,
}

impl CentralityTable {
    pub fn new(
        quarter: Quarter,
        polarity: NetworkKind,
        mode: ScoreMode,
        scores: BTreeMap<String, f64>,
    ) -> Self {
        let ranks = rank(&scores);
        CentralityTable {
            quarter,
            polarity,
            mode,
            scores,
            ranks,
        }
    }
}

/// Absolute table: information centrality rescaled to `[0, 1]` within the
/// quarter. Also returns the raw centralities keyed by id.
pub fn absolute_table(
    network: &SmoothedNetwork,
) -> Result<(CentralityTable, BTreeMap<String, f64>)> {
    let raw = information_centrality(network)?;
    let rescaled = minmax_rescale(&raw);
    let ids = network.nodes().ids();
    let scores = ids.iter().cloned().zip(rescaled.values).collect();
    let raw = ids.iter().cloned().zip(raw).collect();
    Ok((
        CentralityTable::new(network.quarter, network.kind, ScoreMode::Absolute, scores),
        raw,
    ))
}

pub fn normalized_table(
    absolute: &CentralityTable,
    caps: &MarketCapTable,
) -> Result<CentralityTable> {
    let scores = normalized_score(&absolute.scores, caps, absolute.quarter)?;
    Ok(CentralityTable::new(
        absolute.quarter,
        absolute.polarity,
        ScoreMode::Normalized,
        scores,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AverageRank {
    pub canonical_id: String,
    pub mean_rank: f64,
    pub quarters: u32,
}

/// Mean per-quarter rank over the quarters where a company is scored,
/// ascending (ties by id), truncated to `top_k`.
pub fn average_rank<'a>(
    tables: impl IntoIterator<Item = &'a CentralityTable>,
    top_k: usize,
) -> Vec<AverageRank> {
    let mut acc: BTreeMap<&str, (u64, u32)> = BTreeMap::new();
    for table in tables {
        for (id, &r) in &table.ranks {
            let e = acc.entry(id.as_str()).or_insert((0, 0));
            e.0 += r as u64;
            e.1 += 1;
        }
    }
    let mut out: Vec<AverageRank> = acc
        .into_iter()
        .map(|(id, (sum, n))| AverageRank {
            canonical_id: id.to_owned(),
            mean_rank: sum as f64 / n as f64,
            quarters: n,
        })
        .collect();
    out.sort_by(|a, b| {
        a.mean_rank
            .total_cmp(&b.mean_rank)
            .then_with(|| a.canonical_id.cmp(&b.canonical_id))
    });
    out.truncate(top_k);
    out
}

/// Kendall's tau-b between two rankings over their common ids. `None` when
/// fewer than two ids are shared or one side is constant.
pub fn kendall_tau(a: &BTreeMap<String, u32>, b: &BTreeMap<String, u32>) -> Option<f64> {
    let pairs: Vec<(u32, u32)> = a
        .iter()
        .filter_map(|(id, &ra)| b.get(id).map(|&rb| (ra, rb)))
        .collect();
    if pairs.len() < 2 {
        return None;
    }
    let (mut concordant, mut discordant, mut ties_a, mut ties_b) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..pairs.len() {
        for j in i + 1..pairs.len() {
            let da = (pairs[i].0 as i64 - pairs[j].0 as i64).signum();
            let db = (pairs[i].1 as i64 - pairs[j].1 as i64).signum();
            match (da, db) {
                (0, 0) => {}
                (0, _) => ties_a += 1,
                (_, 0) => ties_b += 1,
                _ if da == db => concordant += 1,
                _ => discordant += 1,
            }
        }
    }
    let n1 = (concordant + discordant + ties_a) as f64;
    let n2 = (concordant + discordant + ties_b) as f64;
    if n1 == 0.0 || n2 == 0.0 {
        return None;
    }
    Some((concordant - discordant) as f64 / (n1 * n2).sqrt())
}

/// `quarter,polarity,mode,canonical_id,score,rank`, ordered by rank.
pub fn write_tables<'a, W: Write>(
    tables: impl IntoIterator<Item = &'a CentralityTable>,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "quarter",
        "polarity",
        "mode",
        "canonical_id",
        "score",
        "rank",
    ])?;
    for t in tables {
        let mut rows: Vec<(&String, u32)> = t.ranks.iter().map(|(k, &r)| (k, r)).collect();
        rows.sort_by_key(|&(_, r)| r);
        for (id, r) in rows {
            w.write_record([
                t.quarter.to_string().as_str(),
                t.polarity.as_str(),
                t.mode.as_str(),
                id.as_str(),
                &t.scores[id].to_string(),
                &r.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<centrality>", e))?;
    Ok(())
}

/// Time series `quarter,canonical_id,score` restricted to `ids`.
pub fn write_series<'a, W: Write>(
    tables: impl IntoIterator<Item = &'a CentralityTable>,
    ids: &[String],
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["quarter", "canonical_id", "score"])?;
    for t in tables {
        for id in ids {
            if let Some(score) = t.scores.get(id) {
                w.write_record([t.quarter.to_string().as_str(), id, &score.to_string()])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io("<series>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conet::{smooth, NodeSet, QuarterNetwork};

    fn q() -> Quarter {
        Quarter::new(2013, 1).unwrap()
    }

    fn scores(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn path_network(alpha: f64) -> SmoothedNetwork {
        let nodes = NodeSet::new(vec!["A".into(), "B".into(), "C".into()]);
        let mut net = QuarterNetwork::empty(q(), NetworkKind::Mixed, nodes);
        net.set_edge(0, 1, 1);
        net.set_edge(1, 2, 1);
        smooth(&net, alpha).unwrap()
    }

    #[test]
    fn two_nodes_are_symmetric() {
        let nodes = NodeSet::new(vec!["A".into(), "B".into()]);
        let mut net = QuarterNetwork::empty(q(), NetworkKind::Mixed, nodes);
        net.set_edge(0, 1, 3);
        let ic = information_centrality(&smooth(&net, 0.1).unwrap()).unwrap();
        assert!((ic[0] - ic[1]).abs() < 1e-12);
    }

    #[test]
    fn path_centre_is_most_central() {
        let ic = information_centrality(&path_network(0.1)).unwrap();
        assert!(ic[1] > ic[0]);
        assert!((ic[0] - ic[2]).abs() < 1e-12);
        let r = minmax_rescale(&ic);
        assert_eq!(r.values[1], 1.0);
        assert_eq!(r.values[0], 0.0);
    }

    #[test]
    fn pseudo_adjacency_entries_in_range() {
        let b = pseudo_adjacency(&path_network(0.1)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i == j {
                    assert!(b[(i, i)] >= 1.0);
                } else {
                    assert!((0.0..1.0).contains(&b[(i, j)]));
                    assert_eq!(b[(i, j)], b[(j, i)]);
                }
            }
        }
    }

    #[test]
    fn disconnected_unsmoothed_network_is_rejected() {
        let nodes = NodeSet::new(vec!["A".into(), "B".into(), "C".into(), "D".into()]);
        let mut w = DMatrix::zeros(4, 4);
        w[(0, 1)] = 1.0;
        w[(1, 0)] = 1.0;
        w[(2, 3)] = 1.0;
        w[(3, 2)] = 1.0;
        // two components: L + J has a null vector (+1 on one, -1 on the other)
        let net =
            SmoothedNetwork::from_dense(q(), NetworkKind::Mixed, nodes.clone(), vec![0; 4], w)
                .unwrap();
        assert!(information_centrality(&net).is_err());
        assert!(information_centrality_with_cap(&path_network(0.1), 1.0).is_err());
        let zero = SmoothedNetwork::from_dense(
            q(),
            NetworkKind::Mixed,
            nodes,
            vec![0; 4],
            DMatrix::zeros(4, 4),
        )
        .unwrap();
        let err = information_centrality(&zero).unwrap_err();
        assert!(err.to_string().contains("2013Q1"), "{err}");
    }

    #[test]
    fn rescale_examples() {
        assert_eq!(minmax_rescale(&[1.0, 2.0, 3.0]).values, vec![0.0, 0.5, 1.0]);
        let r = minmax_rescale(&[5.0, 5.0]);
        assert_eq!(r.values, vec![0.0, 0.0]);
        assert!(r.degenerate);
    }

    #[test]
    fn normalized_score_examples() {
        let mut caps = MarketCapTable::default();
        caps.insert("A", q(), 1.0).unwrap();
        caps.insert("B", q(), 2.0).unwrap();
        caps.insert("C", q(), 10.0).unwrap();
        let j = normalized_score(
            &scores(&[("A", 1.0), ("B", 0.5), ("C", 1.0), ("D", 1.0)]),
            &caps,
            q(),
        )
        .unwrap();
        assert_eq!(j["A"], 1.0);
        assert_eq!(j["B"], 0.25);
        assert!(!j.contains_key("D"));
        let r = rank(&j);
        assert!(r["A"] < r["C"], "smaller company ranks higher");
    }

    #[test]
    fn rank_and_ties() {
        let r = rank(&scores(&[("A", 3.0), ("B", 1.0), ("C", 2.0)]));
        assert_eq!((r["A"], r["C"], r["B"]), (1, 2, 3));
        let r = rank(&scores(&[("Z", 1.0), ("M", 1.0), ("A", 0.5)]));
        assert_eq!((r["M"], r["Z"], r["A"]), (1, 2, 3));
    }

    #[test]
    fn average_rank_example() {
        let t = |ra: u32, rb: u32| CentralityTable {
            quarter: q(),
            polarity: NetworkKind::Mixed,
            mode: ScoreMode::Absolute,
            scores: BTreeMap::new(),
            ranks: [("A".to_string(), ra), ("B".to_string(), rb)].into(),
        };
        let tables = [t(1, 2), t(3, 2)];
        let avg = average_rank(&tables, 10);
        assert_eq!(avg[0].canonical_id, "A");
        assert_eq!(avg[0].mean_rank, 2.0);
        assert_eq!(avg[1].canonical_id, "B");
        assert_eq!(avg[1].mean_rank, 2.0);
        assert_eq!(average_rank(&tables, 1).len(), 1);
    }

    #[test]
    fn kendall_tau_basics() {
        let a: BTreeMap<String, u32> = [("A", 1), ("B", 2), ("C", 3)]
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect();
        let rev: BTreeMap<String, u32> = [("A", 3), ("B", 2), ("C", 1)]
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect();
        assert_eq!(kendall_tau(&a, &a), Some(1.0));
        assert_eq!(kendall_tau(&a, &rev), Some(-1.0));
    }
}
