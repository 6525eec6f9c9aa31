//! Sentiment RiskRank on the quarterly mixed network.
//!
//! Each company is aggregated with its direct neighbours and two-hop
//! neighbours through a 2-additive Choquet integral. The capacity is given
//! by Shapley values `φ` and pairwise interaction indices `I`:
//!
//! * the focal company keeps `φ_k = 1 - λ`;
//! * neighbours share `λ` (or `λ(1 - μ)` when two-hop players exist) in
//!   proportion to their edge weight with `k`;
//! * two-hop players share `λμ` in proportion to the path mass flowing to
//!   them through the neighbours;
//! * every linked pair of non-focal players interacts with
//!   `I(i,j) = 2θ φ_i φ_j`.
//!
//! The singleton Möbius masses `φ_i - ½ Σ_j I(i,j)` are non-negative by
//! construction, so the aggregate of exposures in `[0, 1]` stays in
//! `[0, 1]` without clipping.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::centrality::AverageRank;
use crate::conet::{QuarterNetwork, QuarterNetworks};
use crate::corpus::{Polarity, Quarter};
use crate::entity::OccurrenceSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentimentRecord {
    pub canonical_id: String,
    pub quarter: Quarter,
    pub s_positive: u32,
    pub s_negative: u32,
    /// Negative share of occurrences; `None` without occurrences.
    pub s_rel: Option<f64>,
}

impl SentimentRecord {
    pub fn new(canonical_id: String, quarter: Quarter, s_positive: u32, s_negative: u32) -> Self {
        let total = s_positive + s_negative;
        SentimentRecord {
            canonical_id,
            quarter,
            s_positive,
            s_negative,
            s_rel: (total > 0).then(|| s_negative as f64 / total as f64),
        }
    }
}

pub fn relative_sentiment(
    occurrences: &[OccurrenceSet],
    company: &str,
    quarter: Quarter,
) -> SentimentRecord {
    let (mut pos, mut neg) = (0, 0);
    for set in occurrences
        .iter()
        .filter(|s| s.quarter == quarter && s.companies.contains(company))
    {
        match set.polarity {
            Polarity::Positive => pos += 1,
            Polarity::Negative => neg += 1,
        }
    }
    SentimentRecord::new(company.to_owned(), quarter, pos, neg)
}

/// Sentiment for every node, read off the positive and negative node
/// weights (occurrences are deduplicated per article, so these agree with
/// [`relative_sentiment`]).
pub fn sentiments_from_networks(nets: &QuarterNetworks) -> BTreeMap<String, SentimentRecord> {
    nets.mixed
        .nodes()
        .ids()
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let rec = SentimentRecord::new(
                id.clone(),
                nets.mixed.quarter,
                nets.positive.node_weight(i),
                nets.negative.node_weight(i),
            );
            (id.clone(), rec)
        })
        .collect()
}

/// Union of the top `top_k` by average mixed-network rank in both modes.
pub fn select_universe(
    absolute: &[AverageRank],
    normalized: &[AverageRank],
    top_k: usize,
) -> BTreeSet<String> {
    if absolute.len() < top_k || normalized.len() < top_k {
        log::warn!(
            "fewer than {top_k} ranked companies (absolute {}, normalized {}); taking all",
            absolute.len(),
            normalized.len()
        );
    }
    absolute
        .iter()
        .take(top_k)
        .chain(normalized.iter().take(top_k))
        .map(|r| r.canonical_id.clone())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RiskCalibration {
    /// Weight handed from the focal company to its network.
    pub lambda: f64,
    /// Share of the network weight that goes to two-hop players.
    pub mu: f64,
    /// Interaction strength between linked players.
    pub theta: f64,
}

impl Default for RiskCalibration {
    fn default() -> Self {
        RiskCalibration {
            lambda: 0.5,
            mu: 0.5,
            theta: 0.5,
        }
    }
}

impl RiskCalibration {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(0.0..1.0).contains(&self.lambda) {
            return Err(Error::Validation(format!(
                "lambda must lie in [0, 1), got {}",
                self.lambda
            )));
        }
        if !unit(self.mu) {
            return Err(Error::Validation(format!(
                "mu must lie in [0, 1], got {}",
                self.mu
            )));
        }
        if !unit(self.theta) {
            return Err(Error::Validation(format!(
                "theta must lie in [0, 1], got {}",
                self.theta
            )));
        }
        Ok(())
    }
}

/// Player set of one focal company. Player 0 is the focal company, then the
/// direct neighbours, then the two-hop players, each group by node index.
#[derive(Debug, Clone, PartialEq)]
pub struct Players {
    pub ids: Vec<String>,
    pub shapley: Vec<f64>,
    /// `(p, q, I)` with `p < q`, player indices.
    pub interactions: Vec<(usize, usize, f64)>,
    pub direct: usize,
    pub two_hop: usize,
}

impl Players {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn interaction(&self, p: usize, q: usize) -> f64 {
        let (a, b) = if p < q { (p, q) } else { (q, p) };
        self.interactions
            .iter()
            .find(|&&(i, j, _)| i == a && j == b)
            .map_or(0.0, |&(_, _, v)| v)
    }

    /// Singleton Möbius masses `φ_p - ½ Σ_q I(p,q)`.
    pub fn singleton_masses(&self) -> Vec<f64> {
        let mut m = self.shapley.clone();
        for &(p, q, v) in &self.interactions {
            m[p] -= 0.5 * v;
            m[q] -= 0.5 * v;
        }
        m
    }
}

pub fn build_players(
    network: &QuarterNetwork,
    company: &str,
    calibration: &RiskCalibration,
) -> Result<Players> {
    let k = network
        .nodes()
        .index_of(company)
        .ok_or_else(|| Error::UnknownCompany(company.to_owned()))?;
    calibration.validate()?;
    Ok(players_at(network, &network.adjacency(), k, calibration))
}

fn players_at(
    network: &QuarterNetwork,
    adj: &[Vec<(usize, u32)>],
    k: usize,
    cal: &RiskCalibration,
) -> Players {
    let nodes = network.nodes();
    let direct: Vec<(usize, u32)> = adj[k].clone();
    if direct.is_empty() {
        return Players {
            ids: vec![nodes.id(k).to_owned()],
            shapley: vec![1.0],
            interactions: Vec::new(),
            direct: 0,
            two_hop: 0,
        };
    }
    let total_k: f64 = direct.iter().map(|&(_, w)| w as f64).sum();
    let direct_set: HashSet<usize> = direct.iter().map(|&(i, _)| i).collect();
    let two_hop: BTreeSet<usize> = direct
        .iter()
        .flat_map(|&(i, _)| adj[i].iter().map(|&(j, _)| j))
        .filter(|j| *j != k && !direct_set.contains(j))
        .collect();

    let mut index: Vec<usize> = vec![k];
    let mut shapley = vec![1.0 - cal.lambda];
    if two_hop.is_empty() {
        for &(i, w) in &direct {
            index.push(i);
            shapley.push(cal.lambda * w as f64 / total_k);
        }
    } else {
        for &(i, w) in &direct {
            index.push(i);
            shapley.push(cal.lambda * (1.0 - cal.mu) * w as f64 / total_k);
        }
        let mut mass: BTreeMap<usize, f64> = two_hop.iter().map(|&j| (j, 0.0)).collect();
        for &(i, w_ki) in &direct {
            let out: Vec<(usize, u32)> = adj[i]
                .iter()
                .copied()
                .filter(|(j, _)| two_hop.contains(j))
                .collect();
            let out_total: f64 = out.iter().map(|&(_, w)| w as f64).sum();
            if out_total == 0.0 {
                continue;
            }
            for (j, w_ij) in out {
                *mass.get_mut(&j).expect("two-hop node") +=
                    (w_ki as f64 / total_k) * (w_ij as f64 / out_total);
            }
        }
        let mass_total: f64 = mass.values().sum();
        for (j, rho) in mass {
            index.push(j);
            shapley.push(cal.lambda * cal.mu * rho / mass_total);
        }
    }

    let mut interactions = Vec::new();
    for p in 1..index.len() {
        for q in p + 1..index.len() {
            if network.weight(index[p], index[q]) > 0 {
                interactions.push((p, q, 2.0 * cal.theta * shapley[p] * shapley[q]));
            }
        }
    }

    Players {
        ids: index.iter().map(|&i| nodes.id(i).to_owned()).collect(),
        shapley,
        interactions,
        direct: direct.len(),
        two_hop: two_hop.len(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskComponents {
    pub own: f64,
    pub direct: f64,
    pub indirect: f64,
    pub total: f64,
}

/// 2-additive Choquet aggregation of `exposures` (aligned with the players,
/// each in `[0, 1]`), split into own, direct and indirect parts.
pub fn riskrank_node(players: &Players, exposures: &[f64]) -> Result<RiskComponents> {
    if exposures.len() != players.len() {
        return Err(Error::Validation(format!(
            "{} exposures for {} players",
            exposures.len(),
            players.len()
        )));
    }
    if let Some((p, x)) = exposures
        .iter()
        .enumerate()
        .find(|(_, x)| !(0.0..=1.0).contains(*x))
    {
        return Err(Error::Validation(format!(
            "exposure of {} is {x}, outside [0, 1]",
            players.ids[p]
        )));
    }
    let masses = players.singleton_masses();
    let own = players.shapley[0] * exposures[0];
    let direct: f64 = (1..players.len()).map(|p| masses[p] * exposures[p]).sum();
    let indirect: f64 = players
        .interactions
        .iter()
        .map(|&(p, q, v)| v * exposures[p].min(exposures[q]))
        .sum();
    Ok(RiskComponents {
        own,
        direct,
        indirect,
        total: own + direct + indirect,
    })
}

/// Exposure per player: its relative sentiment, or 0 without news.
pub fn exposures(players: &Players, sentiments: &BTreeMap<String, SentimentRecord>) -> Vec<f64> {
    players
        .ids
        .iter()
        .map(|id| sentiments.get(id).and_then(|s| s.s_rel).unwrap_or(0.0))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskDatapoint {
    pub canonical_id: String,
    pub quarter: Quarter,
    pub x_own: f64,
    pub rr_own: f64,
    pub rr_direct: f64,
    pub rr_indirect: f64,
    pub rr_total: f64,
    /// Last trading day at or before quarter end, when prices exist.
    pub measurement_date: Option<NaiveDate>,
}

/// One datapoint per company in `subset` whose relative sentiment is
/// defined, ordered by id. Neighbours outside `subset` still take part as
/// players.
pub fn riskrank_quarter(
    mixed: &QuarterNetwork,
    sentiments: &BTreeMap<String, SentimentRecord>,
    subset: &BTreeSet<String>,
    calibration: &RiskCalibration,
) -> Result<Vec<RiskDatapoint>> {
    calibration.validate()?;
    let adj = mixed.adjacency();
    let ids: Vec<&String> = subset.iter().collect();
    let results: Vec<Option<RiskDatapoint>> = ids
        .par_iter()
        .map(|id| -> Result<Option<RiskDatapoint>> {
            let Some(x_own) = sentiments.get(*id).and_then(|s| s.s_rel) else {
                return Ok(None);
            };
            let k = mixed
                .nodes()
                .index_of(id)
                .ok_or_else(|| Error::UnknownCompany((*id).clone()))?;
            let players = players_at(mixed, &adj, k, calibration);
            let c = riskrank_node(&players, &exposures(&players, sentiments))?;
            Ok(Some(RiskDatapoint {
                canonical_id: (*id).clone(),
                quarter: mixed.quarter,
                x_own,
                rr_own: c.own,
                rr_direct: c.direct,
                rr_indirect: c.indirect,
                rr_total: c.total,
                measurement_date: None,
            }))
        })
        .collect::<Result<_>>()?;
    Ok(results.into_iter().flatten().collect())
}

#[derive(Debug, Serialize, Deserialize)]
struct RiskRow {
    quarter: Quarter,
    canonical_id: String,
    x_own: f64,
    rr_own: f64,
    rr_direct: f64,
    rr_indirect: f64,
    rr_total: f64,
    lambda: f64,
    mu: f64,
    theta: f64,
    measurement_date: Option<NaiveDate>,
}

pub fn write_risk<W: Write>(
    datapoints: &[RiskDatapoint],
    calibration: &RiskCalibration,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for d in datapoints {
        w.serialize(RiskRow {
            quarter: d.quarter,
            canonical_id: d.canonical_id.clone(),
            x_own: d.x_own,
            rr_own: d.rr_own,
            rr_direct: d.rr_direct,
            rr_indirect: d.rr_indirect,
            rr_total: d.rr_total,
            lambda: calibration.lambda,
            mu: calibration.mu,
            theta: calibration.theta,
            measurement_date: d.measurement_date,
        })?;
    }
    w.flush().map_err(|e| Error::io("<risk>", e))?;
    Ok(())
}

pub fn read_risk(path: &Path) -> Result<(Vec<RiskDatapoint>, Option<RiskCalibration>)> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    let mut calibration = None;
    for (n, row) in reader.deserialize::<RiskRow>().enumerate() {
        let row = row.map_err(|e| Error::parse(path, n + 2, e.to_string()))?;
        calibration.get_or_insert(RiskCalibration {
            lambda: row.lambda,
            mu: row.mu,
            theta: row.theta,
        });
        out.push(RiskDatapoint {
            canonical_id: row.canonical_id,
            quarter: row.quarter,
            x_own: row.x_own,
            rr_own: row.rr_own,
            rr_direct: row.rr_direct,
            rr_indirect: row.rr_indirect,
            rr_total: row.rr_total,
            measurement_date: row.measurement_date,
        });
    }
    Ok((out, calibration))
}

pub fn write_sentiments<'a, W: Write>(
    records: impl IntoIterator<Item = &'a SentimentRecord>,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "quarter",
        "canonical_id",
        "s_positive",
        "s_negative",
        "s_rel",
    ])?;
    for r in records {
        w.write_record([
            r.quarter.to_string().as_str(),
            r.canonical_id.as_str(),
            &r.s_positive.to_string(),
            &r.s_negative.to_string(),
            &r.s_rel.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<sentiment>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conet::{NetworkKind, NodeSet};

    fn q() -> Quarter {
        Quarter::new(2014, 3).unwrap()
    }

    fn network(ids: &[&str], edges: &[(&str, &str, u32)]) -> QuarterNetwork {
        let nodes = NodeSet::new(ids.iter().map(|s| s.to_string()).collect());
        let mut net = QuarterNetwork::empty(q(), NetworkKind::Mixed, nodes.clone());
        for &(a, b, w) in edges {
            net.set_edge(nodes.index_of(a).unwrap(), nodes.index_of(b).unwrap(), w);
        }
        net
    }

    #[test]
    fn relative_sentiment_examples() {
        let r = |p, n| SentimentRecord::new("A".into(), q(), p, n).s_rel;
        assert_eq!(r(5, 0), Some(0.0));
        assert_eq!(r(3, 3), Some(0.5));
        assert_eq!(r(6, 2), Some(0.25));
        assert_eq!(r(0, 0), None);
    }

    #[test]
    fn isolated_company_keeps_everything() {
        let net = network(&["k", "a"], &[]);
        let p = build_players(&net, "k", &RiskCalibration::default()).unwrap();
        assert_eq!(p.ids, vec!["k"]);
        assert_eq!(p.shapley, vec![1.0]);
        assert!(p.interactions.is_empty());
        let c = riskrank_node(&p, &[0.7]).unwrap();
        assert_eq!(c.total, 0.7);
    }

    #[test]
    fn single_neighbour() {
        let net = network(&["k", "a"], &[("k", "a", 3)]);
        let p = build_players(&net, "k", &RiskCalibration::default()).unwrap();
        assert_eq!(p.shapley, vec![0.5, 0.5]);
        assert!(p.interactions.is_empty());
    }

    #[test]
    fn star_worked_example() {
        let net = network(&["k", "a", "b"], &[("k", "a", 1), ("a", "b", 1)]);
        let p = build_players(&net, "k", &RiskCalibration::default()).unwrap();
        assert_eq!(p.ids, vec!["k", "a", "b"]);
        assert_eq!(p.shapley, vec![0.5, 0.25, 0.25]);
        assert_eq!(p.interactions, vec![(1, 2, 0.0625)]);
        let c = riskrank_node(&p, &[1.0, 0.5, 0.0]).unwrap();
        assert_eq!(c.own, 0.5);
        assert_eq!(c.direct, 0.109375);
        assert_eq!(c.indirect, 0.0);
        assert_eq!(c.total, 0.609375);
    }

    #[test]
    fn boundary_exposures() {
        let net = network(
            &["k", "a", "b", "c"],
            &[("k", "a", 2), ("k", "b", 1), ("a", "b", 1), ("b", "c", 4)],
        );
        let p = build_players(&net, "k", &RiskCalibration::default()).unwrap();
        assert!((p.shapley.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(riskrank_node(&p, &[0.0; 4]).unwrap().total, 0.0);
        assert!((riskrank_node(&p, &[1.0; 4]).unwrap().total - 1.0).abs() < 1e-15);
        assert!(riskrank_node(&p, &[1.1, 0.0, 0.0, 0.0]).is_err());
        assert!(riskrank_node(&p, &[0.5; 3]).is_err());
    }

    #[test]
    fn calibration_ranges() {
        assert!(RiskCalibration::default().validate().is_ok());
        let bad = RiskCalibration {
            lambda: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = RiskCalibration {
            theta: -0.1,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    fn ranks(ids: &[&str]) -> Vec<AverageRank> {
        ids.iter()
            .enumerate()
            .map(|(i, id)| AverageRank {
                canonical_id: id.to_string(),
                mean_rank: i as f64 + 1.0,
                quarters: 1,
            })
            .collect()
    }

    #[test]
    fn universe_union() {
        let a: Vec<String> = (0..50).map(|i| format!("c{i:03}")).collect();
        let b: Vec<String> = (38..88).map(|i| format!("c{i:03}")).collect();
        let ar: Vec<&str> = a.iter().map(String::as_str).collect();
        let br: Vec<&str> = b.iter().map(String::as_str).collect();
        assert_eq!(select_universe(&ranks(&ar), &ranks(&br), 50).len(), 88);
        assert_eq!(select_universe(&ranks(&ar), &ranks(&ar), 50).len(), 50);
        let c: Vec<String> = (50..100).map(|i| format!("c{i:03}")).collect();
        let cr: Vec<&str> = c.iter().map(String::as_str).collect();
        assert_eq!(select_universe(&ranks(&ar), &ranks(&cr), 50).len(), 100);
        assert_eq!(
            select_universe(&ranks(&ar[..3]), &ranks(&ar[..3]), 50).len(),
            3
        );
    }

    #[test]
    fn quarter_skips_undefined_sentiment() {
        let net = network(&["k", "a", "b"], &[("k", "a", 1), ("a", "b", 1)]);
        let mut s = BTreeMap::new();
        s.insert("k".to_string(), SentimentRecord::new("k".into(), q(), 0, 2));
        s.insert("a".to_string(), SentimentRecord::new("a".into(), q(), 1, 1));
        s.insert("b".to_string(), SentimentRecord::new("b".into(), q(), 0, 0));
        let subset: BTreeSet<String> = ["k", "a", "b"].iter().map(|s| s.to_string()).collect();
        let dps = riskrank_quarter(&net, &s, &subset, &RiskCalibration::default()).unwrap();
        let ids: Vec<&str> = dps.iter().map(|d| d.canonical_id.as_str()).collect();
        assert_eq!(ids, vec!["a", "k"]);
        let k = &dps[1];
        assert_eq!(k.rr_total, 0.609375);
        let empty = network(&["k"], &[]);
        assert!(riskrank_quarter(
            &empty,
            &BTreeMap::new(),
            &BTreeSet::new(),
            &RiskCalibration::default()
        )
        .unwrap()
        .is_empty());
    }
}
