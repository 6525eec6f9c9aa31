//! Quarterly co-occurrence networks.
//!
//! One network per (quarter, polarity). Nodes are the whole universe so that
//! isolated companies still get a centrality score. Node weight is the
//! number of articles mentioning the company; edge weight is the number of
//! articles mentioning both endpoints.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::corpus::{Polarity, Quarter};
use crate::entity::OccurrenceSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetworkKind {
    Positive,
    Negative,
    Mixed,
}

impl NetworkKind {
    pub const ALL: [NetworkKind; 3] = [
        NetworkKind::Positive,
        NetworkKind::Negative,
        NetworkKind::Mixed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NetworkKind::Positive => "positive",
            NetworkKind::Negative => "negative",
            NetworkKind::Mixed => "mixed",
        }
    }

    /// Whether an article of polarity `p` contributes to this network.
    pub fn admits(self, p: Polarity) -> bool {
        match self {
            NetworkKind::Positive => p == Polarity::Positive,
            NetworkKind::Negative => p == Polarity::Negative,
            NetworkKind::Mixed => true,
        }
    }
}

impl fmt::Display for NetworkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NetworkKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "positive" => Ok(NetworkKind::Positive),
            "negative" => Ok(NetworkKind::Negative),
            "mixed" => Ok(NetworkKind::Mixed),
            _ => Err(Error::Validation(format!("unknown network polarity `{s}`"))),
        }
    }
}

/// Shared, sorted node list with an id → index map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeSet {
    ids: Vec<String>,
    index: HashMap<String, usize>,
}

impl NodeSet {
    pub fn new(mut ids: Vec<String>) -> Arc<Self> {
        ids.sort();
        ids.dedup();
        let index = ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();
        Arc::new(NodeSet { ids, index })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuarterNetwork {
    pub quarter: Quarter,
    pub kind: NetworkKind,
    nodes: Arc<NodeSet>,
    node_weight: Vec<u32>,
    /// Keyed by (i, j) with i < j; only positive weights are stored.
    edges: BTreeMap<(usize, usize), u32>,
    article_count: usize,
}

impl QuarterNetwork {
    pub fn empty(quarter: Quarter, kind: NetworkKind, nodes: Arc<NodeSet>) -> Self {
        let n = nodes.len();
        QuarterNetwork {
            quarter,
            kind,
            nodes,
            node_weight: vec![0; n],
            edges: BTreeMap::new(),
            article_count: 0,
        }
    }

    pub fn nodes(&self) -> &Arc<NodeSet> {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node_weight(&self, i: usize) -> u32 {
        self.node_weight[i]
    }

    pub fn node_weights(&self) -> &[u32] {
        &self.node_weight
    }

    /// Symmetric edge weight; zero on the diagonal and for absent pairs.
    pub fn weight(&self, i: usize, j: usize) -> u32 {
        let key = if i < j { (i, j) } else { (j, i) };
        if i == j {
            return 0;
        }
        self.edges.get(&key).copied().unwrap_or(0)
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, u32)> + '_ {
        self.edges.iter().map(|(&(i, j), &w)| (i, j, w))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn article_count(&self) -> usize {
        self.article_count
    }

    /// Articles that mentioned at least one company.
    pub fn add_article<'a>(&mut self, companies: impl IntoIterator<Item = &'a str>) {
        let mut idx: Vec<usize> = companies
            .into_iter()
            .filter_map(|c| self.nodes.index_of(c))
            .collect();
        idx.sort_unstable();
        idx.dedup();
        if idx.is_empty() {
            return;
        }
        self.article_count += 1;
        for (a, &i) in idx.iter().enumerate() {
            self.node_weight[i] += 1;
            for &j in &idx[a + 1..] {
                *self.edges.entry((i, j)).or_insert(0) += 1;
            }
        }
    }

    pub fn set_node_weight(&mut self, i: usize, weight: u32) {
        self.node_weight[i] = weight;
    }

    pub fn set_edge(&mut self, i: usize, j: usize, weight: u32) {
        assert_ne!(i, j, "self loops are not representable");
        let key = if i < j { (i, j) } else { (j, i) };
        if weight == 0 {
            self.edges.remove(&key);
        } else {
            self.edges.insert(key, weight);
        }
    }

    pub fn set_article_count(&mut self, n: usize) {
        self.article_count = n;
    }

    /// Neighbour lists with positive weights, each sorted by index.
    pub fn adjacency(&self) -> Vec<Vec<(usize, u32)>> {
        let mut adj = vec![Vec::new(); self.len()];
        for (i, j, w) in self.edges() {
            adj[i].push((j, w));
            adj[j].push((i, w));
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }
}

/// The three networks of one quarter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuarterNetworks {
    pub positive: QuarterNetwork,
    pub negative: QuarterNetwork,
    pub mixed: QuarterNetwork,
}

impl QuarterNetworks {
    pub fn get(&self, kind: NetworkKind) -> &QuarterNetwork {
        match kind {
            NetworkKind::Positive => &self.positive,
            NetworkKind::Negative => &self.negative,
            NetworkKind::Mixed => &self.mixed,
        }
    }

    pub fn get_mut(&mut self, kind: NetworkKind) -> &mut QuarterNetwork {
        match kind {
            NetworkKind::Positive => &mut self.positive,
            NetworkKind::Negative => &mut self.negative,
            NetworkKind::Mixed => &mut self.mixed,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &QuarterNetwork> {
        [&self.positive, &self.negative, &self.mixed].into_iter()
    }
}

/// Builds the positive, negative and mixed networks from the occurrence sets
/// of `quarter`. Sets from other quarters are ignored.
pub fn build_networks(
    sets: &[OccurrenceSet],
    quarter: Quarter,
    nodes: &Arc<NodeSet>,
) -> QuarterNetworks {
    let mut nets = QuarterNetworks {
        positive: QuarterNetwork::empty(quarter, NetworkKind::Positive, nodes.clone()),
        negative: QuarterNetwork::empty(quarter, NetworkKind::Negative, nodes.clone()),
        mixed: QuarterNetwork::empty(quarter, NetworkKind::Mixed, nodes.clone()),
    };
    for set in sets.iter().filter(|s| s.quarter == quarter) {
        let companies = || set.companies.iter().map(String::as_str);
        match set.polarity {
            Polarity::Positive => nets.positive.add_article(companies()),
            Polarity::Negative => nets.negative.add_article(companies()),
        }
        nets.mixed.add_article(companies());
    }
    nets
}

/// Complete graph after adding `alpha` to every pair.
#[derive(Debug, Clone)]
pub struct SmoothedNetwork {
    pub quarter: Quarter,
    pub kind: NetworkKind,
    pub alpha: f64,
    nodes: Arc<NodeSet>,
    node_weight: Vec<u32>,
    weights: DMatrix<f64>,
}

impl SmoothedNetwork {
    /// Builds a smoothed network directly from a dense symmetric weight
    /// matrix (diagonal ignored).
    pub fn from_dense(
        quarter: Quarter,
        kind: NetworkKind,
        nodes: Arc<NodeSet>,
        node_weight: Vec<u32>,
        mut weights: DMatrix<f64>,
    ) -> Result<Self> {
        let n = nodes.len();
        if weights.nrows() != n || weights.ncols() != n || node_weight.len() != n {
            return Err(Error::Validation("dense network shape mismatch".into()));
        }
        for i in 0..n {
            weights[(i, i)] = 0.0;
            for j in 0..i {
                if weights[(i, j)] != weights[(j, i)] {
                    return Err(Error::Validation(format!(
                        "asymmetric weight at ({i}, {j})"
                    )));
                }
                if !(weights[(i, j)] >= 0.0 && weights[(i, j)].is_finite()) {
                    return Err(Error::Validation(format!("bad weight at ({i}, {j})")));
                }
            }
        }
        Ok(SmoothedNetwork {
            quarter,
            kind,
            alpha: 0.0,
            nodes,
            node_weight,
            weights,
        })
    }

    pub fn nodes(&self) -> &Arc<NodeSet> {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn node_weight(&self, i: usize) -> u32 {
        self.node_weight[i]
    }
}

pub fn smooth(network: &QuarterNetwork, alpha: f64) -> Result<SmoothedNetwork> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Validation(format!(
            "smoothing alpha must be positive, got {alpha}"
        )));
    }
    let n = network.len();
    let mut weights = DMatrix::from_element(n, n, alpha);
    for i in 0..n {
        weights[(i, i)] = 0.0;
    }
    for (i, j, w) in network.edges() {
        let v = w as f64 + alpha;
        weights[(i, j)] = v;
        weights[(j, i)] = v;
    }
    Ok(SmoothedNetwork {
        quarter: network.quarter,
        kind: network.kind,
        alpha,
        nodes: network.nodes.clone(),
        node_weight: network.node_weight.clone(),
        weights,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkStats {
    pub quarter: Quarter,
    pub polarity: NetworkKind,
    pub nodes: usize,
    pub edges: usize,
    pub avg_edges_per_node: f64,
    pub max_degree: usize,
    /// Smallest id among the nodes with maximum degree; empty when the
    /// network has no edges.
    pub max_degree_node: String,
    pub article_count: usize,
}

pub fn network_stats(network: &QuarterNetwork) -> NetworkStats {
    let n = network.len();
    let mut degree = vec![0usize; n];
    for (i, j, _) in network.edges() {
        degree[i] += 1;
        degree[j] += 1;
    }
    let mut max_degree = 0;
    let mut max_node = String::new();
    for (i, &d) in degree.iter().enumerate() {
        if d > max_degree {
            max_degree = d;
            max_node = network.nodes.id(i).to_owned();
        }
    }
    NetworkStats {
        quarter: network.quarter,
        polarity: network.kind,
        nodes: n,
        edges: network.edge_count(),
        avg_edges_per_node: if n == 0 {
            0.0
        } else {
            degree.iter().sum::<usize>() as f64 / n as f64
        },
        max_degree,
        max_degree_node: max_node,
        article_count: network.article_count(),
    }
}

/// Node list: `quarter,polarity,id,S` for every node, including isolated
/// ones.
pub fn write_nodes<'a, W: Write>(
    networks: impl IntoIterator<Item = &'a QuarterNetwork>,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["quarter", "polarity", "id", "S"])?;
    for net in networks {
        let q = net.quarter.to_string();
        for (i, id) in net.nodes.ids().iter().enumerate() {
            w.write_record([
                q.as_str(),
                net.kind.as_str(),
                id.as_str(),
                &net.node_weight[i].to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<nodes>", e))?;
    Ok(())
}

/// Edge list: `quarter,polarity,i,j,weight` for positive-weight pairs,
/// `i < j` by id.
pub fn write_edges<'a, W: Write>(
    networks: impl IntoIterator<Item = &'a QuarterNetwork>,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["quarter", "polarity", "i", "j", "weight"])?;
    for net in networks {
        let q = net.quarter.to_string();
        for (i, j, weight) in net.edges() {
            w.write_record([
                q.as_str(),
                net.kind.as_str(),
                net.nodes.id(i),
                net.nodes.id(j),
                &weight.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<edges>", e))?;
    Ok(())
}

/// Article counts per network, `quarter,polarity,articles`.
pub fn write_article_counts<'a, W: Write>(
    networks: impl IntoIterator<Item = &'a QuarterNetwork>,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["quarter", "polarity", "articles"])?;
    for net in networks {
        w.write_record([
            net.quarter.to_string().as_str(),
            net.kind.as_str(),
            &net.article_count.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<articles>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn q() -> Quarter {
        Quarter::new(2012, 2).unwrap()
    }

    fn set(id: &str, polarity: Polarity, companies: &[&str]) -> OccurrenceSet {
        OccurrenceSet {
            article_id: id.into(),
            quarter: q(),
            polarity,
            companies: companies
                .iter()
                .map(|s| s.to_string())
                .collect::<BTreeSet<_>>(),
            matches: vec![],
        }
    }

    fn nodes(ids: &[&str]) -> Arc<NodeSet> {
        NodeSet::new(ids.iter().map(|s| s.to_string()).collect())
    }

    #[test]
    fn single_article_triangle() {
        let ns = nodes(&["A", "B", "C"]);
        let nets = build_networks(&[set("1", Polarity::Positive, &["A", "B", "C"])], q(), &ns);
        let p = &nets.positive;
        assert_eq!((p.weight(0, 1), p.weight(0, 2), p.weight(1, 2)), (1, 1, 1));
        assert_eq!(p.node_weights(), &[1, 1, 1]);
        assert_eq!(nets.negative.edge_count(), 0);
        assert_eq!(nets.mixed, {
            let mut m = p.clone();
            m.kind = NetworkKind::Mixed;
            m
        });
    }

    #[test]
    fn mixed_is_sum_of_polarities() {
        let ns = nodes(&["A", "B"]);
        let nets = build_networks(
            &[
                set("1", Polarity::Positive, &["A", "B"]),
                set("2", Polarity::Negative, &["A", "B"]),
            ],
            q(),
            &ns,
        );
        assert_eq!(nets.mixed.weight(0, 1), 2);
        assert_eq!(nets.positive.weight(0, 1), 1);
        assert_eq!(nets.negative.weight(1, 0), 1);
    }

    #[test]
    fn single_company_article_has_no_edges() {
        let ns = nodes(&["A", "B"]);
        let nets = build_networks(&[set("1", Polarity::Negative, &["A"])], q(), &ns);
        assert_eq!(nets.mixed.edge_count(), 0);
        assert_eq!(nets.mixed.node_weight(0), 1);
        assert_eq!(nets.mixed.node_weight(1), 0);
    }

    #[test]
    fn smoothing_completes_the_graph() {
        let ns = nodes(&["A", "B", "C"]);
        let empty = QuarterNetwork::empty(q(), NetworkKind::Mixed, ns.clone());
        let s = smooth(&empty, 0.1).unwrap();
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            assert_eq!(s.weight(i, j), 0.1);
            assert_eq!(s.weight(j, i), 0.1);
        }
        let mut net = empty.clone();
        net.set_edge(0, 1, 2);
        let s = smooth(&net, 0.1).unwrap();
        assert!((s.weight(0, 1) - 2.1).abs() < 1e-15);
        assert_eq!(s.weight(0, 2), 0.1);
        assert_eq!(s.weight(0, 0), 0.0);
        assert!(smooth(&net, 0.0).is_err());
        assert!(smooth(&net, -1.0).is_err());
    }

    #[test]
    fn stats_triangle_and_star() {
        let ns = nodes(&["A", "B", "C"]);
        let nets = build_networks(&[set("1", Polarity::Positive, &["A", "B", "C"])], q(), &ns);
        let st = network_stats(&nets.mixed);
        assert_eq!(st.avg_edges_per_node, 2.0);
        assert_eq!(st.max_degree, 2);

        let ns = nodes(&["H", "L1", "L2", "L3", "L4"]);
        let sets: Vec<_> = (1..=4)
            .map(|k| set(&k.to_string(), Polarity::Negative, &["H", &format!("L{k}")]))
            .collect();
        let nets = build_networks(&sets, q(), &ns);
        let st = network_stats(&nets.negative);
        assert_eq!(st.max_degree, 4);
        assert_eq!(st.max_degree_node, "H");
        assert_eq!(st.article_count, 4);
        assert_eq!(network_stats(&nets.positive).article_count, 0);
    }
}
