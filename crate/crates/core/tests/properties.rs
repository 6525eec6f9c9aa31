use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use newsrisk::centrality::{information_centrality, minmax_rescale, rank};
use newsrisk::conet::{build_networks, smooth, NetworkKind, NodeSet, QuarterNetwork};
use newsrisk::corpus::{Polarity, Quarter};
use newsrisk::entity::OccurrenceSet;

const NAMES: [&str; 8] = ["ab", "cd", "ef", "gh", "ij", "kl", "mn", "op"];

fn quarter() -> Quarter {
    Quarter::new(2014, 3).unwrap()
}

fn occurrence(i: usize, negative: bool, members: &BTreeSet<usize>) -> OccurrenceSet {
    OccurrenceSet {
        article_id: format!("a{i}"),
        quarter: quarter(),
        polarity: if negative {
            Polarity::Negative
        } else {
            Polarity::Positive
        },
        companies: members.iter().map(|&m| NAMES[m].to_owned()).collect(),
        matches: Vec::new(),
    }
}

fn articles() -> impl Strategy<Value = Vec<(bool, BTreeSet<usize>)>> {
    prop::collection::vec(
        (
            any::<bool>(),
            prop::collection::btree_set(0..NAMES.len(), 0..5),
        ),
        0..40,
    )
}

fn sets(articles: &[(bool, BTreeSet<usize>)], offset: usize) -> Vec<OccurrenceSet> {
    articles
        .iter()
        .enumerate()
        .map(|(i, (neg, m))| occurrence(i + offset, *neg, m))
        .collect()
}

fn all_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (0..n).map(move |j| (i, j)))
}

proptest! {
    #[test]
    fn networks_are_additive_and_symmetric(a in articles(), b in articles()) {
        let nodes = NodeSet::new(NAMES.iter().map(|s| s.to_string()).collect());
        let na = build_networks(&sets(&a, 0), quarter(), &nodes);
        let nb = build_networks(&sets(&b, a.len()), quarter(), &nodes);
        let mut both = sets(&a, 0);
        both.extend(sets(&b, a.len()));
        let nab = build_networks(&both, quarter(), &nodes);
        for kind in NetworkKind::ALL {
            let (x, y, xy) = (na.get(kind), nb.get(kind), nab.get(kind));
            prop_assert_eq!(xy.article_count(), x.article_count() + y.article_count());
            for i in 0..NAMES.len() {
                prop_assert_eq!(xy.node_weight(i), x.node_weight(i) + y.node_weight(i));
            }
            for (i, j) in all_pairs(NAMES.len()) {
                prop_assert_eq!(xy.weight(i, j), x.weight(i, j) + y.weight(i, j));
                prop_assert_eq!(xy.weight(i, j), xy.weight(j, i));
            }
        }
        for (i, j) in all_pairs(NAMES.len()) {
            prop_assert_eq!(
                nab.mixed.weight(i, j),
                nab.positive.weight(i, j) + nab.negative.weight(i, j)
            );
        }
    }

    #[test]
    fn edge_weight_counts_shared_articles(a in articles()) {
        let nodes = NodeSet::new(NAMES.iter().map(|s| s.to_string()).collect());
        let nets = build_networks(&sets(&a, 0), quarter(), &nodes);
        for (i, j) in all_pairs(NAMES.len()).filter(|(i, j)| i < j) {
            let expected = a.iter().filter(|(_, m)| m.contains(&i) && m.contains(&j)).count();
            prop_assert_eq!(nets.mixed.weight(i, j) as usize, expected);
        }
    }

    #[test]
    fn centrality_follows_node_relabelling(
        edges in prop::collection::vec((0..6usize, 0..6usize, 1..10u32), 1..15),
        perm in Just((0..6usize).collect::<Vec<_>>()).prop_shuffle(),
        alpha in 0.05f64..2.0,
    ) {
        let labelled = |label: &dyn Fn(usize) -> String| {
            let ids: Vec<String> = (0..6).map(label).collect();
            let nodes = NodeSet::new(ids.clone());
            let mut net = QuarterNetwork::empty(quarter(), NetworkKind::Mixed, nodes.clone());
            for &(i, j, w) in &edges {
                if i != j {
                    let (a, b) = (
                        nodes.index_of(&ids[i]).unwrap(),
                        nodes.index_of(&ids[j]).unwrap(),
                    );
                    net.set_edge(a.min(b), a.max(b), w);
                }
            }
            let c = information_centrality(&smooth(&net, alpha).unwrap()).unwrap();
            let by_original: BTreeMap<usize, f64> = (0..6)
                .map(|orig| (orig, c[nodes.index_of(&ids[orig]).unwrap()]))
                .collect();
            by_original
        };
        let plain = labelled(&|i| NAMES[i].to_owned());
        let permuted = labelled(&|i| NAMES[perm[i]].to_owned());
        for orig in 0..6 {
            let (p, q) = (plain[&orig], permuted[&orig]);
            prop_assert!((p - q).abs() <= 1e-10 * p.abs().max(1.0), "{} vs {}", p, q);
        }
    }

    #[test]
    fn centrality_is_positive_and_rescales_to_unit_interval(
        edges in prop::collection::vec((0..7usize, 0..7usize, 0..6u32), 0..20),
    ) {
        let nodes = NodeSet::new(NAMES[..7].iter().map(|s| s.to_string()).collect());
        let mut net = QuarterNetwork::empty(quarter(), NetworkKind::Mixed, nodes);
        for &(i, j, w) in &edges {
            if i != j {
                net.set_edge(i.min(j), i.max(j), w);
            }
        }
        let c = information_centrality(&smooth(&net, 0.1).unwrap()).unwrap();
        prop_assert!(c.iter().all(|&v| v > 0.0 && v.is_finite()));
        let r = minmax_rescale(&c);
        prop_assert!(r.values.iter().all(|&v| (0.0..=1.0).contains(&v)));
        if !r.degenerate {
            prop_assert!(r.values.contains(&0.0) && r.values.contains(&1.0));
        }
    }

    #[test]
    fn ranks_survive_monotone_transforms(
        scores in prop::collection::btree_map("[a-z]{1,4}", 0.0f64..100.0, 1..30),
        scale in 0.01f64..50.0,
        shift in -10.0f64..10.0,
    ) {
        let base = rank(&scores);
        let affine: BTreeMap<String, f64> =
            scores.iter().map(|(k, v)| (k.clone(), v * scale + shift)).collect();
        let cubed: BTreeMap<String, f64> =
            scores.iter().map(|(k, v)| (k.clone(), v.powi(3))).collect();
        prop_assert_eq!(&rank(&affine), &base);
        prop_assert_eq!(&rank(&cubed), &base);
        let mut positions: Vec<u32> = base.values().copied().collect();
        positions.sort_unstable();
        prop_assert_eq!(positions, (1..=scores.len() as u32).collect::<Vec<_>>());
    }
}
