#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use crmp::anchor::AnchorMap;
use crmp::count::PathCounter;
use crmp::hetgraph::HeterogeneousNetwork;
use crmp::metapath::MetaPath;
use crmp::syngen::GeneratorConfig;

/// One relation hop in the enumerator's own path vocabulary.
#[derive(Clone, Copy, Debug)]
pub enum Hop {
    /// `(target network?, link, forward?)`
    Rel(bool, &'static str, bool),
    Anchor,
}

impl Hop {
    fn flip(self) -> Hop {
        match self {
            Hop::Rel(t, l, f) => Hop::Rel(t, l, !f),
            Hop::Anchor => Hop::Anchor,
        }
    }
}

/// A hop sequence plus hop ranges whose boundary nodes must differ.
#[derive(Clone, Debug, Default)]
pub struct Walk {
    pub hops: Vec<Hop>,
    pub distinct: Vec<(usize, usize)>,
}

impl Walk {
    pub fn then(mut self, other: &Walk) -> Walk {
        let off = self.hops.len();
        self.hops.extend(&other.hops);
        self.distinct.extend(other.distinct.iter().map(|&(a, b)| (a + off, b + off)));
        self
    }

    pub fn reversed(&self) -> Walk {
        let n = self.hops.len();
        Walk {
            hops: self.hops.iter().rev().map(|h| h.flip()).collect(),
            distinct: self.distinct.iter().map(|&(a, b)| (n - b, n - a)).collect(),
        }
    }
}

/// σ1..σ9 written out hop by hop: follow, follower, followee of followee,
/// co-followee, co-follower, follower of follower, then co-location, same day
/// and shared word through posts.
pub fn sigma(target: bool, i: usize, exclusive: bool) -> Walk {
    let f = |fwd| Hop::Rel(target, "follow", fwd);
    let via = |link| {
        vec![
            Hop::Rel(target, "write", true),
            Hop::Rel(target, link, true),
            Hop::Rel(target, link, false),
            Hop::Rel(target, "write", false),
        ]
    };
    let hops = match i {
        1 => vec![f(true)],
        2 => vec![f(false)],
        3 => vec![f(true), f(true)],
        4 => vec![f(true), f(false)],
        5 => vec![f(false), f(true)],
        6 => vec![f(false), f(false)],
        7 => via("checkin_at"),
        8 => via("written_at"),
        9 => via("contain"),
        _ => panic!("no σ{i}"),
    };
    let n = hops.len();
    Walk {
        hops,
        distinct: if exclusive { vec![(0, n)] } else { vec![] },
    }
}

pub fn connector(i: usize, exclusive: bool) -> Walk {
    sigma(false, i, exclusive).then(&Walk {
        hops: vec![Hop::Anchor],
        distinct: vec![],
    })
}

pub fn recursive(i: usize, j: usize, k: usize, exclusive: bool) -> Walk {
    connector(i, exclusive)
        .then(&sigma(true, j, exclusive))
        .then(&connector(k, exclusive).reversed())
}

/// Exhaustive depth-first walk enumeration over raw edge lists.
pub struct Enumerator {
    adj: HashMap<(bool, &'static str, bool), Vec<Vec<u32>>>,
    s2t: HashMap<u32, u32>,
    t2s: HashMap<u32, u32>,
}

const LINKS: [(&str, &str, &str); 5] = [
    ("follow", "user", "user"),
    ("write", "user", "post"),
    ("checkin_at", "post", "location"),
    ("written_at", "post", "time"),
    ("contain", "post", "word"),
];

impl Enumerator {
    pub fn new(source: &HeterogeneousNetwork, target: &HeterogeneousNetwork, anchors: &AnchorMap) -> Enumerator {
        let mut adj = HashMap::new();
        for (is_t, net) in [(false, source), (true, target)] {
            for (link, src, dst) in LINKS {
                let mut fwd = vec![Vec::new(); net.node_count(src).unwrap()];
                let mut inv = vec![Vec::new(); net.node_count(dst).unwrap()];
                for &(a, b) in net.edges(link).unwrap() {
                    fwd[a as usize].push(b);
                    inv[b as usize].push(a);
                }
                adj.insert((is_t, link, true), fwd);
                adj.insert((is_t, link, false), inv);
            }
        }
        Enumerator {
            adj,
            s2t: anchors.pairs().iter().map(|p| (p.source, p.target)).collect(),
            t2s: anchors.pairs().iter().map(|p| (p.target, p.source)).collect(),
        }
    }

    /// Number of walks from `start`, keyed by end node. The anchor hop runs
    /// source to target when the walk is currently in the source network.
    pub fn counts(&self, walk: &Walk, start: u32, start_in_target: bool) -> BTreeMap<u32, u128> {
        let mut out = BTreeMap::new();
        let mut trail = vec![start];
        self.dfs(walk, start_in_target, &mut trail, &mut out);
        out
    }

    pub fn closed(&self, walk: &Walk, u: u32) -> u128 {
        self.counts(walk, u, false).get(&u).copied().unwrap_or(0)
    }

    fn dfs(&self, walk: &Walk, in_target: bool, trail: &mut Vec<u32>, out: &mut BTreeMap<u32, u128>) {
        let depth = trail.len() - 1;
        if walk.distinct.iter().any(|&(a, b)| b == depth && trail[a] == trail[b]) {
            return;
        }
        if depth == walk.hops.len() {
            *out.entry(*trail.last().unwrap()).or_insert(0) += 1;
            return;
        }
        let at = *trail.last().unwrap();
        match walk.hops[depth] {
            Hop::Anchor => {
                let map = if in_target { &self.t2s } else { &self.s2t };
                if let Some(&next) = map.get(&at) {
                    trail.push(next);
                    self.dfs(walk, !in_target, trail, out);
                    trail.pop();
                }
            }
            Hop::Rel(t, link, fwd) => {
                assert_eq!(t, in_target, "hop on the wrong network");
                for &next in &self.adj[&(t, link, fwd)][at as usize] {
                    trail.push(next);
                    self.dfs(walk, in_target, trail, out);
                    trail.pop();
                }
            }
        }
    }
}

/// Dense path-count matrix of `path` from every start node.
pub fn pc_matrix(counter: &PathCounter, path: &MetaPath) -> Vec<Vec<u128>> {
    let n = counter.dim(path.start()).unwrap();
    let starts: Vec<u32> = (0..n as u32).collect();
    counter
        .path_count_rows(path, &starts)
        .unwrap()
        .iter()
        .map(|r| r.to_dense())
        .collect()
}

pub fn transpose(m: &[Vec<u128>]) -> Vec<Vec<u128>> {
    let cols = m.first().map_or(0, Vec::len);
    (0..cols).map(|j| m.iter().map(|row| row[j]).collect()).collect()
}

/// Pairwise Mann–Whitney AUC, ties counted one half.
pub fn brute_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li && !lj {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

/// `[generator]` section holding every field of `cfg`.
pub fn generator_section(cfg: &GeneratorConfig) -> String {
    let v = serde_json::to_value(cfg).unwrap();
    let mut out = String::from("[generator]\n");
    for (k, v) in v.as_object().unwrap() {
        out.push_str(&format!("{k} = {v}\n"));
    }
    out
}
