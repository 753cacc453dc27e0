//! Path-count engine.
//!
//! Counts meta-path instances (walks; node repetition allowed) by pushing a
//! count vector left to right through the per-step relation matrices, starting
//! from a single-node indicator. No user-by-user product is ever formed.
//! Closed counts (start node == end node) meet in the middle: the path is split,
//! the prefix is chained from `u` and the inverted suffix is chained from `u`,
//! and the two rows are dotted.
//!
//! Exclusive ranges subtract `x[v] * diag[v]` at the range end, where `x` is the
//! vector entering the range and `diag` is the diagonal of the range's own
//! path-count matrix (itself computed by meeting in the middle, then cached).
//!
//! Counts are `u128` with saturating arithmetic; every value below 2^127 is exact.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use crate::anchor::AnchorMap;
use crate::error::{Error, Result};
use crate::hetgraph::{HeterogeneousNetwork, RelationMatrix};
use crate::metapath::{Endpoint, MetaPath, Side, Step};

/// A vector of path counts over the nodes of one type. Sparse while few
/// entries are nonzero, dense beyond the engine's density threshold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CountRow {
    Sparse { dim: usize, entries: Vec<(u32, u128)> },
    Dense(Vec<u128>),
}

impl CountRow {
    pub fn indicator(dim: usize, at: u32) -> Self {
        CountRow::Sparse {
            dim,
            entries: vec![(at, 1)],
        }
    }

    pub fn zeros(dim: usize) -> Self {
        CountRow::Sparse {
            dim,
            entries: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            CountRow::Sparse { dim, .. } => *dim,
            CountRow::Dense(v) => v.len(),
        }
    }

    pub fn get(&self, i: usize) -> u128 {
        match self {
            CountRow::Sparse { entries, .. } => entries
                .binary_search_by_key(&(i as u32), |e| e.0)
                .map_or(0, |p| entries[p].1),
            CountRow::Dense(v) => v.get(i).copied().unwrap_or(0),
        }
    }

    /// Nonzero entries in ascending index order.
    pub fn nonzeros(&self) -> Box<dyn Iterator<Item = (u32, u128)> + '_> {
        match self {
            CountRow::Sparse { entries, .. } => Box::new(entries.iter().copied()),
            CountRow::Dense(v) => Box::new(
                v.iter()
                    .enumerate()
                    .filter(|(_, &c)| c != 0)
                    .map(|(i, &c)| (i as u32, c)),
            ),
        }
    }

    pub fn nnz(&self) -> usize {
        match self {
            CountRow::Sparse { entries, .. } => entries.len(),
            CountRow::Dense(v) => v.iter().filter(|&&c| c != 0).count(),
        }
    }

    pub fn sum(&self) -> u128 {
        self.nonzeros().fold(0u128, |acc, (_, c)| acc.saturating_add(c))
    }

    pub fn to_dense(&self) -> Vec<u128> {
        match self {
            CountRow::Dense(v) => v.clone(),
            CountRow::Sparse { dim, entries } => {
                let mut v = vec![0u128; *dim];
                for &(i, c) in entries {
                    v[i as usize] = c;
                }
                v
            }
        }
    }

    pub fn dot(&self, other: &CountRow) -> u128 {
        match (self, other) {
            (CountRow::Dense(a), b) | (b, CountRow::Dense(a)) => b
                .nonzeros()
                .fold(0u128, |acc, (i, c)| acc.saturating_add(c.saturating_mul(a[i as usize]))),
            (CountRow::Sparse { entries: a, .. }, CountRow::Sparse { entries: b, .. }) => {
                let (mut i, mut j, mut acc) = (0, 0, 0u128);
                while i < a.len() && j < b.len() {
                    match a[i].0.cmp(&b[j].0) {
                        std::cmp::Ordering::Less => i += 1,
                        std::cmp::Ordering::Greater => j += 1,
                        std::cmp::Ordering::Equal => {
                            acc = acc.saturating_add(a[i].1.saturating_mul(b[j].1));
                            i += 1;
                            j += 1;
                        }
                    }
                }
                acc
            }
        }
    }

    /// `self[v] -= entering[v] * diag[v]` for every `v`.
    fn subtract_diagonal(&mut self, entering: &CountRow, diag: &[u128]) {
        let corrections: Vec<(u32, u128)> = entering
            .nonzeros()
            .filter_map(|(v, c)| {
                let d = diag[v as usize];
                (d != 0).then(|| (v, c.saturating_mul(d)))
            })
            .collect();
        if corrections.is_empty() {
            return;
        }
        match self {
            CountRow::Dense(x) => {
                for (v, c) in corrections {
                    x[v as usize] = x[v as usize].saturating_sub(c);
                }
            }
            CountRow::Sparse { entries, .. } => {
                for (v, c) in corrections {
                    if let Ok(p) = entries.binary_search_by_key(&v, |e| e.0) {
                        entries[p].1 = entries[p].1.saturating_sub(c);
                    }
                }
                entries.retain(|e| e.1 != 0);
            }
        }
    }
}

/// Row-vector times 0/1 matrix.
fn propagate(x: &CountRow, m: &RelationMatrix, dense_threshold: f64) -> CountRow {
    let ncols = m.ncols();
    let mut acc = vec![0u128; ncols];
    let mut touched: Vec<u32> = Vec::new();
    for (i, c) in x.nonzeros() {
        for &j in m.row(i as usize) {
            let slot = &mut acc[j as usize];
            if *slot == 0 {
                touched.push(j);
            }
            *slot = slot.saturating_add(c);
        }
    }
    if touched.len() as f64 > dense_threshold * ncols as f64 {
        CountRow::Dense(acc)
    } else {
        touched.sort_unstable();
        CountRow::Sparse {
            dim: ncols,
            entries: touched.into_iter().map(|j| (j, acc[j as usize])).collect(),
        }
    }
}

/// A meta-path resolved against a network pair: one matrix per step plus the
/// diagonal of every exclusive range.
#[derive(Debug, Clone)]
pub struct PreparedPath {
    path: MetaPath,
    matrices: Vec<Arc<RelationMatrix>>,
    diagonals: Vec<(usize, usize, Arc<Vec<u128>>)>,
    start_dim: usize,
    dense_threshold: f64,
}

impl PreparedPath {
    pub fn path(&self) -> &MetaPath {
        &self.path
    }

    pub fn start_dim(&self) -> usize {
        self.start_dim
    }

    /// Counts from node `start` to every end node.
    pub fn row(&self, start: u32) -> Result<CountRow> {
        if start as usize >= self.start_dim {
            return Err(Error::OutOfRange {
                what: "start node",
                index: start as usize,
                len: self.start_dim,
            });
        }
        Ok(self.chain(CountRow::indicator(self.start_dim, start)))
    }

    /// Push an arbitrary start vector through the path.
    pub fn chain(&self, mut x: CountRow) -> CountRow {
        let mut entering: Vec<Option<CountRow>> = vec![None; self.diagonals.len()];
        for (k, m) in self.matrices.iter().enumerate() {
            for (slot, (start, _, _)) in self.diagonals.iter().enumerate() {
                if *start == k {
                    entering[slot] = Some(x.clone());
                }
            }
            x = propagate(&x, m, self.dense_threshold);
            for (slot, (_, end, diag)) in self.diagonals.iter().enumerate() {
                if *end == k + 1 {
                    if let Some(e) = entering[slot].take() {
                        x.subtract_diagonal(&e, diag);
                    }
                }
            }
        }
        x
    }
}

/// Path counting over a (source, target, anchors) triple. Cheap to share
/// across threads; exclusive-range diagonals are cached per range.
pub struct PathCounter<'a> {
    source: &'a HeterogeneousNetwork,
    target: &'a HeterogeneousNetwork,
    anchor_type: String,
    anchor_forward: Arc<RelationMatrix>,
    anchor_inverse: Arc<RelationMatrix>,
    dense_threshold: f64,
    diagonals: Mutex<HashMap<String, Arc<Vec<u128>>>>,
}

impl<'a> PathCounter<'a> {
    pub fn new(
        source: &'a HeterogeneousNetwork,
        target: &'a HeterogeneousNetwork,
        anchors: &AnchorMap,
        anchor_type: &str,
    ) -> Result<Self> {
        let fwd = anchors.matrix(source.node_count(anchor_type)?, target.node_count(anchor_type)?)?;
        let inv = fwd.transpose();
        Ok(PathCounter {
            source,
            target,
            anchor_type: anchor_type.to_string(),
            anchor_forward: Arc::new(fwd),
            anchor_inverse: Arc::new(inv),
            dense_threshold: 0.1,
            diagonals: Mutex::new(HashMap::new()),
        })
    }

    /// Fraction of nonzero entries above which intermediate rows go dense.
    pub fn with_dense_threshold(mut self, threshold: f64) -> Self {
        self.dense_threshold = threshold;
        self
    }

    pub fn network(&self, side: Side) -> &'a HeterogeneousNetwork {
        match side {
            Side::Source => self.source,
            Side::Target => self.target,
        }
    }

    pub fn dim(&self, ep: &Endpoint) -> Result<usize> {
        self.network(ep.side).node_count(&ep.node_type)
    }

    fn step_matrix(&self, from: &Endpoint, step: &Step, to: &Endpoint) -> Result<Arc<RelationMatrix>> {
        match step {
            Step::Anchor => {
                if from.side == to.side || from.node_type != self.anchor_type || to.node_type != self.anchor_type {
                    return Err(Error::MetaPath(format!(
                        "anchor step {from} -> {to} must join the {} types of the two networks",
                        self.anchor_type
                    )));
                }
                Ok(match from.side {
                    Side::Source => Arc::clone(&self.anchor_forward),
                    Side::Target => Arc::clone(&self.anchor_inverse),
                })
            }
            Step::Relation { link, direction } => {
                if from.side != to.side {
                    return Err(Error::MetaPath(format!("relation `{link}` cannot cross networks")));
                }
                let net = self.network(from.side);
                let lt = net
                    .schema()
                    .link_type(link)
                    .ok_or_else(|| Error::UnknownLinkType(link.clone()))?;
                let (s, d) = lt.endpoints(*direction);
                if s != from.node_type || d != to.node_type {
                    return Err(Error::MetaPath(format!("step {step} goes {s} -> {d}, path has {from} -> {to}")));
                }
                net.relation_matrix(link, *direction)
            }
        }
    }

    /// Resolve every step of `path` and the diagonals of its exclusive ranges.
    pub fn prepare(&self, path: &MetaPath) -> Result<PreparedPath> {
        let nodes = path.nodes();
        let matrices = path
            .steps()
            .iter()
            .enumerate()
            .map(|(k, s)| self.step_matrix(&nodes[k], s, &nodes[k + 1]))
            .collect::<Result<Vec<_>>>()?;
        let mut diagonals = Vec::new();
        for r in path.exclusive_segments() {
            diagonals.push((r.start, r.end, self.diagonal(&path.slice(r.clone()))?));
        }
        Ok(PreparedPath {
            path: path.clone(),
            matrices,
            diagonals,
            start_dim: self.dim(path.start())?,
            dense_threshold: self.dense_threshold,
        })
    }

    /// Diagonal of the path-count matrix of a closed path without exclusive
    /// ranges, for every node of its start type. Cached by printed path.
    pub fn diagonal(&self, closed: &MetaPath) -> Result<Arc<Vec<u128>>> {
        if closed.start() != closed.end() {
            return Err(Error::MetaPath(format!("`{closed}` is not closed")));
        }
        let key = closed.to_string();
        if let Some(d) = self.diagonals.lock().unwrap().get(&key) {
            return Ok(Arc::clone(d));
        }
        let at = closed.len().div_ceil(2);
        let (prefix, suffix) = closed.split_at(at)?;
        let left = self.prepare(&prefix)?;
        let right = self.prepare(&suffix.invert())?;
        let n = left.start_dim();
        let diag: Vec<u128> = (0..n as u32)
            .into_par_iter()
            .map(|v| {
                let a = left.chain(CountRow::indicator(n, v));
                let b = right.chain(CountRow::indicator(n, v));
                a.dot(&b)
            })
            .collect();
        let diag = Arc::new(diag);
        self.diagonals
            .lock()
            .unwrap()
            .entry(key)
            .or_insert_with(|| Arc::clone(&diag));
        Ok(diag)
    }

    /// Path-count rows for each start node in `from`, in order. Parallel over
    /// start nodes; results do not depend on the worker count.
    pub fn path_count_rows(&self, path: &MetaPath, from: &[u32]) -> Result<Vec<CountRow>> {
        let prepared = self.prepare(path)?;
        from.par_iter().map(|&u| prepared.row(u)).collect()
    }

    /// Number of instances of the closed path `path` from `u` back to `u`.
    pub fn closed_count(&self, path: &MetaPath, u: u32) -> Result<u128> {
        let (left, right) = self.prepare_closed(path)?;
        closed_from(&left, &right, u)
    }

    /// Split point and prepared halves for repeated closed counts.
    pub fn prepare_closed(&self, path: &MetaPath) -> Result<(PreparedPath, PreparedPath)> {
        if path.start() != path.end() {
            return Err(Error::MetaPath(format!("`{path}` does not return to its start type")));
        }
        let half = path.len() / 2;
        let at = (0..=path.len())
            .filter(|&s| path.can_split_at(s))
            .min_by_key(|&s| (s.abs_diff(half), s))
            .expect("0 is always a valid split");
        let (prefix, suffix) = path.split_at(at)?;
        Ok((self.prepare(&prefix)?, self.prepare(&suffix.invert())?))
    }
}

/// Closed count from prepared halves (see [`PathCounter::prepare_closed`]).
pub fn closed_from(left: &PreparedPath, right: &PreparedPath, u: u32) -> Result<u128> {
    Ok(left.row(u)?.dot(&right.row(u)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anchor::AnchorPair;
    use crate::hetgraph::{NetworkBuilder, NetworkSchema};
    use crate::metapath::MetaPathCatalog;

    fn users(n: usize) -> NetworkBuilder {
        let mut b = NetworkBuilder::new(NetworkSchema::social());
        for i in 0..n {
            b.add_node("user", format!("u{i}")).unwrap();
        }
        b
    }

    #[test]
    fn star_graph_one_step() {
        let mut b = users(4);
        for j in 1..4 {
            b.add_edge("follow", 0, j).unwrap();
        }
        let s = b.build();
        let t = users(1).build();
        let pc = PathCounter::new(&s, &t, &AnchorMap::empty(), "user").unwrap();
        let p: MetaPath = "user -follow-> user".parse().unwrap();
        let row = &pc.path_count_rows(&p, &[0]).unwrap()[0];
        assert_eq!(row.to_dense(), vec![0, 1, 1, 1]);
    }

    #[test]
    fn empty_relation_annihilates() {
        let mut b = users(3);
        b.add_edge("follow", 0, 1).unwrap();
        let s = b.build();
        let t = users(3).build();
        let anchors = AnchorMap::new(vec![AnchorPair {
            source: 1,
            target: 1,
            joined_target_after_source: false,
        }])
        .unwrap();
        let pc = PathCounter::new(&s, &t, &anchors, "user").unwrap();
        let p: MetaPath = "user -follow-> user -anchor- user@t -follow-> user@t".parse().unwrap();
        for row in pc.path_count_rows(&p, &[0, 1, 2]).unwrap() {
            assert_eq!(row.sum(), 0);
        }
        let p: MetaPath = "user -follow-> user -anchor- user@t".parse().unwrap();
        assert_eq!(pc.path_count_rows(&p, &[0]).unwrap()[0].to_dense(), vec![0, 1, 0]);
    }

    #[test]
    fn exclusive_range_drops_self_pairs() {
        // 0 and 1 both follow 2: σ4 from 0 reaches 0 (itself) and 1
        let mut b = users(3);
        b.add_edge("follow", 0, 2).unwrap();
        b.add_edge("follow", 1, 2).unwrap();
        let s = b.build();
        let t = users(1).build();
        let pc = PathCounter::new(&s, &t, &AnchorMap::empty(), "user").unwrap();
        let raw: MetaPath = "user -follow-> user -follow^-1-> user".parse().unwrap();
        assert_eq!(pc.path_count_rows(&raw, &[0]).unwrap()[0].to_dense(), vec![1, 1, 0]);
        let excl = raw.clone().exclusive().unwrap();
        assert_eq!(pc.path_count_rows(&excl, &[0]).unwrap()[0].to_dense(), vec![0, 1, 0]);
        assert_eq!(pc.diagonal(&raw).unwrap().as_slice(), &[1, 1, 0]);
    }

    #[test]
    fn friends_intimacy_toy() {
        // u=0 follows a=1, b=2 in the source; a, b anchored to a'=0, b'=1;
        // a' follows b' in the target.
        let mut b = users(3);
        b.add_edge("follow", 0, 1).unwrap();
        b.add_edge("follow", 0, 2).unwrap();
        let s = b.build();
        let mut b = users(2);
        b.add_edge("follow", 0, 1).unwrap();
        let t = b.build();
        let anchors = AnchorMap::new(vec![
            AnchorPair {
                source: 1,
                target: 0,
                joined_target_after_source: false,
            },
            AnchorPair {
                source: 2,
                target: 1,
                joined_target_after_source: false,
            },
        ])
        .unwrap();
        let pc = PathCounter::new(&s, &t, &anchors, "user").unwrap();
        let cat = MetaPathCatalog::heterogeneous();
        let phi = cat.recursive(1, 1, 1).unwrap();
        assert_eq!(pc.closed_count(&phi, 0).unwrap(), 1);
        assert_eq!(pc.closed_count(&phi, 1).unwrap(), 0);
        let no_anchor = PathCounter::new(&s, &t, &AnchorMap::empty(), "user").unwrap();
        assert_eq!(no_anchor.closed_count(&phi, 0).unwrap(), 0);
    }

    #[test]
    fn unknown_link_is_reported() {
        let s = users(2).build();
        let t = users(2).build();
        let pc = PathCounter::new(&s, &t, &AnchorMap::empty(), "user").unwrap();
        let p: MetaPath = "user -likes-> user".parse().unwrap();
        assert!(matches!(pc.prepare(&p), Err(Error::UnknownLinkType(_))));
    }

    #[test]
    fn dense_and_sparse_rows_agree() {
        let mut b = users(6);
        for i in 0..6u32 {
            for j in 0..6u32 {
                if (i + j) % 2 == 0 && i != j {
                    b.add_edge("follow", i, j).unwrap();
                }
            }
        }
        let s = b.build();
        let t = users(1).build();
        let p: MetaPath = "user -follow-> user -follow-> user -follow^-1-> user".parse().unwrap();
        let sparse = PathCounter::new(&s, &t, &AnchorMap::empty(), "user")
            .unwrap()
            .with_dense_threshold(2.0);
        let dense = PathCounter::new(&s, &t, &AnchorMap::empty(), "user")
            .unwrap()
            .with_dense_threshold(0.0);
        let a = sparse.path_count_rows(&p, &[0, 1, 2, 3]).unwrap();
        let b = dense.path_count_rows(&p, &[0, 1, 2, 3]).unwrap();
        assert!(matches!(a[0], CountRow::Sparse { .. }));
        assert!(matches!(b[0], CountRow::Dense(_)));
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.to_dense(), y.to_dense());
        }
    }

    #[test]
    fn saturation_does_not_wrap() {
        let big = CountRow::Dense(vec![u128::MAX, 2]);
        assert_eq!(big.sum(), u128::MAX);
        assert_eq!(big.dot(&big), u128::MAX);
    }
}
