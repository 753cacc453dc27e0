//! Anchor correspondence between source and target users, and the labelled
//! user sets built from it.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::{index, SliceRandom};

use crate::error::{Error, Result};
use crate::hetgraph::{write_file, Direction, HeterogeneousNetwork, RelationMatrix};
use crate::rng::{self, fraction_count};

/// One account pair. `joined_target_after_source` is labelling metadata only;
/// path counting treats the correspondence as undirected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AnchorPair {
    pub source: u32,
    pub target: u32,
    pub joined_target_after_source: bool,
}

/// Partial one-to-one map between source and target users, kept sorted by
/// (source, target).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AnchorMap {
    pairs: Vec<AnchorPair>,
}

impl AnchorMap {
    pub fn new(mut pairs: Vec<AnchorPair>) -> Result<Self> {
        pairs.sort_unstable();
        let mut sources = HashSet::new();
        let mut targets = HashSet::new();
        for p in &pairs {
            if !sources.insert(p.source) {
                return Err(Error::Anchor(format!("source user {} appears in more than one pair", p.source)));
            }
            if !targets.insert(p.target) {
                return Err(Error::Anchor(format!("target user {} appears in more than one pair", p.target)));
            }
        }
        Ok(AnchorMap { pairs })
    }

    pub fn empty() -> Self {
        AnchorMap::default()
    }

    pub fn pairs(&self) -> &[AnchorPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains_source(&self, source: u32) -> bool {
        self.pairs.iter().any(|p| p.source == source)
    }

    /// Anchor relation as a `n_source × n_target` 0/1 matrix. Each row and
    /// column holds at most one nonzero.
    pub fn matrix(&self, n_source_users: usize, n_target_users: usize) -> Result<RelationMatrix> {
        RelationMatrix::from_pairs(
            "anchor",
            Direction::Forward,
            n_source_users,
            n_target_users,
            self.pairs.iter().map(|p| (p.source, p.target)),
        )
    }

    /// Read `<source_id>\t<target_id>\t<0|1>` lines, resolving IDs against the
    /// user node spaces of both networks.
    pub fn load(
        path: &Path,
        source: &HeterogeneousNetwork,
        target: &HeterogeneousNetwork,
        user_type: &str,
    ) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut pairs = Vec::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            let [s, t, flag] = f.as_slice() else {
                return Err(Error::parse(path, no + 1, "expected `<source_id>\\t<target_id>\\t<0|1>`"));
            };
            let source_idx = source
                .node_index(user_type, s)
                .ok_or_else(|| Error::parse(path, no + 1, format!("unknown source user `{s}`")))?;
            let target_idx = target
                .node_index(user_type, t)
                .ok_or_else(|| Error::parse(path, no + 1, format!("unknown target user `{t}`")))?;
            let after = match *flag {
                "0" => false,
                "1" => true,
                other => return Err(Error::parse(path, no + 1, format!("after flag must be 0 or 1, got `{other}`"))),
            };
            pairs.push(AnchorPair {
                source: source_idx,
                target: target_idx,
                joined_target_after_source: after,
            });
        }
        AnchorMap::new(pairs).map_err(|e| Error::parse(path, 0, e.to_string()))
    }

    pub fn write(
        &self,
        path: &Path,
        source: &HeterogeneousNetwork,
        target: &HeterogeneousNetwork,
        user_type: &str,
    ) -> Result<()> {
        let s_ids = source.node_ids(user_type)?;
        let t_ids = target.node_ids(user_type)?;
        write_file(path, |w| {
            for p in &self.pairs {
                writeln!(
                    w,
                    "{}\t{}\t{}",
                    s_ids[p.source as usize],
                    t_ids[p.target as usize],
                    u8::from(p.joined_target_after_source)
                )?;
            }
            Ok(())
        })
    }
}

/// Users to be classified plus the anchors that stay visible in the graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledUserSet {
    /// Anchor users who joined the target after the source; their target
    /// accounts are deleted before featurization.
    pub positives: Vec<u32>,
    /// Source users with no anchor.
    pub negatives: Vec<u32>,
    /// Anchors kept as existing correspondences.
    pub retained: AnchorMap,
}

impl LabeledUserSet {
    /// Positives then negatives, with labels.
    pub fn users_and_labels(&self) -> (Vec<u32>, Vec<bool>) {
        let users = self.positives.iter().chain(&self.negatives).copied().collect();
        let labels = self
            .positives
            .iter()
            .map(|_| true)
            .chain(self.negatives.iter().map(|_| false))
            .collect();
        (users, labels)
    }
}

/// Target-user nodes to delete (with all incident edges) before featurization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PruneDirective {
    pub target_users: Vec<u32>,
}

impl PruneDirective {
    /// Apply to the target network, cascading through `write` so the deleted
    /// users' posts lose their content edges as well.
    pub fn apply(&self, target: &HeterogeneousNetwork, user_type: &str) -> Result<HeterogeneousNetwork> {
        let cascade: Vec<&str> = target
            .schema()
            .link_types()
            .iter()
            .filter(|l| l.src == user_type && l.dst != user_type)
            .map(|l| l.name.as_str())
            .collect();
        target.remove_nodes(user_type, &self.target_users, &cascade)
    }
}

/// Options for [`build_labeled_set`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelOptions {
    /// Fraction of non-positive anchors kept as existing correspondences.
    pub gamma_a: f64,
    /// Optional cap on the number of negatives (seeded uniform sample).
    pub negative_cap: Option<usize>,
}

/// Split users into positives (anchors with the after flag), negatives
/// (non-anchor source users) and a `gamma_a` fraction of the remaining anchors
/// to retain. The directive lists the positives' target accounts; non-retained
/// anchors only lose the correspondence and keep both user nodes.
pub fn build_labeled_set(
    full_anchors: &AnchorMap,
    n_source_users: usize,
    opts: LabelOptions,
    seed: u64,
) -> Result<(LabeledUserSet, PruneDirective)> {
    if !(opts.gamma_a > 0.0 && opts.gamma_a <= 1.0) {
        return Err(Error::InvalidArgument(format!("gamma_A {} outside (0, 1]", opts.gamma_a)));
    }
    if let Some(p) = full_anchors.pairs.iter().find(|p| p.source as usize >= n_source_users) {
        return Err(Error::OutOfRange {
            what: "anchor source user",
            index: p.source as usize,
            len: n_source_users,
        });
    }

    let positives: Vec<AnchorPair> = full_anchors
        .pairs
        .iter()
        .filter(|p| p.joined_target_after_source)
        .copied()
        .collect();
    let eligible: Vec<AnchorPair> = full_anchors
        .pairs
        .iter()
        .filter(|p| !p.joined_target_after_source)
        .copied()
        .collect();
    if eligible.is_empty() {
        return Err(Error::Anchor(
            "no anchors left to retain after taking positives; supply more anchors or fewer positives".into(),
        ));
    }

    // `eligible` is sorted by (source, target), so the shuffle input is canonical.
    let keep = fraction_count(opts.gamma_a, eligible.len());
    let mut rng = rng::stream(seed, rng::Stage::AnchorRetention, 0);
    let mut order: Vec<usize> = (0..eligible.len()).collect();
    order.shuffle(&mut rng);
    let retained = AnchorMap::new(order[..keep].iter().map(|&i| eligible[i]).collect())?;

    let anchored: HashSet<u32> = full_anchors.pairs.iter().map(|p| p.source).collect();
    let mut negatives: Vec<u32> = (0..n_source_users as u32).filter(|u| !anchored.contains(u)).collect();
    if let Some(cap) = opts.negative_cap {
        if cap < negatives.len() {
            let mut rng = rng::stream(seed, rng::Stage::NegativeCap, 0);
            let mut picked = index::sample(&mut rng, negatives.len(), cap).into_vec();
            picked.sort_unstable();
            negatives = picked.into_iter().map(|i| negatives[i]).collect();
        }
    }

    let directive = PruneDirective {
        target_users: positives.iter().map(|p| p.target).collect(),
    };
    Ok((
        LabeledUserSet {
            positives: positives.iter().map(|p| p.source).collect(),
            negatives,
            retained,
        },
        directive,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(s: u32, t: u32, after: bool) -> AnchorPair {
        AnchorPair {
            source: s,
            target: t,
            joined_target_after_source: after,
        }
    }

    #[test]
    fn matrix_has_one_entry_per_pair() {
        let m = AnchorMap::new(vec![pair(0, 3, false), pair(2, 1, true)])
            .unwrap()
            .matrix(3, 4)
            .unwrap();
        assert!(m.contains(0, 3) && m.contains(2, 1));
        assert_eq!(m.nnz(), 2);
        assert!((0..3).all(|i| m.row(i).len() <= 1));
        assert!((0..4).all(|j| m.transpose().row(j).len() <= 1));
    }

    #[test]
    fn empty_map_gives_zero_matrix() {
        let m = AnchorMap::empty().matrix(2, 2).unwrap();
        assert_eq!(m.nnz(), 0);
    }

    #[test]
    fn one_to_one_is_enforced() {
        assert!(AnchorMap::new(vec![pair(0, 1, false), pair(0, 2, false)]).is_err());
        assert!(AnchorMap::new(vec![pair(0, 1, false), pair(3, 1, false)]).is_err());
    }

    #[test]
    fn out_of_range_index() {
        let map = AnchorMap::new(vec![pair(5, 0, false)]).unwrap();
        assert!(matches!(map.matrix(3, 3), Err(Error::OutOfRange { .. })));
    }

    fn mixed_map() -> AnchorMap {
        // 10 non-positive anchors (sources 0..10), 4 positives (10..14)
        let mut pairs: Vec<AnchorPair> = (0..10).map(|i| pair(i, i, false)).collect();
        pairs.extend((10..14).map(|i| pair(i, i, true)));
        AnchorMap::new(pairs).unwrap()
    }

    #[test]
    fn gamma_a_point_three_keeps_three() {
        let map = mixed_map();
        let opts = LabelOptions {
            gamma_a: 0.3,
            negative_cap: None,
        };
        let (set, directive) = build_labeled_set(&map, 20, opts, 9).unwrap();
        assert_eq!(set.retained.len(), 3);
        assert!(set.retained.pairs().iter().all(|p| p.source < 10 && !p.joined_target_after_source));
        assert_eq!(set.positives, vec![10, 11, 12, 13]);
        assert_eq!(set.negatives, (14..20).collect::<Vec<_>>());
        assert_eq!(directive.target_users, vec![10, 11, 12, 13]);
        let (again, _) = build_labeled_set(&map, 20, opts, 9).unwrap();
        assert_eq!(again, set);
    }

    #[test]
    fn gamma_a_one_keeps_all_non_positive() {
        let (set, _) = build_labeled_set(
            &mixed_map(),
            14,
            LabelOptions {
                gamma_a: 1.0,
                negative_cap: None,
            },
            1,
        )
        .unwrap();
        assert_eq!(set.retained.len(), 10);
        assert!(set.negatives.is_empty());
    }

    #[test]
    fn no_eligible_anchor_is_an_error() {
        let map = AnchorMap::new(vec![pair(0, 0, true)]).unwrap();
        let opts = LabelOptions {
            gamma_a: 0.5,
            negative_cap: None,
        };
        assert!(matches!(build_labeled_set(&map, 3, opts, 0), Err(Error::Anchor(_))));
        let opts = LabelOptions {
            gamma_a: 0.0,
            negative_cap: None,
        };
        assert!(build_labeled_set(&mixed_map(), 14, opts, 0).is_err());
    }

    #[test]
    fn negative_cap_samples_subset() {
        let opts = LabelOptions {
            gamma_a: 0.5,
            negative_cap: Some(3),
        };
        let (set, _) = build_labeled_set(&mixed_map(), 30, opts, 4).unwrap();
        assert_eq!(set.negatives.len(), 3);
        assert!(set.negatives.iter().all(|&u| (14..30).contains(&u)));
    }
}
