//! Brute-force path enumeration used to cross-check the matrix engine.
//!
//! Walks every typed node sequence realizing a meta-path by depth-first search
//! over adjacency lists built directly from the networks' edge lists and the
//! anchor pairs. It shares no code with [`crate::count`]. Exponential in path
//! length; only meant for small networks.

use std::collections::{BTreeMap, HashMap};

use crate::anchor::{AnchorMap, AnchorPair};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::hetgraph::{Direction, HeterogeneousNetwork, NetworkBuilder, NetworkSchema};
use crate::metapath::{MetaPath, MetaPathCatalog, Side, Step};

type Adjacency = HashMap<u32, Vec<u32>>;

/// Oracle over one (source, target, anchors) triple.
pub struct DfsOracle {
    // one adjacency per (side, link, direction) and for anchor hops per side
    relations: HashMap<(Side, String, Direction), Adjacency>,
    anchor_from: HashMap<Side, Adjacency>,
}

impl DfsOracle {
    pub fn new(source: &HeterogeneousNetwork, target: &HeterogeneousNetwork, anchors: &AnchorMap) -> Result<Self> {
        let mut relations = HashMap::new();
        for (side, net) in [(Side::Source, source), (Side::Target, target)] {
            for lt in net.schema().link_types() {
                let mut fwd: Adjacency = HashMap::new();
                let mut inv: Adjacency = HashMap::new();
                for &(s, d) in net.edges(&lt.name)? {
                    fwd.entry(s).or_default().push(d);
                    inv.entry(d).or_default().push(s);
                }
                relations.insert((side, lt.name.clone(), Direction::Forward), fwd);
                relations.insert((side, lt.name.clone(), Direction::Inverse), inv);
            }
        }
        let mut from_source: Adjacency = HashMap::new();
        let mut from_target: Adjacency = HashMap::new();
        for p in anchors.pairs() {
            from_source.entry(p.source).or_default().push(p.target);
            from_target.entry(p.target).or_default().push(p.source);
        }
        let anchor_from = HashMap::from([(Side::Source, from_source), (Side::Target, from_target)]);
        Ok(DfsOracle { relations, anchor_from })
    }

    fn neighbours(&self, side: Side, step: &Step, node: u32) -> Result<&[u32]> {
        let adj = match step {
            Step::Anchor => &self.anchor_from[&side],
            Step::Relation { link, direction } => self
                .relations
                .get(&(side, link.clone(), *direction))
                .ok_or_else(|| Error::UnknownLinkType(link.clone()))?,
        };
        Ok(adj.get(&node).map_or(&[], Vec::as_slice))
    }

    /// Instance counts from `start` to every reachable end node.
    pub fn path_counts(&self, path: &MetaPath, start: u32) -> Result<BTreeMap<u32, u128>> {
        // resolve neighbour lists up front so the recursion cannot fail midway
        for (k, step) in path.steps().iter().enumerate() {
            self.neighbours(path.nodes()[k].side, step, 0)?;
        }
        let mut out = BTreeMap::new();
        let mut trail = vec![start];
        self.walk(path, 0, &mut trail, &mut out);
        Ok(out)
    }

    fn walk(&self, path: &MetaPath, k: usize, trail: &mut Vec<u32>, out: &mut BTreeMap<u32, u128>) {
        // exclusive range ending here: its boundary nodes must differ
        for r in path.exclusive_segments() {
            if r.end == k && trail[r.start] == trail[k] {
                return;
            }
        }
        if k == path.len() {
            *out.entry(trail[k]).or_insert(0) += 1;
            return;
        }
        let side = path.nodes()[k].side;
        let next = self
            .neighbours(side, &path.steps()[k], trail[k])
            .expect("checked in path_counts");
        for &n in next {
            trail.push(n);
            self.walk(path, k + 1, trail, out);
            trail.pop();
        }
    }

    /// Instances of a closed path from `u` back to `u`.
    pub fn closed_count(&self, path: &MetaPath, u: u32) -> Result<u128> {
        Ok(self.path_counts(path, u)?.get(&u).copied().unwrap_or(0))
    }
}

/// Result of comparing the engine against the oracle.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OracleReport {
    pub paths_checked: usize,
    pub rows_checked: usize,
    /// Feature-table cells compared.
    pub cells_checked: usize,
    pub mismatches: Vec<String>,
}

impl OracleReport {
    pub fn all_match(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Compare engine and oracle on every similarity path of both networks, every
/// connector path and every recursive path of `catalog`, from every user.
pub fn check_catalog(
    source: &HeterogeneousNetwork,
    target: &HeterogeneousNetwork,
    anchors: &AnchorMap,
    catalog: &MetaPathCatalog,
) -> Result<OracleReport> {
    use crate::count::PathCounter;
    use crate::features::{ColumnKey, FeatureExtractor, Variant};

    let oracle = DfsOracle::new(source, target, anchors)?;
    let counter = PathCounter::new(source, target, anchors, "user")?;
    let n_source = source.node_count("user")? as u32;
    let n_target = target.node_count("user")? as u32;
    let mut report = OracleReport::default();

    let mut row_paths: Vec<(MetaPath, u32)> = Vec::new();
    for p in catalog.source_sims() {
        row_paths.push((p.clone(), n_source));
    }
    for p in catalog.target_sims() {
        row_paths.push((p.clone(), n_target));
    }
    for i in catalog.connector_indices() {
        row_paths.push((catalog.connector(i)?, n_source));
    }
    for (path, n) in &row_paths {
        let users: Vec<u32> = (0..*n).collect();
        let rows = counter.path_count_rows(path, &users)?;
        for (u, row) in users.iter().zip(rows) {
            let expect = oracle.path_counts(path, *u)?;
            let got: BTreeMap<u32, u128> = row.nonzeros().collect();
            if got != expect {
                report
                    .mismatches
                    .push(format!("{path} from {u}: engine {got:?}, oracle {expect:?}"));
            }
            report.rows_checked += 1;
        }
        report.paths_checked += 1;
    }

    let mut expected: HashMap<(ColumnKey, u32), u128> = HashMap::new();
    let idx = catalog.connector_indices();
    for &i in &idx {
        let psi = catalog.connector(i)?;
        for u in 0..n_source {
            let total = oracle.path_counts(&psi, u)?.values().sum();
            expected.insert((ColumnKey::Connector { i }, u), total);
        }
        for j in 1..=catalog.r() {
            for &k in &idx {
                let phi = catalog.recursive(i, j, k)?;
                let (left, right) = counter.prepare_closed(&phi)?;
                for u in 0..n_source {
                    let got = crate::count::closed_from(&left, &right, u)?;
                    let expect = oracle.closed_count(&phi, u)?;
                    if got != expect {
                        report
                            .mismatches
                            .push(format!("Φ({i},{j},{k}) at {u}: engine {got}, oracle {expect}"));
                    }
                    expected.insert((ColumnKey::Recursive { i, j, k }, u), expect);
                    report.rows_checked += 1;
                }
                report.paths_checked += 1;
            }
        }
    }

    // the batched per-user extractor behind feature tables
    if catalog.r() > 0 {
        let extractor = FeatureExtractor::new(&counter, catalog, Variant::Crmp)?;
        let keys = extractor.columns();
        for u in 0..n_source {
            for (key, got) in keys.iter().zip(extractor.user_counts(u)?) {
                let expect = expected[&(*key, u)];
                if got != expect {
                    report
                        .mismatches
                        .push(format!("feature {key:?} at {u}: extractor {got}, oracle {expect}"));
                }
                report.cells_checked += 1;
            }
        }
    }
    Ok(report)
}

/// A random network pair with at most 60 nodes in total, for cross-checks.
/// Self-follows and repeated word edges are allowed so the diagonal and
/// multiplicity code paths are exercised.
pub fn random_fixture(seed: u64) -> Result<Dataset> {
    use rand::Rng;

    let mut rng = crate::rng::stream(seed, crate::rng::Stage::Generator, 100);
    let mut nets = Vec::new();
    for prefix in ["s", "t"] {
        let mut b = NetworkBuilder::new(NetworkSchema::social());
        let users = rng.gen_range(4..=9u32);
        let posts = rng.gen_range(4..=9u32);
        let sizes = [
            ("user", users),
            ("post", posts),
            ("location", rng.gen_range(2..=3)),
            ("time", rng.gen_range(2..=3)),
            ("word", rng.gen_range(2..=4)),
        ];
        for (t, n) in sizes {
            for i in 0..n {
                b.add_node(t, format!("{prefix}{t}{i}"))?;
            }
        }
        let pick = |rng: &mut rand_chacha::ChaCha8Rng, t: &str| rng.gen_range(0..sizes.iter().find(|s| s.0 == t).unwrap().1);
        for _ in 0..rng.gen_range(users..=3 * users) {
            let (a, c) = (pick(&mut rng, "user"), pick(&mut rng, "user"));
            b.add_edge("follow", a, c)?;
        }
        for p in 0..posts {
            let u = pick(&mut rng, "user");
            b.add_edge("write", u, p)?;
            let l = pick(&mut rng, "location");
            b.add_edge("checkin_at", p, l)?;
            let d = pick(&mut rng, "time");
            b.add_edge("written_at", p, d)?;
            for _ in 0..rng.gen_range(1..=2) {
                let w = pick(&mut rng, "word");
                b.add_edge("contain", p, w)?;
            }
        }
        nets.push(b.build());
    }
    let target = nets.pop().unwrap();
    let source = nets.pop().unwrap();
    let n_s = source.node_count("user")?;
    let n_t = target.node_count("user")?;
    let m = rng.gen_range(1..=n_s.min(n_t));
    let src = rand::seq::index::sample(&mut rng, n_s, m);
    let tgt = rand::seq::index::sample(&mut rng, n_t, m);
    let pairs = src
        .iter()
        .zip(tgt.iter())
        .map(|(s, t)| AnchorPair {
            source: s as u32,
            target: t as u32,
            joined_target_after_source: rng.gen_bool(0.5),
        })
        .collect();
    Ok(Dataset {
        source,
        target,
        anchors: AnchorMap::new(pairs)?,
    })
}
