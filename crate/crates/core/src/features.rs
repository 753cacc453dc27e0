//! Per-user feature tables built from connector and recursive path counts.
//!
//! A connector feature is the total number of connector-path instances leaving
//! a user (summed over all target users). A recursive feature is the number of
//! recursive-path cycles returning to the user.
//!
//! Recursive counts are computed in one batch per user. With `x_i` the connector
//! row of Ψ_i (a vector over target users) and σ^t_j split into a head `H_j` and
//! the inverse of its tail `K_j`,
//!
//! ```text
//! Φ_{i,j,k}(u) = Σ_m (x_i·H_j)[m] (x_k·K_j)[m]  −  Σ_v x_i[v] x_k[v] diag_j[v]
//! ```
//!
//! where the second term removes the target-side self pairs when similarity
//! diagonals are excluded. Only rows of `H_j`/`K_j` at anchored target users
//! are ever needed, since every `x_i` is supported on them.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::count::{CountRow, PathCounter, PreparedPath};
use crate::error::{Error, Result};
use crate::hetgraph::write_file;
use crate::metapath::{MetaPathCatalog, Side};

/// Saturation cap for exported feature values.
pub const COUNT_CAP: u64 = i64::MAX as u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Variant {
    /// Connector features only.
    Cmp,
    /// Recursive features only.
    Rmp,
    /// Both.
    Crmp,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Cmp, Variant::Rmp, Variant::Crmp];

    pub fn uses_connector(self) -> bool {
        matches!(self, Variant::Cmp | Variant::Crmp)
    }

    pub fn uses_recursive(self) -> bool {
        matches!(self, Variant::Rmp | Variant::Crmp)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Cmp => "CMP",
            Variant::Rmp => "RMP",
            Variant::Crmp => "CRMP",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cmp" => Ok(Variant::Cmp),
            "rmp" => Ok(Variant::Rmp),
            "crmp" => Ok(Variant::Crmp),
            _ => Err(Error::InvalidArgument(format!("unknown variant `{s}` (cmp|rmp|crmp)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSet {
    /// Social similarity paths σ1–σ6.
    Homogeneous,
    /// All nine similarity paths.
    Heterogeneous,
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureSet::Homogeneous => "homogeneous",
            FeatureSet::Heterogeneous => "heterogeneous",
        })
    }
}

impl FromStr for FeatureSet {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "homogeneous" | "hom" => Ok(FeatureSet::Homogeneous),
            "heterogeneous" | "het" => Ok(FeatureSet::Heterogeneous),
            _ => Err(Error::InvalidArgument(format!(
                "unknown feature set `{s}` (homogeneous|heterogeneous)"
            ))),
        }
    }
}

/// Which columns a table carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub variant: Variant,
    pub feature_set: FeatureSet,
    /// Use every source similarity path in Ψ/Φ (with) or only σ1 (without).
    pub similarity_extension: bool,
    /// Zero similarity-path diagonals before composing.
    pub exclude_self: bool,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        FeatureSpec {
            variant: Variant::Crmp,
            feature_set: FeatureSet::Heterogeneous,
            similarity_extension: true,
            exclude_self: true,
        }
    }
}

impl FeatureSpec {
    pub fn catalog(&self) -> MetaPathCatalog {
        let cat = match self.feature_set {
            FeatureSet::Homogeneous => MetaPathCatalog::homogeneous(),
            FeatureSet::Heterogeneous => MetaPathCatalog::heterogeneous(),
        }
        .with_exclude_self(self.exclude_self);
        if self.similarity_extension {
            cat
        } else {
            cat.without_similarity_extension()
        }
    }

    pub fn columns(&self) -> Vec<ColumnKey> {
        column_keys(&self.catalog(), self.variant)
    }
}

/// Identity of one feature column. Orders by kind, then (i, j, k).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ColumnKey {
    Connector { i: usize },
    Recursive { i: usize, j: usize, k: usize },
}

fn column_keys(catalog: &MetaPathCatalog, variant: Variant) -> Vec<ColumnKey> {
    let idx = catalog.connector_indices();
    let mut keys = Vec::new();
    if variant.uses_connector() {
        keys.extend(idx.iter().map(|&i| ColumnKey::Connector { i }));
    }
    if variant.uses_recursive() {
        for &i in &idx {
            for j in 1..=catalog.r() {
                for &k in &idx {
                    keys.push(ColumnKey::Recursive { i, j, k });
                }
            }
        }
    }
    keys
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub key: Option<ColumnKey>,
    pub name: String,
}

/// Raw path-count features, one row per user, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureTable {
    pub spec: Option<FeatureSpec>,
    pub columns: Vec<Column>,
    pub user_ids: Vec<String>,
    pub users: Vec<u32>,
    pub labels: Vec<bool>,
    values: Vec<u64>,
    /// Per column, how many cells hit [`COUNT_CAP`].
    pub saturated: Vec<u64>,
}

impl FeatureTable {
    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn row(&self, r: usize) -> &[u64] {
        let n = self.n_cols();
        &self.values[r * n..(r + 1) * n]
    }

    pub fn get(&self, r: usize, c: usize) -> u64 {
        self.values[r * self.n_cols() + c]
    }

    pub fn column_index(&self, key: ColumnKey) -> Option<usize> {
        self.columns.iter().position(|c| c.key == Some(key))
    }

    /// Rows as `f64` vectors.
    pub fn to_f64_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n_rows())
            .map(|r| self.row(r).iter().map(|&v| v as f64).collect())
            .collect()
    }

    /// Sub-table carrying exactly the columns of `spec`, in its order.
    pub fn project(&self, spec: &FeatureSpec) -> Result<FeatureTable> {
        if let Some(own) = self.spec {
            if own.exclude_self != spec.exclude_self {
                return Err(Error::InvalidArgument(
                    "cannot project across different self-pair settings".into(),
                ));
            }
        }
        let picks = spec
            .columns()
            .into_iter()
            .map(|k| {
                self.column_index(k)
                    .ok_or_else(|| Error::InvalidArgument(format!("column {k:?} not in table")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut values = Vec::with_capacity(picks.len() * self.n_rows());
        for r in 0..self.n_rows() {
            let row = self.row(r);
            values.extend(picks.iter().map(|&c| row[c]));
        }
        Ok(FeatureTable {
            spec: Some(*spec),
            columns: picks.iter().map(|&c| self.columns[c].clone()).collect(),
            user_ids: self.user_ids.clone(),
            users: self.users.clone(),
            labels: self.labels.clone(),
            values,
            saturated: picks.iter().map(|&c| self.saturated[c]).collect(),
        })
    }

    /// Replace labels by user id; every row must be covered.
    pub fn relabel(&mut self, labels: &std::collections::HashMap<String, bool>) -> Result<()> {
        for (i, id) in self.user_ids.iter().enumerate() {
            self.labels[i] = *labels
                .get(id)
                .ok_or_else(|| Error::InvalidArgument(format!("no label for user `{id}`")))?;
        }
        Ok(())
    }

    /// `user_id \t label \t v1 ... vN` with a header of printed meta-paths.
    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        write_file(path, |w| {
            write!(w, "user_id\tlabel")?;
            for c in &self.columns {
                write!(w, "\t{}", c.name)?;
            }
            writeln!(w)?;
            for r in 0..self.n_rows() {
                write!(w, "{}\t{}", self.user_ids[r], u8::from(self.labels[r]))?;
                for v in self.row(r) {
                    write!(w, "\t{v}")?;
                }
                writeln!(w)?;
            }
            Ok(())
        })
    }

    /// Read a table written by [`write_tsv`](Self::write_tsv). Column keys are
    /// recovered when the names match the built-in catalog.
    pub fn read_tsv(path: &Path) -> Result<FeatureTable> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::parse(path, 1, "empty feature table"))?;
        let head: Vec<&str> = header.split('\t').collect();
        if head.len() < 2 || head[0] != "user_id" || head[1] != "label" {
            return Err(Error::parse(path, 1, "header must start with `user_id\\tlabel`"));
        }
        let known = known_column_names();
        let columns: Vec<Column> = head[2..]
            .iter()
            .map(|n| Column {
                key: known.get(*n).copied(),
                name: (*n).to_string(),
            })
            .collect();
        let ncols = columns.len();
        let (mut user_ids, mut labels, mut values) = (Vec::new(), Vec::new(), Vec::new());
        for (no, line) in lines {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != ncols + 2 {
                return Err(Error::parse(
                    path,
                    no + 1,
                    format!("expected {} fields, found {}", ncols + 2, f.len()),
                ));
            }
            user_ids.push(f[0].to_string());
            labels.push(match f[1] {
                "1" => true,
                "0" => false,
                other => return Err(Error::parse(path, no + 1, format!("label must be 0 or 1, got `{other}`"))),
            });
            for v in &f[2..] {
                values.push(
                    v.parse::<u64>()
                        .map_err(|_| Error::parse(path, no + 1, format!("bad count `{v}`")))?,
                );
            }
        }
        Ok(FeatureTable {
            spec: None,
            columns,
            users: (0..user_ids.len() as u32).collect(),
            user_ids,
            labels,
            values,
            saturated: vec![0; ncols],
        })
    }
}

fn known_column_names() -> std::collections::HashMap<String, ColumnKey> {
    let mut out = std::collections::HashMap::new();
    for excl in [true, false] {
        let spec = FeatureSpec {
            exclude_self: excl,
            ..FeatureSpec::default()
        };
        let cat = spec.catalog();
        for key in spec.columns() {
            out.insert(column_name(&cat, key).unwrap(), key);
        }
    }
    out
}

fn column_name(catalog: &MetaPathCatalog, key: ColumnKey) -> Result<String> {
    Ok(match key {
        ColumnKey::Connector { i } => catalog.connector(i)?.to_string(),
        ColumnKey::Recursive { i, j, k } => catalog.recursive(i, j, k)?.to_string(),
    })
}

/// `f_Ψ(u)`: total instances of connector path `psi` leaving `u`.
pub fn connector_feature(counter: &PathCounter, psi: &crate::metapath::MetaPath, u: u32) -> Result<u128> {
    if psi.end().side != Side::Target {
        return Err(Error::MetaPath(format!("connector path `{psi}` must end in the target network")));
    }
    Ok(counter.path_count_rows(psi, &[u])?[0].sum())
}

struct TargetSimilarity {
    head: Vec<CountRow>,
    // None when the inverted tail equals the head (palindromic σ^t_j)
    tail: Option<Vec<CountRow>>,
    mid_dim: usize,
    diag: Option<std::sync::Arc<Vec<u128>>>,
}

/// Computes the connector and recursive counts of a catalog for single users.
pub struct FeatureExtractor<'c, 'n> {
    counter: &'c PathCounter<'n>,
    catalog: MetaPathCatalog,
    variant: Variant,
    connectors: Vec<(usize, PreparedPath)>,
    targets: Vec<TargetSimilarity>,
}

impl<'c, 'n> FeatureExtractor<'c, 'n> {
    pub fn new(counter: &'c PathCounter<'n>, catalog: &MetaPathCatalog, variant: Variant) -> Result<Self> {
        if catalog.c() == 0 {
            return Err(Error::InvalidArgument("catalog has no source similarity paths".into()));
        }
        if variant.uses_recursive() && catalog.r() == 0 {
            return Err(Error::InvalidArgument(format!(
                "{variant} needs target similarity paths but the catalog has none"
            )));
        }
        let connectors = catalog
            .connector_indices()
            .into_iter()
            .map(|i| Ok((i, counter.prepare(&catalog.connector(i)?)?)))
            .collect::<Result<Vec<_>>>()?;

        let mut targets = Vec::new();
        if variant.uses_recursive() {
            let n_target = counter.network(Side::Target).node_count("user")?;
            let mut anchored = vec![false; n_target];
            let probe = counter.prepare(&catalog.alpha())?;
            for u in 0..probe.start_dim() as u32 {
                for (v, _) in probe.row(u)?.nonzeros() {
                    anchored[v as usize] = true;
                }
            }
            for sim in catalog.target_sims() {
                let at = sim.len().div_ceil(2);
                let (head, tail) = sim.split_at(at)?;
                let head = counter.prepare(&head)?;
                let mid_dim = counter.dim(head.path().end())?;
                let rows = |p: &PreparedPath| -> Result<Vec<CountRow>> {
                    (0..n_target as u32)
                        .into_par_iter()
                        .map(|v| {
                            if anchored[v as usize] {
                                p.row(v)
                            } else {
                                Ok(CountRow::zeros(mid_dim))
                            }
                        })
                        .collect()
                };
                let head_rows = rows(&head)?;
                let tail = tail.invert();
                let tail_rows = if tail == *head.path() {
                    None
                } else {
                    Some(rows(&counter.prepare(&tail)?)?)
                };
                let diag = if catalog.exclude_self {
                    Some(counter.diagonal(sim)?)
                } else {
                    None
                };
                targets.push(TargetSimilarity {
                    head: head_rows,
                    tail: tail_rows,
                    mid_dim,
                    diag,
                });
            }
        }
        Ok(FeatureExtractor {
            counter,
            catalog: catalog.clone(),
            variant,
            connectors,
            targets,
        })
    }

    pub fn columns(&self) -> Vec<ColumnKey> {
        column_keys(&self.catalog, self.variant)
    }

    pub fn counter(&self) -> &PathCounter<'n> {
        self.counter
    }

    /// All counts for user `u`, in [`columns`](Self::columns) order.
    pub fn user_counts(&self, u: u32) -> Result<Vec<u128>> {
        let mut scratch = Scratch::default();
        self.user_counts_with(u, &mut scratch)
    }

    fn user_counts_with(&self, u: u32, scratch: &mut Scratch) -> Result<Vec<u128>> {
        let xs: Vec<CountRow> = self
            .connectors
            .iter()
            .map(|(_, p)| p.row(u))
            .collect::<Result<_>>()?;
        let mut out = Vec::new();
        if self.variant.uses_connector() {
            out.extend(xs.iter().map(CountRow::sum));
        }
        if self.variant.uses_recursive() {
            let n = xs.len();
            let r = self.targets.len();
            let mut phi = vec![0u128; n * r * n];
            for (j, sim) in self.targets.iter().enumerate() {
                let gram = scratch.gram(&xs, sim);
                for a in 0..n {
                    for b in 0..n {
                        phi[(a * r + j) * n + b] = gram[a * n + b];
                    }
                }
                if let Some(diag) = &sim.diag {
                    for a in 0..n {
                        for b in 0..n {
                            let self_pairs = xs[a].nonzeros().fold(0u128, |acc, (v, c)| {
                                let d = diag[v as usize];
                                if d == 0 {
                                    acc
                                } else {
                                    acc.saturating_add(c.saturating_mul(xs[b].get(v as usize)).saturating_mul(d))
                                }
                            });
                            let cell = &mut phi[(a * r + j) * n + b];
                            *cell = cell.saturating_sub(self_pairs);
                        }
                    }
                }
            }
            out.extend(phi);
        }
        Ok(out)
    }
}

/// Per-worker buffers for the Gram step.
#[derive(Default)]
struct Scratch {
    head: Vec<Vec<u128>>,
    tail: Vec<Vec<u128>>,
    touched: Vec<u32>,
    mark: Vec<bool>,
}

impl Scratch {
    fn fit(bufs: &mut Vec<Vec<u128>>, n: usize, dim: usize) {
        bufs.resize_with(n, Vec::new);
        for b in bufs.iter_mut() {
            if b.len() < dim {
                b.resize(dim, 0);
            }
        }
    }

    /// Gram matrix `G[a][b] = Σ_m (x_a·H)[m] (x_b·K)[m]`, row-major `n × n`.
    fn gram(&mut self, xs: &[CountRow], sim: &TargetSimilarity) -> Vec<u128> {
        let n = xs.len();
        let dim = sim.mid_dim;
        Self::fit(&mut self.head, n, dim);
        if sim.tail.is_some() {
            Self::fit(&mut self.tail, n, dim);
        }
        if self.mark.len() < dim {
            self.mark.resize(dim, false);
        }
        self.touched.clear();

        let spread = |bufs: &mut Vec<Vec<u128>>, rows: &[CountRow], touched: &mut Vec<u32>, mark: &mut [bool]| {
            for (a, x) in xs.iter().enumerate() {
                let buf = &mut bufs[a];
                for (v, c) in x.nonzeros() {
                    for (m, h) in rows[v as usize].nonzeros() {
                        let slot = &mut buf[m as usize];
                        *slot = slot.saturating_add(c.saturating_mul(h));
                        if !mark[m as usize] {
                            mark[m as usize] = true;
                            touched.push(m);
                        }
                    }
                }
            }
        };
        spread(&mut self.head, &sim.head, &mut self.touched, &mut self.mark);
        if let Some(tail) = &sim.tail {
            spread(&mut self.tail, tail, &mut self.touched, &mut self.mark);
        }

        let mut g = vec![0u128; n * n];
        let tail_bufs = if sim.tail.is_some() { &self.tail } else { &self.head };
        for &m in &self.touched {
            let m = m as usize;
            for a in 0..n {
                let za = self.head[a][m];
                if za == 0 {
                    continue;
                }
                for b in 0..n {
                    let wb = tail_bufs[b][m];
                    if wb != 0 {
                        g[a * n + b] = g[a * n + b].saturating_add(za.saturating_mul(wb));
                    }
                }
            }
        }
        for &m in &self.touched {
            self.mark[m as usize] = false;
            for b in self.head.iter_mut() {
                b[m as usize] = 0;
            }
            if sim.tail.is_some() {
                for b in self.tail.iter_mut() {
                    b[m as usize] = 0;
                }
            }
        }
        g
    }
}

/// Build a table for `users` with the given `labels` under `spec`.
pub fn build_feature_table(
    counter: &PathCounter,
    users: &[u32],
    labels: &[bool],
    spec: &FeatureSpec,
) -> Result<FeatureTable> {
    let mut table = build_with_catalog(counter, users, labels, &spec.catalog(), spec.variant)?;
    table.spec = Some(*spec);
    Ok(table)
}

/// Build a table from an arbitrary catalog.
pub fn build_with_catalog(
    counter: &PathCounter,
    users: &[u32],
    labels: &[bool],
    catalog: &MetaPathCatalog,
    variant: Variant,
) -> Result<FeatureTable> {
    if users.is_empty() {
        return Err(Error::InvalidArgument("no users to featurize".into()));
    }
    if users.len() != labels.len() {
        return Err(Error::Dimension {
            expected: users.len(),
            got: labels.len(),
        });
    }
    let extractor = FeatureExtractor::new(counter, catalog, variant)?;
    let keys = extractor.columns();
    let rows: Vec<Vec<u128>> = users
        .par_iter()
        .map_init(Scratch::default, |scratch, &u| extractor.user_counts_with(u, scratch))
        .collect::<Result<_>>()?;

    let ncols = keys.len();
    let mut saturated = vec![0u64; ncols];
    let mut values = Vec::with_capacity(users.len() * ncols);
    for row in &rows {
        for (c, &v) in row.iter().enumerate() {
            if v >= COUNT_CAP as u128 {
                saturated[c] += 1;
                values.push(COUNT_CAP);
            } else {
                values.push(v as u64);
            }
        }
    }
    let total: u64 = saturated.iter().sum();
    if total > 0 {
        log::warn!("{total} feature cells saturated at {COUNT_CAP}");
    }
    let ids = counter.network(Side::Source).node_ids("user")?;
    Ok(FeatureTable {
        spec: None,
        columns: keys
            .iter()
            .map(|&k| {
                Ok(Column {
                    key: Some(k),
                    name: column_name(catalog, k)?,
                })
            })
            .collect::<Result<_>>()?,
        user_ids: users.iter().map(|&u| ids[u as usize].clone()).collect(),
        users: users.to_vec(),
        labels: labels.to_vec(),
        values,
        saturated,
    })
}
