//! Typed heterogeneous graph store.
//!
//! A [`HeterogeneousNetwork`] holds one network: its [`NetworkSchema`], a dense
//! index space per node type (assigned in insertion order, so file order when
//! loaded from disk) and a sorted, duplicate-free edge list per link type.
//! Networks are immutable once built; per-relation CSR views are created lazily
//! and cached behind `OnceLock`, so a network can be shared across threads.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};

use rand::seq::index;

use crate::error::{Error, Result};
use crate::rng::{self, fraction_count};

/// Traversal direction of a relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Forward,
    Inverse,
}

impl Direction {
    pub fn flip(self) -> Self {
        match self {
            Direction::Forward => Direction::Inverse,
            Direction::Inverse => Direction::Forward,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LinkType {
    pub name: String,
    pub src: String,
    pub dst: String,
}

impl LinkType {
    /// Endpoint types as seen when traversing in `dir`.
    pub fn endpoints(&self, dir: Direction) -> (&str, &str) {
        match dir {
            Direction::Forward => (&self.src, &self.dst),
            Direction::Inverse => (&self.dst, &self.src),
        }
    }
}

/// Node and link types of one network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSchema {
    node_types: Vec<String>,
    link_types: Vec<LinkType>,
}

impl NetworkSchema {
    pub fn new(node_types: Vec<String>, link_types: Vec<LinkType>) -> Result<Self> {
        let mut seen = HashSet::new();
        for t in &node_types {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(Error::Schema(format!("invalid node type name `{t}`")));
            }
            if !seen.insert(t.as_str()) {
                return Err(Error::Schema(format!("duplicate node type `{t}`")));
            }
        }
        let mut seen_links = HashSet::new();
        for l in &link_types {
            if l.name.is_empty() || l.name.chars().any(|c| c.is_whitespace() || c == '^') {
                return Err(Error::Schema(format!("invalid link type name `{}`", l.name)));
            }
            if l.name == "anchor" {
                return Err(Error::Schema("`anchor` is reserved for the cross-network relation".into()));
            }
            if !seen_links.insert(l.name.as_str()) {
                return Err(Error::Schema(format!("duplicate link type `{}`", l.name)));
            }
            for end in [&l.src, &l.dst] {
                if !seen.contains(end.as_str()) {
                    return Err(Error::Schema(format!(
                        "link type `{}` references undeclared node type `{end}`",
                        l.name
                    )));
                }
            }
        }
        Ok(NetworkSchema {
            node_types,
            link_types,
        })
    }

    /// The general social-network schema: users follow users, write posts, and
    /// posts are checked in at locations, written at times and contain words.
    pub fn social() -> Self {
        let link = |name: &str, src: &str, dst: &str| LinkType {
            name: name.into(),
            src: src.into(),
            dst: dst.into(),
        };
        NetworkSchema::new(
            ["user", "post", "location", "time", "word"].map(String::from).to_vec(),
            vec![
                link("follow", "user", "user"),
                link("write", "user", "post"),
                link("checkin_at", "post", "location"),
                link("written_at", "post", "time"),
                link("contain", "post", "word"),
            ],
        )
        .expect("built-in schema is valid")
    }

    pub fn node_types(&self) -> &[String] {
        &self.node_types
    }

    pub fn link_types(&self) -> &[LinkType] {
        &self.link_types
    }

    pub fn node_type_index(&self, name: &str) -> Option<usize> {
        self.node_types.iter().position(|t| t == name)
    }

    pub fn link_type_index(&self, name: &str) -> Option<usize> {
        self.link_types.iter().position(|l| l.name == name)
    }

    pub fn link_type(&self, name: &str) -> Option<&LinkType> {
        self.link_types.iter().find(|l| l.name == name)
    }

    /// Parse the line-oriented schema format (`node <name>`, `link <name> <src> <dst>`,
    /// `#` comments).
    pub fn parse(text: &str, file: &Path) -> Result<Self> {
        let mut nodes = Vec::new();
        let mut links = Vec::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            match toks.as_slice() {
                ["node", name] => nodes.push((*name).to_string()),
                ["link", name, src, dst] => links.push(LinkType {
                    name: (*name).to_string(),
                    src: (*src).to_string(),
                    dst: (*dst).to_string(),
                }),
                _ => return Err(Error::parse(file, no + 1, format!("malformed schema line `{line}`"))),
            }
        }
        NetworkSchema::new(nodes, links).map_err(|e| Error::parse(file, 0, e.to_string()))
    }
}

impl fmt::Display for NetworkSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.node_types {
            writeln!(f, "node {t}")?;
        }
        for l in &self.link_types {
            writeln!(f, "link {} {} {}", l.name, l.src, l.dst)?;
        }
        Ok(())
    }
}

/// Sparse boolean matrix in compressed-row form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationMatrix {
    label: String,
    direction: Direction,
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
}

impl RelationMatrix {
    /// Build from (row, col) pairs; duplicates collapse.
    pub fn from_pairs(
        label: impl Into<String>,
        direction: Direction,
        nrows: usize,
        ncols: usize,
        pairs: impl IntoIterator<Item = (u32, u32)>,
    ) -> Result<Self> {
        let mut pairs: Vec<(u32, u32)> = pairs.into_iter().collect();
        for &(r, c) in &pairs {
            if r as usize >= nrows {
                return Err(Error::OutOfRange {
                    what: "row",
                    index: r as usize,
                    len: nrows,
                });
            }
            if c as usize >= ncols {
                return Err(Error::OutOfRange {
                    what: "column",
                    index: c as usize,
                    len: ncols,
                });
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        let mut indptr = vec![0usize; nrows + 1];
        for &(r, _) in &pairs {
            indptr[r as usize + 1] += 1;
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        Ok(RelationMatrix {
            label: label.into(),
            direction,
            nrows,
            ncols,
            indptr,
            indices: pairs.into_iter().map(|(_, c)| c).collect(),
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    /// Column indices of row `i`, ascending.
    #[inline]
    pub fn row(&self, i: usize) -> &[u32] {
        &self.indices[self.indptr[i]..self.indptr[i + 1]]
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        i < self.nrows && self.row(i).binary_search(&(j as u32)).is_ok()
    }

    pub fn transpose(&self) -> RelationMatrix {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.indices {
            counts[c as usize + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0u32; self.indices.len()];
        for i in 0..self.nrows {
            for &c in self.row(i) {
                indices[next[c as usize]] = i as u32;
                next[c as usize] += 1;
            }
        }
        RelationMatrix {
            label: self.label.clone(),
            direction: self.direction.flip(),
            nrows: self.ncols,
            ncols: self.nrows,
            indptr,
            indices,
        }
    }

    /// Nonzero (row, col) pairs in row-major order.
    pub fn pairs(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).iter().map(move |&c| (i as u32, c)))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct NodeSpace {
    ids: Vec<String>,
    index: HashMap<String, u32>,
}

/// One typed network. Immutable after construction.
#[derive(Debug, Clone)]
pub struct HeterogeneousNetwork {
    schema: NetworkSchema,
    nodes: Vec<NodeSpace>,
    edges: Vec<Vec<(u32, u32)>>,
    matrices: Vec<[OnceLock<Arc<RelationMatrix>>; 2]>,
}

impl PartialEq for HeterogeneousNetwork {
    fn eq(&self, other: &Self) -> bool {
        self.schema == other.schema && self.nodes == other.nodes && self.edges == other.edges
    }
}

impl HeterogeneousNetwork {
    fn from_parts(schema: NetworkSchema, nodes: Vec<NodeSpace>, mut edges: Vec<Vec<(u32, u32)>>) -> Self {
        for list in &mut edges {
            list.sort_unstable();
            list.dedup();
        }
        let matrices = (0..edges.len()).map(|_| [OnceLock::new(), OnceLock::new()]).collect();
        HeterogeneousNetwork {
            schema,
            nodes,
            edges,
            matrices,
        }
    }

    pub fn schema(&self) -> &NetworkSchema {
        &self.schema
    }

    fn type_idx(&self, node_type: &str) -> Result<usize> {
        self.schema
            .node_type_index(node_type)
            .ok_or_else(|| Error::Schema(format!("unknown node type `{node_type}`")))
    }

    fn link_idx(&self, link: &str) -> Result<usize> {
        self.schema
            .link_type_index(link)
            .ok_or_else(|| Error::UnknownLinkType(link.to_string()))
    }

    pub fn node_count(&self, node_type: &str) -> Result<usize> {
        Ok(self.nodes[self.type_idx(node_type)?].ids.len())
    }

    pub fn node_ids(&self, node_type: &str) -> Result<&[String]> {
        Ok(&self.nodes[self.type_idx(node_type)?].ids)
    }

    pub fn node_index(&self, node_type: &str, id: &str) -> Option<u32> {
        let t = self.schema.node_type_index(node_type)?;
        self.nodes[t].index.get(id).copied()
    }

    /// Sorted, duplicate-free (src, dst) pairs of a link type.
    pub fn edges(&self, link: &str) -> Result<&[(u32, u32)]> {
        Ok(&self.edges[self.link_idx(link)?])
    }

    pub fn edge_count(&self, link: &str) -> Result<usize> {
        Ok(self.edges(link)?.len())
    }

    pub fn total_edges(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    /// Sparse 0/1 view of one relation; `Inverse` is the transpose. Cached.
    pub fn relation_matrix(&self, link: &str, dir: Direction) -> Result<Arc<RelationMatrix>> {
        let li = self.link_idx(link)?;
        let slot = match dir {
            Direction::Forward => 0,
            Direction::Inverse => 1,
        };
        if let Some(m) = self.matrices[li][slot].get() {
            return Ok(Arc::clone(m));
        }
        let lt = &self.schema.link_types[li];
        let forward = match self.matrices[li][0].get() {
            Some(m) => Arc::clone(m),
            None => {
                let nrows = self.nodes[self.type_idx(&lt.src)?].ids.len();
                let ncols = self.nodes[self.type_idx(&lt.dst)?].ids.len();
                let m = Arc::new(RelationMatrix::from_pairs(
                    lt.name.clone(),
                    Direction::Forward,
                    nrows,
                    ncols,
                    self.edges[li].iter().copied(),
                )?);
                Arc::clone(self.matrices[li][0].get_or_init(|| m))
            }
        };
        Ok(match dir {
            Direction::Forward => forward,
            Direction::Inverse => {
                let inv = Arc::new(forward.transpose());
                Arc::clone(self.matrices[li][1].get_or_init(|| inv))
            }
        })
    }

    /// Copy of this network with a subset of each link type's edges.
    fn with_edges(&self, edges: Vec<Vec<(u32, u32)>>) -> Self {
        HeterogeneousNetwork::from_parts(self.schema.clone(), self.nodes.clone(), edges)
    }

    /// Per-type node counts and per-link edge counts, in schema order.
    pub fn stats(&self) -> NetworkStats {
        NetworkStats {
            nodes: self
                .schema
                .node_types
                .iter()
                .zip(&self.nodes)
                .map(|(t, s)| (t.clone(), s.ids.len()))
                .collect(),
            edges: self
                .schema
                .link_types
                .iter()
                .zip(&self.edges)
                .map(|(l, e)| (l.name.clone(), e.len()))
                .collect(),
        }
    }

    /// Mark `nodes` of `node_type` as removed, cascade along `cascade_links`, and
    /// drop every edge incident to a removed node. Node slots are kept (isolated)
    /// so index spaces do not shift.
    pub fn remove_nodes(&self, node_type: &str, nodes: &[u32], cascade_links: &[&str]) -> Result<Self> {
        let t = self.type_idx(node_type)?;
        let mut removed: Vec<HashSet<u32>> = vec![HashSet::new(); self.nodes.len()];
        for &n in nodes {
            if n as usize >= self.nodes[t].ids.len() {
                return Err(Error::OutOfRange {
                    what: "node",
                    index: n as usize,
                    len: self.nodes[t].ids.len(),
                });
            }
            removed[t].insert(n);
        }
        self.cascade(&mut removed, cascade_links, None)?;
        Ok(self.with_edges(self.drop_incident(&self.edges, &removed)))
    }

    /// Propagate removal along cascade links: a destination node is removed once
    /// all of its inbound cascade-link edges come from removed sources. When
    /// `after` is given, nodes that lost their last inbound edge between `self`
    /// and `after` are also removed.
    fn cascade(
        &self,
        removed: &mut [HashSet<u32>],
        cascade_links: &[&str],
        after: Option<&[Vec<(u32, u32)>]>,
    ) -> Result<()> {
        let links: Vec<usize> = cascade_links.iter().map(|l| self.link_idx(l)).collect::<Result<_>>()?;
        loop {
            let mut changed = false;
            for &li in &links {
                let lt = &self.schema.link_types[li];
                let (st, dt) = (self.type_idx(&lt.src)?, self.type_idx(&lt.dst)?);
                let edges = after.map_or(&self.edges[li], |a| &a[li]);
                let mut live_inbound: HashMap<u32, usize> = HashMap::new();
                for &(s, d) in edges {
                    if !removed[st].contains(&s) {
                        *live_inbound.entry(d).or_default() += 1;
                    }
                }
                for &(_, d) in &self.edges[li] {
                    if !live_inbound.contains_key(&d) && removed[dt].insert(d) {
                        changed = true;
                    }
                }
            }
            if !changed {
                return Ok(());
            }
        }
    }

    fn drop_incident(&self, edges: &[Vec<(u32, u32)>], removed: &[HashSet<u32>]) -> Vec<Vec<(u32, u32)>> {
        self.schema
            .link_types
            .iter()
            .zip(edges)
            .map(|(lt, list)| {
                let st = self.schema.node_type_index(&lt.src).unwrap();
                let dt = self.schema.node_type_index(&lt.dst).unwrap();
                list.iter()
                    .copied()
                    .filter(|(s, d)| !removed[st].contains(s) && !removed[dt].contains(d))
                    .collect()
            })
            .collect()
    }
}

/// Node/edge counts of one network.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct NetworkStats {
    pub nodes: Vec<(String, usize)>,
    pub edges: Vec<(String, usize)>,
}

impl fmt::Display for NetworkStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (t, n) in &self.nodes {
            writeln!(f, "node\t{t}\t{n}")?;
        }
        for (l, m) in &self.edges {
            writeln!(f, "link\t{l}\t{m}")?;
        }
        Ok(())
    }
}

/// Incremental construction of a [`HeterogeneousNetwork`].
#[derive(Debug, Clone)]
pub struct NetworkBuilder {
    schema: NetworkSchema,
    nodes: Vec<NodeSpace>,
    edges: Vec<Vec<(u32, u32)>>,
}

impl NetworkBuilder {
    pub fn new(schema: NetworkSchema) -> Self {
        let nodes = vec![NodeSpace::default(); schema.node_types.len()];
        let edges = vec![Vec::new(); schema.link_types.len()];
        NetworkBuilder { schema, nodes, edges }
    }

    pub fn schema(&self) -> &NetworkSchema {
        &self.schema
    }

    /// Declare a node; returns its dense index. Duplicate IDs are rejected.
    pub fn add_node(&mut self, node_type: &str, id: impl Into<String>) -> Result<u32> {
        let t = self
            .schema
            .node_type_index(node_type)
            .ok_or_else(|| Error::Schema(format!("unknown node type `{node_type}`")))?;
        let id = id.into();
        let space = &mut self.nodes[t];
        if space.index.contains_key(&id) {
            return Err(Error::Schema(format!("duplicate {node_type} id `{id}`")));
        }
        let idx = space.ids.len() as u32;
        space.index.insert(id.clone(), idx);
        space.ids.push(id);
        Ok(idx)
    }

    pub fn node_count(&self, node_type: &str) -> usize {
        self.schema
            .node_type_index(node_type)
            .map_or(0, |t| self.nodes[t].ids.len())
    }

    pub fn node_index(&self, node_type: &str, id: &str) -> Option<u32> {
        let t = self.schema.node_type_index(node_type)?;
        self.nodes[t].index.get(id).copied()
    }

    /// Add an edge between existing node indices.
    pub fn add_edge(&mut self, link: &str, src: u32, dst: u32) -> Result<()> {
        let li = self
            .schema
            .link_type_index(link)
            .ok_or_else(|| Error::UnknownLinkType(link.to_string()))?;
        let lt = &self.schema.link_types[li];
        for (end, idx) in [(&lt.src, src), (&lt.dst, dst)] {
            let n = self.nodes[self.schema.node_type_index(end).unwrap()].ids.len();
            if idx as usize >= n {
                return Err(Error::Schema(format!(
                    "`{link}` edge endpoint {idx} is not a declared {end} node ({n} declared)"
                )));
            }
        }
        self.edges[li].push((src, dst));
        Ok(())
    }

    /// Add an edge between external IDs.
    pub fn add_edge_by_id(&mut self, link: &str, src: &str, dst: &str) -> Result<()> {
        let lt = self
            .schema
            .link_type(link)
            .ok_or_else(|| Error::UnknownLinkType(link.to_string()))?
            .clone();
        let s = self
            .node_index(&lt.src, src)
            .ok_or_else(|| Error::Schema(format!("`{link}` source `{src}` is not a declared {} node", lt.src)))?;
        let d = self
            .node_index(&lt.dst, dst)
            .ok_or_else(|| Error::Schema(format!("`{link}` target `{dst}` is not a declared {} node", lt.dst)))?;
        self.add_edge(link, s, d)
    }

    pub fn build(self) -> HeterogeneousNetwork {
        HeterogeneousNetwork::from_parts(self.schema, self.nodes, self.edges)
    }
}

/// Ingestion options.
#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Keep at most this many edges per link type (first lines of each file).
    /// Off by default; meant for desk-scale runs over very large post tables.
    pub max_edges_per_link: Option<usize>,
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    BufReader::new(f)
        .lines()
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| Error::io(path, e))
}

/// Load a network from a schema file plus one node file per node type and one
/// edge file per link type. Types without a file have no nodes/edges.
pub fn load_network(
    schema_file: &Path,
    node_files: &[(String, PathBuf)],
    edge_files: &[(String, PathBuf)],
    opts: LoadOptions,
) -> Result<HeterogeneousNetwork> {
    let text = fs::read_to_string(schema_file).map_err(|e| Error::io(schema_file, e))?;
    let schema = NetworkSchema::parse(&text, schema_file)?;
    let mut b = NetworkBuilder::new(schema);

    for (node_type, path) in node_files {
        if b.schema().node_type_index(node_type).is_none() {
            return Err(Error::Schema(format!(
                "{}: node type `{node_type}` is not in the schema",
                path.display()
            )));
        }
        for (no, raw) in read_lines(path)?.iter().enumerate() {
            let id = raw.trim_end_matches('\r');
            if id.trim().is_empty() {
                continue;
            }
            if id.contains('\t') {
                return Err(Error::parse(path, no + 1, "node id contains a tab"));
            }
            b.add_node(node_type, id).map_err(|e| Error::parse(path, no + 1, e.to_string()))?;
        }
    }

    for (link, path) in edge_files {
        if b.schema().link_type(link).is_none() {
            return Err(Error::Schema(format!(
                "{}: link type `{link}` is not in the schema",
                path.display()
            )));
        }
        let mut kept = 0usize;
        for (no, raw) in read_lines(path)?.iter().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            if opts.max_edges_per_link.is_some_and(|cap| kept >= cap) {
                break;
            }
            let mut fields = line.split('\t');
            let (Some(src), Some(dst), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(Error::parse(path, no + 1, "expected `<src_id>\\t<dst_id>`"));
            };
            b.add_edge_by_id(link, src, dst)
                .map_err(|e| Error::parse(path, no + 1, e.to_string()))?;
            kept += 1;
        }
    }
    Ok(b.build())
}

/// Load a network stored in the directory layout written by [`write_network_dir`]:
/// `schema.txt`, `nodes/<type>.txt`, `edges/<link>.tsv`.
pub fn load_network_dir(dir: &Path, opts: LoadOptions) -> Result<HeterogeneousNetwork> {
    let schema_file = dir.join("schema.txt");
    let text = fs::read_to_string(&schema_file).map_err(|e| Error::io(&schema_file, e))?;
    let schema = NetworkSchema::parse(&text, &schema_file)?;
    let node_files: Vec<(String, PathBuf)> = schema
        .node_types()
        .iter()
        .map(|t| (t.clone(), dir.join("nodes").join(format!("{t}.txt"))))
        .filter(|(_, p)| p.exists())
        .collect();
    let edge_files: Vec<(String, PathBuf)> = schema
        .link_types()
        .iter()
        .map(|l| (l.name.clone(), dir.join("edges").join(format!("{}.tsv", l.name))))
        .filter(|(_, p)| p.exists())
        .collect();
    load_network(&schema_file, &node_files, &edge_files, opts)
}

/// Write a network in the directory layout read by [`load_network_dir`].
pub fn write_network_dir(net: &HeterogeneousNetwork, dir: &Path) -> Result<()> {
    let mk = |p: &Path| fs::create_dir_all(p).map_err(|e| Error::io(p, e));
    mk(&dir.join("nodes"))?;
    mk(&dir.join("edges"))?;
    write_file(&dir.join("schema.txt"), |w| write!(w, "{}", net.schema))?;
    for (t, space) in net.schema.node_types.iter().zip(&net.nodes) {
        write_file(&dir.join("nodes").join(format!("{t}.txt")), |w| {
            for id in &space.ids {
                writeln!(w, "{id}")?;
            }
            Ok(())
        })?;
    }
    for (lt, list) in net.schema.link_types.iter().zip(&net.edges) {
        let src = &net.nodes[net.schema.node_type_index(&lt.src).unwrap()].ids;
        let dst = &net.nodes[net.schema.node_type_index(&lt.dst).unwrap()].ids;
        write_file(&dir.join("edges").join(format!("{}.tsv", lt.name)), |w| {
            for &(s, d) in list {
                writeln!(w, "{}\t{}", src[s as usize], dst[d as usize])?;
            }
            Ok(())
        })?;
    }
    Ok(())
}

pub(crate) fn write_file(
    path: &Path,
    body: impl FnOnce(&mut std::io::BufWriter<fs::File>) -> std::io::Result<()>,
) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(f);
    body(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

/// Which relations to thin when modelling a young target network.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsamplePlan {
    pub fraction: f64,
    /// Link types whose edges are sampled.
    pub links: Vec<String>,
    /// Link types whose destination nodes disappear with their last inbound edge
    /// (a post without its `write` edge loses its content edges).
    pub cascade_links: Vec<String>,
}

impl SubsamplePlan {
    /// Keep `fraction` of social links and tips: samples `follow` and `write`,
    /// cascading through `write`.
    pub fn target_newness(fraction: f64) -> Self {
        SubsamplePlan {
            fraction,
            links: vec!["follow".into(), "write".into()],
            cascade_links: vec!["write".into()],
        }
    }
}

/// Keep `ceil(fraction * m)` uniformly sampled edges of each planned link type.
/// Nodes are untouched. Deterministic under `seed`.
pub fn subsample_network(net: &HeterogeneousNetwork, plan: &SubsamplePlan, seed: u64) -> Result<HeterogeneousNetwork> {
    if !(0.0..=1.0).contains(&plan.fraction) {
        return Err(Error::InvalidArgument(format!(
            "subsample fraction {} outside [0, 1]",
            plan.fraction
        )));
    }
    let mut targeted = Vec::with_capacity(plan.links.len());
    for l in &plan.links {
        targeted.push(net.link_idx(l)?);
    }
    let mut edges = net.edges.clone();
    for (li, list) in edges.iter_mut().enumerate() {
        if !targeted.contains(&li) {
            continue;
        }
        let k = fraction_count(plan.fraction, list.len());
        if k == list.len() {
            continue;
        }
        let mut rng = rng::stream(seed, rng::Stage::TargetSubsample, li as u64);
        let mut keep = index::sample(&mut rng, list.len(), k).into_vec();
        keep.sort_unstable();
        *list = keep.into_iter().map(|i| list[i]).collect();
    }
    let mut removed: Vec<HashSet<u32>> = vec![HashSet::new(); net.nodes.len()];
    let cascade: Vec<&str> = plan.cascade_links.iter().map(String::as_str).collect();
    net.cascade(&mut removed, &cascade, Some(&edges))?;
    // Only orphaned nodes are removed here: those that had inbound cascade edges
    // before sampling and none after.
    Ok(net.with_edges(net.drop_incident(&edges, &removed)))
}
