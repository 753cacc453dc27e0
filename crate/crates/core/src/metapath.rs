//! Meta-path algebra over the joint schema of a source and a target network.
//!
//! A [`MetaPath`] is a sequence of typed relation steps with the node type at
//! every position. Steps either follow a link type of one network (forward or
//! inverse) or cross between the networks over the undirected anchor relation.
//!
//! Some step ranges may be marked *exclusive*: instances whose node at the start
//! of the range equals the node at its end are not counted. Similarity paths are
//! wrapped this way when they are composed into connector and recursive paths,
//! which amounts to zeroing the diagonal of their path-count matrix.
//!
//! String form: node tokens are `type` (source) or `type@t` (target); steps are
//! `-name->`, `-name^-1->` and `-anchor-`. An exclusive range is bracketed on its
//! first and last step token, e.g. `user [-follow-> user -follow^-1->] user`.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::hetgraph::{Direction, NetworkSchema};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Source,
    Target,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Source => Side::Target,
            Side::Target => Side::Source,
        }
    }
}

/// A node type located in one of the two networks.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Endpoint {
    pub side: Side,
    pub node_type: String,
}

impl Endpoint {
    pub fn new(side: Side, node_type: impl Into<String>) -> Self {
        Endpoint {
            side,
            node_type: node_type.into(),
        }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.side {
            Side::Source => write!(f, "{}", self.node_type),
            Side::Target => write!(f, "{}@t", self.node_type),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Step {
    Relation { link: String, direction: Direction },
    /// Cross-network anchor hop; undirected.
    Anchor,
}

impl Step {
    pub fn forward(link: impl Into<String>) -> Self {
        Step::Relation {
            link: link.into(),
            direction: Direction::Forward,
        }
    }

    pub fn inverse(link: impl Into<String>) -> Self {
        Step::Relation {
            link: link.into(),
            direction: Direction::Inverse,
        }
    }

    pub fn flipped(&self) -> Step {
        match self {
            Step::Relation { link, direction } => Step::Relation {
                link: link.clone(),
                direction: direction.flip(),
            },
            Step::Anchor => Step::Anchor,
        }
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Step::Relation {
                link,
                direction: Direction::Forward,
            } => write!(f, "-{link}->"),
            Step::Relation {
                link,
                direction: Direction::Inverse,
            } => write!(f, "-{link}^-1->"),
            Step::Anchor => write!(f, "-anchor-"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MetaPath {
    nodes: Vec<Endpoint>,
    steps: Vec<Step>,
    exclusive: Vec<Range<usize>>,
}

impl MetaPath {
    /// Zero-step path at `ep`; the identity for [`compose`](Self::compose).
    pub fn at(ep: Endpoint) -> Self {
        MetaPath {
            nodes: vec![ep],
            steps: Vec::new(),
            exclusive: Vec::new(),
        }
    }

    /// Append one step arriving at `next`.
    pub fn then(mut self, step: Step, next: Endpoint) -> Self {
        self.steps.push(step);
        self.nodes.push(next);
        self
    }

    pub fn start(&self) -> &Endpoint {
        &self.nodes[0]
    }

    pub fn end(&self) -> &Endpoint {
        self.nodes.last().unwrap()
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn nodes(&self) -> &[Endpoint] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Step ranges whose two boundary nodes must differ.
    pub fn exclusive_segments(&self) -> &[Range<usize>] {
        &self.exclusive
    }

    /// Mark the whole path exclusive (its start and end node must differ). The
    /// path must return to its start type and carry no exclusive ranges yet.
    pub fn exclusive(mut self) -> Result<Self> {
        if self.steps.is_empty() {
            return Err(Error::MetaPath("cannot mark an empty path exclusive".into()));
        }
        if self.start() != self.end() {
            return Err(Error::MetaPath(format!(
                "exclusive range must start and end at the same type, got {} and {}",
                self.start(),
                self.end()
            )));
        }
        if !self.exclusive.is_empty() {
            return Err(Error::MetaPath("exclusive ranges cannot nest".into()));
        }
        self.exclusive.push(0..self.steps.len());
        Ok(self)
    }

    /// Concatenation `self ∘ other`; `self` must end where `other` starts.
    pub fn compose(&self, other: &MetaPath) -> Result<MetaPath> {
        if self.end() != other.start() {
            return Err(Error::MetaPath(format!(
                "cannot compose: left path ends at {} but right path starts at {}",
                self.end(),
                other.start()
            )));
        }
        let offset = self.steps.len();
        let mut nodes = self.nodes.clone();
        nodes.extend(other.nodes[1..].iter().cloned());
        let mut steps = self.steps.clone();
        steps.extend(other.steps.iter().cloned());
        let mut exclusive = self.exclusive.clone();
        exclusive.extend(other.exclusive.iter().map(|r| r.start + offset..r.end + offset));
        Ok(MetaPath {
            nodes,
            steps,
            exclusive,
        })
    }

    /// Reverse the path, flipping every relation's direction.
    pub fn invert(&self) -> MetaPath {
        let n = self.steps.len();
        let mut exclusive: Vec<Range<usize>> = self.exclusive.iter().map(|r| n - r.end..n - r.start).collect();
        exclusive.reverse();
        MetaPath {
            nodes: self.nodes.iter().rev().cloned().collect(),
            steps: self.steps.iter().rev().map(Step::flipped).collect(),
            exclusive,
        }
    }

    /// Whether position `at` (0..=len) does not cut through an exclusive range.
    pub fn can_split_at(&self, at: usize) -> bool {
        at <= self.steps.len() && self.exclusive.iter().all(|r| at <= r.start || at >= r.end)
    }

    /// Split into `(steps[..at], steps[at..])`.
    pub fn split_at(&self, at: usize) -> Result<(MetaPath, MetaPath)> {
        if !self.can_split_at(at) {
            return Err(Error::MetaPath(format!("cannot split at {at}: inside an exclusive range")));
        }
        let prefix = MetaPath {
            nodes: self.nodes[..=at].to_vec(),
            steps: self.steps[..at].to_vec(),
            exclusive: self.exclusive.iter().filter(|r| r.end <= at).cloned().collect(),
        };
        let suffix = MetaPath {
            nodes: self.nodes[at..].to_vec(),
            steps: self.steps[at..].to_vec(),
            exclusive: self
                .exclusive
                .iter()
                .filter(|r| r.start >= at)
                .map(|r| r.start - at..r.end - at)
                .collect(),
        };
        Ok((prefix, suffix))
    }

    /// The sub-path covering `range` of steps, without exclusive marks.
    pub fn slice(&self, range: Range<usize>) -> MetaPath {
        MetaPath {
            nodes: self.nodes[range.start..=range.end].to_vec(),
            steps: self.steps[range].to_vec(),
            exclusive: Vec::new(),
        }
    }

    /// Whether the path reads the same inverted.
    pub fn is_palindromic(&self) -> bool {
        self.invert() == *self
    }
}

impl fmt::Display for MetaPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.nodes[0])?;
        for (k, step) in self.steps.iter().enumerate() {
            let open = self.exclusive.iter().any(|r| r.start == k);
            let close = self.exclusive.iter().any(|r| r.end == k + 1);
            write!(
                f,
                " {}{}{} {}",
                if open { "[" } else { "" },
                step,
                if close { "]" } else { "" },
                self.nodes[k + 1]
            )?;
        }
        Ok(())
    }
}

fn parse_endpoint(tok: &str) -> Result<Endpoint> {
    let (name, side) = match tok.rsplit_once('@') {
        Some((n, "t")) => (n, Side::Target),
        Some((n, "s")) => (n, Side::Source),
        Some((_, other)) => return Err(Error::MetaPath(format!("unknown network tag `@{other}`"))),
        None => (tok, Side::Source),
    };
    if name.is_empty() || name.starts_with('-') || name.contains(['[', ']']) {
        return Err(Error::MetaPath(format!("expected a node type, got `{tok}`")));
    }
    Ok(Endpoint::new(side, name))
}

fn parse_step(tok: &str) -> Result<Step> {
    if tok == "-anchor-" {
        return Ok(Step::Anchor);
    }
    let body = tok
        .strip_prefix('-')
        .and_then(|t| t.strip_suffix("->"))
        .ok_or_else(|| Error::MetaPath(format!("expected a step token, got `{tok}`")))?;
    let (link, direction) = match body.strip_suffix("^-1") {
        Some(l) => (l, Direction::Inverse),
        None => (body, Direction::Forward),
    };
    if link.is_empty() || link.contains('^') {
        return Err(Error::MetaPath(format!("malformed step `{tok}`")));
    }
    if link == "anchor" {
        return Err(Error::MetaPath("the anchor step is written `-anchor-`".into()));
    }
    Ok(Step::Relation {
        link: link.to_string(),
        direction,
    })
}

impl FromStr for MetaPath {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let toks: Vec<&str> = s.split_whitespace().collect();
        if toks.is_empty() || toks.len().is_multiple_of(2) {
            return Err(Error::MetaPath(format!("`{s}` is not `node (step node)*`")));
        }
        let mut path = MetaPath::at(parse_endpoint(toks[0])?);
        let mut open: Option<usize> = None;
        for (k, pair) in toks[1..].chunks(2).enumerate() {
            let mut step_tok = pair[0];
            if let Some(rest) = step_tok.strip_prefix('[') {
                if open.is_some() {
                    return Err(Error::MetaPath("nested `[`".into()));
                }
                open = Some(k);
                step_tok = rest;
            }
            let closes = match step_tok.strip_suffix(']') {
                Some(rest) => {
                    step_tok = rest;
                    true
                }
                None => false,
            };
            path = path.then(parse_step(step_tok)?, parse_endpoint(pair[1])?);
            if closes {
                let start = open
                    .take()
                    .ok_or_else(|| Error::MetaPath("`]` without matching `[`".into()))?;
                if path.nodes[start] != path.nodes[k + 1] {
                    return Err(Error::MetaPath(format!(
                        "exclusive range must start and end at the same type, got {} and {}",
                        path.nodes[start],
                        path.nodes[k + 1]
                    )));
                }
                path.exclusive.push(start..k + 1);
            }
        }
        if open.is_some() {
            return Err(Error::MetaPath("unclosed `[`".into()));
        }
        Ok(path)
    }
}

/// Union of the two network schemas plus the anchor relation between their
/// user types.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSchema {
    pub source: NetworkSchema,
    pub target: NetworkSchema,
    pub anchor_type: String,
}

impl JointSchema {
    pub fn social() -> Self {
        JointSchema {
            source: NetworkSchema::social(),
            target: NetworkSchema::social(),
            anchor_type: "user".into(),
        }
    }

    pub fn schema(&self, side: Side) -> &NetworkSchema {
        match side {
            Side::Source => &self.source,
            Side::Target => &self.target,
        }
    }

    /// Type-check every step of `path`.
    pub fn check(&self, path: &MetaPath) -> Result<()> {
        for ep in path.nodes() {
            if self.schema(ep.side).node_type_index(&ep.node_type).is_none() {
                return Err(Error::MetaPath(format!("unknown node type {ep}")));
            }
        }
        for (k, step) in path.steps().iter().enumerate() {
            let (from, to) = (&path.nodes[k], &path.nodes[k + 1]);
            match step {
                Step::Anchor => {
                    if from.side == to.side || from.node_type != self.anchor_type || to.node_type != self.anchor_type {
                        return Err(Error::MetaPath(format!(
                            "anchor step {from} -> {to} must join the {} types of the two networks",
                            self.anchor_type
                        )));
                    }
                }
                Step::Relation { link, direction } => {
                    if from.side != to.side {
                        return Err(Error::MetaPath(format!("relation `{link}` cannot cross networks")));
                    }
                    let lt = self
                        .schema(from.side)
                        .link_type(link)
                        .ok_or_else(|| Error::UnknownLinkType(link.clone()))?;
                    let (s, d) = lt.endpoints(*direction);
                    if s != from.node_type || d != to.node_type {
                        return Err(Error::MetaPath(format!("step {step} goes {s} -> {d}, path has {from} -> {to}")));
                    }
                }
            }
        }
        Ok(())
    }
}

/// The nine similarity meta-paths over the social schema, in order σ1..σ9.
/// σ1–σ6 are social (follow-based); σ7, σ8, σ9 go through locations, times and
/// words of posts.
pub fn similarity_paths(side: Side) -> Vec<MetaPath> {
    let ep = |t: &str| Endpoint::new(side, t);
    let user = || MetaPath::at(ep("user"));
    let two = |a: Step, b: Step| user().then(a, ep("user")).then(b, ep("user"));
    let via_post = |link: &str, mid: &str| {
        user()
            .then(Step::forward("write"), ep("post"))
            .then(Step::forward(link), ep(mid))
            .then(Step::inverse(link), ep("post"))
            .then(Step::inverse("write"), ep("user"))
    };
    vec![
        user().then(Step::forward("follow"), ep("user")),
        user().then(Step::inverse("follow"), ep("user")),
        two(Step::forward("follow"), Step::forward("follow")),
        two(Step::forward("follow"), Step::inverse("follow")),
        two(Step::inverse("follow"), Step::forward("follow")),
        two(Step::inverse("follow"), Step::inverse("follow")),
        via_post("checkin_at", "location"),
        via_post("written_at", "time"),
        via_post("contain", "word"),
    ]
}

/// Number of social (follow-only) similarity paths at the head of the catalog.
pub const SOCIAL_SIMILARITY_PATHS: usize = 6;

/// Similarity paths for both networks plus the rules for composing them into
/// connector and recursive paths. Indices are 1-based, matching σ1..σ9.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaPathCatalog {
    source_sims: Vec<MetaPath>,
    target_sims: Vec<MetaPath>,
    /// Zero each similarity path's diagonal before composing.
    pub exclude_self: bool,
    /// Only σ1 may be used on the source side of connector/recursive paths.
    pub no_similarity_extension: bool,
    anchor_type: String,
}

impl MetaPathCatalog {
    pub fn new(source_sims: Vec<MetaPath>, target_sims: Vec<MetaPath>, anchor_type: impl Into<String>) -> Result<Self> {
        let anchor_type = anchor_type.into();
        for (side, sims) in [(Side::Source, &source_sims), (Side::Target, &target_sims)] {
            let home = Endpoint::new(side, anchor_type.clone());
            for p in sims {
                if p.start() != &home || p.end() != &home {
                    return Err(Error::MetaPath(format!("similarity path `{p}` must run {home} to {home}")));
                }
            }
        }
        Ok(MetaPathCatalog {
            source_sims,
            target_sims,
            exclude_self: true,
            no_similarity_extension: false,
            anchor_type,
        })
    }

    /// σ1..σ9 on both sides.
    pub fn heterogeneous() -> Self {
        MetaPathCatalog::new(similarity_paths(Side::Source), similarity_paths(Side::Target), "user").unwrap()
    }

    /// σ1..σ6 on both sides.
    pub fn homogeneous() -> Self {
        let mut cat = Self::heterogeneous();
        cat.source_sims.truncate(SOCIAL_SIMILARITY_PATHS);
        cat.target_sims.truncate(SOCIAL_SIMILARITY_PATHS);
        cat
    }

    pub fn with_exclude_self(mut self, on: bool) -> Self {
        self.exclude_self = on;
        self
    }

    pub fn without_similarity_extension(mut self) -> Self {
        self.no_similarity_extension = true;
        self
    }

    pub fn source_sims(&self) -> &[MetaPath] {
        &self.source_sims
    }

    pub fn target_sims(&self) -> &[MetaPath] {
        &self.target_sims
    }

    /// Number of source similarity paths (c).
    pub fn c(&self) -> usize {
        self.source_sims.len()
    }

    /// Number of target similarity paths (r).
    pub fn r(&self) -> usize {
        self.target_sims.len()
    }

    /// Source-side indices usable in connector/recursive construction.
    pub fn connector_indices(&self) -> Vec<usize> {
        if self.no_similarity_extension {
            vec![1]
        } else {
            (1..=self.c()).collect()
        }
    }

    /// The anchor hop from source users to target users.
    pub fn alpha(&self) -> MetaPath {
        MetaPath::at(Endpoint::new(Side::Source, self.anchor_type.clone()))
            .then(Step::Anchor, Endpoint::new(Side::Target, self.anchor_type.clone()))
    }

    fn sim(&self, sims: &[MetaPath], i: usize, what: &'static str) -> Result<MetaPath> {
        if i == 0 || i > sims.len() {
            return Err(Error::OutOfRange {
                what,
                index: i,
                len: sims.len(),
            });
        }
        let p = sims[i - 1].clone();
        if self.exclude_self {
            p.exclusive()
        } else {
            Ok(p)
        }
    }

    /// Ψ_i = σ^s_i ∘ α, from source users to target users.
    pub fn connector(&self, i: usize) -> Result<MetaPath> {
        if self.no_similarity_extension && i != 1 {
            return Err(Error::MetaPath(format!(
                "connector index {i} unavailable without similarity extension (only 1)"
            )));
        }
        self.sim(&self.source_sims, i, "source similarity path")?.compose(&self.alpha())
    }

    /// Φ_{i,j,k} = Ψ_i ∘ σ^t_j ∘ Ψ_k⁻¹, a cycle on source users.
    pub fn recursive(&self, i: usize, j: usize, k: usize) -> Result<MetaPath> {
        let psi_i = self.connector(i)?;
        let psi_k = self.connector(k)?;
        let sigma_t = self.sim(&self.target_sims, j, "target similarity path")?;
        psi_i.compose(&sigma_t)?.compose(&psi_k.invert())
    }
}
