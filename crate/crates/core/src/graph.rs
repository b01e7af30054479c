//! Undirected graphs, treatment assignments and neighborhood exposure.
//!
//! Edge lists are accepted in the loose formats circulating with public
//! social-network snapshots: comment lines, arbitrary node ids, duplicate
//! and reversed edges, optional trailing columns. Everything is normalized
//! into a simple undirected graph over dense ids `0..n`.

use std::collections::HashMap;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeId = u32;

/// Field separator for [`parse_edge_list`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Separator {
    /// Detect from the first data line: comma if one is present, else whitespace.
    #[default]
    Auto,
    Whitespace,
    Comma,
}

impl FromStr for Separator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Separator> {
        match s {
            "auto" => Ok(Separator::Auto),
            "whitespace" => Ok(Separator::Whitespace),
            "comma" => Ok(Separator::Comma),
            other => Err(Error::InvalidParameter {
                name: "separator",
                reason: format!("expected auto, whitespace or comma, got {other:?}"),
            }),
        }
    }
}

/// Simple undirected graph in CSR form; neighbor lists are sorted and
/// contain no duplicates or self-loops.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    neighbors: Vec<NodeId>,
}

impl Graph {
    /// Builds a graph from an edge iterator. Self-loops are dropped, both
    /// orientations of an edge collapse into one undirected edge.
    pub fn from_edges<I>(n_nodes: usize, edges: I) -> Result<Graph>
    where
        I: IntoIterator<Item = (NodeId, NodeId)>,
    {
        let mut adj: Vec<Vec<NodeId>> = vec![Vec::new(); n_nodes];
        for (a, b) in edges {
            let (a, b) = (a as usize, b as usize);
            if a >= n_nodes || b >= n_nodes {
                return Err(Error::InvalidParameter {
                    name: "edges",
                    reason: format!("edge ({a}, {b}) exceeds node count {n_nodes}"),
                });
            }
            if a == b {
                continue;
            }
            adj[a].push(b as NodeId);
            adj[b].push(a as NodeId);
        }
        let mut offsets = Vec::with_capacity(n_nodes + 1);
        let mut neighbors = Vec::new();
        offsets.push(0);
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
            neighbors.extend_from_slice(list);
            offsets.push(neighbors.len());
        }
        Ok(Graph { offsets, neighbors })
    }

    pub fn n_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Number of undirected edges.
    pub fn n_edges(&self) -> usize {
        self.neighbors.len() / 2
    }

    pub fn degree(&self, node: NodeId) -> usize {
        self.neighbors(node).len()
    }

    pub fn neighbors(&self, node: NodeId) -> &[NodeId] {
        let i = node as usize;
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }
}

/// Parses a plain-text edge list. Lines starting with `#` or `%` and blank
/// lines are skipped; the first two fields of every other line are node
/// ids, any further fields are ignored. Raw ids are remapped onto `0..n`
/// in order of first appearance.
pub fn parse_edge_list(text: &str, separator: Separator) -> Result<Graph> {
    let mut ids: HashMap<u64, NodeId> = HashMap::new();
    let mut edges: Vec<(NodeId, NodeId)> = Vec::new();
    let mut sep = separator;

    for (idx, raw_line) in text.lines().enumerate() {
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('%') {
            continue;
        }
        if sep == Separator::Auto {
            sep = if line.contains(',') {
                Separator::Comma
            } else {
                Separator::Whitespace
            };
        }
        let mut fields = match sep {
            Separator::Comma => FieldIter::Comma(line.split(',')),
            _ => FieldIter::Whitespace(line.split_whitespace()),
        };
        let a = next_id(&mut fields, idx, line)?;
        let b = next_id(&mut fields, idx, line)?;
        let mut dense = |raw: u64| -> NodeId {
            let next = ids.len() as NodeId;
            *ids.entry(raw).or_insert(next)
        };
        let (a, b) = (dense(a), dense(b));
        edges.push((a, b));
    }

    if edges.is_empty() {
        return Err(Error::EmptyEdgeList);
    }
    Graph::from_edges(ids.len(), edges)
}

enum FieldIter<'a> {
    Whitespace(std::str::SplitWhitespace<'a>),
    Comma(std::str::Split<'a, char>),
}

impl<'a> Iterator for FieldIter<'a> {
    type Item = &'a str;
    fn next(&mut self) -> Option<&'a str> {
        match self {
            FieldIter::Whitespace(it) => it.next(),
            FieldIter::Comma(it) => it.next().map(str::trim),
        }
    }
}

fn next_id<'a>(fields: &mut impl Iterator<Item = &'a str>, idx: usize, line: &str) -> Result<u64> {
    let field = fields.next().filter(|f| !f.is_empty()).ok_or_else(|| Error::EdgeListParse {
        line: idx + 1,
        reason: format!("expected two node ids, got {line:?}"),
    })?;
    field.parse().map_err(|_| Error::EdgeListParse {
        line: idx + 1,
        reason: format!("invalid node id {field:?}"),
    })
}

/// Erdős–Rényi G(n, p) sampler with `p = mean_degree / (n - 1)`, using
/// geometric jumps over the upper-triangular pair enumeration. Deterministic
/// in `seed`.
pub fn erdos_renyi(n_nodes: usize, mean_degree: f64, seed: u64) -> Result<Graph> {
    if n_nodes == 0 {
        return Err(Error::InvalidParameter {
            name: "n_nodes",
            reason: "graph needs at least one node".into(),
        });
    }
    let max_degree = (n_nodes - 1) as f64;
    if !(0.0..=max_degree).contains(&mean_degree) {
        return Err(Error::InvalidParameter {
            name: "mean_degree",
            reason: format!("must lie in [0, {max_degree}], got {mean_degree}"),
        });
    }
    if n_nodes == 1 || mean_degree == 0.0 {
        return Graph::from_edges(n_nodes, std::iter::empty());
    }

    let p = mean_degree / max_degree;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::with_capacity((n_nodes as f64 * mean_degree / 2.0) as usize);
    let ln_q = (1.0 - p).ln(); // -inf when p == 1, which makes every jump 0
    let mut v: usize = 1;
    let mut w: i64 = -1;
    while v < n_nodes {
        let r: f64 = rng.gen();
        let jump = if ln_q == f64::NEG_INFINITY {
            0.0
        } else {
            ((1.0 - r).ln() / ln_q).floor()
        };
        w += 1 + jump as i64;
        while w >= v as i64 && v < n_nodes {
            w -= v as i64;
            v += 1;
        }
        if v < n_nodes {
            edges.push((v as NodeId, w as NodeId));
        }
    }
    Graph::from_edges(n_nodes, edges)
}

/// Per-node binary treatment assignment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreatmentVector(Vec<bool>);

impl TreatmentVector {
    pub fn new(z: Vec<bool>) -> TreatmentVector {
        TreatmentVector(z)
    }

    /// Builds from 0/1 indicators, rejecting anything else.
    pub fn from_indicators(z: &[u8]) -> Result<TreatmentVector> {
        z.iter()
            .map(|&v| match v {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::InvalidParameter {
                    name: "z",
                    reason: format!("treatment indicator must be 0 or 1, got {other}"),
                }),
            })
            .collect::<Result<Vec<bool>>>()
            .map(TreatmentVector)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn treated_count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }
}

/// Per-node fraction of treated neighbors, always in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct ExposureVector(Vec<f64>);

impl ExposureVector {
    pub fn new(g: Vec<f64>) -> Result<ExposureVector> {
        for (i, &v) in g.iter().enumerate() {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter {
                    name: "g",
                    reason: format!("exposure at index {i} must lie in [0, 1], got {v}"),
                });
            }
        }
        Ok(ExposureVector(g))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Fraction of each node's neighbors that are treated; isolated nodes get 0.
pub fn treated_fraction(graph: &Graph, z: &TreatmentVector) -> Result<ExposureVector> {
    if z.len() != graph.n_nodes() {
        return Err(Error::LengthMismatch {
            expected: graph.n_nodes(),
            got: z.len(),
        });
    }
    let g = (0..graph.n_nodes())
        .map(|i| {
            let nbrs = graph.neighbors(i as NodeId);
            if nbrs.is_empty() {
                0.0
            } else {
                let treated = nbrs.iter().filter(|&&j| z.get(j as usize)).count();
                treated as f64 / nbrs.len() as f64
            }
        })
        .collect();
    Ok(ExposureVector(g))
}
