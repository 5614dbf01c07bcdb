//! Finite simple connected graphs on which agents live.
//!
//! Vertices are dense ids `0..n`. Adjacency is stored in compressed
//! sparse-row form so that the samplers can pick a uniform neighbour with a
//! single index computation.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Vertex identifier.
pub type Vertex = u32;

/// Default number of Erdős–Rényi redraws before giving up on connectivity.
pub const DEFAULT_ER_RETRIES: u32 = 1000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("self-loop at vertex {0}")]
    SelfLoop(Vertex),
    #[error("duplicate edge {{{0}, {1}}}")]
    DuplicateEdge(Vertex, Vertex),
    #[error("vertex {vertex} out of range for a graph on {n} vertices")]
    VertexOutOfRange { vertex: Vertex, n: usize },
    #[error("graph is disconnected")]
    Disconnected,
    #[error("graph needs at least 2 vertices and 1 edge")]
    TooSmall,
    #[error("invalid graph parameters: {0}")]
    InvalidParams(String),
    #[error("no connected Erdős–Rényi sample after {0} attempts")]
    ConnectivityRetryExhausted(u32),
    #[error("cannot read graph file: {0}")]
    Io(String),
}

/// Graph family a generated graph came from.
///
/// Only used as metadata (pooling decisions, fast sampling paths); the
/// adjacency structure is always authoritative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Complete,
    Cycle,
    Path,
    Star,
    Grid,
    ErdosRenyi,
    Custom,
}

#[derive(Debug, Clone)]
pub struct Graph {
    n: usize,
    edges: Vec<(Vertex, Vertex)>,
    offsets: Vec<usize>,
    neighbors: Vec<Vertex>,
    family: Family,
}

impl Graph {
    /// Validates an edge list and builds the graph.
    pub fn new(n: usize, edge_list: &[(Vertex, Vertex)]) -> Result<Self, GraphError> {
        Self::with_family(n, edge_list, Family::Custom)
    }

    fn with_family(
        n: usize,
        edge_list: &[(Vertex, Vertex)],
        family: Family,
    ) -> Result<Self, GraphError> {
        if n < 2 || edge_list.is_empty() {
            return Err(GraphError::TooSmall);
        }
        let mut seen = BTreeSet::new();
        let mut edges = Vec::with_capacity(edge_list.len());
        let mut degree = vec![0usize; n];
        for &(u, v) in edge_list {
            for w in [u, v] {
                if w as usize >= n {
                    return Err(GraphError::VertexOutOfRange { vertex: w, n });
                }
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            let key = (u.min(v), u.max(v));
            if !seen.insert(key) {
                return Err(GraphError::DuplicateEdge(key.0, key.1));
            }
            degree[u as usize] += 1;
            degree[v as usize] += 1;
            edges.push((u, v));
        }

        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..n].to_vec();
        let mut neighbors = vec![0; offsets[n]];
        for &(u, v) in &edges {
            neighbors[fill[u as usize]] = v;
            fill[u as usize] += 1;
            neighbors[fill[v as usize]] = u;
            fill[v as usize] += 1;
        }
        for x in 0..n {
            neighbors[offsets[x]..offsets[x + 1]].sort_unstable();
        }

        let g = Graph {
            n,
            edges,
            offsets,
            neighbors,
            family,
        };
        if !g.is_connected() {
            return Err(GraphError::Disconnected);
        }
        Ok(g)
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(Vertex, Vertex)] {
        &self.edges
    }

    #[inline]
    pub fn neighbors(&self, x: Vertex) -> &[Vertex] {
        let x = x as usize;
        &self.neighbors[self.offsets[x]..self.offsets[x + 1]]
    }

    #[inline]
    pub fn degree(&self, x: Vertex) -> usize {
        let x = x as usize;
        self.offsets[x + 1] - self.offsets[x]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n as Vertex).map(|x| self.degree(x)).collect()
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn has_edge(&self, x: Vertex, y: Vertex) -> bool {
        self.neighbors(x).binary_search(&y).is_ok()
    }

    /// True when every pair of distinct vertices is adjacent.
    pub fn is_complete(&self) -> bool {
        self.edges.len() == self.n * (self.n - 1) / 2
    }

    /// Families whose automorphism group acts transitively on vertices, so
    /// per-vertex statistics may be pooled.
    pub fn is_vertex_transitive(&self) -> bool {
        self.is_complete() || matches!(self.family, Family::Cycle)
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0 as Vertex]);
        seen[0] = true;
        let mut reached = 1;
        while let Some(x) = queue.pop_front() {
            for &y in self.neighbors(x) {
                if !seen[y as usize] {
                    seen[y as usize] = true;
                    reached += 1;
                    queue.push_back(y);
                }
            }
        }
        reached == self.n
    }

    /// Two-colourability; false iff the graph contains an odd cycle.
    pub fn is_bipartite(&self) -> bool {
        let mut color = vec![u8::MAX; self.n];
        color[0] = 0;
        let mut queue = VecDeque::from([0 as Vertex]);
        while let Some(x) = queue.pop_front() {
            let cx = color[x as usize];
            for &y in self.neighbors(x) {
                match color[y as usize] {
                    u8::MAX => {
                        color[y as usize] = 1 - cx;
                        queue.push_back(y);
                    }
                    cy if cy == cx => return false,
                    _ => {}
                }
            }
        }
        true
    }

    /// Common degree when all degrees agree.
    pub fn is_regular(&self) -> Option<usize> {
        let d = self.degree(0);
        (1..self.n as Vertex)
            .all(|x| self.degree(x) == d)
            .then_some(d)
    }

    pub fn to_file_format(&self) -> GraphFile {
        GraphFile {
            n: self.n,
            edges: self.edges.iter().map(|&(u, v)| [u, v]).collect(),
        }
    }

    pub fn from_file_format(file: &GraphFile) -> Result<Self, GraphError> {
        let edges: Vec<_> = file.edges.iter().map(|e| (e[0], e[1])).collect();
        Graph::new(file.n, &edges)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file_format()).expect("graph serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        let file: GraphFile =
            serde_json::from_str(text).map_err(|e| GraphError::InvalidParams(e.to_string()))?;
        Graph::from_file_format(&file)
    }

    /// Loads either an inline spec (`complete:1000`) or a JSON graph file.
    pub fn load(spec_or_path: &str) -> Result<Self, GraphError> {
        match spec_or_path.parse::<GraphSpec>() {
            Ok(spec) => spec.build(),
            Err(parse_err) => {
                let path = Path::new(spec_or_path);
                if path.exists() {
                    let text =
                        std::fs::read_to_string(path).map_err(|e| GraphError::Io(e.to_string()))?;
                    Graph::from_json(&text)
                } else {
                    Err(parse_err)
                }
            }
        }
    }
}

/// On-disk graph format: `{"n": int, "edges": [[u, v], ...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphFile {
    pub n: usize,
    pub edges: Vec<[Vertex; 2]>,
}

/// A generator request, also parseable from the inline CLI form.
#[derive(Debug, Clone, PartialEq)]
pub enum GraphSpec {
    Complete(usize),
    Cycle(usize),
    Path(usize),
    /// Vertex 0 is the centre.
    Star(usize),
    Grid {
        width: usize,
        height: usize,
    },
    ErdosRenyi {
        n: usize,
        p: f64,
        seed: u64,
    },
}

impl GraphSpec {
    pub fn build(&self) -> Result<Graph, GraphError> {
        generate(self, DEFAULT_ER_RETRIES)
    }
}

impl FromStr for GraphSpec {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || GraphError::InvalidParams(format!("unrecognised graph spec `{s}`"));
        let parts: Vec<&str> = s.trim().split(':').collect();
        let int = |t: &str| t.parse::<usize>().map_err(|_| bad());
        match parts.as_slice() {
            ["complete", n] => Ok(GraphSpec::Complete(int(n)?)),
            ["cycle", n] => Ok(GraphSpec::Cycle(int(n)?)),
            ["path", n] => Ok(GraphSpec::Path(int(n)?)),
            ["star", n] => Ok(GraphSpec::Star(int(n)?)),
            ["grid", dims] => {
                let (w, h) = dims.split_once('x').ok_or_else(bad)?;
                Ok(GraphSpec::Grid {
                    width: int(w)?,
                    height: int(h)?,
                })
            }
            ["er", n, p, seed] => Ok(GraphSpec::ErdosRenyi {
                n: int(n)?,
                p: p.parse().map_err(|_| bad())?,
                seed: seed.parse().map_err(|_| bad())?,
            }),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for GraphSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphSpec::Complete(n) => write!(f, "complete:{n}"),
            GraphSpec::Cycle(n) => write!(f, "cycle:{n}"),
            GraphSpec::Path(n) => write!(f, "path:{n}"),
            GraphSpec::Star(n) => write!(f, "star:{n}"),
            GraphSpec::Grid { width, height } => write!(f, "grid:{width}x{height}"),
            GraphSpec::ErdosRenyi { n, p, seed } => write!(f, "er:{n}:{p}:{seed}"),
        }
    }
}

/// Builds a connected graph of the requested family.
///
/// Erdős–Rényi draws are rejected and redrawn until connected, at most
/// `max_retries` times. The draw sequence depends only on the seed.
pub fn generate(spec: &GraphSpec, max_retries: u32) -> Result<Graph, GraphError> {
    let invalid = |msg: &str| Err(GraphError::InvalidParams(format!("{spec}: {msg}")));
    let mut edges = Vec::new();
    let (n, family) = match *spec {
        GraphSpec::Complete(n) => {
            for u in 0..n as Vertex {
                for v in u + 1..n as Vertex {
                    edges.push((u, v));
                }
            }
            (n, Family::Complete)
        }
        GraphSpec::Cycle(n) => {
            if n < 3 {
                return invalid("a cycle needs at least 3 vertices");
            }
            for u in 0..n as Vertex {
                edges.push((u, (u + 1) % n as Vertex));
            }
            (n, Family::Cycle)
        }
        GraphSpec::Path(n) => {
            for u in 1..n as Vertex {
                edges.push((u - 1, u));
            }
            (n, Family::Path)
        }
        GraphSpec::Star(n) => {
            for u in 1..n as Vertex {
                edges.push((0, u));
            }
            (n, Family::Star)
        }
        GraphSpec::Grid { width, height } => {
            let at = |i: usize, j: usize| (j * width + i) as Vertex;
            for j in 0..height {
                for i in 0..width {
                    if i + 1 < width {
                        edges.push((at(i, j), at(i + 1, j)));
                    }
                    if j + 1 < height {
                        edges.push((at(i, j), at(i, j + 1)));
                    }
                }
            }
            (width * height, Family::Grid)
        }
        GraphSpec::ErdosRenyi { n, p, seed } => {
            if !(p > 0.0 && p <= 1.0) {
                return invalid("edge probability must lie in (0, 1]");
            }
            if n < 2 {
                return Err(GraphError::TooSmall);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..max_retries {
                edges.clear();
                for u in 0..n as Vertex {
                    for v in u + 1..n as Vertex {
                        if rng.random_bool(p) {
                            edges.push((u, v));
                        }
                    }
                }
                match Graph::with_family(n, &edges, Family::ErdosRenyi) {
                    Ok(g) => return Ok(g),
                    Err(GraphError::Disconnected | GraphError::TooSmall) => continue,
                    Err(e) => return Err(e),
                }
            }
            return Err(GraphError::ConnectivityRetryExhausted(max_retries));
        }
    };
    Graph::with_family(n, &edges, family)
}
