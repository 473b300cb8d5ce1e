//! Storage topologies.
//!
//! Servers are vertices and files are (hyper)edges: file `i` is stored on
//! every server in `edges()[i]`. Cycle-related queries (`cycles`, `girth`,
//! `is_acyclic`) operate on the clique expansion of the hypergraph, so for a
//! 2-uniform graph they are the ordinary multigraph notions, with parallel
//! edges forming 2-cycles.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::field::Field;
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("edge {edge} references server {vertex}, but there are only {servers} servers")]
    VertexOutOfRange { edge: usize, vertex: usize, servers: usize },
    #[error("edge {edge} has {size} distinct servers, need at least 2")]
    EdgeTooSmall { edge: usize, size: usize },
    #[error("edge {edge} lists server {vertex} twice")]
    RepeatedVertex { edge: usize, vertex: usize },
    #[error("invalid graph parameter: {0}")]
    InvalidParameter(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// A replication system: `servers` vertices and one hyperedge per file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StorageGraph {
    servers: usize,
    edges: Vec<Vec<usize>>,
    shared_pair: bool,
}

/// The `s x n` 0/1 incidence matrix `I(G)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceMatrix {
    servers: usize,
    files: usize,
    entries: Vec<u8>,
}

/// A simple cycle. `edges[i]` joins `vertices[i]` and `vertices[i + 1]`
/// (cyclically) and holds the file index (colour) of that edge.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Cycle {
    pub vertices: Vec<usize>,
    pub edges: Vec<usize>,
}

impl Cycle {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn contains_edge(&self, edge: usize) -> bool {
        self.edges.contains(&edge)
    }

    pub fn colour_count(&self) -> usize {
        self.edges.iter().collect::<BTreeSet<_>>().len()
    }
}

/// A subgraph `T` of a parent graph, named by the parent's vertex and edge
/// indices (both kept sorted).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subgraph {
    pub vertices: Vec<usize>,
    pub edges: Vec<usize>,
}

impl StorageGraph {
    /// Validates an edge list (0-based server indices).
    pub fn new(servers: usize, edges: Vec<Vec<usize>>) -> Result<Self, GraphError> {
        let mut canonical = Vec::with_capacity(edges.len());
        for (i, edge) in edges.into_iter().enumerate() {
            let mut sorted = edge.clone();
            sorted.sort_unstable();
            for w in sorted.windows(2) {
                if w[0] == w[1] {
                    return Err(GraphError::RepeatedVertex { edge: i, vertex: w[0] });
                }
            }
            if let Some(&v) = sorted.iter().find(|&&v| v >= servers) {
                return Err(GraphError::VertexOutOfRange { edge: i, vertex: v, servers });
            }
            if sorted.len() < 2 {
                return Err(GraphError::EdgeTooSmall { edge: i, size: sorted.len() });
            }
            canonical.push(sorted);
        }
        let shared_pair = detect_shared_pair(servers, &canonical);
        Ok(StorageGraph { servers, edges: canonical, shared_pair })
    }

    pub fn servers(&self) -> usize {
        self.servers
    }

    pub fn files(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Vec<usize>] {
        &self.edges
    }

    pub fn edge(&self, i: usize) -> &[usize] {
        &self.edges[i]
    }

    /// True when some pair of servers stores more than one file in common.
    pub fn shares_multiple_files(&self) -> bool {
        self.shared_pair
    }

    /// `Some(r)` if every hyperedge has exactly `r` servers.
    pub fn uniformity(&self) -> Option<usize> {
        let r = self.edges.first()?.len();
        self.edges.iter().all(|e| e.len() == r).then_some(r)
    }

    pub fn is_two_uniform(&self) -> bool {
        self.edges.iter().all(|e| e.len() == 2)
    }

    /// Files stored on server `v`, i.e. `Γ(v)`, in increasing order.
    pub fn incident_edges(&self, v: usize) -> Vec<usize> {
        (0..self.edges.len()).filter(|&i| self.edges[i].contains(&v)).collect()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|e| e.contains(&v)).count()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.servers];
        for e in &self.edges {
            for &v in e {
                deg[v] += 1;
            }
        }
        deg
    }

    pub fn max_degree(&self) -> usize {
        self.degrees().into_iter().max().unwrap_or(0)
    }

    /// `Some(d)` if every server stores exactly `d` files.
    pub fn regular_degree(&self) -> Option<usize> {
        let deg = self.degrees();
        let d = *deg.first()?;
        deg.iter().all(|&x| x == d).then_some(d)
    }

    pub fn is_connected(&self) -> bool {
        if self.servers == 0 {
            return true;
        }
        let mut uf = UnionFind::new(self.servers);
        for e in &self.edges {
            for w in e.windows(2) {
                uf.union(w[0], w[1]);
            }
        }
        let root = uf.find(0);
        (0..self.servers).all(|v| uf.find(v) == root)
    }

    pub fn incidence(&self) -> IncidenceMatrix {
        let mut entries = vec![0u8; self.servers * self.edges.len()];
        for (j, e) in self.edges.iter().enumerate() {
            for &v in e {
                entries[v * self.edges.len() + j] = 1;
            }
        }
        IncidenceMatrix { servers: self.servers, files: self.edges.len(), entries }
    }

    /// The subgraph induced by `set`: its vertices and every edge whose
    /// servers all lie in `set`.
    pub fn induced(&self, set: &[usize]) -> Subgraph {
        let mut vertices: Vec<usize> = set.to_vec();
        vertices.sort_unstable();
        vertices.dedup();
        let edges = (0..self.edges.len())
            .filter(|&i| self.edges[i].iter().all(|v| vertices.binary_search(v).is_ok()))
            .collect();
        Subgraph { vertices, edges }
    }

    pub fn whole(&self) -> Subgraph {
        Subgraph { vertices: (0..self.servers).collect(), edges: (0..self.edges.len()).collect() }
    }

    /// All simple cycles of length at most `max_len`, each reported once.
    pub fn cycles(&self, max_len: usize) -> Vec<Cycle> {
        let all: Vec<usize> = (0..self.edges.len()).collect();
        self.cycles_among(&all, max_len)
    }

    /// Simple cycles that only use the given files.
    pub fn cycles_among(&self, files: &[usize], max_len: usize) -> Vec<Cycle> {
        let expanded = self.expand(files);
        enumerate_cycles(self.servers, &expanded, max_len)
    }

    /// Length of the shortest cycle, or `None` for a forest.
    pub fn girth(&self) -> Option<usize> {
        let all: Vec<usize> = (0..self.edges.len()).collect();
        shortest_cycle(self.servers, &self.expand(&all))
    }

    pub fn is_acyclic(&self) -> bool {
        let all: Vec<usize> = (0..self.edges.len()).collect();
        forest_check(self.servers, &self.expand(&all))
    }

    /// Each size-`k` hyperedge becomes `k(k-1)/2` edges carrying its index as
    /// colour.
    pub fn to_colored(&self) -> ColoredMultigraph {
        let edges = self
            .edges
            .iter()
            .enumerate()
            .flat_map(|(color, e)| {
                pairs(e).into_iter().map(move |(a, b)| ColoredEdge { a, b, color })
            })
            .collect();
        ColoredMultigraph { servers: self.servers, colors: self.edges.len(), edges }
    }

    fn expand(&self, files: &[usize]) -> Vec<(usize, usize, usize)> {
        files
            .iter()
            .flat_map(|&i| pairs(&self.edges[i]).into_iter().map(move |(a, b)| (a, b, i)))
            .collect()
    }

    /// Parses the text format: a `s n` header, then one line per hyperedge
    /// listing 1-based server indices. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, GraphError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (hline, header) = lines
            .next()
            .ok_or(GraphError::Parse { line: 0, message: "missing `s n` header".into() })?;
        let nums = parse_usizes(hline, header)?;
        let [servers, files] = nums[..] else {
            return Err(GraphError::Parse { line: hline, message: "header must be `s n`".into() });
        };
        let mut edges = Vec::with_capacity(files);
        for (line, l) in lines {
            if edges.len() == files {
                return Err(GraphError::Parse { line, message: format!("more than {files} edges") });
            }
            let vs = parse_usizes(line, l)?;
            if vs.contains(&0) {
                return Err(GraphError::Parse { line, message: "server indices are 1-based".into() });
            }
            edges.push(vs.into_iter().map(|v| v - 1).collect());
        }
        if edges.len() != files {
            return Err(GraphError::Parse {
                line: 0,
                message: format!("header announces {files} edges, found {}", edges.len()),
            });
        }
        StorageGraph::new(servers, edges)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.servers, self.edges.len());
        for e in &self.edges {
            let line: Vec<String> = e.iter().map(|v| (v + 1).to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }
}

impl Subgraph {
    /// Validates that every edge's servers lie in `vertices`.
    pub fn new(g: &StorageGraph, vertices: &[usize], edges: &[usize]) -> Result<Self, GraphError> {
        let mut vertices = vertices.to_vec();
        vertices.sort_unstable();
        vertices.dedup();
        let mut edges = edges.to_vec();
        edges.sort_unstable();
        edges.dedup();
        for &e in &edges {
            if e >= g.files() {
                return Err(GraphError::InvalidParameter(format!("edge {e} out of range")));
            }
            if let Some(&v) = g.edge(e).iter().find(|v| vertices.binary_search(v).is_err()) {
                return Err(GraphError::InvalidParameter(format!(
                    "edge {e} uses server {v} outside the subgraph"
                )));
            }
        }
        if let Some(&v) = vertices.iter().find(|&&v| v >= g.servers()) {
            return Err(GraphError::VertexOutOfRange { edge: usize::MAX, vertex: v, servers: g.servers() });
        }
        Ok(Subgraph { vertices, edges })
    }

    pub fn cycles(&self, g: &StorageGraph) -> Vec<Cycle> {
        g.cycles_among(&self.edges, usize::MAX)
    }

    pub fn is_acyclic(&self, g: &StorageGraph) -> bool {
        forest_check(g.servers(), &g.expand(&self.edges))
    }

    /// Number of server-file incidences inside the subgraph.
    pub fn incidences(&self, g: &StorageGraph) -> usize {
        self.edges.iter().map(|&e| g.edge(e).len()).sum()
    }

    /// Connected components counting every listed vertex.
    pub fn components(&self, g: &StorageGraph) -> usize {
        let mut uf = UnionFind::new(g.servers());
        for &e in &self.edges {
            for w in g.edge(e).windows(2) {
                uf.union(w[0], w[1]);
            }
        }
        self.vertices.iter().map(|&v| uf.find(v)).collect::<BTreeSet<_>>().len()
    }

    /// The subgraph as a standalone graph with vertices relabelled
    /// `0..vertices.len()` and edges in the order of `self.edges`.
    pub fn to_graph(&self, g: &StorageGraph) -> StorageGraph {
        let edges = self
            .edges
            .iter()
            .map(|&e| {
                g.edge(e).iter().map(|v| self.vertices.binary_search(v).expect("validated")).collect()
            })
            .collect();
        StorageGraph::new(self.vertices.len(), edges).expect("subgraph of a valid graph")
    }
}

impl IncidenceMatrix {
    pub fn servers(&self) -> usize {
        self.servers
    }

    pub fn files(&self) -> usize {
        self.files
    }

    pub fn get(&self, server: usize, file: usize) -> u8 {
        self.entries[server * self.files + file]
    }

    pub fn row_sums(&self) -> Vec<usize> {
        (0..self.servers).map(|v| (0..self.files).map(|j| self.get(v, j) as usize).sum()).collect()
    }

    pub fn column_sums(&self) -> Vec<usize> {
        (0..self.files).map(|j| (0..self.servers).map(|v| self.get(v, j) as usize).sum()).collect()
    }

    pub fn to_matrix(&self, field: Field) -> Matrix {
        let rows = (0..self.servers)
            .map(|v| (0..self.files).map(|j| field.elem(self.get(v, j) as u64)).collect())
            .collect();
        Matrix::from_rows(field, rows)
    }
}

/// Named test and reference topologies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// 10 servers, 15 files, 3-regular, girth 5.
    Petersen,
    /// `K_{a,b}`: servers `0..a` on the left, `a..a+b` on the right.
    CompleteBipartite(usize, usize),
    Cycle(usize),
    /// A path on `c` servers (`c - 1` files).
    Path(usize),
    /// Two triangles sharing server 2 (0-based).
    Bowtie,
    /// A centre server joined to `k` leaves.
    Star(usize),
    /// `k` three-server hyperedges around a ring: hyperedge `i` holds ring
    /// servers `i`, `i + 1 (mod k)` and a private server `k + i`.
    TriangleRing(usize),
}

impl Family {
    pub fn build(self) -> Result<StorageGraph, GraphError> {
        let bad = |msg: &str| Err(GraphError::InvalidParameter(msg.to_string()));
        match self {
            Family::Petersen => {
                let mut edges = Vec::with_capacity(15);
                for i in 0..5 {
                    edges.push(vec![i, (i + 1) % 5]);
                }
                for i in 0..5 {
                    edges.push(vec![i, i + 5]);
                }
                for i in 0..5 {
                    edges.push(vec![5 + i, 5 + (i + 2) % 5]);
                }
                StorageGraph::new(10, edges)
            }
            Family::CompleteBipartite(a, b) => {
                if a == 0 || b == 0 {
                    return bad("complete bipartite sides must be nonempty");
                }
                let edges = (0..a).flat_map(|i| (0..b).map(move |j| vec![i, a + j])).collect();
                StorageGraph::new(a + b, edges)
            }
            Family::Cycle(c) => {
                if c < 3 {
                    return bad("a cycle needs at least 3 servers");
                }
                StorageGraph::new(c, (0..c).map(|i| vec![i, (i + 1) % c]).collect())
            }
            Family::Path(c) => {
                if c < 2 {
                    return bad("a path needs at least 2 servers");
                }
                StorageGraph::new(c, (0..c - 1).map(|i| vec![i, i + 1]).collect())
            }
            Family::Bowtie => StorageGraph::new(
                5,
                vec![vec![0, 1], vec![1, 2], vec![0, 2], vec![2, 3], vec![3, 4], vec![2, 4]],
            ),
            Family::Star(k) => {
                if k == 0 {
                    return bad("a star needs at least one leaf");
                }
                StorageGraph::new(k + 1, (1..=k).map(|v| vec![0, v]).collect())
            }
            Family::TriangleRing(k) => {
                if k < 2 {
                    return bad("a triangle ring needs at least 2 hyperedges");
                }
                StorageGraph::new(2 * k, (0..k).map(|i| vec![i, (i + 1) % k, k + i]).collect())
            }
        }
    }
}

impl FromStr for Family {
    type Err = GraphError;

    /// Accepts `petersen`, `bowtie`, `triangle`, `cycle:C`, `path:C`,
    /// `star:K`, `complete-bipartite:A,B` and `triangle-ring:K`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || GraphError::InvalidParameter(format!("unknown graph family `{s}`"));
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        let nums: Vec<usize> = if args.is_empty() {
            Vec::new()
        } else {
            args.split(',').map(|a| a.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?
        };
        match (name.to_ascii_lowercase().as_str(), nums.as_slice()) {
            ("petersen", []) => Ok(Family::Petersen),
            ("bowtie", []) => Ok(Family::Bowtie),
            ("triangle", []) => Ok(Family::Cycle(3)),
            ("cycle", [c]) => Ok(Family::Cycle(*c)),
            ("path", [c]) => Ok(Family::Path(*c)),
            ("star", [k]) => Ok(Family::Star(*k)),
            ("complete-bipartite" | "complete_bipartite", [a, b]) => {
                Ok(Family::CompleteBipartite(*a, *b))
            }
            ("triangle-ring" | "triangle_ring", [k]) => Ok(Family::TriangleRing(*k)),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Petersen => write!(f, "petersen"),
            Family::CompleteBipartite(a, b) => write!(f, "complete-bipartite:{a},{b}"),
            Family::Cycle(c) => write!(f, "cycle:{c}"),
            Family::Path(c) => write!(f, "path:{c}"),
            Family::Bowtie => write!(f, "bowtie"),
            Family::Star(k) => write!(f, "star:{k}"),
            Family::TriangleRing(k) => write!(f, "triangle-ring:{k}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ColoredEdge {
    pub a: usize,
    pub b: usize,
    pub color: usize,
}

/// A multigraph whose edges carry colours in `0..colors`.
///
/// [`StorageGraph::to_colored`] produces one clique per hyperedge; the
/// general constructor accepts arbitrary coloured edge sets, which is what
/// the choice-function search works over.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColoredMultigraph {
    servers: usize,
    colors: usize,
    edges: Vec<ColoredEdge>,
}

impl ColoredMultigraph {
    pub fn new(servers: usize, colors: usize, edges: Vec<ColoredEdge>) -> Result<Self, GraphError> {
        let mut canonical = Vec::with_capacity(edges.len());
        for (i, e) in edges.into_iter().enumerate() {
            if e.a == e.b {
                return Err(GraphError::RepeatedVertex { edge: i, vertex: e.a });
            }
            let v = e.a.max(e.b);
            if v >= servers {
                return Err(GraphError::VertexOutOfRange { edge: i, vertex: v, servers });
            }
            if e.color >= colors {
                return Err(GraphError::InvalidParameter(format!(
                    "edge {i} has colour {} but only {colors} colours exist",
                    e.color
                )));
            }
            canonical.push(ColoredEdge { a: e.a.min(e.b), b: v, color: e.color });
        }
        Ok(ColoredMultigraph { servers, colors, edges: canonical })
    }

    pub fn servers(&self) -> usize {
        self.servers
    }

    pub fn colors(&self) -> usize {
        self.colors
    }

    pub fn edges(&self) -> &[ColoredEdge] {
        &self.edges
    }

    /// Indices (into `edges()`) of the edges carrying `color`.
    pub fn edges_of_color(&self, color: usize) -> Vec<usize> {
        (0..self.edges.len()).filter(|&k| self.edges[k].color == color).collect()
    }

    /// True iff the coloured multigraph induced on `set` has a cycle using at
    /// least two colours.
    ///
    /// Equivalent to a cycle in the incidence graph between the servers of `set` and the
    /// connected monochromatic components inside `set`: monochromatic
    /// spanning trees can only close a cycle by changing colour,
    /// and a polychromatic cycle compresses to a
    /// non-backtracking closed walk in that incidence graph.
    pub fn polychromatic_cycle_exists(&self, set: &[usize]) -> bool {
        let mut inside = vec![false; self.servers];
        for &v in set {
            inside[v] = true;
        }
        let induced: Vec<&ColoredEdge> =
            self.edges.iter().filter(|e| inside[e.a] && inside[e.b]).collect();
        // Spanning forests of every colour class, then one union-find across
        // all of them: a repeated union signals a cycle that is not
        // monochromatic.
        let mut global = UnionFind::new(self.servers);
        let mut by_color: Vec<Vec<&ColoredEdge>> = vec![Vec::new(); self.colors];
        for e in induced {
            by_color[e.color].push(e);
        }
        for class in by_color {
            let mut local = UnionFind::new(self.servers);
            for e in class {
                if local.union(e.a, e.b) && !global.union(e.a, e.b) {
                    return true;
                }
            }
        }
        false
    }

    /// All simple cycles (any colours) of length at most `max_len` on `set`.
    /// `Cycle::edges` holds colours.
    pub fn cycles_within(&self, set: &[usize], max_len: usize) -> Vec<Cycle> {
        let mut inside = vec![false; self.servers];
        for &v in set {
            inside[v] = true;
        }
        let edges: Vec<(usize, usize, usize)> = self
            .edges
            .iter()
            .filter(|e| inside[e.a] && inside[e.b])
            .map(|e| (e.a, e.b, e.color))
            .collect();
        enumerate_cycles(self.servers, &edges, max_len)
    }
}

fn pairs(e: &[usize]) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(e.len() * (e.len() - 1) / 2);
    for i in 0..e.len() {
        for j in i + 1..e.len() {
            out.push((e[i], e[j]));
        }
    }
    out
}

fn detect_shared_pair(servers: usize, edges: &[Vec<usize>]) -> bool {
    let mut seen = BTreeSet::new();
    for e in edges {
        for p in pairs(e) {
            debug_assert!(p.1 < servers);
            if !seen.insert(p) {
                return true;
            }
        }
    }
    false
}

fn parse_usizes(line: usize, text: &str) -> Result<Vec<usize>, GraphError> {
    text.split_whitespace()
        .map(|t| {
            t.parse().map_err(|_| GraphError::Parse { line, message: format!("not an integer: `{t}`") })
        })
        .collect()
}

/// Enumerates simple cycles of a labelled multigraph given as
/// `(a, b, label)` triples. A cycle is rooted at its smallest vertex and
/// kept only in the direction whose first edge precedes its last edge in
/// the input order, so every cycle appears exactly once.
pub(crate) fn enumerate_cycles(
    vertices: usize,
    edges: &[(usize, usize, usize)],
    max_len: usize,
) -> Vec<Cycle> {
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); vertices];
    for (k, &(a, b, _)) in edges.iter().enumerate() {
        adj[a].push((b, k));
        adj[b].push((a, k));
    }
    let mut out = Vec::new();
    let mut on_path = vec![false; vertices];
    let mut path_v = Vec::new();
    let mut path_e = Vec::new();
    for start in 0..vertices {
        on_path[start] = true;
        path_v.push(start);
        extend(start, start, &adj, edges, max_len, &mut on_path, &mut path_v, &mut path_e, &mut out);
        path_v.pop();
        on_path[start] = false;
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn extend(
    start: usize,
    u: usize,
    adj: &[Vec<(usize, usize)>],
    edges: &[(usize, usize, usize)],
    max_len: usize,
    on_path: &mut [bool],
    path_v: &mut Vec<usize>,
    path_e: &mut Vec<usize>,
    out: &mut Vec<Cycle>,
) {
    for &(w, k) in &adj[u] {
        if w == start {
            if let Some(&first) = path_e.first() {
                if first < k && path_e.len() < max_len {
                    let mut labels: Vec<usize> = path_e.iter().map(|&e| edges[e].2).collect();
                    labels.push(edges[k].2);
                    out.push(Cycle { vertices: path_v.clone(), edges: labels });
                }
            }
        } else if w > start && !on_path[w] && path_e.len() + 1 < max_len {
            on_path[w] = true;
            path_v.push(w);
            path_e.push(k);
            extend(start, w, adj, edges, max_len, on_path, path_v, path_e, out);
            path_e.pop();
            path_v.pop();
            on_path[w] = false;
        }
    }
}

/// Shortest cycle length: for every edge, 1 + the distance between its
/// endpoints once that edge is removed.
fn shortest_cycle(vertices: usize, edges: &[(usize, usize, usize)]) -> Option<usize> {
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); vertices];
    for (k, &(a, b, _)) in edges.iter().enumerate() {
        adj[a].push((b, k));
        adj[b].push((a, k));
    }
    let mut best: Option<usize> = None;
    let mut dist = vec![usize::MAX; vertices];
    for (skip, &(a, b, _)) in edges.iter().enumerate() {
        dist.iter_mut().for_each(|d| *d = usize::MAX);
        dist[a] = 0;
        let mut queue = VecDeque::from([a]);
        while let Some(u) = queue.pop_front() {
            if u == b || best.is_some_and(|g| dist[u] + 2 >= g) {
                break;
            }
            for &(w, k) in &adj[u] {
                if k != skip && dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        if dist[b] != usize::MAX {
            let len = dist[b] + 1;
            best = Some(best.map_or(len, |g| g.min(len)));
        }
    }
    best
}

fn forest_check(vertices: usize, edges: &[(usize, usize, usize)]) -> bool {
    let mut uf = UnionFind::new(vertices);
    edges.iter().all(|&(a, b, _)| uf.union(a, b))
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false if `a` and `b` were already connected.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}
