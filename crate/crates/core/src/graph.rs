//! Finite simple graphs, example families and metric primitives.
//!
//! Adjacency is stored undirected. Ratios elsewhere in the crate use the
//! ordered-pair edge count: `ordered_edge_count() == Σ_i deg(i)`, so every
//! undirected edge counts twice.

use std::collections::{BTreeSet, VecDeque};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::{self, Purpose};

/// Structural family a graph was generated from, when known.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Layout {
    General,
    /// Vertex `i` adjacent to `i ± 1 mod n`.
    Cycle,
    /// Vertex `(x, y)` has id `y * width + x`.
    Torus { width: usize, height: usize },
    /// Heap order: children of `i` are `2i + 1` and `2i + 2`.
    BinaryTree { depth: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
    layout: Layout,
}

/// Sorted list of distinct vertex ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VertexSet(Vec<usize>);

/// Set of unordered vertex pairs, stored as `(min, max)`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeSet(BTreeSet<(usize, usize)>);

impl VertexSet {
    pub fn new(ids: impl IntoIterator<Item = usize>) -> Self {
        let mut v: Vec<usize> = ids.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        VertexSet(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.0.binary_search(&v).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn is_subset(&self, other: &VertexSet) -> bool {
        self.iter().all(|v| other.contains(v))
    }

    fn check(&self, g: &Graph) -> Result<()> {
        match self.0.last() {
            Some(&v) if v >= g.n() => Err(invalid(format!(
                "vertex {v} out of range for graph with {} vertices",
                g.n()
            ))),
            _ => Ok(()),
        }
    }
}

impl FromIterator<usize> for VertexSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        VertexSet::new(iter)
    }
}

impl EdgeSet {
    pub fn new() -> Self {
        EdgeSet::default()
    }

    pub fn insert(&mut self, i: usize, j: usize) -> bool {
        self.0.insert((i.min(j), i.max(j)))
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.0.contains(&(i.min(j), i.max(j)))
    }

    /// Number of unordered pairs.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Both orientations of every pair.
    pub fn ordered_len(&self) -> usize {
        2 * self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.0.iter().copied()
    }

    pub fn union(&self, other: &EdgeSet) -> EdgeSet {
        EdgeSet(self.0.union(&other.0).copied().collect())
    }

    /// Fails on the first pair that is not an edge of `g`.
    pub fn check(&self, g: &Graph) -> Result<()> {
        for (i, j) in self.iter() {
            if !g.has_edge(i, j) {
                return Err(invalid(format!("pair {{{i},{j}}} is not an edge")));
            }
        }
        Ok(())
    }
}

impl FromIterator<(usize, usize)> for EdgeSet {
    fn from_iter<I: IntoIterator<Item = (usize, usize)>>(iter: I) -> Self {
        let mut s = EdgeSet::new();
        for (i, j) in iter {
            s.insert(i, j);
        }
        s
    }
}

/// On-disk graph: `{"n": int, "edges": [[i, j], ...]}` with `i < j`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphFile {
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
}

impl Graph {
    /// Builds a simple graph, rejecting self-loops, duplicate edges and
    /// out-of-range ids. Pairs may be given in either orientation.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); n];
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(invalid(format!("edge ({i},{j}) out of range for n={n}")));
            }
            if i == j {
                return Err(invalid(format!("self-loop at {i}")));
            }
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
        for (i, nb) in adjacency.iter_mut().enumerate() {
            nb.sort_unstable();
            if nb.windows(2).any(|w| w[0] == w[1]) {
                return Err(invalid(format!("duplicate edge at vertex {i}")));
            }
        }
        Ok(Graph {
            adjacency,
            layout: Layout::General,
        })
    }

    fn with_layout(mut self, layout: Layout) -> Self {
        self.layout = layout;
        self
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// `|E|` in the ordered-pair convention: the degree sum.
    pub fn ordered_edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum()
    }

    pub fn undirected_edge_count(&self) -> usize {
        self.ordered_edge_count() / 2
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i < self.n() && self.adjacency[i].binary_search(&j).is_ok()
    }

    /// Undirected edges as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, nb)| nb.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    pub fn check_vertex(&self, v: usize) -> Result<()> {
        if v < self.n() {
            Ok(())
        } else {
            Err(invalid(format!("vertex {v} out of range for n={}", self.n())))
        }
    }

    /// Breadth-first distances from `src`; `None` for unreachable vertices.
    /// Search stops past `limit` hops when given.
    pub fn distances(&self, src: usize, limit: Option<usize>) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n()];
        dist[src] = Some(0);
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap();
            if limit.is_some_and(|l| du >= l) {
                continue;
            }
            for &w in self.neighbors(u) {
                if dist[w].is_none() {
                    dist[w] = Some(du + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    pub fn to_file(&self) -> GraphFile {
        GraphFile {
            n: self.n(),
            edges: self.edges().map(|(i, j)| [i, j]).collect(),
        }
    }

    /// Validates a graph file and recovers its layout when the adjacency
    /// matches one of the generated families.
    pub fn from_file(file: &GraphFile) -> Result<Self> {
        if let Some(e) = file.edges.iter().find(|e| e[0] >= e[1]) {
            return Err(invalid(format!(
                "edge [{}, {}] must be listed with i < j",
                e[0], e[1]
            )));
        }
        let g = Graph::from_edges(file.n, file.edges.iter().map(|e| (e[0], e[1])))?;
        let layout = detect_layout(&g);
        Ok(g.with_layout(layout))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: GraphFile = serde_json::from_str(&text)?;
        Graph::from_file(&file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string(&self.to_file())?)?;
        Ok(())
    }
}

fn detect_layout(g: &Graph) -> Layout {
    let n = g.n();
    if n >= 3 && make_cycle(n).is_ok_and(|c| c.adjacency == g.adjacency) {
        return Layout::Cycle;
    }
    if g.adjacency.iter().all(|nb| nb.len() == 4) {
        for w in 3..=n / 3 {
            if n % w == 0 && n / w >= 3 {
                if let Ok(t) = make_torus(w, n / w) {
                    if t.adjacency == g.adjacency {
                        return t.layout;
                    }
                }
            }
        }
    }
    if (n + 1).is_power_of_two() {
        let depth = (n + 1).trailing_zeros() as usize - 1;
        if make_binary_tree(depth).is_ok_and(|t| t.adjacency == g.adjacency) {
            return Layout::BinaryTree { depth };
        }
    }
    Layout::General
}

pub fn make_cycle(n: usize) -> Result<Graph> {
    if n < 3 {
        return Err(invalid(format!("cycle needs n >= 3, got {n}")));
    }
    let g = Graph::from_edges(n, (0..n).map(|i| (i, (i + 1) % n)))?;
    Ok(g.with_layout(Layout::Cycle))
}

pub fn make_torus(width: usize, height: usize) -> Result<Graph> {
    if width < 3 || height < 3 {
        return Err(invalid(format!(
            "torus needs both dimensions >= 3, got {width}x{height}"
        )));
    }
    let id = |x: usize, y: usize| y * width + x;
    let mut edges = Vec::with_capacity(2 * width * height);
    for y in 0..height {
        for x in 0..width {
            edges.push((id(x, y), id((x + 1) % width, y)));
            edges.push((id(x, y), id(x, (y + 1) % height)));
        }
    }
    let g = Graph::from_edges(width * height, edges)?;
    Ok(g.with_layout(Layout::Torus { width, height }))
}

/// Largest depth accepted by [`make_binary_tree`] (2^31 - 1 vertices).
pub const MAX_TREE_DEPTH: usize = 30;

pub fn make_binary_tree(depth: usize) -> Result<Graph> {
    if depth > MAX_TREE_DEPTH {
        return Err(invalid(format!(
            "binary tree depth {depth} exceeds {MAX_TREE_DEPTH}"
        )));
    }
    let n = (1usize << (depth + 1)) - 1;
    let g = Graph::from_edges(n, (1..n).map(|c| ((c - 1) / 2, c)))?;
    Ok(g.with_layout(Layout::BinaryTree { depth }))
}

/// `G(n, d/n)`: each unordered pair independently with probability `d/n`.
pub fn make_erdos_renyi(n: usize, expected_degree: f64, seed: u64) -> Result<Graph> {
    if n < 2 {
        return Err(invalid(format!("Erdős–Rényi graph needs n >= 2, got {n}")));
    }
    if !(expected_degree > 0.0 && expected_degree < n as f64) {
        return Err(invalid(format!(
            "expected degree must lie in (0, n), got {expected_degree}"
        )));
    }
    let p = expected_degree / n as f64;
    let mut rng = rng::stream(seed, Purpose::Graph, 0);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    Graph::from_edges(n, edges)
}

/// Vertices within distance `r` of `center`.
pub fn ball(g: &Graph, center: usize, r: usize) -> Result<VertexSet> {
    g.check_vertex(center)?;
    Ok(ball_unchecked(g, center, r))
}

pub(crate) fn ball_unchecked(g: &Graph, center: usize, r: usize) -> VertexSet {
    g.distances(center, Some(r))
        .iter()
        .enumerate()
        .filter_map(|(v, d)| d.filter(|&d| d <= r).map(|_| v))
        .collect()
}

/// Smallest `r` such that `s ⊆ B_r(i)` for some member `i`, with distances in
/// the full graph. Ties go to the smallest id.
pub fn set_radius(g: &Graph, s: &VertexSet) -> Result<(usize, usize)> {
    if s.is_empty() {
        return Err(invalid("radius of an empty set"));
    }
    s.check(g)?;
    let mut best: Option<(usize, usize)> = None;
    for c in s.iter() {
        let dist = g.distances(c, best.map(|(r, _)| r));
        let ecc = s
            .iter()
            .map(|v| dist[v])
            .try_fold(0usize, |acc, d| d.map(|d| acc.max(d)));
        if let Some(ecc) = ecc {
            if best.is_none_or(|(r, _)| ecc < r) {
                best = Some((ecc, c));
            }
        }
    }
    best.ok_or_else(|| invalid("set is not contained in a single connected component"))
}

/// Unordered pairs `{i, j}` with `i ∈ f` and `j ∉ f`.
pub fn boundary(g: &Graph, f: &VertexSet) -> EdgeSet {
    let mut out = EdgeSet::new();
    for i in f.iter() {
        for &j in g.neighbors(i) {
            if !f.contains(j) {
                out.insert(i, j);
            }
        }
    }
    out
}

/// `|∂F|` counting ordered pairs `(i, j)`, `i ∈ F`, `j ∉ F`.
pub fn ordered_boundary_count(g: &Graph, f: &VertexSet) -> usize {
    f.iter()
        .map(|i| g.neighbors(i).iter().filter(|&&j| !f.contains(j)).count())
        .sum()
}

/// Connected components of `g` with the pairs in `d` deleted, ordered by
/// smallest member.
pub fn components_after_removal(g: &Graph, d: &EdgeSet) -> Vec<VertexSet> {
    let labels = component_labels(g, |i, j| !d.contains(i, j));
    group_by_label(&labels)
}

pub fn connected_components(g: &Graph) -> Vec<VertexSet> {
    group_by_label(&component_labels(g, |_, _| true))
}

/// Component label per vertex over edges accepted by `keep`; labels are
/// assigned in order of each component's smallest vertex.
pub(crate) fn component_labels(g: &Graph, keep: impl Fn(usize, usize) -> bool) -> Vec<usize> {
    let mut label = vec![usize::MAX; g.n()];
    let mut next = 0;
    let mut stack = Vec::new();
    for s in 0..g.n() {
        if label[s] != usize::MAX {
            continue;
        }
        label[s] = next;
        stack.push(s);
        while let Some(u) = stack.pop() {
            for &w in g.neighbors(u) {
                if label[w] == usize::MAX && keep(u, w) {
                    label[w] = next;
                    stack.push(w);
                }
            }
        }
        next += 1;
    }
    label
}

pub(crate) fn group_by_label(labels: &[usize]) -> Vec<VertexSet> {
    let count = labels.iter().map(|&l| l + 1).max().unwrap_or(0);
    let mut groups = vec![Vec::new(); count];
    for (v, &l) in labels.iter().enumerate() {
        groups[l].push(v);
    }
    groups.into_iter().map(VertexSet).collect()
}

impl From<&Graph> for GraphFile {
    fn from(g: &Graph) -> Self {
        g.to_file()
    }
}

impl TryFrom<GraphFile> for Graph {
    type Error = Error;

    fn try_from(file: GraphFile) -> Result<Self> {
        Graph::from_file(&file)
    }
}
