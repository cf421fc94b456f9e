//! Amenability certificates: partitions of the vertex set into connected
//! communities of bounded radius, plus the cut set they induce.

use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graph::{self, ball_unchecked, EdgeSet, Graph, Layout, VertexSet};
use crate::rng::{self, Purpose};

/// Witness for `(ε, r)`-amenability.
///
/// `epsilon_achieved` uses ordered counts: `2·|cut_edges| / ordered |E|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionCertificate {
    pub r: usize,
    pub communities: Vec<VertexSet>,
    pub leaders: Vec<usize>,
    pub cut_edges: EdgeSet,
    #[serde(rename = "epsilon")]
    pub epsilon_achieved: f64,
}

/// Result of peeling a certificate down to stable communities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StablePartition {
    pub r: usize,
    pub stable_communities: Vec<VertexSet>,
    /// Vertices that ended up outside every stable community.
    pub unassigned: VertexSet,
    /// One per stable community; may lie in `unassigned`.
    pub leaders: Vec<usize>,
    pub deleted_edges: EdgeSet,
    /// Number of single-vertex removals performed.
    pub peel_steps: usize,
}

/// First invariant a certificate breaks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Violation {
    VertexOutOfRange { vertex: usize },
    NotAPartition { vertex: usize },
    LeaderCount { communities: usize, leaders: usize },
    EmptyCommunity { index: usize },
    Disconnected { index: usize },
    RadiusExceeded { index: usize, leader: usize },
    CutSetMismatch,
    EpsilonMismatch { stored: String, recomputed: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::VertexOutOfRange { vertex } => write!(f, "vertex {vertex} out of range"),
            Violation::NotAPartition { vertex } => {
                write!(f, "communities do not partition the vertices (vertex {vertex})")
            }
            Violation::LeaderCount {
                communities,
                leaders,
            } => write!(f, "{communities} communities but {leaders} leaders"),
            Violation::EmptyCommunity { index } => write!(f, "community {index} is empty"),
            Violation::Disconnected { index } => write!(f, "community {index} is not connected"),
            Violation::RadiusExceeded { index, leader } => write!(
                f,
                "community {index} is not inside the radius ball of leader {leader}"
            ),
            Violation::CutSetMismatch => write!(f, "cut_edges differ from the induced cut"),
            Violation::EpsilonMismatch { stored, recomputed } => {
                write!(f, "epsilon {stored} differs from recomputed {recomputed}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub valid: bool,
    /// Recomputed from the communities; `None` if they are not a partition.
    pub epsilon: Option<f64>,
    pub violation: Option<Violation>,
}

/// `ordered_count / ordered |E|`, zero on an edgeless graph.
pub fn ordered_fraction(g: &Graph, ordered_count: usize) -> f64 {
    let e = g.ordered_edge_count();
    if e == 0 {
        0.0
    } else {
        ordered_count as f64 / e as f64
    }
}

/// Unordered pairs whose endpoints carry different labels.
pub(crate) fn induced_cut(g: &Graph, label: &[usize]) -> EdgeSet {
    g.edges().filter(|&(i, j)| label[i] != label[j]).collect()
}

fn community_labels(n: usize, communities: &[VertexSet]) -> std::result::Result<Vec<usize>, Violation> {
    let mut label = vec![usize::MAX; n];
    for (k, c) in communities.iter().enumerate() {
        for v in c.iter() {
            if v >= n {
                return Err(Violation::VertexOutOfRange { vertex: v });
            }
            if label[v] != usize::MAX {
                return Err(Violation::NotAPartition { vertex: v });
            }
            label[v] = k;
        }
    }
    match label.iter().position(|&l| l == usize::MAX) {
        Some(v) => Err(Violation::NotAPartition { vertex: v }),
        None => Ok(label),
    }
}

impl PartitionCertificate {
    /// Derives the cut set and ε from a partition. Fails if `communities` is
    /// not a partition or the leader count is wrong; radius and connectivity
    /// are left to [`verify_certificate`].
    pub fn from_communities(
        g: &Graph,
        r: usize,
        communities: Vec<VertexSet>,
        leaders: Vec<usize>,
    ) -> Result<Self> {
        let label = community_labels(g.n(), &communities)
            .map_err(|v| Error::InvalidCertificate(v.to_string()))?;
        if leaders.len() != communities.len() {
            return Err(Error::InvalidCertificate(
                Violation::LeaderCount {
                    communities: communities.len(),
                    leaders: leaders.len(),
                }
                .to_string(),
            ));
        }
        let cut_edges = induced_cut(g, &label);
        let epsilon_achieved = ordered_fraction(g, cut_edges.ordered_len());
        Ok(PartitionCertificate {
            r,
            communities,
            leaders,
            cut_edges,
            epsilon_achieved,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    /// Community index of every vertex. Assumes a valid partition.
    pub fn labels(&self, n: usize) -> Vec<usize> {
        let mut label = vec![0; n];
        for (k, c) in self.communities.iter().enumerate() {
            for v in c.iter() {
                label[v] = k;
            }
        }
        label
    }
}

/// Consecutive arcs of length `2r + 1` on a cycle, led by their midpoints.
pub fn tile_cycle(g: &Graph, r: usize) -> Result<PartitionCertificate> {
    if g.layout() != Layout::Cycle {
        return Err(invalid("tile_cycle needs a cycle graph"));
    }
    let n = g.n();
    let c = 2 * r + 1;
    if n % c != 0 {
        return Err(invalid(format!(
            "cycle length {n} is not a multiple of 2r+1 = {c}"
        )));
    }
    let communities: Vec<VertexSet> = (0..n / c).map(|k| (k * c..(k + 1) * c).collect()).collect();
    let leaders = (0..n / c).map(|k| k * c + r).collect();
    PartitionCertificate::from_communities(g, r, communities, leaders)
}

/// Axis-aligned `(r+1)×(r+1)` squares on a torus, led by their centers.
pub fn tile_torus(g: &Graph, r: usize) -> Result<PartitionCertificate> {
    let Layout::Torus { width, height } = g.layout() else {
        return Err(invalid("tile_torus needs a torus graph"));
    };
    if r % 2 != 0 {
        return Err(invalid(format!("tile_torus needs an even r, got {r}")));
    }
    let side = r + 1;
    if width % side != 0 || height % side != 0 {
        return Err(invalid(format!(
            "torus {width}x{height} is not divisible into {side}x{side} squares"
        )));
    }
    let mut communities = Vec::new();
    let mut leaders = Vec::new();
    for ty in 0..height / side {
        for tx in 0..width / side {
            let (x0, y0) = (tx * side, ty * side);
            communities.push(
                (y0..y0 + side)
                    .flat_map(|y| (x0..x0 + side).map(move |x| y * width + x))
                    .collect(),
            );
            leaders.push((y0 + r / 2) * width + x0 + r / 2);
        }
    }
    PartitionCertificate::from_communities(g, r, communities, leaders)
}

/// Heuristic witness search for arbitrary graphs.
///
/// Vertices are visited in a seeded random order. Each still-unassigned
/// vertex grows balls of radius `0..=r` inside the unassigned subgraph; the
/// radius with the smallest `|∂piece| / |piece|` is carved (ties go to the
/// larger radius). Growth ends early once the ball stops growing.
pub fn greedy_ball_carve(g: &Graph, r: usize, seed: u64) -> PartitionCertificate {
    let n = g.n();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, Purpose::Carve, 0));

    let mut assigned = vec![false; n];
    let mut communities = Vec::new();
    let mut leaders = Vec::new();
    let mut dist = vec![usize::MAX; n];
    let mut in_piece = vec![false; n];

    for &v in &order {
        if assigned[v] {
            continue;
        }
        // BFS layers inside the unassigned subgraph.
        let mut layers: Vec<Vec<usize>> = vec![vec![v]];
        dist[v] = 0;
        while layers.len() <= r {
            let mut next = Vec::new();
            for &u in layers.last().unwrap() {
                for &w in g.neighbors(u) {
                    if !assigned[w] && dist[w] == usize::MAX {
                        dist[w] = layers.len();
                        next.push(w);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            layers.push(next);
        }

        let mut size = 0usize;
        let mut boundary = 0isize;
        let mut best = (f64::INFINITY, 0usize);
        for (rho, layer) in layers.iter().enumerate() {
            for &u in layer {
                // Edges into the piece so far become interior.
                let inside = g.neighbors(u).iter().filter(|&&w| in_piece[w]).count();
                boundary += g.degree(u) as isize - 2 * inside as isize;
                in_piece[u] = true;
                size += 1;
            }
            let ratio = boundary as f64 / size as f64;
            if ratio <= best.0 {
                best = (ratio, rho);
            }
        }

        let piece: Vec<usize> = layers[..=best.1].iter().flatten().copied().collect();
        for &u in layers.iter().flatten() {
            dist[u] = usize::MAX;
            in_piece[u] = false;
        }
        for &u in &piece {
            assigned[u] = true;
        }
        communities.push(VertexSet::new(piece));
        leaders.push(v);
    }

    // Sort by smallest member for a canonical layout.
    let mut pairs: Vec<(VertexSet, usize)> = communities.into_iter().zip(leaders).collect();
    pairs.sort_by_key(|(c, _)| c.as_slice()[0]);
    let (communities, leaders) = pairs.into_iter().unzip();
    PartitionCertificate::from_communities(g, r, communities, leaders)
        .expect("carving assigns every vertex exactly once")
}

/// Recomputes every certificate invariant from scratch.
pub fn verify_certificate(g: &Graph, cert: &PartitionCertificate) -> Verification {
    let fail = |violation: Violation, epsilon: Option<f64>| Verification {
        valid: false,
        epsilon,
        violation: Some(violation),
    };
    let label = match community_labels(g.n(), &cert.communities) {
        Ok(l) => l,
        Err(v) => return fail(v, None),
    };
    let cut = induced_cut(g, &label);
    let epsilon = ordered_fraction(g, cut.ordered_len());
    if cert.leaders.len() != cert.communities.len() {
        return fail(
            Violation::LeaderCount {
                communities: cert.communities.len(),
                leaders: cert.leaders.len(),
            },
            Some(epsilon),
        );
    }
    if let Some(&l) = cert.leaders.iter().find(|&&l| l >= g.n()) {
        return fail(Violation::VertexOutOfRange { vertex: l }, Some(epsilon));
    }
    let comp = graph::component_labels(g, |i, j| label[i] == label[j]);
    for (k, c) in cert.communities.iter().enumerate() {
        let Some(&first) = c.as_slice().first() else {
            return fail(Violation::EmptyCommunity { index: k }, Some(epsilon));
        };
        if c.iter().any(|v| comp[v] != comp[first]) {
            return fail(Violation::Disconnected { index: k }, Some(epsilon));
        }
        let leader = cert.leaders[k];
        if !c.is_subset(&ball_unchecked(g, leader, cert.r)) {
            return fail(Violation::RadiusExceeded { index: k, leader }, Some(epsilon));
        }
    }
    if cut != cert.cut_edges {
        return fail(Violation::CutSetMismatch, Some(epsilon));
    }
    if (cert.epsilon_achieved - epsilon).abs() > 1e-12 {
        return fail(
            Violation::EpsilonMismatch {
                stored: cert.epsilon_achieved.to_string(),
                recomputed: epsilon.to_string(),
            },
            Some(epsilon),
        );
    }
    Verification {
        valid: true,
        epsilon: Some(epsilon),
        violation: None,
    }
}

/// True iff every member has at least as many neighbors inside `c` as outside.
pub fn is_stable(g: &Graph, c: &VertexSet) -> bool {
    c.iter().all(|i| {
        let inside = g.neighbors(i).iter().filter(|&&j| c.contains(j)).count();
        2 * inside >= g.degree(i)
    })
}

/// Removes unstable members of one community, lowest id first, until it is
/// stable or empty. Returns the survivors and the removals in order.
pub fn peel_community(g: &Graph, c: &VertexSet) -> (VertexSet, Vec<usize>) {
    let mut members: Vec<usize> = c.as_slice().to_vec();
    let mut inside = vec![false; g.n()];
    members.iter().for_each(|&v| inside[v] = true);
    let mut removed = Vec::new();
    loop {
        let unstable = members.iter().position(|&i| {
            let k = g.neighbors(i).iter().filter(|&&j| inside[j]).count();
            2 * k < g.degree(i)
        });
        match unstable {
            Some(pos) => {
                let v = members.remove(pos);
                inside[v] = false;
                removed.push(v);
            }
            None => break,
        }
    }
    (VertexSet::new(members), removed)
}

/// Peels every community of a valid certificate to a stable core.
///
/// Single-vertex leftovers join the unassigned set `U`. Deleted edges are the
/// boundaries of surviving communities plus every edge touching `U`.
pub fn peel_to_stable(g: &Graph, cert: &PartitionCertificate) -> Result<StablePartition> {
    let check = verify_certificate(g, cert);
    if let Some(v) = check.violation {
        return Err(Error::InvalidCertificate(v.to_string()));
    }
    let mut stable_communities = Vec::new();
    let mut leaders = Vec::new();
    let mut unassigned = Vec::new();
    let mut peel_steps = 0;
    for (c, &leader) in cert.communities.iter().zip(&cert.leaders) {
        let (kept, removed) = peel_community(g, c);
        peel_steps += removed.len();
        unassigned.extend(removed);
        match kept.len() {
            0 => {}
            1 => unassigned.push(kept.as_slice()[0]),
            _ => {
                stable_communities.push(kept);
                leaders.push(leader);
            }
        }
    }
    let unassigned = VertexSet::new(unassigned);
    let deleted_edges = stable_deleted_edges(g, &stable_communities, &unassigned);
    Ok(StablePartition {
        r: cert.r,
        stable_communities,
        unassigned,
        leaders,
        deleted_edges,
        peel_steps,
    })
}

fn stable_deleted_edges(g: &Graph, communities: &[VertexSet], unassigned: &VertexSet) -> EdgeSet {
    let mut d = EdgeSet::new();
    for c in communities {
        d = d.union(&graph::boundary(g, c));
    }
    for u in unassigned.iter() {
        for &w in g.neighbors(u) {
            d.insert(u, w);
        }
    }
    d
}

impl StablePartition {
    /// Checks the stable-partition invariants against `g`.
    pub fn validate(&self, g: &Graph) -> Result<()> {
        let r = self.r;
        let bad = |m: String| Err(Error::InvalidStablePartition(m));
        let mut parts = self.stable_communities.clone();
        parts.push(self.unassigned.clone());
        if let Err(v) = community_labels(g.n(), &parts) {
            return bad(v.to_string());
        }
        if self.leaders.len() != self.stable_communities.len() {
            return bad("one leader per stable community required".into());
        }
        for (k, (c, &l)) in self.stable_communities.iter().zip(&self.leaders).enumerate() {
            if !is_stable(g, c) {
                return bad(format!("community {k} is not stable"));
            }
            if l >= g.n() || !(c.contains(l) || self.unassigned.contains(l)) {
                return bad(format!("leader {l} of community {k} is neither member nor unassigned"));
            }
            if !c.is_subset(&ball_unchecked(g, l, r)) {
                return bad(format!("community {k} exceeds radius {r} around {l}"));
            }
        }
        let expected = stable_deleted_edges(g, &self.stable_communities, &self.unassigned);
        if expected != self.deleted_edges {
            return bad("deleted_edges differ from boundaries plus U-incident edges".into());
        }
        Ok(())
    }
}
