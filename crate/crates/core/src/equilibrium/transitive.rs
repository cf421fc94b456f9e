//! Network-symmetric leader play on a torus.
//!
//! Every translate of an `(r+1)×(r+1)` square is a candidate tile. Each
//! vertex publishes a leader score `m⁰` plus one uniform share per tile that
//! contains it; a tile is selected when the mod-1 sum of its members' shares
//! is at most `p`. Boundaries of selected tiles and all edges of uncovered
//! vertices are deleted, the surviving components become communities, and
//! the member with the largest `m⁰` leads each one.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{check_trials, coin, inefficiency, ActionProfile};
use crate::error::{invalid, Result};
use crate::graph::{self, Graph, Layout, VertexSet};
use crate::rng::{self, Purpose, Rng};
use crate::stats::MonteCarloStats;

/// Fractional part of the sum of shares in `[0, 1)`.
pub fn secret_share(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(invalid("secret sharing needs at least one share"));
    }
    if let Some(v) = values.iter().find(|v| !(0.0..1.0).contains(*v)) {
        return Err(invalid(format!("share {v} is outside [0, 1)")));
    }
    Ok(values.iter().fold(0.0, |acc, &v| add_mod1(acc, v)))
}

fn add_mod1(a: f64, b: f64) -> f64 {
    let s = a + b;
    if s >= 1.0 {
        s - 1.0
    } else {
        s
    }
}

/// `min(ln(1/ε) / M, 1)` with the natural log.
pub fn selection_probability(m: usize, epsilon: f64) -> Result<f64> {
    if m == 0 {
        return Err(invalid("M must be at least 1"));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(invalid(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    Ok(((1.0 / epsilon).ln() / m as f64).min(1.0))
}

/// The family of translated squares on a torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorusTiles {
    pub width: usize,
    pub height: usize,
    pub side: usize,
}

impl TorusTiles {
    /// Requires an even `r` and a torus whose sides are multiples of `r + 1`,
    /// at least two tiles wide, so every translate has the same expanded shape.
    pub fn new(g: &Graph, r: usize) -> Result<Self> {
        let Layout::Torus { width, height } = g.layout() else {
            return Err(invalid("local-transitive play needs a torus graph"));
        };
        if r % 2 != 0 {
            return Err(invalid(format!("r must be even, got {r}")));
        }
        let side = r + 1;
        if width % side != 0 || height % side != 0 {
            return Err(invalid(format!(
                "torus {width}x{height} is not divisible by r+1 = {side}"
            )));
        }
        if width < 2 * side || height < 2 * side {
            return Err(invalid(format!(
                "torus {width}x{height} must be at least two tiles of side {side} in each direction"
            )));
        }
        Ok(TorusTiles {
            width,
            height,
            side,
        })
    }

    /// `|𝒦|`: one square per top-left corner.
    pub fn count(&self) -> usize {
        self.width * self.height
    }

    /// `M`: squares containing any fixed vertex.
    pub fn per_vertex(&self) -> usize {
        self.side * self.side
    }

    /// Vertices of the square with top-left corner `corner`.
    pub fn members(&self, corner: usize) -> VertexSet {
        let (x0, y0) = (corner % self.width, corner / self.width);
        (0..self.side)
            .flat_map(|dy| {
                (0..self.side).map(move |dx| {
                    ((y0 + dy) % self.height) * self.width + (x0 + dx) % self.width
                })
            })
            .collect()
    }

    /// Corners of the squares containing `v`, in a fixed order.
    fn containing(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        let (x, y) = (v % self.width, v / self.width);
        (0..self.side).flat_map(move |dy| {
            (0..self.side).map(move |dx| {
                ((y + self.height - dy) % self.height) * self.width
                    + (x + self.width - dx) % self.width
            })
        })
    }

    /// `|∂F| / |F|` for one tile, boundary counted as ordered pairs leaving it.
    pub fn surface_to_volume(&self, g: &Graph) -> f64 {
        let f = self.members(0);
        graph::ordered_boundary_count(g, &f) as f64 / f.len() as f64
    }
}

// Neighbor directions of a torus vertex.
const RIGHT: usize = 0;
const LEFT: usize = 1;
const DOWN: usize = 2;
const UP: usize = 3;

/// One realization of the construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitiveTrial {
    pub actions: ActionProfile,
    pub inefficiency: f64,
    pub selected_tiles: usize,
    pub uncovered: usize,
    /// Undirected edges removed.
    pub deleted_edges: usize,
    /// Ordered pairs `(i, j)` with `i` uncovered or `i ∈ K ∌ j` for a selected `K`.
    pub directed_deleted: usize,
    /// Community index per vertex.
    pub labels: Vec<usize>,
    pub leaders: Vec<usize>,
}

pub fn sample_local_transitive(
    g: &Graph,
    tiles: &TorusTiles,
    p: f64,
    rng: &mut Rng,
) -> Result<TransitiveTrial> {
    let (w, h, s) = (tiles.width, tiles.height, tiles.side);
    let n = w * h;
    let at = |x: usize, y: usize| (y % h) * w + x % w;

    // Public messages: leader score, then one share per containing tile.
    let mut score = vec![0.0f64; n];
    let mut sums = vec![0.0f64; tiles.count()];
    for v in 0..n {
        score[v] = rng.gen();
        for corner in tiles.containing(v) {
            sums[corner] = add_mod1(sums[corner], rng.gen::<f64>());
        }
    }

    let mut covered = vec![false; n];
    let mut cut = vec![false; 4 * n];
    let mut selected_tiles = 0;
    for (corner, &z) in sums.iter().enumerate() {
        if z > p {
            continue;
        }
        selected_tiles += 1;
        let (x0, y0) = (corner % w, corner / w);
        for d in 0..s {
            cut[4 * at(x0, y0 + d) + LEFT] = true;
            cut[4 * at(x0 + s - 1, y0 + d) + RIGHT] = true;
            cut[4 * at(x0 + d, y0) + UP] = true;
            cut[4 * at(x0 + d, y0 + s - 1) + DOWN] = true;
        }
        for v in tiles.members(corner).iter() {
            covered[v] = true;
        }
    }
    let mut uncovered = 0;
    for v in (0..n).filter(|&v| !covered[v]) {
        uncovered += 1;
        cut[4 * v..4 * v + 4].fill(true);
    }
    let directed_deleted = cut.iter().filter(|&&c| c).count();

    // An undirected edge goes if either orientation is cut.
    let neighbor = |v: usize, dir: usize| {
        let (x, y) = (v % w, v / w);
        match dir {
            RIGHT => at(x + 1, y),
            LEFT => at(x + w - 1, y),
            DOWN => at(x, y + 1),
            _ => at(x, y + h - 1),
        }
    };
    let opposite = [LEFT, RIGHT, UP, DOWN];
    let removed = |i: usize, j: usize| {
        let dir = (0..4).find(|&d| neighbor(i, d) == j).expect("torus neighbor");
        cut[4 * i + dir] || cut[4 * j + opposite[dir]]
    };
    let deleted_edges = (0..n)
        .flat_map(|v| [(v, RIGHT), (v, DOWN)])
        .filter(|&(v, d)| cut[4 * v + d] || cut[4 * neighbor(v, d) + opposite[d]])
        .count();

    let labels = graph::component_labels(g, |i, j| !removed(i, j));
    let communities = labels.iter().max().map_or(0, |&l| l + 1);
    let mut leaders: Vec<usize> = vec![usize::MAX; communities];
    for v in 0..n {
        let l = &mut leaders[labels[v]];
        // Strictly larger score wins, so ties keep the lower id.
        if *l == usize::MAX || score[v] > score[*l] {
            *l = v;
        }
    }
    let coins: Vec<i8> = (0..communities).map(|_| coin(rng)).collect();
    let actions = ActionProfile::from_keys(&labels, &coins);
    let inefficiency = inefficiency(g, &actions)?;
    Ok(TransitiveTrial {
        actions,
        inefficiency,
        selected_tiles,
        uncovered,
        deleted_edges,
        directed_deleted,
        labels,
        leaders,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalTransitiveReport {
    pub tiles: TorusTiles,
    /// `M`, squares containing each vertex.
    pub per_vertex: usize,
    /// Tile surface-to-volume ratio `|∂F| / |F|`.
    pub epsilon: f64,
    pub p: f64,
    pub inefficiency: MonteCarloStats,
    /// Undirected deleted edges over undirected edges.
    pub deleted_fraction: MonteCarloStats,
    /// Directed deletion count over ordered `|E|`.
    pub directed_deleted_fraction: MonteCarloStats,
    pub uncovered_fraction: MonteCarloStats,
    /// `p·M·ε + (1-p)^M`.
    pub deleted_bound: f64,
    /// `(1-p)^M`.
    pub uncovered_expected: f64,
    /// `ε(1 + ln(1/ε))`, present when `ε < 1`.
    pub inefficiency_bound: Option<f64>,
}

/// Runs the tile-selection construction. `p_override` replaces the
/// selection probability derived from the tile's surface-to-volume ratio;
/// when that ratio is at least 1 the derived probability is 1.
pub fn simulate_local_transitive(
    g: &Graph,
    r: usize,
    trials: usize,
    seed: u64,
    p_override: Option<f64>,
) -> Result<LocalTransitiveReport> {
    let tiles = TorusTiles::new(g, r)?;
    check_trials(trials)?;
    let m = tiles.per_vertex();
    let epsilon = tiles.surface_to_volume(g);
    let p = match p_override {
        Some(p) if (0.0..=1.0).contains(&p) => p,
        Some(p) => return Err(invalid(format!("selection probability {p} outside [0, 1]"))),
        None if epsilon < 1.0 => selection_probability(m, epsilon)?,
        None => 1.0,
    };
    let n = g.n() as f64;
    let undirected = g.undirected_edge_count() as f64;
    let ordered = g.ordered_edge_count() as f64;
    let runs = rng::run_trials(trials, seed, Purpose::LocalTransitive, |_, rng| {
        sample_local_transitive(g, &tiles, p, rng).map(|t| {
            [
                t.inefficiency,
                t.deleted_edges as f64 / undirected,
                t.directed_deleted as f64 / ordered,
                t.uncovered as f64 / n,
            ]
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let column = |k: usize| {
        let v: Vec<f64> = runs.iter().map(|row| row[k]).collect();
        MonteCarloStats::from_values(&v, seed)
    };
    let uncovered_expected = (1.0 - p).powi(m as i32);
    Ok(LocalTransitiveReport {
        tiles,
        per_vertex: m,
        epsilon,
        p,
        inefficiency: column(0),
        deleted_fraction: column(1),
        directed_deleted_fraction: column(2),
        uncovered_fraction: column(3),
        deleted_bound: p * m as f64 * epsilon + uncovered_expected,
        uncovered_expected,
        inefficiency_bound: (epsilon < 1.0).then(|| epsilon * (1.0 + (1.0 / epsilon).ln())),
    })
}
