//! Gromov-Hausdorff distance through correspondences.
//!
//! For finite spaces the distance is half the smallest distortion of a
//! correspondence `R ⊆ X × Y`. [`gh_exact`] enumerates correspondences on
//! tiny instances; [`gh_bound`] brackets the distance from below with cheap
//! invariants and from above with annealed correspondences.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric::FiniteMetricSpace;
use crate::search::{anneal, derive_seed, proportional_map, rng_from, DistortionTracker};
use crate::search::{ElementSearch, Movable, Schedule};

/// Largest `|X| * |Y|` accepted by [`gh_exact`].
pub const GH_EXACT_CELLS: usize = 25;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GhError {
    #[error("invalid correspondence: {0}")]
    InvalidCorrespondence(String),
    #[error("exact enumeration needs |X|*|Y| <= {limit}, got {cells}; use gh_bound")]
    BudgetExceeded { cells: usize, limit: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    #[serde(rename = "anneal")]
    Heuristic,
}

/// A relation whose projections onto both factors are surjective.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Correspondence {
    pairs: Vec<(usize, usize)>,
}

impl Correspondence {
    /// Sorts and deduplicates `pairs`, then checks ranges and surjectivity.
    pub fn new(mut pairs: Vec<(usize, usize)>, nx: usize, ny: usize) -> Result<Self, GhError> {
        pairs.sort_unstable();
        pairs.dedup();
        let mut hit_x = vec![false; nx];
        let mut hit_y = vec![false; ny];
        for &(i, j) in &pairs {
            if i >= nx || j >= ny {
                return Err(GhError::InvalidCorrespondence(format!(
                    "pair ({i}, {j}) outside {nx} x {ny}"
                )));
            }
            hit_x[i] = true;
            hit_y[j] = true;
        }
        if let Some(i) = hit_x.iter().position(|h| !h) {
            return Err(GhError::InvalidCorrespondence(format!(
                "point {i} of X is not covered"
            )));
        }
        if let Some(j) = hit_y.iter().position(|h| !h) {
            return Err(GhError::InvalidCorrespondence(format!(
                "point {j} of Y is not covered"
            )));
        }
        Ok(Self { pairs })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            pairs: (0..n).map(|i| (i, i)).collect(),
        }
    }

    pub fn full(nx: usize, ny: usize) -> Self {
        Self {
            pairs: (0..nx).flat_map(|i| (0..ny).map(move |j| (i, j))).collect(),
        }
    }

    /// Graph of `f: X -> Y` united with the transposed graph of `g: Y -> X`.
    pub fn from_maps(f: &[usize], g: &[usize]) -> Result<Self, GhError> {
        let pairs = f
            .iter()
            .enumerate()
            .map(|(i, &j)| (i, j))
            .chain(g.iter().enumerate().map(|(j, &i)| (i, j)))
            .collect();
        Self::new(pairs, f.len(), g.len())
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    fn check_sizes(&self, nx: usize, ny: usize) -> Result<(), GhError> {
        Self::new(self.pairs.clone(), nx, ny).map(|_| ())
    }
}

/// Outcome of a GH computation; `lower == upper` when exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GhResult {
    pub lower: f64,
    pub upper: f64,
    pub witness: Correspondence,
    pub method: Method,
}

/// `max |d_X(x, x') - d_Y(y, y')|` over pairs of pairs in `r`.
pub fn distortion(
    r: &Correspondence,
    x: &FiniteMetricSpace,
    y: &FiniteMetricSpace,
) -> Result<f64, GhError> {
    r.check_sizes(x.len(), y.len())?;
    Ok(raw_distortion(r.pairs(), x, y))
}

fn raw_distortion(pairs: &[(usize, usize)], x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> f64 {
    let mut m = 0.0_f64;
    for (k, &(i, j)) in pairs.iter().enumerate() {
        for &(i2, j2) in &pairs[k + 1..] {
            m = m.max((x.dist(i, i2) - y.dist(j, j2)).abs());
        }
    }
    m
}

/// Exact distance by depth-first enumeration of correspondences.
///
/// Only inclusion-minimal candidates are explored: a cell whose row and
/// column are already covered is never added, since dropping it keeps the
/// relation a correspondence without increasing the distortion.
pub fn gh_exact(x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> Result<GhResult, GhError> {
    let (nx, ny) = (x.len(), y.len());
    let cells = nx.saturating_mul(ny);
    if cells > GH_EXACT_CELLS {
        return Err(GhError::BudgetExceeded {
            cells,
            limit: GH_EXACT_CELLS,
        });
    }
    let mut dfs = CorrespondenceDfs {
        x,
        y,
        nx,
        ny,
        chosen: Vec::with_capacity(cells),
        row_hits: vec![0; nx],
        col_hits: vec![0; ny],
        best: f64::INFINITY,
        best_pairs: Vec::new(),
    };
    dfs.visit(0, 0.0);
    let value = 0.5 * dfs.best;
    Ok(GhResult {
        lower: value,
        upper: value,
        witness: Correspondence::new(dfs.best_pairs, nx, ny)?,
        method: Method::Exact,
    })
}

struct CorrespondenceDfs<'a> {
    x: &'a FiniteMetricSpace,
    y: &'a FiniteMetricSpace,
    nx: usize,
    ny: usize,
    chosen: Vec<(usize, usize)>,
    row_hits: Vec<u32>,
    col_hits: Vec<u32>,
    best: f64,
    best_pairs: Vec<(usize, usize)>,
}

impl CorrespondenceDfs<'_> {
    fn visit(&mut self, cell: usize, dis: f64) {
        if cell == self.nx * self.ny {
            if dis < self.best {
                self.best = dis;
                self.best_pairs = self.chosen.clone();
            }
            return;
        }
        let (i, j) = (cell / self.ny, cell % self.ny);

        if self.row_hits[i] == 0 || self.col_hits[j] == 0 {
            let added = self.chosen.iter().fold(dis, |m, &(i2, j2)| {
                m.max((self.x.dist(i, i2) - self.y.dist(j, j2)).abs())
            });
            if added < self.best {
                self.chosen.push((i, j));
                self.row_hits[i] += 1;
                self.col_hits[j] += 1;
                self.visit(cell + 1, added);
                self.chosen.pop();
                self.row_hits[i] -= 1;
                self.col_hits[j] -= 1;
            }
        }

        // Skipping the last cell of an uncovered row or column is a dead end.
        let row_dead = j + 1 == self.ny && self.row_hits[i] == 0;
        let col_dead = i + 1 == self.nx && self.col_hits[j] == 0;
        if !row_dead && !col_dead {
            self.visit(cell + 1, dis);
        }
    }
}

/// Certified lower bound on the GH distance.
///
/// The largest of three halved Hausdorff gaps, each at most `dis(R)` for
/// every correspondence `R`: the diameters, the eccentricity value sets, and
/// the distance value sets (zero included).
pub fn gh_lower_bound(x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> f64 {
    let diam = (x.diameter() - y.diameter()).abs();
    let ecc = hausdorff_1d(sorted(x.eccentricities()), sorted(y.eccentricities()));
    let dists = hausdorff_1d(sorted(x.matrix()), sorted(y.matrix()));
    0.5 * diam.max(ecc).max(dists)
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Hausdorff distance between two sorted, nonempty sets of reals.
fn hausdorff_1d(a: Vec<f64>, b: Vec<f64>) -> f64 {
    fn directed(a: &[f64], b: &[f64]) -> f64 {
        a.iter().fold(0.0_f64, |m, &v| {
            let k = b.partition_point(|&w| w < v);
            let mut gap = f64::INFINITY;
            if k < b.len() {
                gap = gap.min(b[k] - v);
            }
            if k > 0 {
                gap = gap.min(v - b[k - 1]);
            }
            m.max(gap)
        })
    }
    directed(&a, &b).max(directed(&b, &a))
}

/// Seeded annealing bound.
///
/// Candidates are unions of the graph of a map `X -> Y` and the transposed
/// graph of a map `Y -> X`, which are always correspondences. The search
/// starts from index-proportional maps (the identity when sizes agree) and
/// each move retargets one point. Deterministic in `seed`, and `upper` is
/// non-increasing in `budget`.
pub fn gh_bound(x: &FiniteMetricSpace, y: &FiniteMetricSpace, budget: u64, seed: u64) -> GhResult {
    gh_bound_with(x, y, budget, seed, &Schedule::default())
}

pub fn gh_bound_with(
    x: &FiniteMetricSpace,
    y: &FiniteMetricSpace,
    budget: u64,
    seed: u64,
    schedule: &Schedule,
) -> GhResult {
    let (nx, ny) = (x.len(), y.len());
    let (mx, my) = (x.matrix(), y.matrix());
    let f = proportional_map(nx, ny);
    let g = proportional_map(ny, nx);
    let elems: Vec<_> = f
        .iter()
        .enumerate()
        .map(|(i, &j)| (i, j))
        .chain(g.iter().enumerate().map(|(j, &i)| (i, j)))
        .collect();
    let moves = (0..nx)
        .map(|_| Movable::Y(ny))
        .chain((0..ny).map(|_| Movable::X(nx)))
        .collect();
    let mut search = ElementSearch {
        tracker: DistortionTracker::new(&mx, nx, &my, ny, elems),
        moves,
    };
    let scale = x.diameter().max(y.diameter());
    let mut rng = rng_from(derive_seed(seed, 0x6768));
    let (_, best) = anneal(&mut search, budget, scale, schedule, &mut rng);
    let witness = Correspondence::new(best, nx, ny).expect("map graphs cover both factors");
    let upper = 0.5 * raw_distortion(witness.pairs(), x, y);
    GhResult {
        lower: gh_lower_bound(x, y),
        upper,
        witness,
        method: Method::Heuristic,
    }
}
