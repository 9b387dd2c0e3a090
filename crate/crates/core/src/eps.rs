//! The ε-isometry distance.
//!
//! A map `f: X -> Y` is an ε-isometry when its additive distortion
//! `max |d_X(a, b) - d_Y(f(a), f(b))|` is at most ε; no continuity,
//! injectivity or surjectivity is asked for. The distance is the least ε for
//! which ε-isometries exist in both directions. Both map sets are finite
//! here, so that infimum is attained and equals the larger of the two
//! one-directional minimal distortions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gh::Method;
use crate::metric::FiniteMetricSpace;
use crate::search::{anneal, derive_seed, proportional_map, rng_from, DistortionTracker};
use crate::search::{ElementSearch, Movable, Schedule};

/// Largest `|Y|^|X| + |X|^|Y|` accepted by [`eps_exact`].
pub const EPS_EXACT_MAPS: u64 = 20_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EpsError {
    #[error("invalid map: {0}")]
    InvalidMap(String),
    #[error("exact enumeration needs at most {limit} maps, got {maps}; use eps_bound")]
    BudgetExceeded { maps: u64, limit: u64 },
}

/// An arbitrary map between finite point sets, `i -> assignment[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PointMap {
    assignment: Vec<usize>,
}

impl PointMap {
    pub fn new(assignment: Vec<usize>, target_len: usize) -> Result<Self, EpsError> {
        if let Some(&bad) = assignment.iter().find(|&&j| j >= target_len) {
            return Err(EpsError::InvalidMap(format!(
                "image {bad} outside a target of {target_len} points"
            )));
        }
        Ok(Self { assignment })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            assignment: (0..n).collect(),
        }
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }
}

/// `value` is exact for [`Method::Exact`] and an upper bound otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsResult {
    pub value: f64,
    pub witness_xy: PointMap,
    pub witness_yx: PointMap,
    pub method: Method,
}

pub fn additive_distortion(
    f: &PointMap,
    x: &FiniteMetricSpace,
    y: &FiniteMetricSpace,
) -> Result<f64, EpsError> {
    if f.assignment.len() != x.len() {
        return Err(EpsError::InvalidMap(format!(
            "map has {} entries for a domain of {} points",
            f.assignment.len(),
            x.len()
        )));
    }
    PointMap::new(f.assignment.clone(), y.len())?;
    let a = &f.assignment;
    let mut m = 0.0_f64;
    for i in 0..a.len() {
        for k in (i + 1)..a.len() {
            m = m.max((x.dist(i, k) - y.dist(a[i], a[k])).abs());
        }
    }
    Ok(m)
}

fn map_count(from: usize, to: usize) -> u64 {
    (to as u64).checked_pow(from as u32).unwrap_or(u64::MAX)
}

/// Exact distance by branch-and-bound over all maps in both directions.
pub fn eps_exact(x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> Result<EpsResult, EpsError> {
    let maps = map_count(x.len(), y.len()).saturating_add(map_count(y.len(), x.len()));
    if maps > EPS_EXACT_MAPS {
        return Err(EpsError::BudgetExceeded {
            maps,
            limit: EPS_EXACT_MAPS,
        });
    }
    let (dxy, fxy) = min_distortion_map(x, y);
    let (dyx, fyx) = min_distortion_map(y, x);
    Ok(EpsResult {
        value: dxy.max(dyx),
        witness_xy: PointMap { assignment: fxy },
        witness_yx: PointMap { assignment: fyx },
        method: Method::Exact,
    })
}

/// Smallest additive distortion of a map `from -> to`, by depth-first
/// assignment of images in base-`|to|` counter order with pruning on the
/// partial distortion.
fn min_distortion_map(from: &FiniteMetricSpace, to: &FiniteMetricSpace) -> (f64, Vec<usize>) {
    struct Dfs<'a> {
        from: &'a FiniteMetricSpace,
        to: &'a FiniteMetricSpace,
        current: Vec<usize>,
        best: f64,
        best_map: Vec<usize>,
    }
    impl Dfs<'_> {
        fn visit(&mut self, dis: f64) {
            let i = self.current.len();
            if i == self.from.len() {
                if dis < self.best {
                    self.best = dis;
                    self.best_map = self.current.clone();
                }
                return;
            }
            for j in 0..self.to.len() {
                let added = self.current.iter().enumerate().fold(dis, |m, (k, &jk)| {
                    m.max((self.from.dist(i, k) - self.to.dist(j, jk)).abs())
                });
                if added < self.best {
                    self.current.push(j);
                    self.visit(added);
                    self.current.pop();
                }
            }
        }
    }
    let mut dfs = Dfs {
        from,
        to,
        current: Vec::with_capacity(from.len()),
        best: f64::INFINITY,
        best_map: Vec::new(),
    };
    dfs.visit(0.0);
    (dfs.best, dfs.best_map)
}

/// Seeded annealing upper bound; each direction gets the full `budget`.
///
/// Starts from index-proportional maps (the identity when sizes agree) and
/// moves one image at a time. Non-increasing in `budget`.
pub fn eps_bound(
    x: &FiniteMetricSpace,
    y: &FiniteMetricSpace,
    budget: u64,
    seed: u64,
) -> EpsResult {
    let (dxy, fxy) = anneal_map(x, y, budget, derive_seed(seed, 0));
    let (dyx, fyx) = anneal_map(y, x, budget, derive_seed(seed, 1));
    EpsResult {
        value: dxy.max(dyx),
        witness_xy: PointMap { assignment: fxy },
        witness_yx: PointMap { assignment: fyx },
        method: Method::Heuristic,
    }
}

fn anneal_map(
    from: &FiniteMetricSpace,
    to: &FiniteMetricSpace,
    budget: u64,
    seed: u64,
) -> (f64, Vec<usize>) {
    let (mf, mt) = (from.matrix(), to.matrix());
    let start = proportional_map(from.len(), to.len());
    let elems = start.into_iter().enumerate().collect();
    let mut search = ElementSearch {
        tracker: DistortionTracker::new(&mf, from.len(), &mt, to.len(), elems),
        moves: vec![Movable::Y(to.len()); from.len()],
    };
    let scale = from.diameter().max(to.diameter());
    let mut rng = rng_from(seed);
    let (_, best) = anneal(&mut search, budget, scale, &Schedule::default(), &mut rng);
    let map: Vec<usize> = best.into_iter().map(|(_, j)| j).collect();
    let value = additive_distortion(
        &PointMap {
            assignment: map.clone(),
        },
        from,
        to,
    )
    .expect("annealed maps stay in range");
    (value, map)
}
