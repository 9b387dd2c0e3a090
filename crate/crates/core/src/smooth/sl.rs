use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::diffeo::{swirl_centers, torus_frequencies, unimodular_matrices, FlowMode, Swirl};
use super::{DiffeoParams, SmoothError, SurfaceMap, SWIRL_WIDTH};
use crate::manifold::{BaseManifold, Point, SampledManifold};
use crate::search::{derive_seed, rng_from, SearchRng};

/// Two-sided Lipschitz constant of a map between sampled manifolds, with
/// the snapping error it was measured under.
#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzConstant {
    /// `max(1, max over pairs of max(r, 1/r))`; infinite if two images coincide.
    pub k: f64,
    /// Largest relative snapping error `(pad_i + pad_j) / d_B(s_i, s_j)` over
    /// pairs with distinct snaps.
    pub padding: f64,
    /// Nearest target sample of each source image.
    pub snapped: Vec<usize>,
    /// The snapped map is a bijection between the two sample sets.
    pub bijective: bool,
}

impl LipschitzConstant {
    pub fn log_k(&self) -> f64 {
        self.k.ln()
    }

    /// `log(1 + padding)`, the additive slack on `log_k`.
    pub fn log_padding(&self) -> f64 {
        self.padding.ln_1p()
    }
}

/// Estimates `L(f)` from the source samples of `a` into `b`.
///
/// Distances between images are read off `b`'s geodesic matrix after
/// snapping each image to its nearest sample; the snap is charged as the
/// length of that short segment under `b`'s metric. When two images snap
/// to the same sample their distance falls back to the direct segment
/// length between them. `a` and `b` must share the base surface but may
/// have different fields and sample sets.
pub fn lipschitz_constant<F: SurfaceMap + Sync>(
    f: &F,
    a: &SampledManifold,
    b: &SampledManifold,
) -> Result<LipschitzConstant, SmoothError> {
    let base = a.field().base;
    if !base.same_domain(&b.field().base) {
        return Err(SmoothError::DomainMismatch);
    }
    let fb = b.field();
    let tiny = 1e-12 * b.space().diameter();
    let images: Vec<(Point, usize, f64)> = a
        .params()
        .par_iter()
        .map(|&x| {
            let y = f.map_point(&base, x);
            let (s, d) = b.nearest(y);
            let pad = if d <= tiny {
                0.0
            } else {
                fb.edge_length(y, b.params()[s]).unwrap_or(0.0)
            };
            (y, s, pad)
        })
        .collect();

    let n = images.len();
    let (da, db) = (a.space(), b.space());
    let rows: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (yi, si, pi) = images[i];
            let mut worst = 1.0_f64;
            let mut rho = 0.0_f64;
            for (j, &(yj, sj, pj)) in images.iter().enumerate().skip(i + 1) {
                let d_img = if si != sj {
                    let d = db.dist(si, sj);
                    rho = rho.max((pi + pj) / d);
                    d
                } else {
                    fb.edge_length(yi, yj).unwrap_or(0.0)
                };
                let r = d_img / da.dist(i, j);
                worst = worst.max(r).max(1.0 / r);
            }
            (worst, rho)
        })
        .collect();
    let (k, padding) = rows
        .iter()
        .fold((1.0_f64, 0.0_f64), |(k, p), &(w, r)| (k.max(w), p.max(r)));

    let snapped: Vec<usize> = images.iter().map(|&(_, s, _)| s).collect();
    let mut seen = vec![false; b.len()];
    let injective = snapped
        .iter()
        .all(|&s| !std::mem::replace(&mut seen[s], true));
    Ok(LipschitzConstant {
        k,
        padding,
        bijective: injective && n == b.len(),
        snapped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlOptions {
    /// Fourier truncation of torus flows; sphere flows use `2 * degree + 2` swirls.
    pub degree: usize,
    /// Total number of Lipschitz-constant evaluations.
    pub budget: u64,
    pub restarts: usize,
}

impl Default for SlOptions {
    fn default() -> Self {
        Self {
            degree: 1,
            budget: 2000,
            restarts: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlResult {
    /// `log L(f)` of the witness, an upper bound on the discretized distance.
    pub value: f64,
    /// `log(1 + padding)` of the witness.
    pub padding: f64,
    pub witness: DiffeoParams,
    pub evaluations: u64,
}

/// [`sl_bound_with`] using the default restart count.
pub fn sl_bound(
    a: &SampledManifold,
    b: &SampledManifold,
    degree: usize,
    budget: u64,
    seed: u64,
) -> Result<SlResult, SmoothError> {
    let opts = SlOptions {
        degree,
        budget,
        ..SlOptions::default()
    };
    sl_bound_with(a, b, &opts, seed)
}

/// Best score, parameters, rigid matrix and evaluations used by one restart.
type Restart = (Score, Vec<f64>, [[i32; 2]; 2], u64);

/// Upper bound on the smooth-Lipschitz distance over the degree-limited
/// diffeomorphism family.
///
/// Minimizes `log k + log(1 + padding)` over witnesses whose snapped map is
/// a bijection, so the reported value always dominates the Lipschitz
/// distance of some bijection between the two sample sets. On the torus
/// every unimodular matrix with entries in `[-2, 2]` is scored first and
/// the best ones seed the restarts; each restart then runs a coordinate
/// pattern search over translation (or rotation) and flow coefficients.
/// Restart 0 starts at the identity.
pub fn sl_bound_with(
    a: &SampledManifold,
    b: &SampledManifold,
    opts: &SlOptions,
    seed: u64,
) -> Result<SlResult, SmoothError> {
    let base = a.field().base;
    if !base.same_domain(&b.field().base) {
        return Err(SmoothError::DomainMismatch);
    }
    let family = Family::new(base, opts.degree);
    if a.len() != b.len() {
        return Err(SmoothError::SizeMismatch(a.len(), b.len()));
    }
    let objective = |p: &DiffeoParams| -> Result<Score, SmoothError> {
        let lc = lipschitz_constant(p, a, b)?;
        let mut distinct = lc.snapped.clone();
        distinct.sort_unstable();
        distinct.dedup();
        Ok(Score {
            collisions: lc.snapped.len() - distinct.len(),
            cost: lc.log_k() + lc.log_padding(),
        })
    };
    let budget = opts.budget.max(1);
    let restarts = opts.restarts.max(1);

    // Score the discrete rigid parts at zero translation.
    let mut starts: Vec<[[i32; 2]; 2]> = Vec::new();
    let mut used = 0;
    if let BaseManifold::FlatTorus { .. } = base {
        let mats = unimodular_matrices(2);
        let take = mats.len().min((budget / 2).max(1) as usize);
        let zero = vec![0.0; family.dim()];
        let scores: Vec<Score> = mats[..take]
            .par_iter()
            .map(|&m| objective(&family.build(m, &zero)))
            .collect::<Result<_, _>>()?;
        used = take as u64;
        let mut order: Vec<usize> = (0..take).collect();
        order.sort_by(|&i, &j| scores[i].cmp(&scores[j]).then(i.cmp(&j)));
        starts = order[..take.min(restarts)]
            .iter()
            .map(|&i| mats[i])
            .collect();
        // Keep the identity as the first start so restart 0 is the identity.
        if let Some(pos) = starts.iter().position(|m| *m == [[1, 0], [0, 1]]) {
            starts[..=pos].rotate_right(1);
        } else {
            starts.insert(0, [[1, 0], [0, 1]]);
            starts.truncate(restarts);
        }
    }
    let per_restart = (budget.saturating_sub(used) / restarts as u64).max(1);

    let outcomes: Vec<Restart> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_from(derive_seed(seed, r as u64));
            let matrix = starts
                .get(r % starts.len().max(1))
                .copied()
                .unwrap_or([[1, 0], [0, 1]]);
            let x0 = if r < starts.len().max(1) {
                vec![0.0; family.dim()]
            } else {
                family.random_start(&mut rng)
            };
            let eval = |x: &[f64]| objective(&family.build(matrix, x));
            // Settle the rigid part before spending evaluations on the flow.
            let steps = family.steps();
            let rigid = family.rigid_dim();
            let (_, x, first) = pattern_search(eval, x0, &steps, rigid, per_restart.div_ceil(2))?;
            let (fx, x, second) =
                pattern_search(eval, x, &steps, steps.len(), per_restart - first + 1)?;
            Ok((fx, x, matrix, first + second - 1))
        })
        .collect::<Result<_, SmoothError>>()?;

    let evaluations = used + outcomes.iter().map(|o| o.3).sum::<u64>();
    let best = outcomes
        .iter()
        .enumerate()
        .min_by(|(i, p), (j, q)| p.0.cmp(&q.0).then(i.cmp(j)))
        .map(|(_, o)| o)
        .expect("at least one restart");
    if best.0.collisions > 0 || !best.0.cost.is_finite() {
        return Err(SmoothError::NoBijectiveWitness);
    }
    let witness = family.build(best.2, &best.1);
    let lc = lipschitz_constant(&witness, a, b)?;
    Ok(SlResult {
        value: lc.log_k(),
        padding: lc.log_padding(),
        witness,
        evaluations,
    })
}

/// Objective of the witness search: snapped maps with fewer collisions
/// win, then lower `log k + log(1 + padding)`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Score {
    collisions: usize,
    cost: f64,
}

impl Eq for Score {}

impl PartialOrd for Score {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Score {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.collisions
            .cmp(&other.collisions)
            .then(self.cost.total_cmp(&other.cost))
    }
}

/// Coordinate pattern search with a step per coordinate that doubles on
/// success and halves on failure; returns the best score, its point and
/// the number of evaluations spent. Only the first `movable` coordinates
/// are varied.
fn pattern_search(
    eval: impl Fn(&[f64]) -> Result<Score, SmoothError>,
    mut x: Vec<f64>,
    steps: &[f64],
    movable: usize,
    budget: u64,
) -> Result<(Score, Vec<f64>, u64), SmoothError> {
    let mut fx = eval(&x)?;
    let mut used = 1;
    let mut step = steps.to_vec();
    while used < budget && !(fx.collisions == 0 && fx.cost <= 0.0) {
        let mut active = false;
        for d in 0..movable {
            if step[d] < steps[d] * 1e-7 {
                continue;
            }
            active = true;
            let mut improved = false;
            for sign in [1.0, -1.0] {
                if used >= budget {
                    break;
                }
                let mut y = x.clone();
                y[d] += sign * step[d];
                let fy = eval(&y)?;
                used += 1;
                if fy < fx {
                    x = y;
                    fx = fy;
                    improved = true;
                    break;
                }
            }
            step[d] = if improved {
                (2.0 * step[d]).min(steps[d])
            } else {
                0.5 * step[d]
            };
        }
        if !active {
            break;
        }
    }
    Ok((fx, x, used))
}

/// Continuous coordinates of the degree-limited family.
///
/// Torus: `[tx, ty]` then `cos`/`sin` vectors of each frequency.
/// Sphere: the three Euler angles then one axis per swirl center.
struct Family {
    base: BaseManifold,
    frequencies: Vec<[i32; 2]>,
    centers: Vec<Point>,
}

impl Family {
    fn new(base: BaseManifold, degree: usize) -> Self {
        match base {
            BaseManifold::FlatTorus { .. } => Self {
                base,
                frequencies: torus_frequencies(degree),
                centers: Vec::new(),
            },
            BaseManifold::Sphere { .. } => Self {
                base,
                frequencies: Vec::new(),
                centers: if degree == 0 {
                    Vec::new()
                } else {
                    swirl_centers(degree)
                },
            },
        }
    }

    fn rigid_dim(&self) -> usize {
        match self.base {
            BaseManifold::FlatTorus { .. } => 2,
            BaseManifold::Sphere { .. } => 3,
        }
    }

    fn dim(&self) -> usize {
        match self.base {
            BaseManifold::FlatTorus { .. } => 2 + 4 * self.frequencies.len(),
            BaseManifold::Sphere { .. } => 3 + 3 * self.centers.len(),
        }
    }

    fn steps(&self) -> Vec<f64> {
        let mut s = Vec::with_capacity(self.dim());
        match self.base {
            BaseManifold::FlatTorus { lx, ly } => {
                s.extend([0.25 * lx, 0.25 * ly]);
                s.resize(self.dim(), 0.05);
            }
            BaseManifold::Sphere { .. } => {
                s.extend([0.5; 3]);
                s.resize(self.dim(), 0.2);
            }
        }
        s
    }

    fn random_start(&self, rng: &mut SearchRng) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        match self.base {
            BaseManifold::FlatTorus { lx, ly } => {
                x[0] = rng.random::<f64>() * lx;
                x[1] = rng.random::<f64>() * ly;
            }
            BaseManifold::Sphere { .. } => {
                use std::f64::consts::{PI, TAU};
                x[0] = rng.random::<f64>() * TAU;
                x[1] = rng.random::<f64>() * PI;
                x[2] = rng.random::<f64>() * TAU;
            }
        }
        x
    }

    fn build(&self, matrix: [[i32; 2]; 2], x: &[f64]) -> DiffeoParams {
        match self.base {
            BaseManifold::FlatTorus { .. } => DiffeoParams::Torus {
                matrix,
                translation: [x[0], x[1]],
                modes: self
                    .frequencies
                    .iter()
                    .zip(x[2..].chunks_exact(4))
                    .filter(|(_, c)| c.iter().any(|&v| v != 0.0))
                    .map(|(&k, c)| FlowMode {
                        k,
                        cos: [c[0], c[1]],
                        sin: [c[2], c[3]],
                    })
                    .collect(),
                flow_time: 1.0,
            },
            BaseManifold::Sphere { .. } => DiffeoParams::Sphere {
                angles: [x[0], x[1], x[2]],
                swirls: self
                    .centers
                    .iter()
                    .zip(x[3..].chunks_exact(3))
                    .filter(|(_, c)| c.iter().any(|&v| v != 0.0))
                    .map(|(&center, c)| Swirl {
                        center,
                        axis: [c[0], c[1], c[2]],
                        width: SWIRL_WIDTH,
                    })
                    .collect(),
                flow_time: 1.0,
            },
        }
    }
}
