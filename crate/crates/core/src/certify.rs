//! Randomized certification of the comparison inequalities between the
//! distances.
//!
//! Every suite draws seeded random instances, evaluates each inequality
//! `lhs <= rhs` on them and records the largest violation
//! `max(0, lhs - rhs - rel * max(|lhs|, |rhs|))`. An inequality passes when
//! that violation is at most the absolute tolerance. Trials run in parallel
//! but are seeded and reduced by index, so reports do not depend on the
//! thread count.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eps::eps_exact;
use crate::gh::{distortion, gh_exact, gh_lower_bound};
use crate::lipschitz::{lip_bound, lip_exact, LipResult};
use crate::manifold::{
    geodesic_space, sample, BaseManifold, ConformalFactor, FourierTerm, MetricField, SampleMode,
    SampledManifold,
};
use crate::metric::{FiniteMetricSpace, Tolerance};
use crate::search::{derive_seed, rng_from, SearchRng};
use crate::smooth::{
    compose, lipschitz_constant, sl_bound_with, DiffeoParams, SlOptions, SlResult,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    LemmaSandwich,
    DiameterBounds,
    TopologyChain,
    Submultiplicativity,
    PseudoMetricAxioms,
    All,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::LemmaSandwich,
        Suite::DiameterBounds,
        Suite::TopologyChain,
        Suite::Submultiplicativity,
        Suite::PseudoMetricAxioms,
        Suite::All,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::LemmaSandwich => "lemma-sandwich",
            Suite::DiameterBounds => "diameter-bounds",
            Suite::TopologyChain => "topology-chain",
            Suite::Submultiplicativity => "submultiplicativity",
            Suite::PseudoMetricAxioms => "pseudo-metric-axioms",
            Suite::All => "all",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown suite {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateEntry {
    pub name: String,
    pub instances: u64,
    pub max_violation: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub suite: Suite,
    pub trials: u32,
    pub seed: u64,
    pub tolerance: Tolerance,
    pub entries: Vec<CertificateEntry>,
    pub pass: bool,
}

/// Tolerance used when none is given: `1e-9` absolute, no relative slack.
pub fn default_tolerance() -> Tolerance {
    Tolerance {
        abs: 1e-9,
        rel: 0.0,
    }
}

/// Annealing/search budgets of the smooth-Lipschitz estimates inside the suites.
const SL_OPTIONS: SlOptions = SlOptions {
    degree: 1,
    budget: 300,
    restarts: 4,
};

/// Runs `suite` with `trials` random instances per inequality group.
pub fn run_certify(suite: Suite, trials: u32, seed: u64, tol: Tolerance) -> CertificateReport {
    let suites: &[Suite] = match suite {
        Suite::All => &Suite::ALL[..5],
        _ => std::slice::from_ref(&suite),
    };
    let mut entries = Vec::new();
    for s in suites {
        let (names, samples) = match s {
            Suite::LemmaSandwich => lemma_sandwich(trials, seed),
            Suite::DiameterBounds => diameter_bounds(trials, seed),
            Suite::TopologyChain => topology_chain(trials, seed),
            Suite::Submultiplicativity => submultiplicativity(trials, seed),
            Suite::PseudoMetricAxioms => pseudo_metric_axioms(trials, seed),
            Suite::All => unreachable!(),
        };
        entries.extend(summarize(s.name(), &names, samples, tol));
    }
    let pass = entries.iter().all(|e| e.pass);
    CertificateReport {
        suite,
        trials,
        seed,
        tolerance: tol,
        entries,
        pass,
    }
}

/// `(lhs, rhs)` observations, tagged by the index of their inequality.
type Samples = Vec<(usize, f64, f64)>;

fn summarize(
    suite: &str,
    names: &[&str],
    samples: Vec<Samples>,
    tol: Tolerance,
) -> Vec<CertificateEntry> {
    let mut count = vec![0u64; names.len()];
    let mut worst = vec![0.0_f64; names.len()];
    for (k, lhs, rhs) in samples.into_iter().flatten() {
        count[k] += 1;
        worst[k] = worst[k].max(violation(lhs, rhs, tol));
    }
    names
        .iter()
        .enumerate()
        .map(|(k, name)| CertificateEntry {
            name: format!("{suite}/{name}"),
            instances: count[k],
            max_violation: worst[k],
            pass: worst[k] <= tol.abs,
        })
        .collect()
}

fn violation(lhs: f64, rhs: f64, tol: Tolerance) -> f64 {
    if lhs <= rhs {
        return 0.0;
    }
    let v = lhs - rhs - tol.rel * lhs.abs().max(rhs.abs());
    if v.is_nan() {
        f64::INFINITY
    } else {
        v.max(0.0)
    }
}

/// Runs `trial` for every index with its own generator and keeps the
/// results in index order.
fn trials_par<F>(trials: u32, seed: u64, stream: u64, trial: F) -> Vec<Samples>
where
    F: Fn(&mut SearchRng) -> Samples + Sync,
{
    let base = derive_seed(seed, stream);
    (0..trials)
        .into_par_iter()
        .map(|t| trial(&mut rng_from(derive_seed(base, t as u64))))
        .collect()
}

/// Distance matrix of `n` random points in `[0, 1)^dim` for a random
/// `dim` in `1..=3`; half the time a random constant in `[0, 0.5)` is added
/// to every off-diagonal entry, which keeps the triangle inequality.
pub fn random_space(rng: &mut SearchRng, n: usize) -> FiniteMetricSpace {
    loop {
        let dim = rng.random_range(1..=3);
        let pts: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
            .collect();
        let shift = if rng.random_bool(0.5) {
            rng.random::<f64>() * 0.5
        } else {
            0.0
        };
        let rows: Vec<Vec<f64>> = pts
            .iter()
            .enumerate()
            .map(|(i, p)| {
                pts.iter()
                    .enumerate()
                    .map(|(j, q)| {
                        if i == j {
                            0.0
                        } else {
                            let d = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                            d.sqrt() + shift
                        }
                    })
                    .collect()
            })
            .collect();
        if let Ok(x) = FiniteMetricSpace::validate(&rows) {
            return x;
        }
    }
}

fn exact_gh(x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> f64 {
    gh_exact(x, y)
        .expect("small instances fit the exact budget")
        .upper
}

fn exact_eps(x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> f64 {
    eps_exact(x, y)
        .expect("small instances fit the exact budget")
        .value
}

fn exact_lip(x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> LipResult {
    lip_exact(x, y).expect("small instances fit the exact budget")
}

/// A random pair with 2 to 4 points each; shared by the sandwich and
/// diameter suites so both see the same instances.
fn random_pair(rng: &mut SearchRng) -> (FiniteMetricSpace, FiniteMetricSpace) {
    let nx = rng.random_range(2..=4);
    let ny = rng.random_range(2..=4);
    (random_space(rng, nx), random_space(rng, ny))
}

const PAIR_STREAM: u64 = 1;

fn lemma_sandwich(trials: u32, seed: u64) -> (Vec<&'static str>, Vec<Samples>) {
    let names = vec!["eps_le_2gh", "gh_le_1.5eps"];
    let samples = trials_par(trials, seed, PAIR_STREAM, |rng| {
        let (x, y) = random_pair(rng);
        let (gh, eps) = (exact_gh(&x, &y), exact_eps(&x, &y));
        vec![(0, eps, 2.0 * gh), (1, gh, 1.5 * eps)]
    });
    (names, samples)
}

fn diameter_bounds(trials: u32, seed: u64) -> (Vec<&'static str>, Vec<Samples>) {
    let names = vec![
        "diam_gap_le_eps",
        "eps_le_max_diam",
        "half_diam_gap_le_gh",
        "gh_le_half_max_diam",
    ];
    let samples = trials_par(trials, seed, PAIR_STREAM, |rng| {
        let (x, y) = random_pair(rng);
        let (gh, eps) = (exact_gh(&x, &y), exact_eps(&x, &y));
        let (dx, dy) = (x.diameter(), y.diameter());
        vec![
            (0, (dx - dy).abs(), eps),
            (1, eps, dx.max(dy)),
            (2, 0.5 * (dx - dy).abs(), gh),
            (3, gh, 0.5 * dx.max(dy)),
        ]
    });
    (names, samples)
}

/// `½ (e^ρ - 1) max(Diam X, Diam Y)`: half the distortion a bijection of
/// log-distortion `ρ` can have.
fn lip_gh_bound(rho: f64, x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> f64 {
    0.5 * rho.exp_m1() * x.diameter().max(y.diameter())
}

/// Two metrics on the 3×3 grid of the unit torus with random degree-1
/// conformal factors.
fn random_torus_pair(rng: &mut SearchRng) -> (SampledManifold, SampledManifold) {
    let base = BaseManifold::FlatTorus { lx: 1.0, ly: 1.0 };
    let field = |rng: &mut SearchRng| {
        let mut amp = || rng.random_range(-0.3..=0.3);
        let conformal = ConformalFactor {
            constant: amp(),
            fourier: vec![
                FourierTerm {
                    k: [1, 0],
                    cos: amp(),
                    sin: amp(),
                },
                FourierTerm {
                    k: [0, 1],
                    cos: amp(),
                    sin: amp(),
                },
            ],
            bumps: Vec::new(),
        };
        MetricField::new(base, conformal).expect("valid field")
    };
    let (fa, fb) = (field(rng), field(rng));
    let pts = sample(&fa, 9, SampleMode::Grid, 0).expect("3×3 grid");
    let a = geodesic_space(&fa, pts.clone(), 8).expect("complete graph");
    let b = geodesic_space(&fb, pts, 8).expect("complete graph");
    (a, b)
}

fn sl(a: &SampledManifold, b: &SampledManifold, seed: u64) -> SlResult {
    sl_bound_with(a, b, &SL_OPTIONS, seed).expect("the identity is a bijective witness")
}

fn topology_chain(trials: u32, seed: u64) -> (Vec<&'static str>, Vec<Samples>) {
    let names = vec![
        "gh_le_lip_bound",
        "lip_witness_graph_distortion",
        "lip_bound_ge_lip_exact",
        "torus/lip_exact_le_sl_plus_padding",
        "torus/gh_lower_le_lip_bound",
        "torus/lip_witness_graph_distortion",
    ];
    let samples = trials_par(trials, seed, 3, |rng| {
        let n = rng.random_range(2..=4);
        let (x, y) = (random_space(rng, n), random_space(rng, n));
        let lip = exact_lip(&x, &y);
        let rho = lip.value.as_f64();
        let bound = lip_gh_bound(rho, &x, &y);
        let graph = lip.witness.as_ref().expect("equal sizes").graph();
        let heuristic = lip_bound(&x, &y, 200, rng.random()).value.as_f64();
        let mut out = vec![
            (0, exact_gh(&x, &y), bound),
            (
                1,
                0.5 * distortion(&graph, &x, &y).expect("valid graph"),
                bound,
            ),
            (2, rho, heuristic),
        ];

        let (a, b) = random_torus_pair(rng);
        let (xa, xb) = (a.space(), b.space());
        let lip = exact_lip(xa, xb);
        let rho = lip.value.as_f64();
        let bound = lip_gh_bound(rho, xa, xb);
        let graph = lip.witness.as_ref().expect("equal sizes").graph();
        let s = sl(&a, &b, rng.random());
        out.extend([
            (3, rho, s.value + s.padding),
            (4, gh_lower_bound(xa, xb), bound),
            (
                5,
                0.5 * distortion(&graph, xa, xb).expect("valid graph"),
                bound,
            ),
        ]);
        out
    });
    (names, samples)
}

/// The 32×32 grid on a conformally deformed unit torus and its 8×8
/// sub-grid, built once per process.
fn submultiplicativity_setup() -> &'static (SampledManifold, SampledManifold) {
    static SETUP: OnceLock<(SampledManifold, SampledManifold)> = OnceLock::new();
    SETUP.get_or_init(|| {
        let conformal = ConformalFactor {
            fourier: vec![FourierTerm {
                k: [1, 1],
                cos: 0.2,
                sin: 0.1,
            }],
            ..ConformalFactor::default()
        };
        let field = MetricField::new(BaseManifold::FlatTorus { lx: 1.0, ly: 1.0 }, conformal)
            .expect("valid field");
        let pts = sample(&field, 1024, SampleMode::Grid, 0).expect("32×32 grid");
        let fine = geodesic_space(&field, pts, 8).expect("connected grid graph");
        let coarse: Vec<usize> = (0..32)
            .step_by(4)
            .flat_map(|i| (0..32).step_by(4).map(move |j| 32 * i + j))
            .collect();
        let source = fine.subset(&coarse).expect("valid indices");
        (source, fine)
    })
}

/// Signed permutation matrices: the lattice isometries of the square torus.
fn lattice_isometries() -> Vec<[[i32; 2]; 2]> {
    let mut out = Vec::new();
    for s in [1, -1] {
        for t in [1, -1] {
            out.push([[s, 0], [0, t]]);
            out.push([[0, s], [t, 0]]);
        }
    }
    out
}

fn random_isometric_diffeo(rng: &mut SearchRng, flow: bool) -> DiffeoParams {
    let base = BaseManifold::FlatTorus { lx: 1.0, ly: 1.0 };
    let mut p = DiffeoParams::random(&base, 1, 0.03, rng);
    let isos = lattice_isometries();
    let pick = isos[rng.random_range(0..isos.len())];
    let shift = [
        rng.random_range(0..8) as f64 / 8.0,
        rng.random_range(0..8) as f64 / 8.0,
    ];
    if let DiffeoParams::Torus {
        matrix,
        translation,
        modes,
        ..
    } = &mut p
    {
        *matrix = pick;
        if !flow {
            *translation = shift;
            modes.clear();
        }
    }
    p
}

fn submultiplicativity(trials: u32, seed: u64) -> (Vec<&'static str>, Vec<Samples>) {
    let names = vec![
        "lipschitz_constant_submultiplicative",
        "lipschitz_constant_finite",
        "grid_automorphisms_submultiplicative",
    ];
    let (source, target) = submultiplicativity_setup();
    let samples = trials_par(trials, seed, 4, |rng| {
        let f = random_isometric_diffeo(rng, true);
        let g = random_isometric_diffeo(rng, true);
        let lf = lipschitz_constant(&f, source, target).expect("same base");
        let lg = lipschitz_constant(&g, source, target).expect("same base");
        let lfg = lipschitz_constant(&compose(&f, &g), source, target).expect("same base");
        let pad = (1.0 + lf.padding) * (1.0 + lg.padding) * (1.0 + lfg.padding);
        let infinite = [&lf, &lg, &lfg].iter().filter(|l| !l.k.is_finite()).count();

        // Grid automorphisms map the sub-grid onto itself, so nothing is snapped.
        let p = random_isometric_diffeo(rng, false);
        let q = random_isometric_diffeo(rng, false);
        let lp = lipschitz_constant(&p, source, target).expect("same base");
        let lq = lipschitz_constant(&q, source, target).expect("same base");
        let lpq = lipschitz_constant(&compose(&p, &q), source, target).expect("same base");
        vec![
            (0, lfg.k, lf.k * lg.k * pad),
            (1, infinite as f64, 0.0),
            (2, lpq.k, lp.k * lq.k),
        ]
    });
    (names, samples)
}

fn pseudo_metric_axioms(trials: u32, seed: u64) -> (Vec<&'static str>, Vec<Samples>) {
    let names = vec![
        "gh_symmetry",
        "gh_triangle",
        "eps_symmetry",
        "eps_triangle",
        "lip_symmetry",
        "lip_triangle",
        "zero_on_isometric_copies",
        "sl_self_zero",
        "sl_symmetry_within_padding",
    ];
    let samples = trials_par(trials, seed, 5, |rng| {
        let mut size = || rng.random_range(2..=4);
        let (nx, ny, nz) = (size(), size(), size());
        let (x, y, z) = (
            random_space(rng, nx),
            random_space(rng, ny),
            random_space(rng, nz),
        );
        let mut out = Vec::new();
        for (k, d) in [(0, exact_gh as fn(&_, &_) -> f64), (2, exact_eps)] {
            out.push((k, (d(&x, &y) - d(&y, &x)).abs(), 0.0));
            out.push((k + 1, d(&x, &z), d(&x, &y) + d(&y, &z)));
        }

        let n = rng.random_range(2..=4);
        let (x, y, z) = (
            random_space(rng, n),
            random_space(rng, n),
            random_space(rng, n),
        );
        let lip = |a: &FiniteMetricSpace, b: &FiniteMetricSpace| exact_lip(a, b).value.as_f64();
        out.push((4, (lip(&x, &y) - lip(&y, &x)).abs(), 0.0));
        out.push((5, lip(&x, &z), lip(&x, &y) + lip(&y, &z)));

        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(rng);
        let copy = x.permuted(&perm).expect("valid permutation");
        let zero = exact_gh(&x, &copy)
            .max(exact_eps(&x, &copy))
            .max(lip(&x, &copy));
        out.push((6, zero, 0.0));

        let (a, b) = random_torus_pair(rng);
        let own = sl(&a, &a, rng.random());
        out.push((7, own.value + own.padding, 0.0));
        let s = rng.random();
        let (ab, ba) = (sl(&a, &b, s), sl(&b, &a, s));
        out.push((
            8,
            (ab.value - ba.value).abs(),
            2.0 * ab.padding.max(ba.padding),
        ));
        out
    });
    (names, samples)
}
