//! Lipschitz distance between finite metric spaces.
//!
//! Bi-Lipschitz homeomorphisms between finite spaces are exactly the
//! bijections, so the distance is the smallest
//! `log max(Dil(f), Dil(f^-1))` over bijections `f`. Since
//! `Dil(f^-1) = 1 / min ratio`, that quantity equals the largest
//! `|log d_Y(f(a), f(b)) - log d_X(a, b)|` over distinct pairs, which lets
//! the searches reuse the additive distortion machinery on log-distances.

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::gh::{Correspondence, Method};
use crate::metric::FiniteMetricSpace;
use crate::search::SearchRng;
use crate::search::{anneal, derive_seed, rng_from, DistortionTracker, Landscape, Schedule};

/// Largest `n!` accepted by [`lip_exact`].
pub const LIP_EXACT_PERMUTATIONS: u64 = 40_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LipError {
    #[error("spaces have different sizes ({0} and {1})")]
    SizeMismatch(usize, usize),
    #[error("dilation is undefined on a one-point space")]
    SingletonSpace,
    #[error("invalid bijection: {0}")]
    InvalidBijection(String),
    #[error("exact enumeration needs n! <= {limit}, got n = {n}; use lip_bound")]
    BudgetExceeded { n: usize, limit: u64 },
}

/// A permutation of `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Bijection {
    perm: Vec<usize>,
}

impl Bijection {
    pub fn new(perm: Vec<usize>) -> Result<Self, LipError> {
        let mut seen = vec![false; perm.len()];
        for &p in &perm {
            if p >= perm.len() || std::mem::replace(&mut seen[p], true) {
                return Err(LipError::InvalidBijection(format!("{perm:?}")));
            }
        }
        Ok(Self { perm })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            perm: (0..n).collect(),
        }
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.perm.len()];
        for (i, &p) in self.perm.iter().enumerate() {
            inv[p] = i;
        }
        Self { perm: inv }
    }

    /// The graph of the bijection as a correspondence.
    pub fn graph(&self) -> Correspondence {
        let n = self.perm.len();
        Correspondence::new(self.perm.iter().copied().enumerate().collect(), n, n)
            .expect("a bijection's graph is a correspondence")
    }
}

/// A Lipschitz distance; spaces of different cardinality are infinitely far apart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LipValue {
    Finite(f64),
    Infinite,
}

impl LipValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            LipValue::Finite(v) => Some(v),
            LipValue::Infinite => None,
        }
    }

    pub fn as_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

impl Serialize for LipValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            LipValue::Finite(v) => s.serialize_f64(*v),
            LipValue::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for LipValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(LipValue::Finite(v)),
            Repr::Text(t) if t == "inf" => Ok(LipValue::Infinite),
            Repr::Text(t) => Err(serde::de::Error::custom(format!(
                "expected a number or \"inf\", got {t:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipResult {
    pub value: LipValue,
    pub witness: Option<Bijection>,
    pub method: Method,
}

impl LipResult {
    fn infinite(method: Method) -> Self {
        Self {
            value: LipValue::Infinite,
            witness: None,
            method,
        }
    }
}

/// `max d_Y(f(a), f(b)) / d_X(a, b)` over distinct pairs.
pub fn dilation(
    f: &Bijection,
    x: &FiniteMetricSpace,
    y: &FiniteMetricSpace,
) -> Result<f64, LipError> {
    if x.len() != y.len() {
        return Err(LipError::SizeMismatch(x.len(), y.len()));
    }
    if f.perm.len() != x.len() {
        return Err(LipError::InvalidBijection(format!(
            "{} entries for {} points",
            f.perm.len(),
            x.len()
        )));
    }
    if x.len() < 2 {
        return Err(LipError::SingletonSpace);
    }
    let p = &f.perm;
    let mut m = 0.0_f64;
    for a in 0..p.len() {
        for b in (a + 1)..p.len() {
            m = m.max(y.dist(p[a], p[b]) / x.dist(a, b));
        }
    }
    Ok(m)
}

/// `log max(Dil(f), Dil(f^-1))`; zero on one-point spaces by convention.
pub fn log_distortion(
    f: &Bijection,
    x: &FiniteMetricSpace,
    y: &FiniteMetricSpace,
) -> Result<f64, LipError> {
    if x.len() == 1 && y.len() == 1 {
        Bijection::new(f.perm.clone())?;
        return Ok(0.0);
    }
    let forward = dilation(f, x, y)?;
    let backward = dilation(&f.inverse(), y, x)?;
    Ok(forward.max(backward).ln())
}

fn log_matrix(x: &FiniteMetricSpace) -> Vec<f64> {
    let n = x.len();
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                m[i * n + j] = x.dist(i, j).ln();
            }
        }
    }
    m
}

fn factorial(n: usize) -> u64 {
    (1..=n as u64)
        .try_fold(1u64, |acc, k| acc.checked_mul(k))
        .unwrap_or(u64::MAX)
}

/// Exact distance by lexicographic permutation search with branch-and-bound
/// on the partial maximal log-ratio.
pub fn lip_exact(x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> Result<LipResult, LipError> {
    if x.len() != y.len() {
        return Ok(LipResult::infinite(Method::Exact));
    }
    let n = x.len();
    if factorial(n) > LIP_EXACT_PERMUTATIONS {
        return Err(LipError::BudgetExceeded {
            n,
            limit: LIP_EXACT_PERMUTATIONS,
        });
    }
    if n == 1 {
        return Ok(LipResult {
            value: LipValue::Finite(0.0),
            witness: Some(Bijection::identity(1)),
            method: Method::Exact,
        });
    }
    let (lx, ly) = (log_matrix(x), log_matrix(y));
    let identity = Bijection::identity(n);
    let mut dfs = PermutationDfs {
        n,
        lx: &lx,
        ly: &ly,
        current: Vec::with_capacity(n),
        used: vec![false; n],
        best: log_distortion(&identity, x, y)?,
        best_perm: identity.perm,
    };
    dfs.visit(0.0);
    let witness = Bijection {
        perm: dfs.best_perm,
    };
    Ok(LipResult {
        value: LipValue::Finite(log_distortion(&witness, x, y)?),
        witness: Some(witness),
        method: Method::Exact,
    })
}

struct PermutationDfs<'a> {
    n: usize,
    lx: &'a [f64],
    ly: &'a [f64],
    current: Vec<usize>,
    used: Vec<bool>,
    best: f64,
    best_perm: Vec<usize>,
}

impl PermutationDfs<'_> {
    fn visit(&mut self, cost: f64) {
        let i = self.current.len();
        if i == self.n {
            if cost < self.best {
                self.best = cost;
                self.best_perm = self.current.clone();
            }
            return;
        }
        for j in 0..self.n {
            if self.used[j] {
                continue;
            }
            let added = self.current.iter().enumerate().fold(cost, |m, (k, &jk)| {
                m.max((self.lx[i * self.n + k] - self.ly[j * self.n + jk]).abs())
            });
            if added < self.best {
                self.used[j] = true;
                self.current.push(j);
                self.visit(added);
                self.current.pop();
                self.used[j] = false;
            }
        }
    }
}

/// Annealing over permutations with transposition moves.
struct TranspositionSearch<'a> {
    tracker: DistortionTracker<'a>,
}

impl Landscape for TranspositionSearch<'_> {
    type Undo = (usize, usize);
    type Snapshot = Vec<usize>;

    fn energy(&self) -> f64 {
        self.tracker.value()
    }

    fn perturb(&mut self, rng: &mut SearchRng) -> Self::Undo {
        let n = self.tracker.elems().len();
        let a = rng.random_range(0..n);
        let mut b = rng.random_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        self.swap(a, b);
        (a, b)
    }

    fn undo(&mut self, (a, b): Self::Undo) {
        self.swap(a, b);
    }

    fn snapshot(&self) -> Self::Snapshot {
        self.tracker.elems().iter().map(|&(_, j)| j).collect()
    }
}

impl TranspositionSearch<'_> {
    fn swap(&mut self, a: usize, b: usize) {
        let (ja, jb) = (self.tracker.elems()[a].1, self.tracker.elems()[b].1);
        self.tracker.set(a, (a, jb));
        self.tracker.set(b, (b, ja));
    }
}

/// Seeded annealing upper bound, starting from the identity.
///
/// Infinite for spaces of different sizes. Non-increasing in `budget`.
pub fn lip_bound(
    x: &FiniteMetricSpace,
    y: &FiniteMetricSpace,
    budget: u64,
    seed: u64,
) -> LipResult {
    if x.len() != y.len() {
        return LipResult::infinite(Method::Heuristic);
    }
    let n = x.len();
    if n <= 2 {
        // At most two bijections, and both have the same value for n = 2.
        let id = Bijection::identity(n);
        return LipResult {
            value: LipValue::Finite(log_distortion(&id, x, y).expect("sizes checked")),
            witness: Some(id),
            method: Method::Heuristic,
        };
    }
    let (lx, ly) = (log_matrix(x), log_matrix(y));
    let mut search = TranspositionSearch {
        tracker: DistortionTracker::new(&lx, n, &ly, n, (0..n).map(|i| (i, i)).collect()),
    };
    let scale = search.tracker.value().max(1.0);
    let mut rng = rng_from(derive_seed(seed, 0x6c6970));
    let (_, best) = anneal(&mut search, budget, scale, &Schedule::default(), &mut rng);
    let witness = Bijection { perm: best };
    LipResult {
        value: LipValue::Finite(log_distortion(&witness, x, y).expect("sizes checked")),
        witness: Some(witness),
        method: Method::Heuristic,
    }
}
