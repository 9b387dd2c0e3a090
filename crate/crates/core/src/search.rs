//! Seeded local-search machinery shared by the heuristic distance bounds.
//!
//! Correspondence distortion, additive map distortion and (on log-distances)
//! bi-Lipschitz distortion all have the same shape: a set of elements
//! `(x, y)` and a cost that is the maximum over element pairs of
//! `|A[x, x'] - B[y, y']|`. [`DistortionTracker`] maintains that maximum
//! under single-element updates in amortized linear time, and [`anneal`]
//! drives it with a fixed-epoch simulated annealing schedule.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The generator behind every randomized routine in the crate.
pub type SearchRng = ChaCha8Rng;

pub fn rng_from(seed: u64) -> SearchRng {
    SearchRng::seed_from_u64(seed)
}

/// Mixes a stream index into a seed (splitmix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Maximum pairwise cost over a mutable list of `(x, y)` elements.
///
/// Both matrices must be symmetric.
#[derive(Debug, Clone)]
pub(crate) struct DistortionTracker<'a> {
    a: &'a [f64],
    na: usize,
    b: &'a [f64],
    nb: usize,
    elems: Vec<(usize, usize)>,
    row_max: Vec<f64>,
}

impl<'a> DistortionTracker<'a> {
    pub(crate) fn new(
        a: &'a [f64],
        na: usize,
        b: &'a [f64],
        nb: usize,
        elems: Vec<(usize, usize)>,
    ) -> Self {
        let mut t = Self {
            a,
            na,
            b,
            nb,
            row_max: vec![0.0; elems.len()],
            elems,
        };
        for e in 0..t.elems.len() {
            t.row_max[e] = t.row(e);
        }
        t
    }

    #[inline]
    fn cost(&self, p: (usize, usize), q: (usize, usize)) -> f64 {
        (self.a[p.0 * self.na + q.0] - self.b[p.1 * self.nb + q.1]).abs()
    }

    fn row(&self, e: usize) -> f64 {
        let p = self.elems[e];
        self.elems
            .iter()
            .enumerate()
            .filter(|&(f, _)| f != e)
            .fold(0.0_f64, |m, (_, &q)| m.max(self.cost(p, q)))
    }

    pub(crate) fn elems(&self) -> &[(usize, usize)] {
        &self.elems
    }

    pub(crate) fn value(&self) -> f64 {
        self.row_max.iter().fold(0.0_f64, |m, &v| m.max(v))
    }

    /// Replaces element `e` and repairs the per-element maxima.
    pub(crate) fn set(&mut self, e: usize, new: (usize, usize)) {
        let old = std::mem::replace(&mut self.elems[e], new);
        if old == new {
            return;
        }
        let mut own = 0.0_f64;
        for f in 0..self.elems.len() {
            if f == e {
                continue;
            }
            let q = self.elems[f];
            let c_new = self.cost(new, q);
            own = own.max(c_new);
            if c_new >= self.row_max[f] {
                self.row_max[f] = c_new;
            } else if self.cost(old, q) >= self.row_max[f] {
                // The old element may have been the only witness of this maximum.
                self.row_max[f] = self.row(f);
            }
        }
        self.row_max[e] = own;
    }
}

/// Fixed-epoch geometric cooling.
///
/// The temperature depends only on the step index, never on the total
/// budget, so a run with budget `n` is an exact prefix of a run with any
/// larger budget and best-so-far values are monotone in the budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    /// Steps per cooling epoch; the temperature resets at each epoch start.
    pub epoch: u64,
    /// Initial temperature as a fraction of the problem scale.
    pub t_start: f64,
    /// Final temperature of an epoch as a fraction of the problem scale.
    pub t_end: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            epoch: 2000,
            t_start: 0.05,
            t_end: 1e-4,
        }
    }
}

impl Schedule {
    pub fn temperature(&self, step: u64, scale: f64) -> f64 {
        let k = (step % self.epoch) as f64 / self.epoch as f64;
        scale * self.t_start * (self.t_end / self.t_start).powf(k)
    }
}

/// A search state that can be perturbed and rolled back.
pub(crate) trait Landscape {
    type Undo;
    type Snapshot;

    fn energy(&self) -> f64;
    fn perturb(&mut self, rng: &mut SearchRng) -> Self::Undo;
    fn undo(&mut self, undo: Self::Undo);
    fn snapshot(&self) -> Self::Snapshot;
}

/// Simulated annealing; returns the best energy seen and its snapshot.
pub(crate) fn anneal<L: Landscape>(
    land: &mut L,
    budget: u64,
    scale: f64,
    schedule: &Schedule,
    rng: &mut SearchRng,
) -> (f64, L::Snapshot) {
    let mut current = land.energy();
    let mut best = current;
    let mut best_snap = land.snapshot();
    if best == 0.0 || scale <= 0.0 {
        return (best, best_snap);
    }
    for step in 0..budget {
        let temp = schedule.temperature(step, scale);
        let undo = land.perturb(rng);
        let next = land.energy();
        let delta = next - current;
        let u: f64 = rng.random();
        if delta <= 0.0 || u < (-delta / temp).exp() {
            current = next;
            if current < best {
                best = current;
                best_snap = land.snapshot();
                if best == 0.0 {
                    break;
                }
            }
        } else {
            land.undo(undo);
        }
    }
    (best, best_snap)
}

/// Annealing over `(x, y)` element lists where each move retargets one
/// coordinate of one element.
pub(crate) struct ElementSearch<'a> {
    pub(crate) tracker: DistortionTracker<'a>,
    /// For each element, which coordinate may move and the size of its range.
    pub(crate) moves: Vec<Movable>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Movable {
    Y(usize),
    X(usize),
}

impl Landscape for ElementSearch<'_> {
    type Undo = (usize, (usize, usize));
    type Snapshot = Vec<(usize, usize)>;

    fn energy(&self) -> f64 {
        self.tracker.value()
    }

    fn perturb(&mut self, rng: &mut SearchRng) -> Self::Undo {
        let e = rng.random_range(0..self.moves.len());
        let old = self.tracker.elems()[e];
        let new = match self.moves[e] {
            Movable::Y(n) => (old.0, redraw(rng, old.1, n)),
            Movable::X(n) => (redraw(rng, old.0, n), old.1),
        };
        self.tracker.set(e, new);
        (e, old)
    }

    fn undo(&mut self, (e, old): Self::Undo) {
        self.tracker.set(e, old);
    }

    fn snapshot(&self) -> Self::Snapshot {
        self.tracker.elems().to_vec()
    }
}

/// Uniform draw from `0..n` excluding `current` when possible.
fn redraw(rng: &mut SearchRng, current: usize, n: usize) -> usize {
    if n <= 1 {
        return current;
    }
    let r = rng.random_range(0..n - 1);
    if r >= current {
        r + 1
    } else {
        r
    }
}

/// Index-proportional starting map `0..from -> 0..to`; the identity when sizes agree.
pub(crate) fn proportional_map(from: usize, to: usize) -> Vec<usize> {
    (0..from).map(|i| i * to / from).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(a: &[f64], na: usize, b: &[f64], nb: usize, elems: &[(usize, usize)]) -> f64 {
        let mut m = 0.0_f64;
        for (e, p) in elems.iter().enumerate() {
            for (f, q) in elems.iter().enumerate() {
                if e != f {
                    m = m.max((a[p.0 * na + q.0] - b[p.1 * nb + q.1]).abs());
                }
            }
        }
        m
    }

    #[test]
    fn tracker_matches_brute_force_under_random_updates() {
        let mut rng = rng_from(3);
        let (na, nb) = (5, 4);
        let mut sym = |n: usize| {
            let mut m = vec![0.0; n * n];
            for i in 0..n {
                for j in (i + 1)..n {
                    let v = rng.random::<f64>();
                    m[i * n + j] = v;
                    m[j * n + i] = v;
                }
            }
            m
        };
        let a = sym(na);
        let b = sym(nb);
        let elems: Vec<_> = (0..7).map(|k| (k % na, k % nb)).collect();
        let mut t = DistortionTracker::new(&a, na, &b, nb, elems);
        for _ in 0..500 {
            let e = rng.random_range(0..7);
            let p = (rng.random_range(0..na), rng.random_range(0..nb));
            t.set(e, p);
            assert_eq!(t.value(), brute(&a, na, &b, nb, t.elems()));
        }
    }

    #[test]
    fn schedule_ignores_budget() {
        let s = Schedule::default();
        assert_eq!(s.temperature(0, 2.0), 0.1);
        assert_eq!(s.temperature(s.epoch, 2.0), 0.1);
        assert!(s.temperature(s.epoch - 1, 2.0) < 2.0 * s.t_end * 1.01);
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
        assert_eq!(derive_seed(9, 4), derive_seed(9, 4));
    }

    #[test]
    fn proportional_map_is_identity_for_equal_sizes() {
        assert_eq!(proportional_map(4, 4), vec![0, 1, 2, 3]);
        assert_eq!(proportional_map(4, 2), vec![0, 0, 1, 1]);
        assert_eq!(proportional_map(2, 4), vec![0, 2]);
    }
}
