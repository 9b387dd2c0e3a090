use moduli_core::eps::{eps_bound, eps_exact};
use moduli_core::gh::{gh_bound, gh_exact, gh_lower_bound};
use moduli_core::lipschitz::{lip_bound, lip_exact};
use moduli_core::{FiniteMetricSpace, MetricError};
use proptest::prelude::*;

fn euclidean(points: &[Vec<f64>]) -> Option<FiniteMetricSpace> {
    let rows: Vec<Vec<f64>> = points
        .iter()
        .map(|p| {
            points
                .iter()
                .map(|q| {
                    p.iter()
                        .zip(q)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt()
                })
                .collect()
        })
        .collect();
    FiniteMetricSpace::validate(&rows).ok()
}

fn cloud(n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = FiniteMetricSpace> {
    (1..=3usize, n)
        .prop_flat_map(|(dim, n)| prop::collection::vec(prop::collection::vec(0.0..1.0f64, dim), n))
        .prop_filter_map("coincident points", |pts| euclidean(&pts))
}

fn permutation(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..n).collect::<Vec<_>>()).prop_shuffle()
}

fn gh(x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> f64 {
    gh_exact(x, y).unwrap().upper
}

fn eps(x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> f64 {
    eps_exact(x, y).unwrap().value
}

fn lip(x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> f64 {
    lip_exact(x, y).unwrap().value.as_f64()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn shrinking_one_distance_breaks_the_triangle(x in cloud(3..=5)) {
        // Pull d(0, 1) below |d(0, 2) - d(1, 2)|; the loader must refuse it.
        let mut rows = x.rows();
        let gap = (rows[0][2] - rows[1][2]).abs();
        prop_assume!(gap > 1e-3);
        rows[0][1] = 0.5 * gap;
        rows[1][0] = 0.5 * gap;
        let err = FiniteMetricSpace::validate(&rows).unwrap_err();
        prop_assert!(matches!(err, MetricError::TriangleViolation { .. }), "{err:?}");
    }

    #[test]
    fn exact_distances_are_symmetric(x in cloud(1..=4), y in cloud(1..=4)) {
        prop_assert_eq!(gh(&x, &y), gh(&y, &x));
        prop_assert_eq!(eps(&x, &y), eps(&y, &x));
        prop_assert_eq!(lip(&x, &y), lip(&y, &x));
    }

    #[test]
    fn exact_distances_satisfy_the_triangle(x in cloud(1..=3), y in cloud(1..=3), z in cloud(1..=3)) {
        for d in [gh, eps] {
            prop_assert!(d(&x, &z) <= d(&x, &y) + d(&y, &z) + 1e-9);
        }
    }

    #[test]
    fn lip_triangle_on_equal_sizes(
        (x, y, z) in (2..=5usize).prop_flat_map(|n| (cloud(n..=n), cloud(n..=n), cloud(n..=n)))
    ) {
        prop_assert!(lip(&x, &z) <= lip(&x, &y) + lip(&y, &z) + 1e-9);
    }

    #[test]
    fn relabeling_changes_nothing(
        (x, perm) in cloud(1..=4).prop_flat_map(|x| { let n = x.len(); (Just(x), permutation(n)) }),
        y in cloud(1..=4),
    ) {
        let px = x.permuted(&perm).unwrap();
        prop_assert_eq!(gh(&px, &y), gh(&x, &y));
        prop_assert_eq!(eps(&px, &y), eps(&x, &y));
        prop_assert_eq!(gh(&px, &x), 0.0);
        prop_assert_eq!(eps(&px, &x), 0.0);
        prop_assert_eq!(lip(&px, &x), 0.0);
    }

    #[test]
    fn common_rescaling(x in cloud(1..=4), y in cloud(1..=4), c in 0.1..10.0f64) {
        let (cx, cy) = (x.rescale(c).unwrap(), y.rescale(c).unwrap());
        let tol = 1e-12 * (1.0 + c);
        prop_assert!((gh(&cx, &cy) - c * gh(&x, &y)).abs() <= tol);
        prop_assert!((eps(&cx, &cy) - c * eps(&x, &y)).abs() <= tol);
        if x.len() == y.len() {
            prop_assert!((lip(&cx, &cy) - lip(&x, &y)).abs() <= 1e-12);
        }
    }

    #[test]
    fn sandwich_and_diameter_relations(x in cloud(1..=4), y in cloud(1..=4)) {
        let (g, e) = (gh(&x, &y), eps(&x, &y));
        let (dx, dy) = (x.diameter(), y.diameter());
        prop_assert!(e <= 2.0 * g + 1e-9);
        prop_assert!(g <= 1.5 * e + 1e-9);
        prop_assert!((dx - dy).abs() <= e + 1e-9);
        prop_assert!(e <= dx.max(dy) + 1e-9);
        prop_assert!(gh_lower_bound(&x, &y) <= g + 1e-12);
        prop_assert!(g <= 0.5 * dx.max(dy) + 1e-12);
    }

    #[test]
    fn lipschitz_controls_gh(
        (x, y) in (2..=4usize).prop_flat_map(|n| (cloud(n..=n), cloud(n..=n)))
    ) {
        let rho = lip(&x, &y);
        prop_assert!(gh(&x, &y) <= 0.5 * rho.exp_m1() * x.diameter().max(y.diameter()) + 1e-9);
    }

    #[test]
    fn heuristics_are_seeded(x in cloud(2..=6), y in cloud(2..=6), seed in any::<u64>()) {
        prop_assert_eq!(gh_bound(&x, &y, 200, seed), gh_bound(&x, &y, 200, seed));
        prop_assert_eq!(eps_bound(&x, &y, 200, seed), eps_bound(&x, &y, 200, seed));
        prop_assert_eq!(lip_bound(&x, &y, 200, seed), lip_bound(&x, &y, 200, seed));
    }

    #[test]
    fn more_budget_never_hurts(x in cloud(3..=6), y in cloud(3..=6), seed in any::<u64>()) {
        let small = gh_bound(&x, &y, 100, seed).upper;
        let large = gh_bound(&x, &y, 1000, seed).upper;
        prop_assert!(large <= small);
    }
}
