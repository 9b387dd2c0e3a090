//! Graph-geodesic approximations against closed-form distances.

use moduli_core::manifold::{
    geodesic_space, sample, BaseManifold, ConformalFactor, MetricField, Point, SampleMode,
    SampledManifold,
};
use proptest::prelude::*;

const UNIT: BaseManifold = BaseManifold::FlatTorus { lx: 1.0, ly: 1.0 };

/// Flat torus distance: the shortest of the nine nearest lattice translates.
fn torus_oracle(lx: f64, ly: f64, a: Point, b: Point) -> f64 {
    let mut best = f64::INFINITY;
    for i in -1..=1 {
        for j in -1..=1 {
            let dx = b[0] - a[0] + i as f64 * lx;
            let dy = b[1] - a[1] + j as f64 * ly;
            best = best.min(dx.hypot(dy));
        }
    }
    best
}

fn flat_grid(side: usize, knn: usize) -> SampledManifold {
    let field = MetricField::flat(UNIT);
    geodesic_space(
        &field,
        sample(&field, side * side, SampleMode::Grid, 0).unwrap(),
        knn,
    )
    .unwrap()
}

/// Largest `(graph - exact) / exact` and smallest `graph - exact` over all pairs.
fn errors(m: &SampledManifold) -> (f64, f64) {
    let p = m.params();
    let mut worst_rel = 0.0_f64;
    let mut least_gap = f64::INFINITY;
    for i in 0..p.len() {
        for j in (i + 1)..p.len() {
            let exact = torus_oracle(1.0, 1.0, p[i], p[j]);
            let graph = m.space().dist(i, j);
            worst_rel = worst_rel.max((graph - exact).abs() / exact);
            least_gap = least_gap.min(graph - exact);
        }
    }
    (worst_rel, least_gap)
}

#[test]
fn half_way_round_is_one_half() {
    let m = flat_grid(16, 8);
    let far = m
        .params()
        .iter()
        .position(|p| p[0] == 0.5 && p[1] == 0.0)
        .unwrap();
    assert_eq!(m.params()[0], [0.0, 0.0, 0.0]);
    assert!((m.space().dist(0, far) - 0.5).abs() < 1e-12);
}

#[test]
fn graph_distances_dominate_the_flat_metric() {
    for side in [8, 16, 24] {
        let (_, gap) = errors(&flat_grid(side, 8));
        assert!(
            gap >= -1e-12,
            "side {side}: graph undercuts the metric by {gap}"
        );
    }
}

#[test]
fn eight_neighbours_give_the_octile_metric() {
    // With the 8-neighbourhood every path is made of axis and diagonal
    // steps. The octile/Euclidean ratio peaks at √(4 - 2√2) in the 22.5°
    // direction, and the displacement (2, 1) already realizes (1 + √2) / √5,
    // at any resolution.
    let sup = (4.0 - 2.0 * 2f64.sqrt()).sqrt() - 1.0;
    let slope_half = (1.0 + 2f64.sqrt()) / 5f64.sqrt() - 1.0;
    for side in [16, 32] {
        let (rel, _) = errors(&flat_grid(side, 8));
        assert!(rel <= sup + 1e-12, "side {side}: {rel}");
        assert!(rel >= slope_half - 1e-12, "side {side}: {rel}");
    }
}

#[test]
fn wider_neighbourhoods_reach_two_percent() {
    let (rel, gap) = errors(&flat_grid(32, 48));
    assert!(gap >= -1e-12);
    assert!(rel <= 0.02, "32×32 grid, knn 48: {rel}");
}

#[test]
fn refinement_never_lengthens_shared_distances() {
    // The 8×8 grid sits inside the 16×16 grid, which sits inside the 32×32 grid.
    let grids: Vec<SampledManifold> = [8, 16, 32].into_iter().map(|s| flat_grid(s, 8)).collect();
    let exact = |a: Point, b: Point| torus_oracle(1.0, 1.0, a, b);
    for w in grids.windows(2) {
        let (coarse, fine) = (&w[0], &w[1]);
        let index: Vec<usize> = coarse
            .params()
            .iter()
            .map(|p| fine.params().iter().position(|q| q == p).unwrap())
            .collect();
        for i in 0..coarse.len() {
            for j in 0..coarse.len() {
                let (c, f) = (
                    coarse.space().dist(i, j),
                    fine.space().dist(index[i], index[j]),
                );
                let e = if i == j {
                    0.0
                } else {
                    exact(coarse.params()[i], coarse.params()[j])
                };
                assert!(f <= c + 1e-12, "{i} {j}: {f} > {c}");
                assert!(f >= e - 1e-12);
            }
        }
    }
}

#[test]
fn sphere_graph_distances_dominate_great_circles() {
    let r = 2.0;
    let field = MetricField::flat(BaseManifold::Sphere { radius: r });
    let m = geodesic_space(&field, sample(&field, 200, SampleMode::Grid, 0).unwrap(), 8).unwrap();
    let p = m.params();
    let mut worst = 0.0_f64;
    for i in 0..p.len() {
        assert!((p[i].iter().map(|c| c * c).sum::<f64>().sqrt() - r).abs() < 1e-12);
        for j in (i + 1)..p.len() {
            let cos = p[i].iter().zip(&p[j]).map(|(a, b)| a * b).sum::<f64>() / (r * r);
            let arc = r * cos.clamp(-1.0, 1.0).acos();
            let graph = m.space().dist(i, j);
            assert!(graph >= arc * (1.0 - 1e-12), "{i} {j}");
            worst = worst.max(graph / arc - 1.0);
        }
    }
    assert!(worst < 0.25, "{worst}");
}

#[test]
fn rectangular_torus_matches_its_oracle() {
    let (lx, ly) = (1.0, 1.5);
    let field = MetricField::flat(BaseManifold::FlatTorus { lx, ly });
    let m = geodesic_space(&field, sample(&field, 24, SampleMode::Grid, 0).unwrap(), 8).unwrap();
    let p = m.params();
    for i in 0..p.len() {
        for j in (i + 1)..p.len() {
            let exact = torus_oracle(lx, ly, p[i], p[j]);
            let graph = m.space().dist(i, j);
            assert!(
                graph >= exact - 1e-12 && graph <= exact * 1.1,
                "{i} {j}: {graph} vs {exact}"
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn constant_factor_is_a_rescaling(c in 0.2..5.0f64, seed in any::<u64>()) {
        let flat = MetricField::flat(UNIT);
        let scaled = MetricField::new(UNIT, ConformalFactor::constant(c.ln())).unwrap();
        let pts = sample(&flat, 30, SampleMode::Random, seed).unwrap();
        let a = geodesic_space(&flat, pts.clone(), 6).unwrap().space().rescale(c).unwrap();
        let b = geodesic_space(&scaled, pts, 6).unwrap();
        for i in 0..30 {
            for j in 0..30 {
                let (u, v) = (a.dist(i, j), b.space().dist(i, j));
                prop_assert!((u - v).abs() <= 1e-12 * u.max(v), "{} vs {}", u, v);
            }
        }
    }

    #[test]
    fn relabeling_params_permutes_the_matrix(
        perm in Just((0..25).collect::<Vec<usize>>()).prop_shuffle(),
        seed in any::<u64>(),
    ) {
        let field = MetricField::new(UNIT, ConformalFactor::constant(0.1)).unwrap();
        let pts = sample(&field, 25, SampleMode::Random, seed).unwrap();
        let shuffled: Vec<Point> = perm.iter().map(|&k| pts[k]).collect();
        let a = geodesic_space(&field, pts, 6).unwrap();
        let b = geodesic_space(&field, shuffled, 6).unwrap();
        let expected = a.space().permuted(&perm).unwrap();
        for i in 0..25 {
            for j in 0..25 {
                let (u, v) = (expected.dist(i, j), b.space().dist(i, j));
                prop_assert!((u - v).abs() <= 1e-12 * u.max(v));
            }
        }
    }
}
