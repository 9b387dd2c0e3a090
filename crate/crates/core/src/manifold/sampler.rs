use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::field::{norm, scale};
use super::{BaseManifold, ManifoldError, MetricField, Point};
use crate::metric::{FiniteMetricSpace, Tolerance};
use crate::search::rng_from;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleMode {
    /// Regular grid on the torus, Fibonacci lattice on the sphere.
    #[default]
    Grid,
    /// Seeded uniform sampling.
    Random,
}

/// `n` points of the parameter domain; deterministic in `(mode, seed)`.
///
/// Torus grids are `nx × ny` with `nx * ny = n`, the factorization whose
/// aspect ratio is closest to `lx / ly`, enumerated with x as the outer
/// index. The seed is ignored in grid mode.
pub fn sample(
    field: &MetricField,
    n: usize,
    mode: SampleMode,
    seed: u64,
) -> Result<Vec<Point>, ManifoldError> {
    field.validate()?;
    if n < 4 {
        return Err(ManifoldError::TooFewPoints(n));
    }
    let mut rng = rng_from(seed);
    let points = match (field.base, mode) {
        (BaseManifold::FlatTorus { lx, ly }, SampleMode::Grid) => {
            let (nx, ny) = grid_shape(n, lx / ly).ok_or(ManifoldError::GridShape(n))?;
            (0..nx)
                .flat_map(|i| {
                    (0..ny)
                        .map(move |j| [i as f64 * lx / nx as f64, j as f64 * ly / ny as f64, 0.0])
                })
                .collect()
        }
        (BaseManifold::FlatTorus { lx, ly }, SampleMode::Random) => (0..n)
            .map(|_| [rng.random::<f64>() * lx, rng.random::<f64>() * ly, 0.0])
            .collect(),
        (BaseManifold::Sphere { radius }, SampleMode::Grid) => {
            let golden = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
            (0..n)
                .map(|k| {
                    let z = 1.0 - (2.0 * k as f64 + 1.0) / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let (s, c) = (golden * k as f64).sin_cos();
                    [radius * r * c, radius * r * s, radius * z]
                })
                .collect()
        }
        (BaseManifold::Sphere { radius }, SampleMode::Random) => (0..n)
            .map(|_| loop {
                let v: Point = [
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                ];
                let len = norm(v);
                if len > 1e-9 {
                    break scale(v, radius / len);
                }
            })
            .collect(),
    };
    Ok(points)
}

fn grid_shape(n: usize, aspect: f64) -> Option<(usize, usize)> {
    (2..=n / 2)
        .filter(|nx| n % nx == 0 && n / nx >= 2)
        .map(|nx| (nx, n / nx))
        .min_by(|a, b| {
            let err = |(nx, ny): (usize, usize)| {
                ((nx as f64).ln() - (ny as f64).ln() - aspect.ln()).abs()
            };
            err(*a).total_cmp(&err(*b))
        })
}

/// A metric field together with sample points and their graph-geodesic
/// distances.
#[derive(Debug, Clone)]
pub struct SampledManifold {
    field: MetricField,
    params: Vec<Point>,
    knn: usize,
    space: FiniteMetricSpace,
}

impl SampledManifold {
    pub fn field(&self) -> &MetricField {
        &self.field
    }

    pub fn params(&self) -> &[Point] {
        &self.params
    }

    pub fn knn(&self) -> usize {
        self.knn
    }

    pub fn space(&self) -> &FiniteMetricSpace {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// The samples at `indices`, keeping this manifold's geodesic distances
    /// between them.
    pub fn subset(&self, indices: &[usize]) -> Result<SampledManifold, ManifoldError> {
        let space = self.space.subsample(indices)?;
        Ok(SampledManifold {
            field: self.field.clone(),
            params: indices.iter().map(|&i| self.params[i]).collect(),
            knn: self.knn,
            space,
        })
    }

    /// Index of the sample nearest to `p` in the base metric (lowest index on
    /// ties) and that base distance.
    pub fn nearest(&self, p: Point) -> (usize, f64) {
        let base = &self.field.base;
        self.params
            .iter()
            .enumerate()
            .map(|(i, &q)| (i, base.base_distance(p, q)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .expect("sampled manifolds are nonempty")
    }
}

/// Relative slack under which two base distances count as tied.
const TIE_REL: f64 = 1e-12;

#[derive(Clone, Copy, PartialEq)]
struct Dist(f64);

impl Eq for Dist {}

impl PartialOrd for Dist {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dist {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Builds the knn graph over `params` and its all-pairs shortest paths.
///
/// Each point is joined to its `knn` nearest neighbors in the base metric,
/// plus any further points tied with the last of them, so the graph does not
/// depend on the labeling. Edges are undirected. Edge weights come
/// from [`MetricField::edge_length`], computed once per edge from the
/// lower-indexed endpoint, so the matrix is symmetric by construction.
pub fn geodesic_space(
    field: &MetricField,
    params: Vec<Point>,
    knn: usize,
) -> Result<SampledManifold, ManifoldError> {
    field.validate()?;
    let n = params.len();
    if knn < 3 || knn >= n {
        return Err(ManifoldError::InvalidKnn { knn, n });
    }
    let params: Vec<Point> = params.into_iter().map(|p| field.base.wrap(p)).collect();

    let neighbors: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut cand: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (field.base.base_distance(params[i], params[j]), j))
                .collect();
            cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let cutoff = cand[knn - 1].0 * (1.0 + TIE_REL);
            cand.into_iter()
                .take_while(|&(d, _)| d <= cutoff)
                .map(|(_, j)| j)
                .collect()
        })
        .collect();

    let mut edges: Vec<(usize, usize)> = neighbors
        .iter()
        .enumerate()
        .flat_map(|(i, nb)| nb.iter().map(move |&j| (i.min(j), i.max(j))))
        .collect();
    edges.sort_unstable();
    edges.dedup();
    let weights: Vec<f64> = edges
        .par_iter()
        .map(|&(i, j)| field.edge_length(params[i], params[j]))
        .collect::<Result<_, _>>()?;

    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (&(i, j), &w) in edges.iter().zip(&weights) {
        adj[i].push((j, w));
        adj[j].push((i, w));
    }

    let components = count_components(&adj);
    if components > 1 {
        return Err(ManifoldError::DisconnectedGraph { components });
    }

    let rows: Vec<Vec<f64>> = (0..n).into_par_iter().map(|s| dijkstra(&adj, s)).collect();
    let mut flat = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            flat[i * n + j] = rows[i][j];
            flat[j * n + i] = rows[i][j];
        }
    }
    let space = FiniteMetricSpace::from_flat(n, flat, Tolerance::default())?
        .with_labels((0..n).map(|i| format!("p{i}")).collect())?;
    Ok(SampledManifold {
        field: field.clone(),
        params,
        knn,
        space,
    })
}

fn count_components(adj: &[Vec<(usize, f64)>]) -> usize {
    let mut seen = vec![false; adj.len()];
    let mut components = 0;
    for s in 0..adj.len() {
        if seen[s] {
            continue;
        }
        components += 1;
        seen[s] = true;
        let mut stack = vec![s];
        while let Some(u) = stack.pop() {
            for &(v, _) in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
    }
    components
}

fn dijkstra(adj: &[Vec<(usize, f64)>], source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; adj.len()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Reverse((Dist(0.0), source)));
    while let Some(Reverse((Dist(d), u))) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, w) in &adj[u] {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Reverse((Dist(nd), v)));
            }
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::ConformalFactor;

    const UNIT_TORUS: BaseManifold = BaseManifold::FlatTorus { lx: 1.0, ly: 1.0 };

    #[test]
    fn two_by_two_grid() {
        let f = MetricField::flat(UNIT_TORUS);
        let pts = sample(&f, 4, SampleMode::Grid, 0).unwrap();
        assert_eq!(
            pts,
            vec![
                [0.0, 0.0, 0.0],
                [0.0, 0.5, 0.0],
                [0.5, 0.0, 0.0],
                [0.5, 0.5, 0.0]
            ]
        );
    }

    #[test]
    fn grid_follows_aspect_ratio() {
        assert_eq!(grid_shape(12, 1.0), Some((3, 4)));
        assert_eq!(grid_shape(12, 3.0), Some((6, 2)));
        assert_eq!(grid_shape(7, 1.0), None);
        let f = MetricField::flat(UNIT_TORUS);
        assert_eq!(
            sample(&f, 7, SampleMode::Grid, 0),
            Err(ManifoldError::GridShape(7))
        );
        assert_eq!(
            sample(&f, 3, SampleMode::Grid, 0),
            Err(ManifoldError::TooFewPoints(3))
        );
    }

    #[test]
    fn random_sampling_is_seeded() {
        let f = MetricField::flat(UNIT_TORUS);
        let a = sample(&f, 20, SampleMode::Random, 11).unwrap();
        assert_eq!(a, sample(&f, 20, SampleMode::Random, 11).unwrap());
        assert_ne!(a, sample(&f, 20, SampleMode::Random, 12).unwrap());
        assert!(a
            .iter()
            .all(|p| (0.0..1.0).contains(&p[0]) && (0.0..1.0).contains(&p[1])));
    }

    #[test]
    fn sphere_samples_lie_on_the_sphere() {
        let f = MetricField::flat(BaseManifold::Sphere { radius: 2.0 });
        for mode in [SampleMode::Grid, SampleMode::Random] {
            for p in sample(&f, 50, mode, 3).unwrap() {
                assert!((norm(p) - 2.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn knn_bounds_and_connectivity() {
        let f = MetricField::flat(UNIT_TORUS);
        let pts = sample(&f, 16, SampleMode::Grid, 0).unwrap();
        assert_eq!(
            geodesic_space(&f, pts.clone(), 2).unwrap_err(),
            ManifoldError::InvalidKnn { knn: 2, n: 16 }
        );
        assert!(geodesic_space(&f, pts, 15).is_ok());
        // Two far-apart clusters of four points each on a long torus.
        let f = MetricField::flat(BaseManifold::FlatTorus { lx: 100.0, ly: 1.0 });
        let pts: Vec<Point> = [0.0, 50.0]
            .iter()
            .flat_map(|&x0| {
                [[0.0, 0.0], [0.1, 0.0], [0.0, 0.1], [0.1, 0.1]].map(|[dx, dy]| [x0 + dx, dy, 0.0])
            })
            .collect();
        assert_eq!(
            geodesic_space(&f, pts, 3).unwrap_err(),
            ManifoldError::DisconnectedGraph { components: 2 }
        );
    }

    #[test]
    fn duplicate_points_are_rejected() {
        let f = MetricField::flat(UNIT_TORUS);
        let mut pts = sample(&f, 16, SampleMode::Grid, 0).unwrap();
        pts[3] = pts[2];
        assert_eq!(
            geodesic_space(&f, pts, 4).unwrap_err(),
            ManifoldError::CoincidentPoints
        );
    }

    #[test]
    fn constant_factor_rescales_the_whole_space() {
        let c = 1.7_f64;
        let flat = MetricField::flat(UNIT_TORUS);
        let scaled = MetricField::new(UNIT_TORUS, ConformalFactor::constant(c.ln())).unwrap();
        let pts = sample(&flat, 64, SampleMode::Random, 5).unwrap();
        let a = geodesic_space(&flat, pts.clone(), 8).unwrap();
        let b = geodesic_space(&scaled, pts, 8).unwrap();
        let expect = a.space().rescale(c).unwrap();
        for i in 0..64 {
            for j in 0..64 {
                let (u, v) = (b.space().dist(i, j), expect.dist(i, j));
                assert!((u - v).abs() <= 1e-12 * v, "({i},{j}): {u} vs {v}");
            }
        }
    }

    #[test]
    fn nearest_sample() {
        let f = MetricField::flat(UNIT_TORUS);
        let m = geodesic_space(&f, sample(&f, 16, SampleMode::Grid, 0).unwrap(), 4).unwrap();
        let (i, d) = m.nearest([0.97, 0.26, 0.0]);
        assert_eq!(m.params()[i], [0.0, 0.25, 0.0]);
        assert!((d - 0.03f64.hypot(0.01)).abs() < 1e-12);
    }
}
