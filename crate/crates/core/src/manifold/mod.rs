//! Discretized closed Riemannian surfaces.
//!
//! A [`MetricField`] is a conformal deformation `e^{2φ} g` of a flat torus or
//! a round sphere. Sampling it and running all-pairs shortest paths on a
//! k-nearest-neighbor graph, with edges weighted by the deformed length of
//! the base geodesic segment, yields a [`SampledManifold`] whose
//! [`FiniteMetricSpace`](crate::FiniteMetricSpace) approximates the
//! Riemannian distance from above.

mod field;
mod sampler;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric::MetricError;

pub use field::{BaseManifold, Bump, ConformalFactor, FourierTerm, MetricField, Point};
pub use sampler::{geodesic_space, sample, SampleMode, SampledManifold};

#[allow(unused_imports)]
pub(crate) use field::{add, cross, dot, norm, scale, sub, unit};

/// Default neighbor count for the geodesic graph.
pub const DEFAULT_KNN: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ManifoldError {
    #[error("invalid metric field: {0}")]
    InvalidField(String),
    #[error("at least 4 sample points are required, got {0}")]
    TooFewPoints(usize),
    #[error("{0} points cannot be arranged on a grid with at least two rows and columns")]
    GridShape(usize),
    #[error("coincident points")]
    CoincidentPoints,
    #[error("knn must be at least 3 and below the number of points ({n}), got {knn}")]
    InvalidKnn { knn: usize, n: usize },
    #[error("neighbor graph is disconnected ({components} components)")]
    DisconnectedGraph { components: usize },
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Manifold description file: a metric field plus sampling parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldSpec {
    pub base: BaseManifold,
    #[serde(default)]
    pub conformal: ConformalFactor,
    pub n: usize,
    #[serde(default)]
    pub mode: SampleMode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_knn")]
    pub knn: usize,
}

fn default_knn() -> usize {
    DEFAULT_KNN
}

impl ManifoldSpec {
    pub fn field(&self) -> Result<MetricField, ManifoldError> {
        MetricField::new(self.base, self.conformal.clone())
    }

    pub fn build(&self) -> Result<SampledManifold, ManifoldError> {
        let field = self.field()?;
        let params = sample(&field, self.n, self.mode, self.seed)?;
        geodesic_space(&field, params, self.knn)
    }
}

/// Sidecar written next to a generated space file, recording where each
/// point sits in the parameter domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldSidecar {
    pub field: MetricField,
    pub knn: usize,
    pub params: Vec<Vec<f64>>,
}

impl ManifoldSidecar {
    pub fn new(m: &SampledManifold) -> Self {
        let dims = match m.field().base {
            BaseManifold::FlatTorus { .. } => 2,
            BaseManifold::Sphere { .. } => 3,
        };
        Self {
            field: m.field().clone(),
            knn: m.knn(),
            params: m.params().iter().map(|p| p[..dims].to_vec()).collect(),
        }
    }

    pub fn points(&self) -> Vec<Point> {
        self.params
            .iter()
            .map(|p| {
                [
                    p[0],
                    p.get(1).copied().unwrap_or(0.0),
                    p.get(2).copied().unwrap_or(0.0),
                ]
            })
            .collect()
    }

    /// Rebuilds the sampled manifold from the recorded points.
    pub fn rebuild(&self) -> Result<SampledManifold, ManifoldError> {
        self.field.validate()?;
        geodesic_space(&self.field, self.points(), self.knn)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_json_defaults() {
        let spec: ManifoldSpec =
            serde_json::from_str(r#"{"base": {"type": "flat_torus", "lx": 1, "ly": 1}, "n": 16}"#)
                .unwrap();
        assert_eq!(spec.knn, DEFAULT_KNN);
        assert_eq!(spec.mode, SampleMode::Grid);
        assert_eq!(spec.build().unwrap().space().len(), 16);
    }

    #[test]
    fn sidecar_rebuilds_identical_space() {
        let spec: ManifoldSpec = serde_json::from_str(
            r#"{"base": {"type": "sphere", "radius": 1.5}, "n": 30, "mode": "random", "seed": 4,
                "conformal": {"bumps": [{"center": [0, 0, 1], "height": 0.4, "width": 0.5}]}}"#,
        )
        .unwrap();
        let m = spec.build().unwrap();
        let side = ManifoldSidecar::new(&m);
        let json = serde_json::to_string(&side).unwrap();
        let back: ManifoldSidecar = serde_json::from_str(&json).unwrap();
        assert_eq!(back.rebuild().unwrap().space(), m.space());
    }
}
