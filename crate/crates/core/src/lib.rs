//! Distances between metrics on finite and sampled spaces.
//!
//! Four distances are provided, each exactly on tiny inputs and as seeded,
//! deterministic bounds otherwise:
//!
//! - [`gh`]: Gromov-Hausdorff distance via correspondences.
//! - [`eps`]: the ε-isometry distance (additive distortion of maps both ways).
//! - [`lipschitz`]: the Lipschitz distance over bijections.
//! - [`smooth`]: the smooth-Lipschitz distance over a parameterized family of
//!   diffeomorphisms of a sampled torus or sphere.
//!
//! [`manifold`] turns conformally deformed flat tori and round spheres into
//! [`FiniteMetricSpace`]s through shortest paths on neighbor graphs,
//! [`density`] runs the conformal-density experiment, and [`certify`] checks
//! the comparison inequalities between the distances on random instances.

pub mod certify;
pub mod density;
pub mod eps;
pub mod gh;
pub mod io;
pub mod lipschitz;
pub mod manifold;
pub mod metric;
pub mod search;
pub mod smooth;

pub use eps::{additive_distortion, eps_bound, eps_exact, EpsError, EpsResult, PointMap};
pub use gh::{distortion, gh_bound, gh_exact, Correspondence, GhError, GhResult, Method};
pub use lipschitz::{dilation, lip_bound, lip_exact, Bijection, LipError, LipResult, LipValue};
pub use manifold::{BaseManifold, ConformalFactor, MetricField, SampleMode, SampledManifold};
pub use metric::{FiniteMetricSpace, MetricError, Tolerance};
