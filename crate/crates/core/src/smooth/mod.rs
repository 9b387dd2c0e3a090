//! The smooth-Lipschitz distance on sampled surfaces.
//!
//! Diffeomorphisms are drawn from a finite-dimensional family: a rigid part
//! (unimodular linear map plus translation on the torus, rotation on the
//! sphere) followed by the RK4 flow of a band-limited vector field.
//! Estimates are upper bounds on the discretized distance, each reported
//! with the snapping padding it was measured under.

mod diffeo;
mod sl;

use thiserror::Error;

use crate::manifold::ManifoldError;

pub use diffeo::{
    compose, swirl_centers, torus_frequencies, unimodular_matrices, Compose, DiffeoParams,
    FlowMode, SurfaceMap, Swirl, FLOW_STEPS, SWIRL_WIDTH,
};
pub use sl::{lipschitz_constant, sl_bound, sl_bound_with, LipschitzConstant, SlOptions, SlResult};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SmoothError {
    #[error("manifolds or parameters live on different base surfaces")]
    DomainMismatch,
    #[error("invalid diffeomorphism parameters: {0}")]
    InvalidParams(String),
    #[error("sample sets differ in size ({0} vs {1})")]
    SizeMismatch(usize, usize),
    #[error("no family member induced a bijection between the sample sets")]
    NoBijectiveWitness,
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
}
