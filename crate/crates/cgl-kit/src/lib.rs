//! Connection graph Laplacian toolkit.
//!
//! Builds weighted graphs whose edges carry orthogonal-group connections,
//! assembles the normalized operators L(W,G) = D⁻¹S, the noise-robust
//! zero-diagonal variant L₀(W,G) and the symmetric form L_s, and layers on
//! top of them: exact rotations and the rotationally invariant distance on
//! circular grids, Gaussian/elliptical noise models, diffusion and vector
//! diffusion embeddings, angular synchronization, perturbation bounds with
//! empirical verification, and two reproducible simulation harnesses.

pub mod bounds;
pub mod connection_graph;
pub mod datasets;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod noise;
pub mod rid;
pub mod spectral;
pub mod util;

pub use error::{CglError, Result};
