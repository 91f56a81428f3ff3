//! # uvhand
//!
//! UV position maps for 3D hand meshes and the machinery around them:
//!
//! - [`mesh`]: triangle meshes, edge topology, edge-based unpooling, joint regression
//! - [`uv`]: mesh to UV position map encoding and decoding, templates, the UVP file format
//! - [`loss`]: UV, UV-gradient, vertex and multi-scale objectives with analytic gradients
//! - [`warp`]: projection of UV maps into feature space and bilinear feature warping
//! - [`nn`]: small from-scratch CNN layers, the two-stage UV networks, Adam and training loops
//! - [`srdata`]: ICP registration, UV smoothing and super-resolution training pairs
//! - [`metrics`]: pose/mesh errors, PCK AUC, F-score, Procrustes, depth RMSE and PSNR
//! - [`cli`]: the `uvhand` command-line front end
//! - [`gradcheck`]: finite-difference checks of every analytic gradient
//!
//! Runnable examples for each area live in `examples/`.

pub mod align;
pub mod cli;
mod error;
pub mod gradcheck;
pub mod loss;
pub mod mesh;
pub mod metrics;
pub mod nn;
pub mod srdata;
pub mod toy;
pub mod uv;
pub mod render;
pub mod warp;

pub use error::{Error, Result};
pub use mesh::{HandTopology, JointRules, TriMesh};
pub use uv::{Mask, NormalizationCube, UvForm, UvPositionMap, UvTemplate};
