//! Floquet band structures of a Dirichlet waveguide whose wall carries a
//! small periodic cavern, the spectral gap the cavern opens, and the
//! closed-form asymptotics of that gap.
//!
//! The modules follow the pipeline:
//!
//! * [`geometry`] builds cross-section, cell and half-space meshes;
//! * [`fem`] assembles trilinear/bilinear forms and solves for the lowest
//!   eigenpairs;
//! * [`cross_section`] extracts `M₁`, `M₂` and `∂ₙV₁(O')`;
//! * [`boundary_layer`] computes the polarization coefficient `P_θ`;
//! * [`floquet`] computes band diagrams and detects gaps;
//! * [`asymptotics`] evaluates the closed-form predictions;
//! * [`experiment`] runs configured studies and writes reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod boundary_layer;
pub mod cross_section;
pub mod error;
pub mod experiment;
pub mod fem;
pub mod floquet;
pub mod geometry;

pub use error::{Error, Result};
