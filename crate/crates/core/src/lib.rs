//! Riemannian geometric features of piecewise Bézier surfaces and a
//! multi-feature fusion regressor for surface pressure coefficients.
//!
//! The crate is `no_std` (with `alloc`). It covers the pure numerical parts of
//! the pipeline:
//!
//! - [`bezier`]: control grids, Bernstein evaluation, analytic derivative jets
//!   and patch validity checks.
//! - [`geometry`]: metric, Christoffel symbols, curvature tensor, Ricci and
//!   scalar curvature from a jet.
//! - [`stencil`]: 9-point neighbourhoods at a calibrated chord spacing.
//! - [`dataset`]: feature packing, max-min normalisation and leave-one-AoA-out
//!   folds.
//! - [`nn`]: a small deterministic network engine, the context-weighted fusion
//!   model and a concatenation baseline.
//! - [`metrics`]: MSE, per-sample error maps and pairwise MSE reduction.
//!
//! File formats, synthetic data and the command-line harness live in the
//! `cpgeo` crate.

#![no_std]

extern crate alloc;

pub mod bezier;
pub mod dataset;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod nn;
pub mod stencil;

mod num;

pub use bezier::{ControlGrid, PatchId, PiecewiseManifold, SurfaceJet, SurfacePoint, Vec3};
pub use error::{Error, Result};
pub use geometry::{Convention, RiemannianFeatures};
pub use stencil::Stencil;
