//! Numerical laboratory for simple magnetic systems on 2D disks.
//!
//! A magnetic system is a Riemannian metric `g` together with a magnetic
//! potential 1-form `α` on a disk-like domain. Charged particles follow
//! magnetic geodesics, Newton's law `∇_γ̇ γ̇ = Y(γ̇)` with `Y` the Lorentz
//! force of `Ω = dα`. This crate simulates those flows and the boundary
//! measurements they induce:
//!
//! * [`geometry`] — metrics, 1-forms, domains, Christoffel symbols, the
//!   Lorentz force, and magnetic convexity of the boundary.
//! * [`flow`] — the magnetic geodesic ODE with exit-event detection, the
//!   magnetic exponential map, and magnetic Jacobi fields.
//! * [`boundary`] — scattering relation, Mañé action potential between
//!   boundary points, gauge transformations, reversibility probes.
//! * [`transform`] — the magnetic ray transform `I` on tensor pairs, its
//!   measure-correct adjoint `I*`, the normal operator `N = I*I`, Santaló
//!   quadrature, and kinetic solutions.
//! * [`decomposition`] — P1 disk meshes, the pair operators `d` and `δ`,
//!   Dirichlet solves, and potential/solenoidal projections.
//! * [`inversion`] — linearized inversion of boundary data by conjugate
//!   gradients on the normal equations.
//! * [`analysis`] — curvature-type bounds, the index form, and numerical
//!   symbol-order sweeps for `N`.
//! * [`surface2d`] — fiberwise Hilbert transform, flow generators on the
//!   circle bundle, and the 2D transport identities.
//! * [`config`] — JSON experiment configuration shared with the CLI.
//!
//! Everything is specialized to dimension two; the few formulas carrying a
//! dimension factor use [`DIM`] so they read like their n-dimensional form.

pub mod analysis;
pub mod boundary;
pub mod config;
pub mod decomposition;
mod error;
pub mod flow;
pub mod geometry;
pub mod inversion;
pub mod quad;
pub mod surface2d;
pub mod transform;

pub use error::{Error, Result};

/// Spatial dimension. Fixed to 2 throughout; kept symbolic so weights like
/// `(DIM - 1) / 2` match their general form.
pub const DIM: usize = 2;

/// The weight `(n − 1)/2` applied to the 1-form slot of pair inner products.
pub const PAIR_BETA_WEIGHT: f64 = (DIM as f64 - 1.0) / 2.0;
