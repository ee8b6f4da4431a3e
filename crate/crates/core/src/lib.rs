//! Singular axisymmetric stream-function problems on a bounded cylinder.
//!
//! The crate discretizes `−ψ₁,rr − (3/r)ψ₁,r − ψ₁,zz = ω₁` on
//! `{r < R, |z| < a}` with a cell-centered grid that never samples the axis,
//! and checks the family of weighted-Sobolev estimates satisfied by its
//! solutions: energy estimates, Kondratiev-type radial estimates obtained from
//! the Mellin transform of the radial model operator, Hardy inequalities and
//! the axis corrections `χ`, `η` that restore vanishing order at `r = 0`.
//!
//! Module map:
//! - [`domain`]: cylinder, grid, partition of unity, cutoff `K`.
//! - [`field`], [`stencil`], [`norms`], [`hardy`]: samples, derivatives, weighted norms.
//! - [`solver`]: flux-form assembly, preconditioned CG, velocity reconstruction.
//! - [`mellin`]: log-variable model problem solved on contours `Im λ = h`.
//! - [`corrections`]: `χ`, `η` and vanishing-order fits.
//! - [`estimates`]: manufactured cases, estimate reports and refinement studies.
//! - [`config`], [`io`], [`cli`]: run configuration, persistence, command line.

pub mod cli;
pub mod config;
pub mod corrections;
pub mod domain;
pub mod error;
pub mod estimates;
pub mod field;
pub mod hardy;
pub mod io;
pub mod mellin;
pub mod norms;
pub mod solver;
pub mod stencil;

pub use domain::{CutoffK, CylinderDomain, Grid, PartitionOfUnity};
pub use error::{Error, Result};
pub use field::{Field, Parity, TraceCurve};
pub use norms::{Region, WeightedNormSpec};
