//! Steady axisymmetric subsonic compressible flow past a smooth obstacle,
//! in stream-function form.
//!
//! The library solves the steady compressible Euler equations for
//! axisymmetric flow around a compact smooth bump on the symmetry axis.
//! The flow is described by a Stokes stream function `psi(x, r)` satisfying
//! the quasilinear equation
//!
//! ```text
//! div( grad psi / (r * H) ) = r * F(psi) F'(psi) * H ,
//! ```
//!
//! where `H` is the subsonic density branch of the Bernoulli relation
//! evaluated at the momentum density `|grad psi|^2 / r^2` and `F` carries
//! the upstream speed transported along stream surfaces. Subsonicity is
//! enforced by a velocity-ratio truncation with margin `eps0`; a solution
//! whose maximal Mach ratio stays below `1 - 2 eps0` never activates the
//! truncation and is therefore a genuine Euler flow — the *certified
//! subsonic* outcome that the verification suite checks a posteriori.
//!
//! Main entry points:
//!
//! * [`gas::GasModel`] — polytropic gas and the subsonic density branch.
//! * [`profile::UpstreamProfile`] — admissible upstream velocity profiles,
//!   stream function, truncation and extension machinery.
//! * [`geometry::DomainGrid`] — masked Cartesian grid around the obstacle.
//! * [`solver`] — the damped Picard / conjugate-gradient solver with its
//!   axis-regularising continuation in `k`.
//! * [`flow`] — velocity/density reconstruction and the a posteriori
//!   verification checks (Euler residuals, streamline invariants,
//!   far-field decay, positivity, uniqueness probe).
//! * [`annulus`] — the one-dimensional annulus comparison flow used as an
//!   analytic lower barrier.
//! * [`continuation`] — sweeps in upstream density and bisection bracketing
//!   of the critical density.
//! * [`config`], [`fields`], [`runner`] — run configuration, file formats
//!   and the CLI task driver.
//!
//! # Example
//!
//! Solve uniform flow past nothing (the discrete solution then equals the
//! upstream stream function exactly) and check its certification:
//!
//! ```
//! use axiflow::gas::GasModel;
//! use axiflow::geometry::{DomainGrid, GridSpec, Obstacle};
//! use axiflow::profile::UpstreamProfile;
//! use axiflow::solver::{solve, SolveStart, SolverConfig};
//! use std::sync::Arc;
//!
//! let gas = GasModel::new(2.0).unwrap();
//! let profile = UpstreamProfile::uniform(1.0, 4.0).unwrap();
//! let trunc = profile.truncate(4.0).unwrap();
//! let grid = Arc::new(
//!     DomainGrid::build(
//!         Obstacle::none(),
//!         GridSpec { x_half: 2.0, l: 4.0, nx: 24, nr: 24 },
//!     )
//!     .unwrap(),
//! );
//! let cfg = SolverConfig::default();
//! let field = solve(&grid, &trunc, &gas, &cfg, SolveStart::Default, &mut None).unwrap();
//! assert!(field.is_certified());
//! // Uniform flow: Q = u / rho^((gamma-1)/2) = 1/2.
//! assert!((field.q - 0.5).abs() < 1e-7);
//! ```

#![warn(missing_docs)]
// Numeric code compares floats for exact branch selection on purpose; the
// sites are individually justified.
#![allow(clippy::float_cmp)]
// Physics formulas read better with explicit a + b*x shapes.
#![allow(clippy::suboptimal_flops)]

pub mod annulus;
pub mod config;
pub mod continuation;
pub mod error;
pub mod fields;
pub mod flow;
pub mod gas;
pub mod geometry;
pub mod linear;
pub mod numerics;
pub mod parallel;
pub mod profile;
pub mod runner;
pub mod solver;
pub mod streamline;

pub use error::{Error, Result};
