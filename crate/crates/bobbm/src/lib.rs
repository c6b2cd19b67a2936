//! Numerical laboratory for the Galerkin-truncated periodic Benjamin-Ono-BBM
//! equation `∂_t u = -(1+|D_x|)^{-1} ∂_x P_N (u + u²)` on the torus.
//!
//! The crate provides:
//!
//! * [`spectral`] — mean-zero real trigonometric polynomials stored as
//!   positive-frequency Fourier coefficients, with Sobolev norms, projectors,
//!   multiplier operators and exact dealiased products;
//! * [`gaussian`] — sampling from the truncated Gaussian measures whose
//!   covariance is `|n|^{-2s-1}` per mode, energy-ball membership and
//!   tail-mass estimation;
//! * [`dynamics`] — the truncated vector field, a fixed-step fourth-order
//!   flow map, and the unitary linear propagator;
//! * [`trilinear`] — the trilinear energy derivative `Q_{s,N}`, its
//!   symmetrised split, and lattice scans of the dispersive weight `Ψ_s`;
//! * [`qi`] — exact Wick/Isserlis second moments of time-integrated
//!   trilinear forms under the linear flow, scaling-law fits, and the
//!   integrability-exponent arithmetic;
//! * [`density`] — Monte Carlo functionals of the transported density
//!   (L^p norms, exponential moments, change-of-variables orientation test);
//! * [`config`], [`record`], [`runner`], [`plot`] — experiment configuration,
//!   reproducible run records, dispatch, and SVG emission for the `bobbm` CLI.
//!
//! All Monte Carlo paths use counter-based random streams
//! ([`stream::CounterRng`]) keyed by `(seed, sample index, frequency)` and
//! deterministic pairwise tree reductions, so results are bit-reproducible
//! regardless of thread count.

pub mod config;
pub mod density;
pub mod dynamics;
pub mod error;
pub mod gaussian;
pub mod plot;
pub mod qi;
pub mod record;
pub mod runner;
pub mod spectral;
pub mod stream;
pub mod trilinear;

pub use config::{ExperimentConfig, ExperimentKind, SCHEMA_VERSION};
pub use error::Error;
pub use gaussian::GaussianSpec;
pub use record::{Estimate, RunRecord};
pub use spectral::FourierField;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
