//! Numerical laboratory for finite-time blow-up in radial semilinear wave
//! equations
//!
//! ```text
//! ∂ₜ²u = ∂ᵣ²u + ((N−1)/r)∂ᵣu + |u|^{p−1}u + f(u) + g(r, t, ∂ᵣu, ∂ₜu)
//! ```
//!
//! with a subcritical power p > 1 (p ≤ 1 + 4/(N−1) for N ≥ 2), a lower-order
//! source |f(u)| ≤ M(1+|u|^q) with q < p, and a globally Lipschitz gradient
//! perturbation |g| ≤ M(1+|v|+|z|).  The crate provides
//!
//! * a method-of-lines radial solver with blow-up detection and per-point
//!   blow-up time extrapolation ([`radial_solver`]),
//! * the similarity-variable picture w(y,s) around a blow-up point, both by
//!   transforming radial runs and by evolving the w-equation directly on a
//!   clustered grid in the backward light cone ([`similarity`]),
//! * the Lyapunov machinery in similarity variables: the energy E₀, the
//!   perturbation corrections I and J, the damped functional H with its
//!   monotonicity report, and the weighted Hardy–Sobolev inequality
//!   ([`functionals`]),
//! * the stationary soliton family κ(d, y), single-soliton fitting and
//!   multi-soliton decomposition of frames ([`solitons`]),
//! * the soliton-center dynamical system, its explicit logarithmically
//!   spreading solution and forced perturbations ([`soliton_ode`]),
//! * blow-up surface geometry: non-characteristic cone tests, corner-shape
//!   exponent fits and blow-up speed band checks ([`geometry`]),
//! * the localized energy of rescaled solutions on shrinking balls and the
//!   associated a-priori bound check ([`local_energy`]),
//! * a reproducible experiment harness with manifest-hashed CSV/JSON
//!   artifacts and byte-identical replay ([`harness`]).
//!
//! Batch operations (per-point blow-up fits, decomposition batches, random
//! sweep checks) run data-parallel under the default `parallel` feature and
//! fall back to sequential loops without it; results are identical either
//! way because every random draw happens before the parallel dispatch.

pub mod error;
pub mod expr;
pub mod fitting;
pub mod functionals;
pub mod geometry;
pub mod harness;
pub mod local_energy;
pub mod model;
pub mod ode;
pub(crate) mod par;
pub mod radial_solver;
pub mod similarity;
pub mod soliton_ode;
pub mod solitons;
pub mod ygrid;

pub use error::{Error, Result};
