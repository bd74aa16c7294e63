//! Exact computational tools for Conway's big picture and the arithmetic
//! that lives on it.
//!
//! * [`arith`]: canonical forms (content, primitive representatives,
//!   Hermite normal form) and exact 2x2 matrix arithmetic over Z and Q.
//! * [`picture`]: the big picture graph; hyperdistance, p-adic trees,
//!   spheres, balls, geodesics, graph export, Q-lattice compatibility.
//! * [`congruence`]: groups like Gamma0(N) acting on the picture; threads,
//!   snakes, Atkin-Lehner involutions, the normalizer, orbits and
//!   invariant trees.
//! * [`spectral`]: the GL2-system at the invertible fiber; Hamiltonian,
//!   Hecke operators, projections, a finite-support representation with
//!   exact time evolution, and partition functions.
//! * [`qseries`]: exact q-expansions; Eisenstein series, Delta, j, Faber
//!   polynomials, replicates and replicability, numeric evaluation,
//!   McKay-Thompson data.

pub mod arith;
pub mod congruence;
pub mod error;
pub mod picture;
pub mod qseries;
pub mod spectral;

pub use error::{Error, Result};
