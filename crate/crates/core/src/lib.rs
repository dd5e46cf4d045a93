//! Spectral Galerkin kernels for the rotating MHD system on the periodic box.
//!
//! Fields live on a Friedrichs-truncated lattice (the Euclidean ball
//! `|k| <= n`, period `2π` per axis). On top of that sit the Coriolis group
//! and its eigenframes, resonant-triad machinery for the filtered and limit
//! quadratic forms, time integration of the truncated systems, and a
//! numerical study of the whole-space dispersive kernel.

pub mod coriolis;
pub mod dispersion;
pub mod dynamics;
pub mod error;
pub mod field;
pub mod lattice;
pub mod product;
pub mod resonance;
pub mod state;

mod grid;
pub mod vec3;

pub use error::{Error, Result};
pub use field::{ScalarField, SpectralVectorField};
pub use lattice::{make_lattice, Lattice, Mode};
pub use state::StateU;
