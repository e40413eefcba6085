//! Spectral ground-state solver for the quasi-classical energy of linearly
//! coupled particle-field (Pauli-Fierz type) models: Hartree reduction of the
//! Klein-Gordon-Schrödinger functional on a periodic box, coherent-field
//! reconstruction, and the associated limit/expansion studies.

pub mod electronic;
pub mod error;
mod fft;
pub mod fock;
pub mod grid;
pub mod hartree;
mod linalg;
pub mod minimize;
pub mod model;
pub mod studies;

pub use error::{CoreError, Result};
