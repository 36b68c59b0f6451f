//! Local Lie-Schwinger block diagonalization of the open XXZ spin-1/2 chain
//! near its Ising limit, with an exact-diagonalization cross-check battery.

pub mod flow;
pub mod lattice;
pub(crate) mod linalg;
pub mod model;
pub mod operator;
pub mod spectrum;
pub mod verify;

pub use lattice::{Interval, MacroLattice, MicroRange};
pub use model::{ModelParams, Regime};
pub use operator::{LocalOperator, StateVector};
pub use num_complex::Complex64;
