pub mod adiabatic;
pub mod bargmann;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod fock;
pub mod hamiltonians;
pub mod linalg;
pub mod measurement;
pub mod sparse;
pub mod spectrum;

pub use error::{Error, Result};
