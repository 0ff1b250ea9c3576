pub mod acceptance;
pub mod calculus;
pub mod dynamics;
pub mod error;
pub mod forms;
pub mod grid;
pub mod interp;
pub mod invariants;
pub mod lagrangian;
pub mod scenario;
pub mod thermo;

pub use error::{Error, Result};
