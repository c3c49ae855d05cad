pub mod balayage;
pub mod cloud;
pub mod domain;
pub mod equilibrium;
pub mod error;
pub mod green;
pub mod harmonic;
pub mod linalg;
pub mod measure;
pub mod numeric;
pub mod region;
pub mod riesz;
pub mod sampling;
pub mod solver;

pub use error::{Error, Result};
