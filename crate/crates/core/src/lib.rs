pub mod descriptions;
pub mod dynamics;
pub mod error;
pub mod fock;
pub mod linalg;
pub mod meter;
pub mod multiparticle;
pub mod random;
pub mod report;
pub mod scenario;
pub mod separation;

pub use error::{Error, Result};
