pub mod assembly;
pub mod error;
pub mod fe_space;
pub mod geometry;
pub mod lift;
pub mod mesh;
pub mod mms;
pub mod solver;
pub mod study;

pub use error::{Error, Result};
