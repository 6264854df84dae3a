pub mod cli;
pub mod construct;
pub mod error;
pub mod io;
pub mod linalg;
pub mod pd_bounds;
pub mod sampler;
pub mod sim;
pub mod structure;

pub use error::{Error, Result};
