pub mod constraints;
pub mod el;
pub mod error;
pub mod mathfn;
pub mod samplers;
pub mod simulate;

pub use error::{Error, Result};
