pub mod error;
pub mod numeric;

pub use error::{Error, Result};
pub mod cli;
pub mod cox;
pub mod power;
pub mod sample;
pub mod simulate;
