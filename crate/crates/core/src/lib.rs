pub mod cli;
pub mod codec;
pub mod error;
pub mod eval;
pub mod gridize;
pub mod image;
pub mod nn;
pub mod train;

pub use error::{Error, Result};
