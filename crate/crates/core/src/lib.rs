pub mod contrast;
pub mod error;
pub mod evalcli;
pub mod numerics;
pub mod pipeline;
pub mod sampling;
pub mod synthdata;

pub use error::{Error, Result};
