pub mod cli;
pub mod error;
pub mod feasibility;
pub mod fixtures;
pub mod insider;
pub mod io;
pub mod model;
pub mod nflvr;
pub mod noarb;
pub mod scenario;
pub mod simulate;

pub use error::{Error, Result};
