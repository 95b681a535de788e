//! Private randomness distillation: rate regions, channel capacities,
//! decoupling bounds and exact protocol simulation.

pub mod capacity;
pub mod channels;
pub mod cli;
pub mod decouple;
pub mod entropy;
pub mod error;
pub mod ibit;
pub mod io;
pub mod protosim;
pub mod qmath;
pub mod rates;

pub use error::{Error, Result};
