pub mod bench;
pub mod controller;
pub mod error;
pub mod learner;
pub mod mac_sim;
pub mod models;
pub mod workload;

pub use error::{Error, Result};
