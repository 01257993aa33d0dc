//! Exact information cost of the multiparty AND buzzers protocol, with
//! numerical checks of its local concavity conditions.

pub mod buzzers;
pub mod concavity;
pub mod discretize;
pub mod error;
pub mod measures;
pub mod optimize;
pub mod quadrature;
pub mod signals;

pub use error::{Error, Result};
pub use measures::{InputDistribution, InputLabel, Point};
