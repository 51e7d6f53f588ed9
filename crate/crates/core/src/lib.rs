pub mod bicombing;
pub mod chain;
pub mod cocycle;
pub mod convergence;
pub mod error;
pub mod generators;
pub mod geodesic;
pub mod graph;
pub mod hyperbolicity;
pub mod ideal;
pub mod io;
pub mod metric;
pub mod report;

pub use error::{Error, Result};
