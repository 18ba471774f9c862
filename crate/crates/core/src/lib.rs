//! Level-set percolation of the Gaussian free field on the metric graph of
//! `Z^d`: exact samplers, exact edge-opening connectivity, Monte Carlo
//! observables and network diagnostics.

pub mod error;
pub mod gff;
pub mod harmonic;
pub mod lattice;
pub mod level_set;
pub mod linalg;
pub mod loop_soup;
pub mod observables;
pub mod seeding;
pub mod stats;

pub use error::{Error, Result};
