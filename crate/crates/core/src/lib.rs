pub mod aniso;
pub mod band;
pub mod besov;
pub mod catalog;
pub mod checks;
pub mod config;
pub mod convergence;
pub mod dyadic;
pub mod energy;
pub mod error;
pub mod field;
pub mod grid;
pub mod harness;
pub mod hydro;
pub mod modal;

pub use error::{Error, Result};

/// Pinned float format for every exported number: 17 significant digits in
/// scientific notation.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/running.md")]
    pub struct Running;
    #[doc = include_str!("../../../book/src/spectral.md")]
    pub struct Spectral;
    #[doc = include_str!("../../../book/src/band.md")]
    pub struct Band;
    #[doc = include_str!("../../../book/src/convergence.md")]
    pub struct Convergence;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct Cli;
}
