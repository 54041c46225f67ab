//! Single-pixel-camera simulation and RoI prioritised compressive acquisition.
//!
//! A low-resolution acquisition of the whole scene is reconstructed, regions
//! of interest are detected in it, and a fixed measurement budget is then
//! spent refining those regions one macro-pixel scale at a time, always
//! picking the region whose Refinement Indicator `||y_B - B x_C||²` is
//! largest.

pub mod detection;
pub mod error;
pub mod imaging;
pub mod io;
pub mod metrics;
pub mod operators;
pub mod pipeline;
pub mod rps;
pub mod solvers;
pub mod transforms;
pub mod verification;

pub use error::{Error, Result};
pub use imaging::{Image, MacroGrid, RoIWindow};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    mod overview {}
    #[doc = include_str!("../../../book/src/measurements.md")]
    mod measurements {}
    #[doc = include_str!("../../../book/src/budget.md")]
    mod budget {}
    #[doc = include_str!("../../../book/src/bound.md")]
    mod bound {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
