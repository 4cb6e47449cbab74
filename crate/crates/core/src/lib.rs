//! Simulation and analysis toolkit for double-Λ spontaneous four-wave mixing
//! photon-pair sources in cold atomic ensembles.

pub mod analysis;
pub mod atomic;
pub mod error;
pub mod noise_model;
pub mod source;
pub mod spectrum;
pub mod tags;
pub mod zeeman;

pub use error::{Error, Result};

#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/atomic.md")]
    mod atomic {}
    #[doc = include_str!("../../../book/src/spectrum.md")]
    mod spectrum {}
    #[doc = include_str!("../../../book/src/zeeman.md")]
    mod zeeman {}
    #[doc = include_str!("../../../book/src/noise.md")]
    mod noise {}
    #[doc = include_str!("../../../book/src/source.md")]
    mod source {}
    #[doc = include_str!("../../../book/src/analysis.md")]
    mod analysis {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
