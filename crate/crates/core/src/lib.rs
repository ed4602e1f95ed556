//! Coordinated path navigation for mixed fleets of surface vessels and
//! aerial vehicles driven by guiding vector fields.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod error;
pub mod guidance;
pub mod network;
pub mod paths;
pub mod regulator;
pub mod safety;
pub mod sim;
pub mod vehicles;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/paths.md")]
    mod paths {}
    #[doc = include_str!("../../../book/src/network.md")]
    mod network {}
    #[doc = include_str!("../../../book/src/guidance.md")]
    mod guidance {}
    #[doc = include_str!("../../../book/src/vehicles.md")]
    mod vehicles {}
    #[doc = include_str!("../../../book/src/safety.md")]
    mod safety {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/acceptance.md")]
    mod acceptance {}
}
