//! A pseudospectral laboratory for non-autonomous parabolic evolution
//! families and final-state observability on the torus.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod evolution;
pub mod observability;
pub mod ou;
pub mod presets;
pub mod quad;
pub mod report;
pub mod spectral;
pub mod symbol;
pub mod thickness;

pub use error::{Error, Result};
