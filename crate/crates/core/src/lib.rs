//! Subshifts on `Z` and `Z^2`: finite-set algebra, block counting and
//! entropy, Ornstein–Weiss quasitilings, tiling-defined subsystems, marker
//! blocks and sliding block codes onto full shifts.

pub mod error;
pub mod factor;
pub mod group;
pub mod marker;
pub mod pipeline;
pub mod shift;
pub mod subsystem;
pub mod tiling;

pub use error::{Error, Result};
