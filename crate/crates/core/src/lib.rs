//! Finite-element laboratory for boundary concentration breaking in two
//! thermal insulation problems: maximizing heat content and minimizing
//! temperature decay, with closed-form radial oracles for balls and annuli.

pub mod error;
pub mod fem;
pub mod geometry;
pub mod heat_content;
pub mod radial_exact;
pub mod temp_decay;

pub use error::{Error, Result};
