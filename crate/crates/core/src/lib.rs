//! Automatic background replacement and foreground placement.
//!
//! A multitask verifier scores how well a foreground fits a background
//! (content consistency) and how plausible its location and scale are
//! (spatial consistency). The pipeline ranks gallery backgrounds by the
//! first score and then moves the foreground by finite-difference ascent
//! on the second.

pub mod adjuster;
pub mod cli;
pub mod dataforge;
pub mod error;
pub mod imaging;
pub mod pipeline;
pub mod scoring;
pub mod trainer;
pub mod verifier;

pub use error::{ArtError, Result};
pub use imaging::{composite, ForegroundPatch, Image, ParsingMap, Placement};
