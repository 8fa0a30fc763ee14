//! Altitude-adaptive, vision-only aerial geo-localization.
//!
//! The pipeline estimates the relative altitude of a nadir image from its
//! frequency content, rescales the image to the canonical altitude of a
//! pre-rendered reference map, classifies it into UTM grid cells, retrieves
//! the nearest reference tiles inside those cells and refines the fix with a
//! distance-weighted average over outlier-filtered candidates.

// Negated comparisons reject NaN together with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod altbins;
mod codec;
pub mod config;
pub mod error;
pub mod eval;
pub mod geoindex;
pub mod image;
pub mod marginlearn;
pub mod pipeline;
pub mod spectra;
pub mod synthmap;
pub mod workflow;

pub use error::{Error, Result};
pub use image::RgbImage;
