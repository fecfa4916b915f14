//! Scheduled acquisition and analysis of traffic-map tiles.
//!
//! The pipeline: plan a Web-Mercator tile grid around a study area, capture
//! the tiles on a fixed cadence from a pluggable provider, archive them under
//! a timestamped naming scheme, stitch captures into mosaics, classify
//! congestion colors inside road-segment regions of interest, and compare
//! baseline against intervention periods statistically.
//!
//! Start with [`geo_grid::GridSpec`] for geometry, [`acquisition`] for
//! capture, [`mosaic`] + [`congestion`] for extraction, and [`analytics`]
//! for windowing and significance testing. [`synthmap`] generates fully
//! deterministic synthetic studies for validation and offline testing.

pub mod acquisition;
pub mod analytics;
pub mod cli;
pub mod config;
pub mod congestion;
pub mod error;
pub mod geo_grid;
pub mod mosaic;
pub mod synthmap;
pub mod tile_archive;

pub use error::{Error, Result};
