//! Multidimensional food-access measurement over census tracts.
//!
//! The pipeline builds ten access variables per tract (provider buffer
//! counts, population density, road-network distance to the nearest
//! supermarket, and seven demographic shares), runs a correlation-matrix
//! principal component analysis, classifies each component's contributing
//! variables, measures global spatial autocorrelation, and renders box-map
//! choropleths of the component scores.
//!
//! Modules, bottom up: [`geometry`], [`network`], [`ingest`], [`stats`],
//! [`report`], [`cli`].

#[cfg(feature = "cli")]
pub mod cli;
pub mod error;
pub mod geometry;
pub mod ingest;
pub mod network;
pub mod report;
pub mod stats;

pub use error::{Error, Result};
