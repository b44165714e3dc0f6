//! Decomposition of real GDP per capita growth into a constant annual
//! increment and population-driven fluctuations around it.
//!
//! The pipeline runs bottom-up:
//!
//! - [`datastore`] reads GDP and population panels and fills missing years
//!   from the nearest later year.
//! - [`correction`] rescales per-capita levels from the total population to
//!   the population aged 15 and over, and compares PPP bases.
//! - [`trendlab`] computes annual increments, their mean and the OLS trend of
//!   increment on attained level, and assembles the cross-country table.
//! - [`fluctuations`] pools residuals, bins them and tests them against a
//!   fitted normal.
//! - [`growthmodel`] fits, projects and compares constant-increment paths.
//! - [`synthlab`] generates seeded synthetic panels with known ground truth.

pub mod correction;
pub mod csvio;
pub mod datastore;
pub mod error;
pub mod fluctuations;
pub mod growthmodel;
pub mod pipeline;
pub mod special;
pub mod synthlab;
pub mod trendlab;

pub use datastore::{AnnualSeries, PopulationTable, PppBasis, RawSeries, ValidationReport};
pub use error::{Error, Result};
pub use growthmodel::ModelParams;
