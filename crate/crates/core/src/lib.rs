//! Core analytics for quantifying how much each electricity customer
//! contributes to system peak demand, and for estimating that contribution
//! for customers that only have monthly billing data.
//!
//! The crate is organized as a pipeline:
//!
//! 1. [`ingest`] — parse, clean, and calendar-partition meter/SCADA CSV data.
//! 2. [`cmpc`] — coincident monthly peak contribution and peak-timing statistics.
//! 3. [`spectral`] — self-tuning spectral clustering of seasonal daily profiles.
//! 4. [`classify`] — multinomial logistic regression over peak-timing features.
//! 5. [`wcr`] — weighted clusterwise regression from monthly energy to peak share.
//! 6. [`synth`] — deterministic synthetic population generator for validation.
//! 7. [`strategies`] — segmentation strategy comparison and the direct-load-control
//!    demand-response simulation.
//!
//! Per-customer and per-candidate work runs on rayon when the `parallel`
//! feature (default) is enabled; every parallel loop is an ordered map over
//! independent items, so results are bit-identical to the sequential path.

pub mod calendar;
pub mod classify;
pub mod cmpc;
pub mod error;
pub mod ingest;
pub mod linalg;
pub mod par;
pub mod series;
pub mod spectral;
pub mod strategies;
pub mod synth;
pub mod wcr;

pub use calendar::{MonthKey, Season, SeasonCalendar};
pub use error::{Error, Result};
