//! Mobility analytics over call detail records (CDRs).
//!
//! The crate covers the whole pipeline from raw logs to experiments:
//!
//! - [`ingest`]: streaming parsers for antenna registries and CDR logs.
//! - [`predictor`]: a per-user, hour-of-week most-frequent-antenna model with
//!   explicit abstention, evaluation and antenna clustering.
//! - [`commute`]: home/work anchors, commute radius and call-density grids.
//! - [`events`]: sports fixtures, stadium zones, fan tagging and a
//!   fixture-aware predictor compared against the baseline.
//! - [`synth`]: seeded synthetic populations with planted ground truth.
//! - [`cli`]: the `cdr-mobility` command line.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod cli;
pub mod commute;
pub mod error;
pub mod events;
pub mod geo;
pub mod ingest;
pub mod predictor;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use geo::{grid_cell, haversine_km, BBox, GridSpec};
pub use types::{
    time_slot, Antenna, AntennaId, CallDirection, CdrRecord, GeoPoint, TimeSlot, UserId, UtcOffset,
};
