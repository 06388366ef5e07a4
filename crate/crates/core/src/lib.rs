//! Simulation toolkit for the two-level contact process: host animals
//! follow a contact process, fleas live on top of them and can only
//! reproduce between hosted sites.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blocks;
pub mod dual;
pub mod error;
pub mod estimate;
pub mod events;
pub mod experiments;
pub mod format;
pub mod lattice;
pub mod opercolation;
pub mod oracle;
pub mod rng;
pub mod simulate;

pub use error::{Error, Result};
pub use estimate::EstimateWithCI;
pub use events::{EventLog, Mark, MarkKind, Rates, Stream};
pub use lattice::{Configuration, SiteSet, SiteState, Window};
pub use simulate::Trajectory;
