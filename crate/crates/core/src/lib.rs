//! DRAM access-cost model and design-space explorer for tiled CNN accelerators.
//!
//! The crate maps the tiles a convolution layer moves between DRAM and the
//! on-chip buffers onto physical DRAM coordinates, classifies every access by
//! the row-buffer condition it meets, prices the resulting counts with a
//! per-architecture cost profile and searches partition x schedule x mapping
//! for the minimum energy-delay product.
//!
//! Module map:
//!
//! * [`workload`]: layer shapes, tilings, schedules and tile-traffic traces.
//! * [`dram`]: geometry, architecture variants, mapping policies, layouts and
//!   the access classifier.
//! * [`edp`]: cost profiles and the latency/energy/EDP arithmetic.
//! * [`dse`]: point evaluation and exhaustive exploration.
//! * [`config`]: the on-disk network, geometry, profile and design formats.

pub mod config;
pub mod dram;
pub mod dse;
pub mod edp;
mod error;
pub mod workload;

pub use error::{Error, Result};
