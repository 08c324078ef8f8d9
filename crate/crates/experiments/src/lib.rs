//! Simulation studies of distributed peer review: sweeps, paired method
//! comparisons, the CIGR/MBC boundary, balanced assignment and multistage
//! rounds.

pub mod boundary;
pub mod compare;
pub mod multistage;
pub mod output;
pub mod pipeline;
pub mod stats;
pub mod sweep;

pub use pipeline::{run_replicate, AssignmentMode, Method, Setup};
pub use sweep::{sweep, SweepParam, SweepRow, SweepSpec};
