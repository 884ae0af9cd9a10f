//! Sketch reconstruction over a rate-limited in-band telemetry channel.
//!
//! A switch keeps a `d x w` count-min style [`Sketch`]. Every telemetry packet
//! carries one [`Sketchlet`] (a handful of buckets plus their address) to an
//! end-host, which rebuilds a [`ReconSketch`] from them. Which buckets go into
//! each sketchlet is decided by a selection policy:
//!
//! - **bitmap**: one bit per bucket marks "updated since last sent";
//! - **cookie**: a small saturating counter per bucket tracks update rate, and
//!   a self-tuning threshold picks the buckets that grew the most;
//! - **software**: a proactive scan over the cookie fills a FIFO of complete
//!   address tuples;
//! - **kchance**: the column-sketchlet baseline with `k` bit arrays.
//!
//! [`switchsim`] drives a trace through a switch and the end-host,
//! [`analytics`] turns snapshots into task accuracies and error
//! decompositions, and [`experiment`] runs parameter sweeps.

pub mod analytics;
pub mod error;
pub mod experiment;
pub mod selection;
pub mod sketch;
pub mod sketchlet;
pub mod switchsim;
pub mod traceio;

pub use error::{Error, Result};
pub use selection::Policy;
pub use sketch::{Confidence, FlowKey, ReconEstimate, ReconSketch, Sketch, SketchParams};
pub use sketchlet::{Sketchlet, SketchletLayout};
pub use switchsim::{SimConfig, SimResult};
pub use traceio::{EventKind, TraceEvent, ZipfSpec};
