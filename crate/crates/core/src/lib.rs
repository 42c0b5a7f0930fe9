//! Passive single-photon imaging simulator with photon-inhibition policies.
//!
//! Models a SPAD-style sensor as streams of Bernoulli binary frames, runs
//! per-frame pixel inhibition policies over them, and scores the resulting
//! detection-energy / image-quality trade-off with energy-aware metrics,
//! exposure-bracket estimators, and closed-form oracle allocations.
//!
//! Determinism contract: every photon draw is a pure function of
//! `(seed, x, y, t)`, so identical seeds give bit-identical photon cubes no
//! matter how runs are scheduled, and policy arms sharing a seed see the same
//! photon arrival tape.

pub mod allocation;
pub mod bitmap;
pub mod bracket;
pub mod corpus;
pub mod cube;
pub mod edges;
pub mod hotpixel;
pub mod metrics;
pub mod pgm;
pub mod policy;
pub mod raster;
pub mod rng;
pub mod sensor;
pub mod tally;

pub use bitmap::Bitmap;
pub use cube::PhotonCube;
pub use raster::{FluxImage, Raster};
pub use rng::RngSpec;
pub use sensor::{ExposureSchedule, RateEstimate};
