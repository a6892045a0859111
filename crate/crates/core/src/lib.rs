//! Principal-value functionals of fractional Brownian motion: sampling,
//! local times, Hilbert transforms and the deterministic density bounds
//! behind them.

pub mod density;
pub mod error;
pub mod functional;
pub mod grid;
pub mod hilbert;
pub mod ladder;
pub mod model;
pub mod mollifier;
pub mod occupation;
pub mod quad;
pub mod sampler;
pub mod stats;

pub use error::{Error, Result};
pub use grid::TimeGrid;
pub use hilbert::SampledFunction;
pub use ladder::{EpsLadder, PVEstimate};
pub use model::{HurstIndex, Regime};
pub use occupation::{FieldKind, LocalTimeField, SpatialGrid};
pub use sampler::{Method, SamplePath, Sampler};
