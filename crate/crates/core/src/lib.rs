//! Online compression of vessel position streams into critical-point
//! synopses, and complex maritime event recognition over those synopses.

pub mod config;
pub mod geo;
pub mod grid;
pub mod interval;
pub mod noise;
pub mod patterns;
pub mod runtime;
pub mod synopsis;
pub mod tracker;

pub use config::Config;
pub use geo::{haversine, heading_delta, velocity_between, GeoPoint, Timestamp, VelocityVector};
pub use noise::{NoiseConfig, NoiseReason, NoiseVerdict, PositionReport};
pub use runtime::{replay, RunMetrics, RunOutput, RuntimeError};
pub use tracker::{Annotation, CriticalPoint, TrackerConfig, VesselState};
