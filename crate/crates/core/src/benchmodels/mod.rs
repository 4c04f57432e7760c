//! Benchmark models: simply supported beam, plane truss and an
//! EOLE-discretized lognormal random field.

pub mod beam;
pub mod eole;
pub mod truss;

pub use beam::Beam;
pub use eole::{EoleDemo, EoleField, Grid};
pub use truss::{Truss, TrussLayout};
