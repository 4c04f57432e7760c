pub mod error;
pub mod par;
pub mod probcore;
pub mod polybasis;
pub mod lsq;
pub mod design;
pub mod benchmodels;
pub mod metrics;
pub mod lra;
pub mod pce;
pub mod reliability;
pub mod experiment;

pub use error::{Error, Result};
