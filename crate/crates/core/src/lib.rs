//! Models, evaluates and optimizes passive gravity-compensation supports
//! for the upper arm.

pub mod anthro;
pub mod bench;
pub mod error;
pub mod gss;
pub mod kinematics;
pub mod metrics;
pub mod optimizer;
pub mod sbs;
pub mod units;

pub use error::{Error, Result};
