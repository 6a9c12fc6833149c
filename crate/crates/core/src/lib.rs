//! Moment and sum-of-squares machinery for convex polynomial optimization.

pub mod convexcert;
pub mod error;
pub mod hierarchy;
pub mod lmi;
pub mod moment;
pub mod polyalg;
pub mod sampling;
pub mod sdp;
pub mod sos;

pub use error::{Error, Result};
