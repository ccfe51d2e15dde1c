//! Midair ultrasound tactile rendering: lateral-modulation trajectories with
//! amplitude-modulated vibration, phased-array drive synthesis, acoustic field
//! simulation, a simulated tracking loop and psychophysical harnesses.

pub mod analysis;
pub mod error;
pub mod field;
pub mod geometry;
pub mod par;
pub mod psychophys;
pub mod session;
pub mod stimulus;
pub mod synthesis;

pub use error::{Error, Result};
