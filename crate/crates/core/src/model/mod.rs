//! Canonical data types, validation and serialization.

mod ids;
mod registry;
mod types;

pub mod codec;
pub mod validate;

pub use ids::*;
pub use registry::*;
pub use types::*;
pub use validate::{Context, Validate, Violation, MAX_GOAL_DOMAINS};
