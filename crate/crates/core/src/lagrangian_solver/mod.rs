//! Time integration of the droplet in Lagrangian coordinates.
//!
//! The flow map `η(ξ, t) = ξ + θ(ξ, t)` carries the reference interval
//! `[-1, 1]` onto the wetted region and the height is recovered from
//! `h = h_ref/η_ξ`, so mass is conserved identically. The perturbation `θ` is
//! advanced by an implicit variational scheme (see [`model`]) solved with
//! Newton's method on a banded Jacobian.

pub mod checkpoint;
pub mod config;
pub mod map;
pub mod model;
pub mod reference;
pub mod simulate;
pub mod state;
pub mod step;

pub use checkpoint::{config_hash, Checkpoint};
pub use config::{ContactLaw, Scheme, SolverConfig, Variant};
pub use map::{lagrangian_map, validate_height};
pub use model::{DissipationParts, LagModel, Reduction};
pub use reference::{QuarticBump, ReferenceKind, ReferenceProfile};
pub use simulate::{remove_mean, simulate, StepRecord, Trajectory};
pub use state::{endpoint_slopes, LagState, Mode};
pub use step::{step, step_with, StepInfo};
