//! Geodesics and acceleration-minimizing splines on the group of
//! diffeomorphisms of the flat torus with a right-invariant Sobolev metric.
//!
//! Fields live on a uniform periodic grid ([`spectral`]); diffeomorphisms are
//! identity plus a periodic displacement ([`diffeo`]); the reduced Eulerian
//! dynamics `ṁ + ad*_ξ m = α^♭`, `φ̇ = ξ∘φ` and its monitors live in
//! [`dynamics`]; [`solver`] minimizes `∫‖α‖²_{H^{s'}}` subject to boundary or
//! knot constraints with an exact discrete adjoint.

pub mod diffeo;
pub mod dynamics;
pub mod error;
pub mod fixtures;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
