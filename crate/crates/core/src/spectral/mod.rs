//! Fourier-spectral calculus for periodic fields on the flat torus.

mod field;
mod grid;
pub mod io;
mod lie;
mod metric;

pub use field::{Cotangent, Field, Momentum, ScalarField, Tangent, VectorField};
pub use grid::GridSpec;
pub use lie::{ad, ad_dagger, coad};
pub use metric::{
    bessel_potential, dealias, dual_norm, dual_norm_squared, flat, inner_hs, norm_hs, norm_hs_squared, sharp,
    SobolevMetric,
};

pub use grid::ensure_same;
pub(crate) use lie::{ad_resolved, coad_resolved, Resolved};
pub(crate) use metric::multiplier;
