use serde::{Deserialize, Serialize};

use super::field::{Field, Momentum, VectorField};
use super::grid::{ensure_same, GridSpec};
use crate::error::{Error, Result};

/// Right-invariant Sobolev metric of order `s` with Fourier multiplier `(1 + |k|^2)^s`,
/// applied diagonally to every vector component.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SobolevMetric {
    order: f64,
}

impl SobolevMetric {
    pub fn new(order: f64) -> Self {
        assert!(order.is_finite(), "metric order must be finite");
        Self { order }
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    /// Checks `s > dim/2 + 1`, the regime where the group is a smooth Hilbert manifold.
    pub fn validate_for(&self, grid: &GridSpec) -> Result<()> {
        let threshold = grid.dim() as f64 / 2.0 + 1.0;
        if self.order > threshold {
            Ok(())
        } else {
            Err(Error::Validation(format!(
                "metric order s = {} must satisfy s > d/2 + 1 = {threshold} on the {}-torus",
                self.order,
                grid.dim()
            )))
        }
    }

    /// Multiplier `λ(k) = (1 + |k|^2)^s` given `|k|^2`.
    pub fn weight(&self, k2: f64) -> f64 {
        multiplier(k2, self.order)
    }
}

pub(crate) fn multiplier(k2: f64, order: f64) -> f64 {
    if order == 0.0 {
        1.0
    } else {
        (1.0 + k2).powf(order)
    }
}

/// Applies `(1 + |k|^2)^power` to every component.
pub fn bessel_potential<K>(field: &Field<K>, power: f64) -> Field<K> {
    let grid = field.grid().clone();
    field.map_components(|c| grid.apply_symbol(c, |mode| multiplier(grid.k2(mode), power)))
}

/// Metric isomorphism `u ↦ u^♭`: multiplies spectra by `λ(k)`.
pub fn flat(u: &VectorField, metric: &SobolevMetric) -> Momentum {
    bessel_potential(u, metric.order).recast()
}

/// Inverse metric isomorphism `m ↦ m^♯`: divides spectra by `λ(k)`.
pub fn sharp(m: &Momentum, metric: &SobolevMetric) -> VectorField {
    bessel_potential(m, -metric.order).recast()
}

/// `H^s` inner product `Σ_k λ(k) û(k)·conj(ŵ(k))`, average-normalized.
pub fn inner_hs(u: &VectorField, w: &VectorField, metric: &SobolevMetric) -> Result<f64> {
    ensure_same(u.grid(), w.grid())?;
    let grid = u.grid();
    let mut total = 0.0;
    for c in 0..u.dim() {
        let a = grid.forward(u.component(c));
        let b = grid.forward(w.component(c));
        total += a
            .iter()
            .zip(&b)
            .enumerate()
            .map(|(mode, (x, y))| metric.weight(grid.k2(mode)) * (x * y.conj()).re)
            .sum::<f64>();
    }
    Ok(total)
}

pub fn norm_hs_squared(u: &VectorField, metric: &SobolevMetric) -> f64 {
    inner_hs(u, u, metric).expect("same grid")
}

pub fn norm_hs(u: &VectorField, metric: &SobolevMetric) -> f64 {
    norm_hs_squared(u, metric).sqrt()
}

/// Squared dual norm `Σ_k (1 + |k|^2)^{-σ} |m̂(k)|^2` of a momentum.
pub fn dual_norm_squared(m: &Momentum, order: f64) -> f64 {
    let grid = m.grid();
    let mut total = 0.0;
    for c in 0..m.dim() {
        let spec = grid.forward(m.component(c));
        total += spec
            .iter()
            .enumerate()
            .map(|(mode, x)| multiplier(grid.k2(mode), -order) * x.norm_sqr())
            .sum::<f64>();
    }
    total
}

pub fn dual_norm(m: &Momentum, order: f64) -> f64 {
    dual_norm_squared(m, order).sqrt()
}

/// Zeroes every mode with some `|k_a|` above the 2/3-rule band.
pub fn dealias<K>(field: &Field<K>) -> Field<K> {
    let grid = field.grid().clone();
    field.map_components(|c| grid.apply_symbol(c, |mode| if grid.in_band(mode) { 1.0 } else { 0.0 }))
}
