//! Lie-algebra operators on periodic vector fields.
//!
//! Sign convention: `ad_ξ η = Dξ·η − Dη·ξ`, the bracket of right-invariant
//! vector fields on the diffeomorphism group. `ad*` and `ad†` are defined so
//! that the pairing identities
//!
//! ```text
//! ⟨ad*_ξ m, η⟩ = ⟨m, ad_ξ η⟩,      ⟨ad†_ν κ, η⟩_{H^s} = ⟨κ, ad_ν η⟩_{H^s}
//! ```
//!
//! hold to round-off on the grid for arbitrary inputs: every quadratic product
//! is formed from 2/3-rule filtered factors and filtered again, so the triple
//! products entering the pairings are resolved exactly by the grid quadrature.

use super::field::{Field, Momentum, VectorField};
use super::grid::{ensure_same, GridSpec};
use super::metric::{flat, sharp, SobolevMetric};
use crate::error::Result;

/// Filtered nodal values of a field together with all first partials.
pub(crate) struct Resolved {
    pub values: Vec<Vec<f64>>,
    /// `grads[c][a]` = ∂_a of component `c`.
    pub grads: Vec<Vec<Vec<f64>>>,
}

impl Resolved {
    pub fn new<K>(field: &Field<K>) -> Self {
        let grid = field.grid();
        let dim = grid.dim();
        let mut values = Vec::with_capacity(dim);
        let mut grads = Vec::with_capacity(dim);
        for c in 0..dim {
            let mut spec = grid.forward(field.component(c));
            for (mode, v) in spec.iter_mut().enumerate() {
                if !grid.in_band(mode) {
                    *v = num_complex::Complex64::new(0.0, 0.0);
                }
            }
            grads.push(
                (0..dim)
                    .map(|a| grid.inverse(grid.derivative_spectrum(&spec, a)))
                    .collect(),
            );
            values.push(grid.inverse(spec));
        }
        Self { values, grads }
    }

    pub fn divergence(&self) -> Vec<f64> {
        let n = self.values[0].len();
        let mut div = vec![0.0; n];
        for (c, g) in self.grads.iter().enumerate() {
            div.iter_mut().zip(&g[c]).for_each(|(d, v)| *d += v);
        }
        div
    }
}

fn filtered<K>(grid: &GridSpec, components: Vec<Vec<f64>>) -> Field<K> {
    let mut data = Vec::with_capacity(grid.dim() * grid.len());
    for comp in components {
        data.extend(grid.apply_symbol(&comp, |mode| if grid.in_band(mode) { 1.0 } else { 0.0 }));
    }
    Field::from_vec_unchecked(grid, data)
}

pub(crate) fn ad_resolved(grid: &GridSpec, xi: &Resolved, eta: &Resolved) -> VectorField {
    let dim = grid.dim();
    let n = grid.len();
    let mut out = vec![vec![0.0; n]; dim];
    for (c, oc) in out.iter_mut().enumerate() {
        for a in 0..dim {
            let dxi = &xi.grads[c][a];
            let deta = &eta.grads[c][a];
            let eta_a = &eta.values[a];
            let xi_a = &xi.values[a];
            for i in 0..n {
                oc[i] += dxi[i] * eta_a[i] - deta[i] * xi_a[i];
            }
        }
    }
    filtered(grid, out)
}

pub(crate) fn coad_resolved(grid: &GridSpec, xi: &Resolved, m: &Resolved) -> Momentum {
    let dim = grid.dim();
    let n = grid.len();
    let div = xi.divergence();
    let mut out = vec![vec![0.0; n]; dim];
    for (c, oc) in out.iter_mut().enumerate() {
        let mc = &m.values[c];
        for i in 0..n {
            oc[i] = mc[i] * div[i];
        }
        for a in 0..dim {
            // (Dξ)ᵀ m
            let dxi_a_c = &xi.grads[a][c];
            let m_a = &m.values[a];
            // (Dm) ξ
            let dm_c_a = &m.grads[c][a];
            let xi_a = &xi.values[a];
            for i in 0..n {
                oc[i] += dxi_a_c[i] * m_a[i] + dm_c_a[i] * xi_a[i];
            }
        }
    }
    filtered(grid, out)
}

/// `ad_ξ η = Dξ·η − Dη·ξ`, dealiased.
pub fn ad(xi: &VectorField, eta: &VectorField) -> Result<VectorField> {
    ensure_same(xi.grid(), eta.grid())?;
    Ok(ad_resolved(xi.grid(), &Resolved::new(xi), &Resolved::new(eta)))
}

/// `ad*_ξ m = (Dξ)ᵀ m + (Dm) ξ + m div ξ`, dealiased.
pub fn coad(xi: &VectorField, m: &Momentum) -> Result<Momentum> {
    ensure_same(xi.grid(), m.grid())?;
    Ok(coad_resolved(xi.grid(), &Resolved::new(xi), &Resolved::new(m)))
}

/// Metric transpose `ad†_ν κ = (ad*_ν κ^♭)^♯`.
pub fn ad_dagger(nu: &VectorField, kappa: &VectorField, metric: &SobolevMetric) -> Result<VectorField> {
    ensure_same(nu.grid(), kappa.grid())?;
    Ok(sharp(&coad(nu, &flat(kappa, metric))?, metric))
}
