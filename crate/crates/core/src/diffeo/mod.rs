//! Diffeomorphisms of the torus as identity plus periodic displacement.
//!
//! Displacements are stored unwrapped so large flows do not alias; only the
//! evaluation points `x + d(x)` are reduced mod 2π.

mod flow;
mod interp;

use std::path::Path;

use serde_json::json;

use crate::error::{Error, Result};
use crate::spectral::{ensure_same, io, Field, GridSpec, ScalarField, VectorField};

pub use flow::{flow, flow_with, path_energy, VelocityPath};
pub use interp::{Interpolation, Sampler};

/// Any Jacobian determinant at or below this value is treated as leaving the group.
pub const MIN_JACOBIAN: f64 = 0.02;

const INVERSE_TOL: f64 = 1e-10;
const INVERSE_MAX_ITER: usize = 50;

/// The map `x ↦ x + displacement(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Diffeo {
    displacement: VectorField,
}

impl Diffeo {
    pub fn identity(grid: &GridSpec) -> Self {
        Self {
            displacement: VectorField::zeros(grid),
        }
    }

    /// Rigid translation `x ↦ x + shift`.
    pub fn translation(grid: &GridSpec, shift: &[f64]) -> Self {
        Self {
            displacement: VectorField::constant(grid, shift),
        }
    }

    /// Wraps a displacement after checking that the map stays non-degenerate.
    pub fn from_displacement(displacement: VectorField) -> Result<Self> {
        let phi = Self { displacement };
        phi.check_nondegenerate()?;
        Ok(phi)
    }

    pub(crate) fn from_displacement_unchecked(displacement: VectorField) -> Self {
        Self { displacement }
    }

    pub fn displacement(&self) -> &VectorField {
        &self.displacement
    }

    pub fn into_displacement(self) -> VectorField {
        self.displacement
    }

    pub fn grid(&self) -> &GridSpec {
        self.displacement.grid()
    }

    /// `D(Id + d)` per node: `entries[c][a] = δ_ca + ∂_a d_c`.
    pub fn differential(&self) -> Vec<Vec<Vec<f64>>> {
        let grid = self.grid();
        let dim = grid.dim();
        (0..dim)
            .map(|c| {
                let spec = grid.forward(self.displacement.component(c));
                (0..dim)
                    .map(|a| {
                        let mut d = grid.inverse(grid.derivative_spectrum(&spec, a));
                        if a == c {
                            d.iter_mut().for_each(|v| *v += 1.0);
                        }
                        d
                    })
                    .collect()
            })
            .collect()
    }

    pub fn check_nondegenerate(&self) -> Result<()> {
        if !self.displacement.is_finite() {
            return Err(Error::DegenerateMap {
                min_jacobian: f64::NAN,
                node: 0,
            });
        }
        let (node, min_jacobian) = jacobian(self).min();
        if min_jacobian.is_nan() || min_jacobian <= MIN_JACOBIAN {
            Err(Error::DegenerateMap { min_jacobian, node })
        } else {
            Ok(())
        }
    }

    pub fn write(&self, path: &Path, name: &str) -> Result<()> {
        io::write_field(&self.displacement, path, name, &[("type", json!("diffeo"))])
    }

    /// Reads a diffeomorphism (or a bare displacement field) and validates it.
    pub fn read(path: &Path) -> Result<Self> {
        let (d, meta): (VectorField, _) = io::read_field(path)?;
        if let Some(t) = meta.get("type").and_then(|v| v.as_str()) {
            if t != "diffeo" {
                return Err(Error::Format(format!(
                    "{}: expected type diffeo, found {t}",
                    path.display()
                )));
            }
        }
        Self::from_displacement(d)
    }
}

/// Jacobian determinant `det(I + Dd)` per node, by spectral differentiation.
pub fn jacobian(phi: &Diffeo) -> ScalarField {
    let dg = phi.differential();
    let grid = phi.grid().clone();
    let values = match grid.dim() {
        1 => dg[0][0].clone(),
        _ => (0..grid.len())
            .map(|i| dg[0][0][i] * dg[1][1][i] - dg[0][1][i] * dg[1][0][i])
            .collect(),
    };
    ScalarField { grid, values }
}

/// `α ∘ φ` by periodic cubic interpolation.
pub fn compose_field<K>(alpha: &Field<K>, phi: &Diffeo) -> Result<Field<K>> {
    compose_field_with(alpha, phi, Interpolation::Cubic)
}

pub fn compose_field_with<K>(alpha: &Field<K>, phi: &Diffeo, scheme: Interpolation) -> Result<Field<K>> {
    ensure_same(alpha.grid(), phi.grid())?;
    let sampler = Sampler::at_offsets(scheme, phi.displacement());
    Ok(alpha.map_components(|c| sampler.eval(c)))
}

/// `φ ∘ ψ`, i.e. `x ↦ φ(ψ(x))`.
pub fn compose(phi: &Diffeo, psi: &Diffeo) -> Result<Diffeo> {
    compose_with(phi, psi, Interpolation::Cubic)
}

pub fn compose_with(phi: &Diffeo, psi: &Diffeo, scheme: Interpolation) -> Result<Diffeo> {
    let moved = compose_field_with(phi.displacement(), psi, scheme)?;
    Diffeo::from_displacement(psi.displacement() + &moved)
}

/// `φ⁻¹` by Newton iteration on `y + d(y) = x`, using the interpolant's own gradient.
pub fn inverse(phi: &Diffeo) -> Result<Diffeo> {
    inverse_with(phi, Interpolation::Cubic)
}

pub fn inverse_with(phi: &Diffeo, scheme: Interpolation) -> Result<Diffeo> {
    phi.check_nondegenerate()?;
    let grid = phi.grid().clone();
    let dim = grid.dim();
    let npts = grid.len();
    let coeffs: Vec<Vec<f64>> = {
        let probe = Sampler::at_points(scheme, &grid, &[]);
        (0..dim)
            .map(|c| probe.prefilter(phi.displacement().component(c)))
            .collect()
    };
    // first fixed-point step e = -d(x) as the starting guess
    let mut e: Vec<[f64; 2]> = (0..npts)
        .map(|i| {
            let v = phi.displacement().at(i);
            [-v[0], -v[1]]
        })
        .collect();
    let mut residual = f64::INFINITY;
    for _ in 0..INVERSE_MAX_ITER {
        let pts: Vec<[f64; 2]> = (0..npts)
            .map(|i| {
                let x = grid.node(i);
                [x[0] + e[i][0], x[1] + e[i][1]]
            })
            .collect();
        let sampler = Sampler::at_points(scheme, &grid, &pts);
        let evals: Vec<(Vec<f64>, Vec<Vec<f64>>)> = coeffs.iter().map(|c| sampler.eval_coeffs_with_grad(c)).collect();
        let mut max_step = 0.0f64;
        for i in 0..npts {
            // G(e) = e + d(x + e)
            let mut g = [0.0; 2];
            let mut jac = [[0.0; 2]; 2];
            for c in 0..dim {
                g[c] = e[i][c] + evals[c].0[i];
                for a in 0..dim {
                    jac[c][a] = if a == c { 1.0 } else { 0.0 } + evals[c].1[a][i];
                }
            }
            let step = solve_small(dim, &jac, &g);
            for c in 0..dim {
                e[i][c] -= step[c];
                max_step = max_step.max(step[c].abs());
            }
        }
        residual = max_step;
        if !residual.is_finite() {
            break;
        }
        if residual < INVERSE_TOL {
            let mut data = vec![0.0; dim * npts];
            for c in 0..dim {
                for i in 0..npts {
                    data[c * npts + i] = e[i][c];
                }
            }
            let inv = Diffeo::from_displacement_unchecked(Field::from_vec_unchecked(&grid, data));
            inv.check_nondegenerate()?;
            return Ok(inv);
        }
    }
    Err(Error::InversionFailure {
        residual,
        iterations: INVERSE_MAX_ITER,
    })
}

fn solve_small(dim: usize, a: &[[f64; 2]; 2], b: &[f64; 2]) -> [f64; 2] {
    if dim == 1 {
        return [b[0] / a[0][0], 0.0];
    }
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    [
        (a[1][1] * b[0] - a[0][1] * b[1]) / det,
        (a[0][0] * b[1] - a[1][0] * b[0]) / det,
    ]
}
