use std::fmt;
use std::marker::PhantomData;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use rand::Rng;

use super::grid::{ensure_same, GridSpec};
use crate::error::{Error, Result};

/// Marker for tangent vectors (velocities, accelerations).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tangent {}

/// Marker for covectors (momenta, forces).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cotangent {}

/// A `dim`-component periodic field sampled on a [`GridSpec`].
///
/// Values are stored component-major: all nodes of component 0, then all
/// nodes of component 1. The kind parameter separates vector fields from
/// momenta so that the metric isomorphisms are the only way across.
pub struct Field<K> {
    grid: GridSpec,
    data: Vec<f64>,
    _kind: PhantomData<K>,
}

pub type VectorField = Field<Tangent>;
pub type Momentum = Field<Cotangent>;

/// Scalar field on a grid (Jacobian determinants, energies per node).
#[derive(Clone, Debug)]
pub struct ScalarField {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn min(&self) -> (usize, f64) {
        self.values
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc })
    }
}

impl<K> Clone for Field<K> {
    fn clone(&self) -> Self {
        Self {
            grid: self.grid.clone(),
            data: self.data.clone(),
            _kind: PhantomData,
        }
    }
}

impl<K> fmt::Debug for Field<K> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("grid", &self.grid)
            .field("max_abs", &self.max_abs())
            .finish()
    }
}

impl<K> Field<K> {
    pub fn zeros(grid: &GridSpec) -> Self {
        Self {
            grid: grid.clone(),
            data: vec![0.0; grid.dim() * grid.len()],
            _kind: PhantomData,
        }
    }

    pub fn constant(grid: &GridSpec, value: &[f64]) -> Self {
        assert_eq!(value.len(), grid.dim(), "constant must have one entry per component");
        let n = grid.len();
        let mut data = Vec::with_capacity(grid.dim() * n);
        for &v in value {
            data.extend(std::iter::repeat_n(v, n));
        }
        Self::from_vec(grid, data).expect("length checked")
    }

    /// Builds a field from component-major values.
    pub fn from_vec(grid: &GridSpec, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.dim() * grid.len() {
            return Err(Error::Format(format!(
                "expected {} values for {grid}, got {}",
                grid.dim() * grid.len(),
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("field contains non-finite values".into()));
        }
        Ok(Self {
            grid: grid.clone(),
            data,
            _kind: PhantomData,
        })
    }

    pub(crate) fn from_vec_unchecked(grid: &GridSpec, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), grid.dim() * grid.len());
        Self {
            grid: grid.clone(),
            data,
            _kind: PhantomData,
        }
    }

    /// Samples `f(x, out)` at every node.
    pub fn from_fn(grid: &GridSpec, f: impl Fn(&[f64], &mut [f64])) -> Self {
        let dim = grid.dim();
        let n = grid.len();
        let mut data = vec![0.0; dim * n];
        let mut out = [0.0; 2];
        for i in 0..n {
            let x = grid.node(i);
            f(&x[..dim], &mut out[..dim]);
            for c in 0..dim {
                data[c * n + i] = out[c];
            }
        }
        Self::from_vec_unchecked(grid, data)
    }

    /// Random trigonometric polynomial with every per-axis wavenumber `|k_a| <= max_freq`.
    ///
    /// Coefficients are drawn uniformly in `[-1, 1]`, damped by `exp(-|k|^2 / max_freq^2)`,
    /// and the result is rescaled so that its largest nodal value equals `amplitude`.
    pub fn random_band_limited(grid: &GridSpec, max_freq: i64, amplitude: f64, rng: &mut impl Rng) -> Self {
        let dim = grid.dim();
        let n = grid.len();
        let mut data = Vec::with_capacity(dim * n);
        let width = (max_freq.max(1) * max_freq.max(1)) as f64;
        for _ in 0..dim {
            let spec: Vec<num_complex::Complex64> = (0..n)
                .map(|mode| {
                    let k = grid.wavenumber(mode);
                    if k[0].abs() > max_freq || k[1].abs() > max_freq {
                        return num_complex::Complex64::new(0.0, 0.0);
                    }
                    let damp = (-grid.k2(mode) / width).exp();
                    num_complex::Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * damp
                })
                .collect();
            data.extend(grid.inverse(spec));
        }
        let peak = data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if peak > 0.0 {
            let s = amplitude / peak;
            data.iter_mut().for_each(|v| *v *= s);
        }
        Self::from_vec_unchecked(grid, data)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let n = self.grid.len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.grid.len();
        &mut self.data[c * n..(c + 1) * n]
    }

    /// Value at node `idx` (unused trailing entry is zero).
    pub fn at(&self, idx: usize) -> [f64; 2] {
        let n = self.grid.len();
        let mut v = [0.0; 2];
        for (c, slot) in v.iter_mut().enumerate().take(self.dim()) {
            *slot = self.data[c * n + idx];
        }
        v
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::from_vec_unchecked(&self.grid, self.data.iter().map(|v| v * factor).collect())
    }

    /// `self += factor * other`.
    pub fn axpy(&mut self, factor: f64, other: &Self) {
        assert_eq!(self.grid, other.grid, "axpy on incompatible grids");
        self.data
            .iter_mut()
            .zip(&other.data)
            .for_each(|(a, b)| *a += factor * b);
    }

    /// Average-normalized L² pairing `(2π)^{-d} ∫ u·w dx`, exact for the grid's trigonometric interpolants.
    pub fn dot<K2>(&self, other: &Field<K2>) -> Result<f64> {
        ensure_same(&self.grid, &other.grid)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum::<f64>() / self.grid.len() as f64)
    }

    pub fn norm_l2(&self) -> f64 {
        (self.data.iter().map(|v| v * v).sum::<f64>() / self.grid.len() as f64).sqrt()
    }

    /// Reinterprets the values under another kind; only the metric maps should do this.
    pub(crate) fn recast<K2>(self) -> Field<K2> {
        Field {
            grid: self.grid,
            data: self.data,
            _kind: PhantomData,
        }
    }

    pub(crate) fn map_components(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for c in 0..self.dim() {
            data.extend(f(self.component(c)));
        }
        Self::from_vec_unchecked(&self.grid, data)
    }
}

impl<K> PartialEq for Field<K> {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.data == other.data
    }
}

impl<K> Add for &Field<K> {
    type Output = Field<K>;
    fn add(self, rhs: &Field<K>) -> Field<K> {
        assert_eq!(self.grid, rhs.grid, "addition on incompatible grids");
        Field::from_vec_unchecked(
            &self.grid,
            self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        )
    }
}

impl<K> Sub for &Field<K> {
    type Output = Field<K>;
    fn sub(self, rhs: &Field<K>) -> Field<K> {
        assert_eq!(self.grid, rhs.grid, "subtraction on incompatible grids");
        Field::from_vec_unchecked(
            &self.grid,
            self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        )
    }
}

impl<K> Mul<f64> for &Field<K> {
    type Output = Field<K>;
    fn mul(self, rhs: f64) -> Field<K> {
        self.scaled(rhs)
    }
}

impl<K> Neg for &Field<K> {
    type Output = Field<K>;
    fn neg(self) -> Field<K> {
        self.scaled(-1.0)
    }
}

impl<K> AddAssign<&Field<K>> for Field<K> {
    fn add_assign(&mut self, rhs: &Field<K>) {
        self.axpy(1.0, rhs);
    }
}

impl<K> SubAssign<&Field<K>> for Field<K> {
    fn sub_assign(&mut self, rhs: &Field<K>) {
        self.axpy(-1.0, rhs);
    }
}
