use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Uniform periodic grid on the torus `[0, 2π)^dim`.
///
/// Nodes are stored row-major: in two dimensions node `(i, j)` (with `i` along
/// the first axis) lives at flat index `i * n + j`. Fourier modes use the same
/// layout in FFT order, so mode index `j >= n/2` carries wavenumber `j - n`.
#[derive(Clone)]
pub struct GridSpec {
    inner: Arc<GridInner>,
}

struct GridInner {
    dim: usize,
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    wavenumbers: Vec<[i64; 2]>,
    k2: Vec<f64>,
    band: i64,
}

impl GridSpec {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::InvalidGrid(format!("dimension must be 1 or 2, got {dim}")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be a power of two >= 8, got {n}"
            )));
        }
        let mut planner = FftPlanner::<f64>::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let len = n.pow(dim as u32);
        let mut wavenumbers = Vec::with_capacity(len);
        for idx in 0..len {
            let mut k = [0i64; 2];
            let mut rem = idx;
            for a in (0..dim).rev() {
                k[a] = signed_wavenumber(rem % n, n);
                rem /= n;
            }
            wavenumbers.push(k);
        }
        let k2 = wavenumbers.iter().map(|k| (k[0] * k[0] + k[1] * k[1]) as f64).collect();
        Ok(Self {
            inner: Arc::new(GridInner {
                dim,
                n,
                forward,
                inverse,
                wavenumbers,
                k2,
                band: (n / 3) as i64,
            }),
        })
    }

    pub fn dim(&self) -> usize {
        self.inner.dim
    }

    pub fn n(&self) -> usize {
        self.inner.n
    }

    /// Number of nodes, `n^dim`.
    pub fn len(&self) -> usize {
        self.inner.wavenumbers.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.inner.n as f64
    }

    /// Largest per-axis wavenumber kept by the 2/3 dealiasing rule.
    pub fn band(&self) -> i64 {
        self.inner.band
    }

    /// Multi-index of node `idx` (unused trailing entries are zero).
    pub fn node_index(&self, idx: usize) -> [usize; 2] {
        let n = self.inner.n;
        match self.inner.dim {
            1 => [idx, 0],
            _ => [idx / n, idx % n],
        }
    }

    pub fn flat_index(&self, multi: [usize; 2]) -> usize {
        match self.inner.dim {
            1 => multi[0],
            _ => multi[0] * self.inner.n + multi[1],
        }
    }

    /// Coordinates of node `idx`.
    pub fn node(&self, idx: usize) -> [f64; 2] {
        let h = self.spacing();
        let m = self.node_index(idx);
        [m[0] as f64 * h, m[1] as f64 * h]
    }

    pub fn wavenumber(&self, mode: usize) -> [i64; 2] {
        self.inner.wavenumbers[mode]
    }

    /// `|k|^2` for mode `mode`.
    pub fn k2(&self, mode: usize) -> f64 {
        self.inner.k2[mode]
    }

    pub fn is_nyquist(&self, mode: usize, axis: usize) -> bool {
        self.inner.wavenumbers[mode][axis].unsigned_abs() as usize * 2 == self.inner.n
    }

    pub fn in_band(&self, mode: usize) -> bool {
        let k = self.inner.wavenumbers[mode];
        let b = self.inner.band;
        k[0].abs() <= b && k[1].abs() <= b
    }

    /// Average-normalized Fourier coefficients of a real nodal array.
    pub fn forward(&self, data: &[f64]) -> Vec<Complex64> {
        assert_eq!(data.len(), self.len(), "nodal array length does not match grid");
        let mut buf: Vec<Complex64> = data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut buf, true);
        let scale = 1.0 / self.len() as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
        buf
    }

    /// Nodal values (real part) of a coefficient array produced by [`forward`](Self::forward).
    pub fn inverse(&self, mut spec: Vec<Complex64>) -> Vec<f64> {
        assert_eq!(spec.len(), self.len(), "spectral array length does not match grid");
        self.transform(&mut spec, false);
        spec.into_iter().map(|c| c.re).collect()
    }

    /// Applies a real Fourier symbol indexed by mode.
    pub fn apply_symbol(&self, data: &[f64], symbol: impl Fn(usize) -> f64) -> Vec<f64> {
        let mut spec = self.forward(data);
        spec.iter_mut().enumerate().for_each(|(i, c)| *c *= symbol(i));
        self.inverse(spec)
    }

    /// Spectral derivative along `axis` of a coefficient array (Nyquist mode dropped).
    pub fn derivative_spectrum(&self, spec: &[Complex64], axis: usize) -> Vec<Complex64> {
        spec.iter()
            .enumerate()
            .map(|(i, c)| {
                if self.is_nyquist(i, axis) {
                    Complex64::new(0.0, 0.0)
                } else {
                    c * Complex64::new(0.0, self.inner.wavenumbers[i][axis] as f64)
                }
            })
            .collect()
    }

    pub fn derivative(&self, data: &[f64], axis: usize) -> Vec<f64> {
        let spec = self.forward(data);
        self.inverse(self.derivative_spectrum(&spec, axis))
    }

    fn transform(&self, buf: &mut [Complex64], forward: bool) {
        let n = self.inner.n;
        let fft = if forward {
            &self.inner.forward
        } else {
            &self.inner.inverse
        };
        match self.inner.dim {
            1 => fft.process(buf),
            _ => {
                // rows are contiguous; columns go through a transposed scratch copy
                fft.process(buf);
                let mut scratch = vec![Complex64::new(0.0, 0.0); buf.len()];
                transpose(buf, &mut scratch, n);
                fft.process(&mut scratch);
                transpose(&scratch, buf, n);
            }
        }
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in 0..n {
            dst[j * n + i] = src[i * n + j];
        }
    }
}

fn signed_wavenumber(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

impl PartialEq for GridSpec {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner) || (self.inner.dim == other.inner.dim && self.inner.n == other.inner.n)
    }
}

impl Eq for GridSpec {}

impl fmt::Debug for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GridSpec")
            .field("dim", &self.inner.dim)
            .field("n", &self.inner.n)
            .finish()
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}D n={}", self.inner.dim, self.inner.n)
    }
}

/// Errors unless both grids have the same dimension and size.
pub fn ensure_same(a: &GridSpec, b: &GridSpec) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::IncompatibleGrid {
            left: a.to_string(),
            right: b.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(GridSpec::new(3, 16).is_err());
        assert!(GridSpec::new(1, 4).is_err());
        assert!(GridSpec::new(2, 24).is_err());
        assert!(GridSpec::new(2, 16).is_ok());
    }

    #[test]
    fn wavenumber_layout() {
        let g = GridSpec::new(2, 8).unwrap();
        assert_eq!(g.wavenumber(0), [0, 0]);
        assert_eq!(g.wavenumber(1), [0, 1]);
        assert_eq!(g.wavenumber(8), [1, 0]);
        assert_eq!(g.wavenumber(7), [0, -1]);
        assert!(g.is_nyquist(4, 1));
        assert_eq!(g.band(), 2);
    }

    #[test]
    fn forward_of_single_mode() {
        let g = GridSpec::new(2, 16).unwrap();
        let data: Vec<f64> = (0..g.len()).map(|i| g.node(i)[1].cos()).collect();
        let spec = g.forward(&data);
        // cos x2 = (e^{i x2} + e^{-i x2}) / 2
        assert!((spec[1].re - 0.5).abs() < 1e-14);
        assert!((spec[15].re - 0.5).abs() < 1e-14);
        let total: f64 = spec.iter().map(|c| c.norm()).sum();
        assert!((total - 1.0).abs() < 1e-13);
    }

    #[test]
    fn derivative_of_sine() {
        let g = GridSpec::new(2, 32).unwrap();
        let data: Vec<f64> = (0..g.len())
            .map(|i| {
                let x = g.node(i);
                (2.0 * x[0]).sin() * x[1].cos()
            })
            .collect();
        let d0 = g.derivative(&data, 0);
        let d1 = g.derivative(&data, 1);
        for i in 0..g.len() {
            let x = g.node(i);
            assert!((d0[i] - 2.0 * (2.0 * x[0]).cos() * x[1].cos()).abs() < 1e-12);
            assert!((d1[i] + (2.0 * x[0]).sin() * x[1].sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn round_trip() {
        let g = GridSpec::new(2, 16).unwrap();
        let data: Vec<f64> = (0..g.len()).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let back = g.inverse(g.forward(&data));
        let scale = data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in data.iter().zip(&back) {
            assert!((a - b).abs() <= 1e-12 * scale);
        }
    }
}
