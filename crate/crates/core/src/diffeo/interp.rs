//! Evaluation of grid fields at off-grid points.
//!
//! Both schemes are separable: a field value at point `p` is
//! `Σ_j Π_a w_a(p_a - x_{j_a}) c_j`, where `c = Q f` is a prefiltered copy of
//! the nodal values. For the periodic cubic B-spline `Q` divides spectra by
//! the sampled spline symbol; for trigonometric evaluation `Q` is the
//! identity and `w` is the periodic Dirichlet kernel, so band-limited fields
//! are reproduced exactly. Keeping the two as stencils makes evaluation,
//! point gradients and the transpose (scatter) share one code path.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::spectral::{Field, GridSpec};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    /// Periodic cubic B-spline interpolation (production).
    #[default]
    Cubic,
    /// Direct trigonometric summation (validation; exact on band-limited fields).
    Spectral,
}

const PAR_THRESHOLD: usize = 1 << 14;

/// Precomputed stencils for a fixed set of evaluation points.
pub struct Sampler {
    grid: GridSpec,
    scheme: Interpolation,
    width: usize,
    points: usize,
    /// `[point][axis][width]`
    idx: Vec<u32>,
    w: Vec<f64>,
    dw: Vec<f64>,
}

impl Sampler {
    /// Stencils for the points `node_i + offset_i`; `offsets` is component-major like a field.
    pub fn at_offsets<K>(scheme: Interpolation, offsets: &Field<K>) -> Self {
        let grid = offsets.grid().clone();
        let dim = grid.dim();
        let npts = grid.len();
        let mut coords = vec![[0.0; 2]; npts];
        for (i, c) in coords.iter_mut().enumerate() {
            let x = grid.node(i);
            for a in 0..dim {
                c[a] = x[a] + offsets.component(a)[i];
            }
        }
        Self::at_points(scheme, &grid, &coords)
    }

    pub fn at_points(scheme: Interpolation, grid: &GridSpec, coords: &[[f64; 2]]) -> Self {
        let dim = grid.dim();
        let n = grid.n();
        let width = match scheme {
            Interpolation::Cubic => 4,
            Interpolation::Spectral => n,
        };
        let block = dim * width;
        let mut idx = vec![0u32; coords.len() * block];
        let mut w = vec![0.0; coords.len() * block];
        let mut dw = vec![0.0; coords.len() * block];
        let h = grid.spacing();
        let fill = |((p, ib), (wb, db)): ((&[f64; 2], &mut [u32]), (&mut [f64], &mut [f64]))| {
            for a in 0..dim {
                let s = a * width..(a + 1) * width;
                match scheme {
                    Interpolation::Cubic => {
                        cubic_stencil(p[a], h, n, &mut ib[s.clone()], &mut wb[s.clone()], &mut db[s])
                    }
                    Interpolation::Spectral => {
                        dirichlet_stencil(p[a], n, &mut ib[s.clone()], &mut wb[s.clone()], &mut db[s])
                    }
                }
            }
        };
        let it = coords
            .iter()
            .zip(idx.chunks_mut(block))
            .zip(w.chunks_mut(block).zip(dw.chunks_mut(block)));
        if coords.len() * block * width >= PAR_THRESHOLD {
            coords
                .par_iter()
                .zip(idx.par_chunks_mut(block))
                .zip(w.par_chunks_mut(block).zip(dw.par_chunks_mut(block)))
                .for_each(fill);
        } else {
            it.for_each(fill);
        }
        Self {
            grid: grid.clone(),
            scheme,
            width,
            points: coords.len(),
            idx,
            w,
            dw,
        }
    }

    pub fn scheme(&self) -> Interpolation {
        self.scheme
    }

    /// Applies the self-adjoint prefilter `Q` to one nodal component.
    pub fn prefilter(&self, values: &[f64]) -> Vec<f64> {
        match self.scheme {
            Interpolation::Spectral => values.to_vec(),
            Interpolation::Cubic => {
                let grid = &self.grid;
                let h = grid.spacing();
                grid.apply_symbol(values, |mode| {
                    let k = grid.wavenumber(mode);
                    (0..grid.dim())
                        .map(|a| 1.0 / (2.0 / 3.0 + (k[a] as f64 * h).cos() / 3.0))
                        .product()
                })
            }
        }
    }

    /// Values at the sample points of the field whose prefiltered coefficients are `coeffs`.
    pub fn eval_coeffs(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.points];
        self.for_points(&mut out, |p, slot| *slot = self.value_at(p, coeffs));
        out
    }

    /// Values and spatial gradients (`grads[a][p]`) at the sample points.
    pub fn eval_coeffs_with_grad(&self, coeffs: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let dim = self.grid.dim();
        let mut packed = vec![[0.0; 3]; self.points];
        self.for_points(&mut packed, |p, slot| *slot = self.value_grad_at(p, coeffs));
        let values = packed.iter().map(|v| v[0]).collect();
        let grads = (0..dim).map(|a| packed.iter().map(|v| v[1 + a]).collect()).collect();
        (values, grads)
    }

    /// Interpolates one nodal component.
    pub fn eval(&self, values: &[f64]) -> Vec<f64> {
        self.eval_coeffs(&self.prefilter(values))
    }

    /// Transpose of [`eval`](Self::eval): spreads per-point weights back onto nodes.
    pub fn scatter(&self, weights: &[f64]) -> Vec<f64> {
        let n = self.grid.n();
        let mut acc = vec![0.0; self.grid.len()];
        for (p, &wt) in weights.iter().enumerate() {
            if wt == 0.0 {
                continue;
            }
            let (i0, w0) = self.axis(p, 0);
            if self.grid.dim() == 1 {
                for (j, &wj) in i0.iter().zip(w0) {
                    acc[*j as usize] += wt * wj;
                }
            } else {
                let (i1, w1) = self.axis(p, 1);
                for (j, &wj) in i0.iter().zip(w0) {
                    let row = *j as usize * n;
                    let f = wt * wj;
                    for (k, &wk) in i1.iter().zip(w1) {
                        acc[row + *k as usize] += f * wk;
                    }
                }
            }
        }
        self.prefilter(&acc)
    }

    fn for_points<T: Send>(&self, out: &mut [T], f: impl Fn(usize, &mut T) + Sync) {
        let work = self.points * self.width.pow(self.grid.dim() as u32);
        if work >= PAR_THRESHOLD {
            out.par_iter_mut().enumerate().for_each(|(p, slot)| f(p, slot));
        } else {
            out.iter_mut().enumerate().for_each(|(p, slot)| f(p, slot));
        }
    }

    fn axis(&self, p: usize, a: usize) -> (&[u32], &[f64]) {
        let start = (p * self.grid.dim() + a) * self.width;
        (&self.idx[start..start + self.width], &self.w[start..start + self.width])
    }

    fn daxis(&self, p: usize, a: usize) -> &[f64] {
        let start = (p * self.grid.dim() + a) * self.width;
        &self.dw[start..start + self.width]
    }

    fn value_at(&self, p: usize, c: &[f64]) -> f64 {
        let n = self.grid.n();
        let (i0, w0) = self.axis(p, 0);
        if self.grid.dim() == 1 {
            return i0.iter().zip(w0).map(|(j, w)| w * c[*j as usize]).sum();
        }
        let (i1, w1) = self.axis(p, 1);
        let mut total = 0.0;
        for (j, &wj) in i0.iter().zip(w0) {
            let row = &c[*j as usize * n..(*j as usize + 1) * n];
            let inner: f64 = i1.iter().zip(w1).map(|(k, wk)| wk * row[*k as usize]).sum();
            total += wj * inner;
        }
        total
    }

    fn value_grad_at(&self, p: usize, c: &[f64]) -> [f64; 3] {
        let n = self.grid.n();
        let (i0, w0) = self.axis(p, 0);
        let d0 = self.daxis(p, 0);
        if self.grid.dim() == 1 {
            let mut v = 0.0;
            let mut g = 0.0;
            for ((j, w), dw) in i0.iter().zip(w0).zip(d0) {
                v += w * c[*j as usize];
                g += dw * c[*j as usize];
            }
            return [v, g, 0.0];
        }
        let (i1, w1) = self.axis(p, 1);
        let d1 = self.daxis(p, 1);
        let (mut v, mut g0, mut g1) = (0.0, 0.0, 0.0);
        for ((j, &wj), &dj) in i0.iter().zip(w0).zip(d0) {
            let row = &c[*j as usize * n..(*j as usize + 1) * n];
            let mut inner = 0.0;
            let mut dinner = 0.0;
            for ((k, &wk), &dk) in i1.iter().zip(w1).zip(d1) {
                let ck = row[*k as usize];
                inner += wk * ck;
                dinner += dk * ck;
            }
            v += wj * inner;
            g0 += dj * inner;
            g1 += wj * dinner;
        }
        [v, g0, g1]
    }
}

fn cubic_stencil(x: f64, h: f64, n: usize, idx: &mut [u32], w: &mut [f64], dw: &mut [f64]) {
    let u = x.rem_euclid(2.0 * PI) / h;
    let base = u.floor();
    let t = u - base;
    let base = base as i64;
    let t2 = t * t;
    let t3 = t2 * t;
    let s = 1.0 - t;
    w[0] = s * s * s / 6.0;
    w[1] = (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0;
    w[2] = (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0;
    w[3] = t3 / 6.0;
    dw[0] = -s * s / 2.0 / h;
    dw[1] = (3.0 * t2 - 4.0 * t) / 2.0 / h;
    dw[2] = (-3.0 * t2 + 2.0 * t + 1.0) / 2.0 / h;
    dw[3] = t2 / 2.0 / h;
    for (o, slot) in idx.iter_mut().enumerate() {
        *slot = (base - 1 + o as i64).rem_euclid(n as i64) as u32;
    }
}

/// Periodic Dirichlet kernel `(1/n)[1 + 2Σ_{k<n/2} cos kx + cos(n x/2)]` and its derivative.
fn dirichlet_stencil(x: f64, n: usize, idx: &mut [u32], w: &mut [f64], dw: &mut [f64]) {
    let h = 2.0 * PI / n as f64;
    let half = n / 2;
    let inv = 1.0 / n as f64;
    for j in 0..n {
        idx[j] = j as u32;
        let r = x - j as f64 * h;
        let (s1, c1) = r.sin_cos();
        // cos(kr), sin(kr) by rotation
        let (mut ck, mut sk) = (c1, s1);
        let mut val = 1.0;
        let mut der = 0.0;
        for k in 1..half {
            val += 2.0 * ck;
            der -= 2.0 * k as f64 * sk;
            let nc = ck * c1 - sk * s1;
            sk = sk * c1 + ck * s1;
            ck = nc;
        }
        val += ck;
        der -= half as f64 * sk;
        w[j] = val * inv;
        dw[j] = der * inv;
    }
}
