use crate::error::{Error, Result};
use crate::spectral::{inner_hs, GridSpec, SobolevMetric, VectorField};

use super::{Diffeo, Interpolation, Sampler};

/// Time-dependent vector field sampled at `M + 1` uniform nodes on `[0, 1]`,
/// piecewise linear in time between nodes.
#[derive(Clone, Debug)]
pub struct VelocityPath {
    fields: Vec<VectorField>,
}

impl VelocityPath {
    pub fn new(fields: Vec<VectorField>) -> Result<Self> {
        if fields.len() < 5 {
            return Err(Error::Validation(format!(
                "a velocity path needs at least 4 time steps, got {}",
                fields.len().saturating_sub(1)
            )));
        }
        let grid = fields[0].grid().clone();
        for f in &fields[1..] {
            crate::spectral::ensure_same(&grid, f.grid())?;
        }
        Ok(Self { fields })
    }

    pub fn constant(field: VectorField, steps: usize) -> Result<Self> {
        Self::new(vec![field; steps + 1])
    }

    pub fn zeros(grid: &GridSpec, steps: usize) -> Result<Self> {
        Self::constant(VectorField::zeros(grid), steps)
    }

    pub fn steps(&self) -> usize {
        self.fields.len() - 1
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.steps() as f64
    }

    pub fn grid(&self) -> &GridSpec {
        self.fields[0].grid()
    }

    pub fn fields(&self) -> &[VectorField] {
        &self.fields
    }

    /// Linear interpolation in time, clamped to `[0, 1]`.
    pub fn at(&self, t: f64) -> VectorField {
        let m = self.steps();
        let u = (t.clamp(0.0, 1.0) * m as f64).min(m as f64);
        let j = (u.floor() as usize).min(m - 1);
        let theta = u - j as f64;
        if theta == 0.0 {
            return self.fields[j].clone();
        }
        let mut out = self.fields[j].scaled(1.0 - theta);
        out.axpy(theta, &self.fields[j + 1]);
        out
    }

    /// The path `t ↦ -ξ(1 - t)`.
    pub fn reversed_negated(&self) -> Self {
        Self {
            fields: self.fields.iter().rev().map(|f| f.scaled(-1.0)).collect(),
        }
    }
}

/// Flow map `g_{t1,t0}` carrying positions at time `t0` to positions at time `t1`
/// along `∂_t φ = ξ(t, φ)`, by classical RK4 with the path's time step.
pub fn flow(xi: &VelocityPath, t0: f64, t1: f64) -> Result<Diffeo> {
    flow_with(xi, t0, t1, Interpolation::Cubic)
}

pub fn flow_with(xi: &VelocityPath, t0: f64, t1: f64, scheme: Interpolation) -> Result<Diffeo> {
    if !(0.0..=1.0).contains(&t0) || !(0.0..=1.0).contains(&t1) {
        return Err(Error::Validation(format!(
            "flow times must lie in [0, 1], got {t0} and {t1}"
        )));
    }
    let grid = xi.grid();
    let mut d = VectorField::zeros(grid);
    let span = t1 - t0;
    let steps = (span.abs() * xi.steps() as f64 - 1e-9).ceil().max(0.0) as usize;
    if steps == 0 {
        return Ok(Diffeo::identity(grid));
    }
    let h = span / steps as f64;
    let velocity = |t: f64, d: &VectorField| -> VectorField {
        let field = xi.at(t);
        let sampler = Sampler::at_offsets(scheme, d);
        field.map_components(|c| sampler.eval(c))
    };
    for step in 0..steps {
        let t = t0 + step as f64 * h;
        let k1 = velocity(t, &d);
        let k2 = velocity(t + 0.5 * h, &(&d + &k1.scaled(0.5 * h)));
        let k3 = velocity(t + 0.5 * h, &(&d + &k2.scaled(0.5 * h)));
        let k4 = velocity(t + h, &(&d + &k3.scaled(h)));
        d.axpy(h / 6.0, &k1);
        d.axpy(h / 3.0, &k2);
        d.axpy(h / 3.0, &k3);
        d.axpy(h / 6.0, &k4);
        Diffeo::from_displacement_unchecked(d.clone()).check_nondegenerate()?;
    }
    Ok(Diffeo::from_displacement_unchecked(d))
}

/// Trapezoidal quadrature of `‖ξ(t)‖²_{H^s}` over the path's time nodes.
pub fn path_energy(xi: &VelocityPath, metric: &SobolevMetric) -> f64 {
    let dt = xi.dt();
    let last = xi.steps();
    xi.fields()
        .iter()
        .enumerate()
        .map(|(j, f)| {
            let w = if j == 0 || j == last { 0.5 * dt } else { dt };
            w * inner_hs(f, f, metric).expect("shared grid")
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffeo::{compose, compose_with, jacobian};
    use rand::SeedableRng;

    #[test]
    fn path_needs_four_steps() {
        let g = GridSpec::new(1, 16).unwrap();
        assert!(VelocityPath::zeros(&g, 3).is_err());
        assert!(VelocityPath::zeros(&g, 4).is_ok());
    }

    #[test]
    fn zero_and_constant_paths() {
        let g = GridSpec::new(2, 16).unwrap();
        let zero = VelocityPath::zeros(&g, 8).unwrap();
        assert!(flow(&zero, 0.0, 1.0).unwrap().displacement().max_abs() == 0.0);
        assert!(flow(&zero, 0.3, 0.3).unwrap().displacement().max_abs() == 0.0);
        let c = VelocityPath::constant(VectorField::constant(&g, &[0.5, -1.5]), 8).unwrap();
        let phi = flow(&c, 0.25, 1.0).unwrap();
        let want = VectorField::constant(&g, &[0.375, -1.125]);
        assert!((phi.displacement() - &want).max_abs() < 1e-13);
    }

    #[test]
    fn stationary_shear_closed_form() {
        let g = GridSpec::new(2, 32).unwrap();
        let shear = VectorField::from_fn(&g, |x, o| {
            o[0] = x[1].sin();
            o[1] = 0.0;
        });
        let path = VelocityPath::constant(shear, 16).unwrap();
        let phi = flow(&path, 0.0, 1.0).unwrap();
        for i in 0..g.len() {
            let x = g.node(i);
            assert!((phi.displacement().component(0)[i] - x[1].sin()).abs() < 1e-8);
            assert!(phi.displacement().component(1)[i].abs() < 1e-12);
        }
    }

    fn smooth_path(g: &GridSpec, steps: usize) -> VelocityPath {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let a = VectorField::random_band_limited(g, 2, 0.4, &mut rng);
        let b = VectorField::random_band_limited(g, 2, 0.4, &mut rng);
        let fields = (0..=steps)
            .map(|j| {
                let t = j as f64 / steps as f64;
                let mut f = a.scaled(1.0 - t);
                f.axpy(t, &b);
                f
            })
            .collect();
        VelocityPath::new(fields).unwrap()
    }

    #[test]
    fn group_property() {
        let g = GridSpec::new(2, 64).unwrap();
        let path = smooth_path(&g, 16);
        let s = 0.375;
        let first = flow(&path, 0.0, s).unwrap();
        let second = flow(&path, s, 1.0).unwrap();
        let whole = flow(&path, 0.0, 1.0).unwrap();
        let composed = compose(&second, &first).unwrap();
        assert!((composed.displacement() - whole.displacement()).max_abs() < 1e-6);
    }

    #[test]
    fn reversed_path_inverts_flow() {
        let g = GridSpec::new(2, 32).unwrap();
        let path = smooth_path(&g, 32);
        let forward = flow_with(&path, 0.0, 1.0, Interpolation::Spectral).unwrap();
        let backward = flow_with(&path.reversed_negated(), 0.0, 1.0, Interpolation::Spectral).unwrap();
        let round = compose_with(&backward, &forward, Interpolation::Spectral).unwrap();
        assert!(
            round.displacement().max_abs() < 1e-6,
            "{}",
            round.displacement().max_abs()
        );
    }

    #[test]
    fn divergence_free_flow_preserves_volume() {
        let g = GridSpec::new(2, 64).unwrap();
        let field = VectorField::from_fn(&g, |x, o| {
            o[0] = 0.4 * x[1].sin();
            o[1] = 0.3 * x[0].cos();
        });
        let path = VelocityPath::constant(field, 32).unwrap();
        let phi = flow(&path, 0.0, 1.0).unwrap();
        let jac = jacobian(&phi);
        let worst = jac.values.iter().map(|v| (v - 1.0).abs()).fold(0.0f64, f64::max);
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn path_energy_cases() {
        let g = GridSpec::new(2, 32).unwrap();
        let metric = SobolevMetric::new(2.0);
        assert_eq!(path_energy(&VelocityPath::zeros(&g, 8).unwrap(), &metric), 0.0);
        let sine = VectorField::from_fn(&g, |x, o| {
            o[0] = x[0].sin();
            o[1] = 0.0;
        });
        let e8 = path_energy(&VelocityPath::constant(sine.clone(), 8).unwrap(), &metric);
        let e16 = path_energy(&VelocityPath::constant(sine, 16).unwrap(), &metric);
        assert!((e8 - 2.0).abs() < 1e-12);
        assert!((e8 - e16).abs() < 1e-12);
    }
}
