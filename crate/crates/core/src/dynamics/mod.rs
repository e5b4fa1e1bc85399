//! Right-invariant geometry in reduced (Eulerian) variables.
//!
//! The Lagrangian second-order system is never discretized directly. States carry the
//! diffeomorphism and the Eulerian momentum `m`, integrated in the forced EPDiff form
//! `ṁ + ad*_ξ m = P(α^♭)`, `ξ = m^♯`, `φ̇ = ξ∘φ`, where `P` keeps the resolved band.

mod monitor;
pub(crate) mod rollout;

use std::fs;
use std::path::Path;

use serde_json::json;

use crate::diffeo::{compose_field_with, inverse_with, Diffeo, Interpolation};
use crate::error::{Error, Result};
use crate::spectral::{ad, ad_dagger, io, sharp, GridSpec, Momentum, Resolved, SobolevMetric, VectorField};

pub use monitor::{gronwall_monitor, transport_profile, transport_residual, GronwallReport, TransportProfile};
pub use rollout::{momentum_forcing, BLOW_UP_LIMIT};

#[derive(Clone, Debug)]
pub struct State {
    pub phi: Diffeo,
    pub m: Momentum,
}

impl State {
    pub fn new(phi: Diffeo, m: Momentum) -> Result<Self> {
        crate::spectral::ensure_same(phi.grid(), m.grid())?;
        if !m.is_finite() {
            return Err(Error::Validation("state momentum has non-finite values".into()));
        }
        phi.check_nondegenerate()?;
        Ok(Self { phi, m })
    }

    pub fn at_identity(m: Momentum) -> Self {
        Self {
            phi: Diffeo::identity(m.grid()),
            m,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        self.phi.grid()
    }

    pub fn velocity(&self, metric: &SobolevMetric) -> VectorField {
        sharp(&self.m, metric)
    }
}

/// Eulerian acceleration sampled at uniform nodes on `[0, 1]`, linear in between.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlPath {
    fields: Vec<VectorField>,
}

impl ControlPath {
    pub fn new(fields: Vec<VectorField>) -> Result<Self> {
        if fields.len() < 2 {
            return Err(Error::Validation("a control path needs at least one time step".into()));
        }
        let grid = fields[0].grid().clone();
        for f in &fields {
            crate::spectral::ensure_same(&grid, f.grid())?;
            if !f.is_finite() {
                return Err(Error::Validation("control has non-finite values".into()));
            }
        }
        Ok(Self { fields })
    }

    pub fn zeros(grid: &GridSpec, steps: usize) -> Result<Self> {
        Self::new(vec![VectorField::zeros(grid); steps + 1])
    }

    pub fn constant(field: VectorField, steps: usize) -> Result<Self> {
        Self::new(vec![field; steps + 1])
    }

    pub fn steps(&self) -> usize {
        self.fields.len() - 1
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.steps() as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps()).map(|j| j as f64 * self.dt()).collect()
    }

    pub fn grid(&self) -> &GridSpec {
        self.fields[0].grid()
    }

    pub fn fields(&self) -> &[VectorField] {
        &self.fields
    }

    pub fn into_fields(self) -> Vec<VectorField> {
        self.fields
    }

    /// Linear interpolation in time, clamped to `[0, 1]`.
    pub fn at(&self, t: f64) -> VectorField {
        let m = self.steps();
        let u = t.clamp(0.0, 1.0) * m as f64;
        let j = (u.floor() as usize).min(m - 1);
        let theta = u - j as f64;
        let mut out = self.fields[j].scaled(1.0 - theta);
        out.axpy(theta, &self.fields[j + 1]);
        out
    }
}

/// States at every time node of a rollout, with the control that produced them.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub(crate) states: Vec<State>,
    pub(crate) control: ControlPath,
    pub(crate) metric: SobolevMetric,
    pub(crate) scheme: Interpolation,
}

impl Trajectory {
    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn control(&self) -> &ControlPath {
        &self.control
    }

    pub fn metric(&self) -> &SobolevMetric {
        &self.metric
    }

    pub fn interpolation(&self) -> Interpolation {
        self.scheme
    }

    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn times(&self) -> Vec<f64> {
        self.control.times()
    }

    pub fn grid(&self) -> &GridSpec {
        self.states[0].grid()
    }

    pub fn last(&self) -> &State {
        self.states.last().expect("trajectory has states")
    }

    /// Eulerian velocity `ξ_j = m_j^♯`.
    pub fn velocity(&self, j: usize) -> VectorField {
        sharp(&self.states[j].m, &self.metric)
    }

    /// Lagrangian velocity `v_j = ξ_j ∘ φ_j`, evaluated spectrally (exact for the
    /// band-limited velocity).
    pub fn lagrangian_velocity(&self, j: usize) -> Result<VectorField> {
        compose_field_with(&self.velocity(j), &self.states[j].phi, Interpolation::Spectral)
    }

    /// Writes `phi`, `m`, `xi` and `v` files for every node plus `manifest.json`.
    pub fn export(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.display().to_string(),
            source: e,
        })?;
        let times = self.times();
        let mut nodes = Vec::with_capacity(times.len());
        for (j, (state, &t)) in self.states.iter().zip(&times).enumerate() {
            let name = |q: &str| format!("{q}_{j:04}.bin");
            let extra = [("t", json!(t)), ("index", json!(j))];
            state.phi.write(&dir.join(name("phi")), "phi")?;
            io::write_field(&state.m, &dir.join(name("m")), "m", &extra)?;
            io::write_field(&self.velocity(j), &dir.join(name("xi")), "xi", &extra)?;
            io::write_field(&self.lagrangian_velocity(j)?, &dir.join(name("v")), "v", &extra)?;
            nodes.push(json!({
                "index": j,
                "t": t,
                "phi": name("phi"),
                "m": name("m"),
                "xi": name("xi"),
                "v": name("v"),
            }));
        }
        let manifest = json!({
            "dim": self.grid().dim(),
            "n": self.grid().n(),
            "steps": self.steps(),
            "metric_order": self.metric.order(),
            "interpolation": self.scheme,
            "nodes": nodes,
        });
        let path = dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(&manifest).expect("json")).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })
    }
}

/// Covariant derivative of `ν` along a curve with velocity `ξ`:
/// `ν̇ + ½ ad†_ξ ν + ½ ad†_ν ξ − ½ [ξ, ν]`.
pub fn covariant_derivative(
    xi: &VectorField,
    nu: &VectorField,
    nu_dot: &VectorField,
    metric: &SobolevMetric,
) -> Result<VectorField> {
    crate::spectral::ensure_same(xi.grid(), nu.grid())?;
    crate::spectral::ensure_same(xi.grid(), nu_dot.grid())?;
    let mut out = nu_dot.clone();
    out.axpy(0.5, &ad_dagger(xi, nu, metric)?);
    out.axpy(0.5, &ad_dagger(nu, xi, metric)?);
    out.axpy(-0.5, &ad(xi, nu)?);
    Ok(out)
}

/// Reduced acceleration `ξ̇ + ad†_ξ ξ`.
pub fn acceleration(xi: &VectorField, xi_dot: &VectorField, metric: &SobolevMetric) -> Result<VectorField> {
    crate::spectral::ensure_same(xi.grid(), xi_dot.grid())?;
    Ok(xi_dot + &ad_dagger(xi, xi, metric)?)
}

/// Quadratic Lagrangian term right-translated to the identity, `Γ_φ(v, v)∘φ⁻¹`
/// for `v = ξ∘φ`. It equals `ad†_ξ ξ − (Dξ)ξ`, independent of `φ`.
pub fn lagrangian_quadratic_term(xi: &VectorField, metric: &SobolevMetric) -> Result<VectorField> {
    let res = Resolved::new(xi);
    let grid = xi.grid();
    let dim = grid.dim();
    let mut data = Vec::with_capacity(dim * grid.len());
    for c in 0..dim {
        let mut comp = vec![0.0; grid.len()];
        for a in 0..dim {
            comp.iter_mut()
                .zip(res.grads[c][a].iter().zip(&res.values[a]))
                .for_each(|(o, (g, v))| *o += g * v);
        }
        data.extend(grid.apply_symbol(&comp, |mode| if grid.in_band(mode) { 1.0 } else { 0.0 }));
    }
    let advect = VectorField::from_vec_unchecked(grid, data);
    Ok(&ad_dagger(xi, xi, metric)? - &advect)
}

/// Forced rollout with cubic interpolation.
pub fn forced_rollout(state0: &State, control: &ControlPath, metric: &SobolevMetric) -> Result<Trajectory> {
    forced_rollout_with(state0, control, metric, Interpolation::Cubic)
}

/// RK4 rollout of the forced EPDiff system from `state0` under `control`.
/// The initial momentum is projected onto the resolved band.
pub fn forced_rollout_with(
    state0: &State,
    control: &ControlPath,
    metric: &SobolevMetric,
    scheme: Interpolation,
) -> Result<Trajectory> {
    Ok(rollout::rollout(state0, control, metric, scheme, false)?.trajectory)
}

pub fn geodesic_shoot(m0: &Momentum, metric: &SobolevMetric, steps: usize) -> Result<Trajectory> {
    geodesic_shoot_with(m0, metric, steps, Interpolation::Cubic)
}

pub fn geodesic_shoot_with(
    m0: &Momentum,
    metric: &SobolevMetric,
    steps: usize,
    scheme: Interpolation,
) -> Result<Trajectory> {
    if steps < 4 {
        return Err(Error::Validation(format!(
            "geodesic shooting needs at least 4 steps, got {steps}"
        )));
    }
    let control = ControlPath::zeros(m0.grid(), steps)?;
    forced_rollout_with(&State::at_identity(m0.clone()), &control, metric, scheme)
}

/// `Ad*_g m = |Dg| (Dg)ᵀ (m∘g)`.
pub fn ad_star_pullback(g: &Diffeo, m: &Momentum) -> Result<Momentum> {
    ad_star_pullback_with(g, m, Interpolation::Cubic)
}

pub fn ad_star_pullback_with(g: &Diffeo, m: &Momentum, scheme: Interpolation) -> Result<Momentum> {
    g.check_nondegenerate()?;
    let composed = compose_field_with(m, g, scheme)?;
    let grid = g.grid();
    let dim = grid.dim();
    let dg = g.differential();
    let jac = crate::diffeo::jacobian(g);
    let mut out = Momentum::zeros(grid);
    for a in 0..dim {
        let dst = out.component_mut(a);
        for c in 0..dim {
            dst.iter_mut()
                .zip(dg[c][a].iter().zip(composed.component(c)))
                .for_each(|(o, (g, v))| *o += g * v);
        }
        dst.iter_mut().zip(&jac.values).for_each(|(o, j)| *o *= j);
    }
    Ok(out)
}

/// `Ad*_{g⁻¹} m`, the momentum transported forward along `g`.
pub fn ad_star_pushforward_with(g: &Diffeo, m: &Momentum, scheme: Interpolation) -> Result<Momentum> {
    ad_star_pullback_with(&inverse_with(g, scheme)?, m, scheme)
}

/// `Ad_g η = (Dg·η)∘g⁻¹`.
pub fn ad_action_with(g: &Diffeo, eta: &VectorField, scheme: Interpolation) -> Result<VectorField> {
    crate::spectral::ensure_same(g.grid(), eta.grid())?;
    let grid = g.grid();
    let dim = grid.dim();
    let dg = g.differential();
    let mut pushed = VectorField::zeros(grid);
    for c in 0..dim {
        let dst = pushed.component_mut(c);
        for a in 0..dim {
            dst.iter_mut()
                .zip(dg[c][a].iter().zip(eta.component(a)))
                .for_each(|(o, (g, v))| *o += g * v);
        }
    }
    compose_field_with(&pushed, &inverse_with(g, scheme)?, scheme)
}
