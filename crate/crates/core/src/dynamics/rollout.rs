use crate::diffeo::{Diffeo, Interpolation, Sampler};
use crate::error::{Error, Result};
use crate::spectral::{
    ad_resolved, coad_resolved, multiplier, sharp, Field, GridSpec, Momentum, Resolved, SobolevMetric, VectorField,
};

use super::{ControlPath, State, Trajectory};

/// Any state value above this magnitude aborts the rollout.
pub const BLOW_UP_LIMIT: f64 = 1e6;

/// Momentum forcing `P(α^♭)`: the metric image of the control, restricted to the resolved band.
pub fn momentum_forcing(alpha: &VectorField, metric: &SobolevMetric) -> Momentum {
    let grid = alpha.grid().clone();
    let order = metric.order();
    alpha
        .map_components(|c| {
            grid.apply_symbol(c, |mode| {
                if grid.in_band(mode) {
                    multiplier(grid.k2(mode), order)
                } else {
                    0.0
                }
            })
        })
        .recast()
}

/// Band projection of a momentum.
pub(crate) fn project<K>(field: &Field<K>) -> Field<K> {
    crate::spectral::dealias(field)
}

/// Right-hand side of the reduced system and its transpose linearization.
pub(crate) struct Dynamics {
    pub metric: SobolevMetric,
    pub scheme: Interpolation,
    pub grid: GridSpec,
}

/// Stage inputs of one RK4 step, kept for the reverse sweep.
pub(crate) struct StepTape {
    pub stages: [(VectorField, Momentum); 4],
}

impl Dynamics {
    /// `(ḋ, ṁ) = (ξ∘(Id + d), −ad*_ξ m + a)` with `ξ = m^♯`.
    pub fn rhs(&self, d: &VectorField, m: &Momentum, forcing: &Momentum) -> (VectorField, Momentum) {
        let xi = sharp(m, &self.metric);
        let sampler = Sampler::at_offsets(self.scheme, d);
        let ddot = xi.map_components(|c| sampler.eval(c));
        let mut mdot = coad_resolved(&self.grid, &Resolved::new(&xi), &Resolved::new(m)).scaled(-1.0);
        mdot += forcing;
        (ddot, mdot)
    }

    /// Pulls cotangents `(d̄_out, m̄_out)` of `(ḋ, ṁ)` back to `(d̄, m̄)`.
    /// The cotangent of the forcing is `m̄_out` itself.
    pub fn rhs_vjp(
        &self,
        d: &VectorField,
        m: &Momentum,
        dbar_out: &VectorField,
        mbar_out: &Momentum,
    ) -> (VectorField, Momentum) {
        let grid = &self.grid;
        let dim = grid.dim();
        let npts = grid.len();
        let xi = sharp(m, &self.metric);
        let sampler = Sampler::at_offsets(self.scheme, d);
        let mut dbar = VectorField::zeros(grid);
        let mut xibar_data = Vec::with_capacity(dim * npts);
        for c in 0..dim {
            let coeffs = sampler.prefilter(xi.component(c));
            let (_, grads) = sampler.eval_coeffs_with_grad(&coeffs);
            let weight = dbar_out.component(c);
            for (b, gb) in grads.iter().enumerate() {
                dbar.component_mut(b)
                    .iter_mut()
                    .zip(gb.iter().zip(weight))
                    .for_each(|(o, (g, w))| *o += g * w);
            }
            xibar_data.extend(sampler.scatter(weight));
        }
        let mut xibar = VectorField::from_vec_unchecked(grid, xibar_data);
        let mbar_res = Resolved::new(mbar_out);
        let m_res = Resolved::new(m);
        xibar += &coad_resolved(grid, &mbar_res, &m_res).recast();
        let mut mbar: Momentum = ad_resolved(grid, &Resolved::new(&xi), &mbar_res).recast().scaled(-1.0);
        mbar += &crate::spectral::bessel_potential(&xibar, -self.metric.order()).recast();
        (dbar, mbar)
    }

    /// One RK4 step; returns the new state and optionally the stage inputs.
    pub fn step(
        &self,
        d: &VectorField,
        m: &Momentum,
        h: f64,
        forcing: [&Momentum; 3],
        record: bool,
    ) -> ((VectorField, Momentum), Option<StepTape>) {
        let (k1d, k1m) = self.rhs(d, m, forcing[0]);
        let x2 = (axpy(d, 0.5 * h, &k1d), axpy(m, 0.5 * h, &k1m));
        let (k2d, k2m) = self.rhs(&x2.0, &x2.1, forcing[1]);
        let x3 = (axpy(d, 0.5 * h, &k2d), axpy(m, 0.5 * h, &k2m));
        let (k3d, k3m) = self.rhs(&x3.0, &x3.1, forcing[1]);
        let x4 = (axpy(d, h, &k3d), axpy(m, h, &k3m));
        let (k4d, k4m) = self.rhs(&x4.0, &x4.1, forcing[2]);
        let mut nd = d.clone();
        let mut nm = m.clone();
        for (w, kd, km) in [
            (h / 6.0, &k1d, &k1m),
            (h / 3.0, &k2d, &k2m),
            (h / 3.0, &k3d, &k3m),
            (h / 6.0, &k4d, &k4m),
        ] {
            nd.axpy(w, kd);
            nm.axpy(w, km);
        }
        let tape = record.then(|| StepTape {
            stages: [(d.clone(), m.clone()), x2, x3, x4],
        });
        ((nd, nm), tape)
    }

    /// Reverse sweep through one step: `(d̄, m̄)` at the step's end to `(d̄, m̄)` at its
    /// start, plus forcing cotangents at the left node, midpoint and right node.
    pub fn step_vjp(
        &self,
        tape: &StepTape,
        h: f64,
        dbar: &VectorField,
        mbar: &Momentum,
    ) -> ((VectorField, Momentum), [Momentum; 3]) {
        let mut out_d = dbar.clone();
        let mut out_m = mbar.clone();
        let [s1, s2, s3, s4] = &tape.stages;
        // stage 4
        let (k4d, k4m) = (dbar.scaled(h / 6.0), mbar.scaled(h / 6.0));
        let (x4d, x4m) = self.rhs_vjp(&s4.0, &s4.1, &k4d, &k4m);
        out_d += &x4d;
        out_m += &x4m;
        // stage 3
        let k3d = axpy(&dbar.scaled(h / 3.0), h, &x4d);
        let k3m = axpy(&mbar.scaled(h / 3.0), h, &x4m);
        let (x3d, x3m) = self.rhs_vjp(&s3.0, &s3.1, &k3d, &k3m);
        out_d += &x3d;
        out_m += &x3m;
        // stage 2
        let k2d = axpy(&dbar.scaled(h / 3.0), 0.5 * h, &x3d);
        let k2m = axpy(&mbar.scaled(h / 3.0), 0.5 * h, &x3m);
        let (x2d, x2m) = self.rhs_vjp(&s2.0, &s2.1, &k2d, &k2m);
        out_d += &x2d;
        out_m += &x2m;
        // stage 1
        let k1d = axpy(&dbar.scaled(h / 6.0), 0.5 * h, &x2d);
        let k1m = axpy(&mbar.scaled(h / 6.0), 0.5 * h, &x2m);
        let (x1d, x1m) = self.rhs_vjp(&s1.0, &s1.1, &k1d, &k1m);
        out_d += &x1d;
        out_m += &x1m;
        let mid = &k2m + &k3m;
        ((out_d, out_m), [k1m, mid, k4m])
    }
}

fn axpy<K>(x: &Field<K>, a: f64, y: &Field<K>) -> Field<K> {
    let mut out = x.clone();
    out.axpy(a, y);
    out
}

pub(crate) fn check_state(phi: &VectorField, m: &Momentum, time_index: usize) -> Result<()> {
    let bad = |f: &[f64]| f.iter().any(|v| !v.is_finite() || v.abs() > BLOW_UP_LIMIT);
    if bad(phi.data()) || bad(m.data()) {
        return Err(Error::BlowUp {
            time_index,
            limit: BLOW_UP_LIMIT,
        });
    }
    Diffeo::from_displacement_unchecked(phi.clone()).check_nondegenerate()
}

/// Result of a recorded rollout: the trajectory plus RK4 stage inputs.
pub(crate) struct Recorded {
    pub trajectory: Trajectory,
    pub tapes: Vec<StepTape>,
}

pub(crate) fn rollout(
    state0: &State,
    control: &ControlPath,
    metric: &SobolevMetric,
    scheme: Interpolation,
    record: bool,
) -> Result<Recorded> {
    let grid = state0.phi.grid().clone();
    crate::spectral::ensure_same(&grid, state0.m.grid())?;
    crate::spectral::ensure_same(&grid, control.grid())?;
    let dynamics = Dynamics {
        metric: *metric,
        scheme,
        grid: grid.clone(),
    };
    let steps = control.steps();
    let h = control.dt();
    let forcing: Vec<Momentum> = control.fields().iter().map(|a| momentum_forcing(a, metric)).collect();
    let mut d = state0.phi.displacement().clone();
    let mut m = project(&state0.m);
    check_state(&d, &m, 0)?;
    let mut states = Vec::with_capacity(steps + 1);
    states.push(State {
        phi: Diffeo::from_displacement_unchecked(d.clone()),
        m: m.clone(),
    });
    let mut tapes = Vec::with_capacity(if record { steps } else { 0 });
    for j in 0..steps {
        let mid = (&forcing[j] + &forcing[j + 1]).scaled(0.5);
        let ((nd, nm), tape) = dynamics.step(&d, &m, h, [&forcing[j], &mid, &forcing[j + 1]], record);
        check_state(&nd, &nm, j + 1)?;
        d = nd;
        m = nm;
        states.push(State {
            phi: Diffeo::from_displacement_unchecked(d.clone()),
            m: m.clone(),
        });
        if let Some(t) = tape {
            tapes.push(t);
        }
    }
    Ok(Recorded {
        trajectory: Trajectory {
            states,
            control: control.clone(),
            metric: *metric,
            scheme,
        },
        tapes,
    })
}
