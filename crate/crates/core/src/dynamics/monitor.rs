use serde::Serialize;

use crate::diffeo::inverse_with;
use crate::error::Result;
use crate::spectral::{dual_norm, inner_hs, norm_hs_squared, Momentum, SobolevMetric};

use super::{ad_star_pullback_with, momentum_forcing, ControlPath, Trajectory};

/// Relative slack granted to the Gronwall bound for quadrature error.
const GRONWALL_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, Serialize)]
pub struct TransportProfile {
    pub times: Vec<f64>,
    /// `(H^s)*` distance between the rolled-out momentum and the transported one, per node.
    pub residuals: Vec<f64>,
    pub max: f64,
    /// Largest residual relative to `‖m(t)‖_{(H^s)*}`.
    pub relative_max: f64,
}

/// Compares `m(t)` with `Ad*_{g(t)⁻¹}[m(0) + ∫₀ᵗ Ad*_{g(s)} a(s) ds]`, the integral by the
/// trapezoid rule over the trajectory's nodes. Uses `Ad*_{g_{t,s}} = Ad*_{g(t)⁻¹} Ad*_{g(s)}`.
pub fn transport_profile(traj: &Trajectory, control: &ControlPath, metric: &SobolevMetric) -> Result<TransportProfile> {
    crate::spectral::ensure_same(traj.grid(), control.grid())?;
    let scheme = traj.scheme;
    let states = &traj.states;
    let dt = control.dt();
    let order = metric.order();
    let mut accumulated = states[0].m.clone();
    let mut previous: Option<Momentum> = None;
    let mut residuals = Vec::with_capacity(states.len());
    let mut relative_max = 0.0f64;
    for (j, state) in states.iter().enumerate() {
        let forcing = momentum_forcing(&control.fields()[j], metric);
        let pulled = if forcing.max_abs() == 0.0 {
            forcing
        } else {
            ad_star_pullback_with(&state.phi, &forcing, scheme)?
        };
        if let Some(prev) = &previous {
            accumulated.axpy(0.5 * dt, prev);
            accumulated.axpy(0.5 * dt, &pulled);
        }
        previous = Some(pulled);
        let gap = if j == 0 {
            &state.m - &accumulated
        } else {
            let inv = inverse_with(&state.phi, scheme)?;
            &state.m - &ad_star_pullback_with(&inv, &accumulated, scheme)?
        };
        let r = dual_norm(&gap, order);
        let scale = dual_norm(&state.m, order);
        if r > 0.0 {
            relative_max = relative_max.max(r / scale);
        }
        residuals.push(r);
    }
    let max = residuals.iter().cloned().fold(0.0, f64::max);
    Ok(TransportProfile {
        times: traj.times(),
        residuals,
        max,
        relative_max,
    })
}

pub fn transport_residual(traj: &Trajectory, control: &ControlPath, metric: &SobolevMetric) -> Result<f64> {
    Ok(transport_profile(traj, control, metric)?.max)
}

#[derive(Clone, Debug, Serialize)]
pub struct GronwallReport {
    pub times: Vec<f64>,
    /// `f(t) = ½‖ξ(t)‖²_{H^s}`.
    pub energy: Vec<f64>,
    /// Second-order finite difference of `f` in time.
    pub energy_rate: Vec<f64>,
    /// `⟨α(t), ξ(t)⟩_{H^s}`.
    pub power: Vec<f64>,
    /// `max_t |f′ − ⟨α, ξ⟩|`.
    pub identity_gap: f64,
    /// `‖α‖_{L²([0,1], H^s)}`.
    pub control_norm: f64,
    /// `f(0) + ‖α‖ (1 + ∫₀ᵗ f)` per node.
    pub bound: Vec<f64>,
    pub bound_holds: Vec<bool>,
    pub all_hold: bool,
    /// Relative spread `(max f − min f) / max f`, the conservation error when unforced.
    pub energy_drift: f64,
}

pub fn gronwall_monitor(traj: &Trajectory, control: &ControlPath, metric: &SobolevMetric) -> Result<GronwallReport> {
    crate::spectral::ensure_same(traj.grid(), control.grid())?;
    let steps = traj.steps();
    let dt = control.dt();
    let velocities: Vec<_> = (0..=steps).map(|j| traj.velocity(j)).collect();
    let energy: Vec<f64> = velocities.iter().map(|u| 0.5 * norm_hs_squared(u, metric)).collect();
    let power = velocities
        .iter()
        .zip(control.fields())
        .map(|(u, a)| inner_hs(a, u, metric))
        .collect::<Result<Vec<_>>>()?;
    let energy_rate: Vec<f64> = (0..=steps)
        .map(|j| {
            if steps < 2 {
                (energy[1] - energy[0]) / dt
            } else if j == 0 {
                (-3.0 * energy[0] + 4.0 * energy[1] - energy[2]) / (2.0 * dt)
            } else if j == steps {
                (3.0 * energy[j] - 4.0 * energy[j - 1] + energy[j - 2]) / (2.0 * dt)
            } else {
                (energy[j + 1] - energy[j - 1]) / (2.0 * dt)
            }
        })
        .collect();
    let identity_gap = energy_rate
        .iter()
        .zip(&power)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let control_norm = control
        .fields()
        .iter()
        .enumerate()
        .map(|(j, a)| {
            let w = if j == 0 || j == steps { 0.5 * dt } else { dt };
            w * norm_hs_squared(a, metric)
        })
        .sum::<f64>()
        .sqrt();
    let mut integral = 0.0;
    let mut bound = Vec::with_capacity(steps + 1);
    for j in 0..=steps {
        if j > 0 {
            integral += 0.5 * dt * (energy[j - 1] + energy[j]);
        }
        bound.push(energy[0] + control_norm * (1.0 + integral));
    }
    let bound_holds: Vec<bool> = energy
        .iter()
        .zip(&bound)
        .map(|(f, b)| *f <= b + GRONWALL_TOLERANCE * b.max(1.0))
        .collect();
    let all_hold = bound_holds.iter().all(|&b| b);
    let fmax = energy.iter().cloned().fold(f64::MIN, f64::max);
    let fmin = energy.iter().cloned().fold(f64::MAX, f64::min);
    let energy_drift = if fmax > 0.0 { (fmax - fmin) / fmax } else { 0.0 };
    Ok(GronwallReport {
        times: traj.times(),
        energy,
        energy_rate,
        power,
        identity_gap,
        control_norm,
        bound,
        bound_holds,
        all_hold,
        energy_drift,
    })
}
