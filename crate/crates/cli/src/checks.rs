//! The invariant suite behind `diffspline check`. Every check is deterministic given the
//! seed, and tolerances carry enough margin that the pass/fail set does not depend on it.

use diffspline::diffeo::{Diffeo, Interpolation};
use diffspline::dynamics::{
    ad_action_with, ad_star_pullback_with, forced_rollout_with, geodesic_shoot_with, gronwall_monitor,
    transport_profile, ControlPath, State,
};
use diffspline::fixtures::smooth_velocity;
use diffspline::solver::{gradient, penalized_objective, Boundary, ProblemSettings, SplineProblem};
use diffspline::spectral::{ad, coad, flat, Field, GridSpec, Momentum, SobolevMetric, VectorField};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::CliResult;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckConfig {
    /// Test hook: negate the coadjoint operator inside the duality check.
    pub inject_coad_sign_flip: bool,
    pub duality_samples: usize,
    pub gradient_directions: usize,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            inject_coad_sign_flip: false,
            duality_samples: 50,
            gradient_directions: 4,
        }
    }
}

const DUALITY_TOLERANCE: f64 = 1e-7;
const AD_STAR_TOLERANCE: f64 = 1e-8;
const CONSERVATION_TOLERANCE: f64 = 1e-5;
const ENERGY_IDENTITY_TOLERANCE: f64 = 1e-4;
const GRADIENT_TOLERANCE: f64 = 1e-5;

fn rel(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-300 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn verdict(error: f64, tolerance: f64) -> Value {
    json!({ "pass": error <= tolerance, "error": error, "tolerance": tolerance })
}

/// Runs every check and returns `{all_pass, checks: {name: {pass, error, tolerance, ..}}, seed}`.
pub fn run_checks(cfg: &CheckConfig, seed: u64) -> CliResult<Value> {
    let checks = json!({
        "duality": duality(cfg, seed)?,
        "conservation": conservation(seed)?,
        "gronwall": gronwall(seed)?,
        "gradient": gradient_check(cfg, seed)?,
    });
    let all_pass = checks.as_object().unwrap().values().all(|v| v["pass"] == json!(true));
    Ok(json!({ "all_pass": all_pass, "checks": checks, "seed": seed }))
}

fn duality(cfg: &CheckConfig, seed: u64) -> CliResult<Value> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = GridSpec::new(2, 32)?;
    let sign = if cfg.inject_coad_sign_flip { -1.0 } else { 1.0 };
    let mut coad_err = 0.0f64;
    for _ in 0..cfg.duality_samples {
        let xi = VectorField::random_band_limited(&g, g.band(), 1.0, &mut rng);
        let eta = VectorField::random_band_limited(&g, g.band(), 1.0, &mut rng);
        let m: Momentum = Field::random_band_limited(&g, g.band(), 1.0, &mut rng);
        let lhs = sign * coad(&xi, &m)?.dot(&eta)?;
        let rhs = m.dot(&ad(&xi, &eta)?)?;
        coad_err = coad_err.max(rel(lhs, rhs));
    }

    // group-level pairing with exact trigonometric evaluation; at n = 16 the composed
    // fields are under-resolved and the pairing only agrees to ~1e-8
    let mut ad_star_err = 0.0f64;
    for _ in 0..cfg.duality_samples.div_ceil(10) {
        let phi = Diffeo::from_displacement(VectorField::random_band_limited(&g, 2, 0.1, &mut rng))?;
        let eta = VectorField::random_band_limited(&g, 2, 1.0, &mut rng);
        let m: Momentum = Field::random_band_limited(&g, 2, 1.0, &mut rng);
        let lhs = ad_star_pullback_with(&phi, &m, Interpolation::Spectral)?.dot(&eta)?;
        let rhs = m.dot(&ad_action_with(&phi, &eta, Interpolation::Spectral)?)?;
        ad_star_err = ad_star_err.max(rel(lhs, rhs));
    }
    let pass = coad_err <= DUALITY_TOLERANCE && ad_star_err <= AD_STAR_TOLERANCE;
    Ok(json!({
        "pass": pass,
        "coad_ad": verdict(coad_err, DUALITY_TOLERANCE),
        "ad_star_ad": verdict(ad_star_err, AD_STAR_TOLERANCE),
    }))
}

fn conservation(seed: u64) -> CliResult<Value> {
    let g = GridSpec::new(1, 64)?;
    let metric = SobolevMetric::new(2.0);
    let m0 = flat(&smooth_velocity(&g, seed, 0.15), &metric);
    let traj = geodesic_shoot_with(&m0, &metric, 64, Interpolation::Spectral)?;
    let zero = ControlPath::zeros(&g, 64)?;
    let drift = gronwall_monitor(&traj, &zero, &metric)?.energy_drift;
    let transport = transport_profile(&traj, &zero, &metric)?.relative_max;
    Ok(json!({
        "pass": drift <= CONSERVATION_TOLERANCE && transport <= CONSERVATION_TOLERANCE,
        "energy": verdict(drift, CONSERVATION_TOLERANCE),
        "momentum": verdict(transport, CONSERVATION_TOLERANCE),
    }))
}

/// A time-varying control built from two smooth fields.
fn smooth_control(g: &GridSpec, steps: usize, seed: u64, amplitude: f64) -> CliResult<ControlPath> {
    let a = smooth_velocity(g, seed, amplitude);
    let b = smooth_velocity(g, seed ^ 0x5eed, amplitude);
    let fields = (0..=steps)
        .map(|j| {
            let t = j as f64 / steps as f64;
            let mut f = a.scaled((3.0 * t).sin());
            f.axpy(1.0 - t * t, &b);
            f
        })
        .collect();
    Ok(ControlPath::new(fields)?)
}

fn gronwall(seed: u64) -> CliResult<Value> {
    let g = GridSpec::new(2, 32)?;
    let metric = SobolevMetric::new(2.5);
    let steps = 64;
    let state = State::at_identity(flat(&smooth_velocity(&g, seed, 0.1), &metric));
    let controls = [
        ("zero", ControlPath::zeros(&g, steps)?),
        (
            "constant",
            ControlPath::constant(smooth_velocity(&g, seed + 1, 0.05), steps)?,
        ),
        ("varying", smooth_control(&g, steps, seed + 2, 0.05)?),
    ];
    let mut gap = 0.0f64;
    let mut bound_holds = true;
    for (_, control) in &controls {
        let traj = forced_rollout_with(&state, control, &metric, Interpolation::Cubic)?;
        let report = gronwall_monitor(&traj, control, &metric)?;
        gap = gap.max(report.identity_gap);
        bound_holds &= report.all_hold;
    }
    Ok(json!({
        "pass": gap <= ENERGY_IDENTITY_TOLERANCE && bound_holds,
        "energy_identity": verdict(gap, ENERGY_IDENTITY_TOLERANCE),
        "bound_holds": bound_holds,
        "fixtures": controls.iter().map(|(name, _)| *name).collect::<Vec<_>>(),
    }))
}

fn gradient_check(cfg: &CheckConfig, seed: u64) -> CliResult<Value> {
    let settings = ProblemSettings::new(1, 32, 2.0, 3.0, 16);
    let g = settings.validate()?;
    let boundary = Boundary {
        phi0: Diffeo::from_displacement(smooth_velocity(&g, seed, 0.1))?,
        v0: smooth_velocity(&g, seed + 1, 0.2),
        phi1: Diffeo::from_displacement(smooth_velocity(&g, seed + 2, 0.2))?,
        v1: smooth_velocity(&g, seed + 3, 0.2),
    };
    let problem = SplineProblem::new(settings, boundary)?;
    let penalty = 10.0;
    let control = smooth_control(&g, problem.steps(), seed + 4, 0.3)?;
    let grad = gradient(&control, &problem, penalty)?;
    let h = 1e-5;
    let mut worst = 0.0f64;
    for k in 0..cfg.gradient_directions as u64 {
        let dir = smooth_control(&g, problem.steps(), seed + 100 + k, 1.0)?;
        let analytic = grad
            .fields()
            .iter()
            .zip(dir.fields())
            .map(|(a, b)| a.dot(b))
            .sum::<Result<f64, _>>()?;
        let at = |step: f64| -> CliResult<f64> {
            let moved = control
                .fields()
                .iter()
                .zip(dir.fields())
                .map(|(a, d)| a + &d.scaled(step))
                .collect();
            Ok(penalized_objective(&ControlPath::new(moved)?, &problem, penalty)?)
        };
        let fd = (at(h)? - at(-h)?) / (2.0 * h);
        worst = worst.max(rel(fd, analytic));
    }
    let mut v = verdict(worst, GRADIENT_TOLERANCE);
    v["directions"] = json!(cfg.gradient_directions);
    Ok(v)
}
