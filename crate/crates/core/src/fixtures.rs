//! Reference problems shared by the test suites and the command-line checks.

use rand::SeedableRng;

use crate::diffeo::Diffeo;
use crate::dynamics::{geodesic_shoot_with, Trajectory};
use crate::error::Result;
use crate::solver::{geodesic_boundary, Boundary, KnotSequence, ProblemSettings, SplineProblem};
use crate::spectral::{dealias, flat, GridSpec, SobolevMetric, VectorField};

/// Smooth band-limited velocity from a seed.
pub fn smooth_velocity(grid: &GridSpec, seed: u64, amplitude: f64) -> VectorField {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    dealias(&VectorField::random_band_limited(grid, 2, amplitude, &mut rng))
}

/// `x ↦ (x₁ + a sin x₂, x₂)` followed by `x ↦ (x₁, x₂ + b sin x₁)`, in closed form.
/// The two shears do not commute, so no single stationary flow reaches the target.
pub fn sheared_target(grid: &GridSpec, a: f64, b: f64) -> Result<Diffeo> {
    let d = VectorField::from_fn(grid, |x, o| {
        let y0 = x[0] + a * x[1].sin();
        o[0] = a * x[1].sin();
        o[1] = b * y0.sin();
    });
    Diffeo::from_displacement(d)
}

/// Rest-to-rest problem from the identity to [`sheared_target`].
pub fn shear_problem(settings: ProblemSettings, a: f64, b: f64) -> Result<SplineProblem> {
    let grid = settings.validate()?;
    let boundary = Boundary {
        phi1: sheared_target(&grid, a, b)?,
        ..Boundary::at_rest(&grid)
    };
    SplineProblem::new(settings, boundary)
}

/// Rest-to-rest problem from the identity to a rigid translation.
pub fn translation_problem(settings: ProblemSettings, shift: &[f64]) -> Result<SplineProblem> {
    let grid = settings.validate()?;
    let boundary = Boundary {
        phi1: Diffeo::translation(&grid, shift),
        ..Boundary::at_rest(&grid)
    };
    SplineProblem::new(settings, boundary)
}

/// Boundary problem whose data come from a zero-control rollout, so zero acceleration is optimal.
pub fn geodesic_problem(settings: ProblemSettings, seed: u64, amplitude: f64) -> Result<SplineProblem> {
    let grid = settings.validate()?;
    let v0 = smooth_velocity(&grid, seed, amplitude);
    let boundary = geodesic_boundary(&settings, Diffeo::identity(&grid), v0)?;
    SplineProblem::new(settings, boundary)
}

/// Knots sampled from a geodesic through the identity with initial velocity `xi0`,
/// at the time nodes nearest `times`. Returns the knots and the geodesic.
pub fn geodesic_knots(
    settings: &ProblemSettings,
    xi0: &VectorField,
    times: &[f64],
    initial_speed_weight: f64,
) -> Result<(KnotSequence, Trajectory)> {
    let metric = SobolevMetric::new(settings.s);
    let traj = geodesic_shoot_with(
        &flat(xi0, &metric),
        &metric,
        settings.time_steps,
        settings.interpolation,
    )?;
    let steps = settings.time_steps as f64;
    let targets = times
        .iter()
        .map(|t| traj.states()[(t * steps).round() as usize].phi.clone())
        .collect();
    Ok((KnotSequence::new(times.to_vec(), targets, initial_speed_weight)?, traj))
}
