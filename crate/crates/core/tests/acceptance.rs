//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//! Run with `cargo test -p diffspline --test acceptance -- --nocapture` to see the lines.

use std::time::Instant;

use diffspline::diffeo::{Diffeo, Interpolation};
use diffspline::dynamics::{
    ad_action_with, ad_star_pullback_with, forced_rollout_with, geodesic_shoot_with, gronwall_monitor,
    transport_profile, ControlPath, State,
};
use diffspline::fixtures::{geodesic_knots, geodesic_problem, shear_problem, smooth_velocity, translation_problem};
use diffspline::solver::{
    gradient, interpolate_sequence, penalized_objective, random_control, solve, Boundary, ProblemSettings,
    SplineProblem,
};
use diffspline::spectral::{ad, coad, flat, norm_hs, Field, GridSpec, Momentum, SobolevMetric, VectorField};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn verdict(id: u32, name: &str, ok: bool, details: String) {
    println!(
        "{} criterion {id} ({name}): {details}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {id} ({name}) failed: {details}");
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// `a(t) = sin(3t) A + (1 - t²) B` for two smooth fields.
fn smooth_control(g: &GridSpec, steps: usize, seed: u64, amplitude: f64) -> ControlPath {
    let a = smooth_velocity(g, seed, amplitude);
    let b = smooth_velocity(g, seed + 1000, amplitude);
    ControlPath::new(
        (0..=steps)
            .map(|j| {
                let t = j as f64 / steps as f64;
                let mut f = a.scaled((3.0 * t).sin());
                f.axpy(1.0 - t * t, &b);
                f
            })
            .collect(),
    )
    .unwrap()
}

/// Worst relative gap of `<Ad*_g m, eta> = <m, Ad_g eta>` over random triples.
fn group_duality_error(g: &GridSpec, scheme: Interpolation, samples: usize, rng: &mut ChaCha8Rng) -> f64 {
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let phi = Diffeo::from_displacement(VectorField::random_band_limited(g, 2, 0.1, rng)).unwrap();
        let eta = VectorField::random_band_limited(g, 2, 1.0, rng);
        let m: Momentum = Field::random_band_limited(g, 2, 1.0, rng);
        let lhs = ad_star_pullback_with(&phi, &m, scheme).unwrap().dot(&eta).unwrap();
        let rhs = m.dot(&ad_action_with(&phi, &eta, scheme).unwrap()).unwrap();
        worst = worst.max(rel(lhs, rhs));
    }
    worst
}

#[test]
fn criterion_01_duality() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let g = GridSpec::new(2, 32).unwrap();
    let mut coad_err = 0.0f64;
    for _ in 0..50 {
        let xi = VectorField::random_band_limited(&g, g.band(), 1.0, &mut rng);
        let eta = VectorField::random_band_limited(&g, g.band(), 1.0, &mut rng);
        let m: Momentum = Field::random_band_limited(&g, g.band(), 1.0, &mut rng);
        let lhs = coad(&xi, &m).unwrap().dot(&eta).unwrap();
        coad_err = coad_err.max(rel(lhs, m.dot(&ad(&xi, &eta).unwrap()).unwrap()));
    }
    let spectral_err = group_duality_error(&g, Interpolation::Spectral, 50, &mut rng);
    // cubic evaluation is interpolation-limited: worst case ~2e-4 at n = 32, ~1e-5 at n = 64
    let fine = GridSpec::new(2, 128).unwrap();
    let cubic_err = group_duality_error(&fine, Interpolation::Cubic, 50, &mut rng);
    verdict(
        1,
        "duality",
        coad_err <= 1e-7 && cubic_err <= 1e-5 && spectral_err <= 1e-8,
        format!(
            "50 triples each: coad/ad {coad_err:.2e} (<= 1e-7), Ad*/Ad spectral n=32 {spectral_err:.2e} (<= 1e-8), cubic n=128 {cubic_err:.2e} (<= 1e-5)"
        ),
    );
}

/// Relative energy spread and relative momentum transport gap of a geodesic.
fn conservation_errors(m0: &Momentum, metric: &SobolevMetric, steps: usize) -> (f64, f64) {
    let traj = geodesic_shoot_with(m0, metric, steps, Interpolation::Spectral).unwrap();
    let zero = ControlPath::zeros(m0.grid(), steps).unwrap();
    let energy = gronwall_monitor(&traj, &zero, metric).unwrap().energy_drift;
    let transport = transport_profile(&traj, &zero, metric).unwrap().relative_max;
    (energy, transport)
}

#[test]
fn criterion_02_geodesic_conservation() {
    // a large deformation on a fine grid, so that the time discretization rather than the
    // band truncation dominates both errors and refinement is observable
    let g = GridSpec::new(1, 128).unwrap();
    let metric = SobolevMetric::new(2.0);
    let m0 = flat(&smooth_velocity(&g, 3, 0.6), &metric);
    let (e64, t64) = conservation_errors(&m0, &metric, 64);
    let (e256, t256) = conservation_errors(&m0, &metric, 256);
    let (es, ts) = (e64 / e256, t64 / t256);
    verdict(
        2,
        "geodesic conservation",
        e64 <= 1e-5 && t64 <= 1e-5 && es >= 8.0 && ts >= 8.0,
        format!(
            "64 steps: energy {e64:.2e}, momentum {t64:.2e} (<= 1e-5); 256 steps: {e256:.2e}, {t256:.2e}; shrink {es:.0}x, {ts:.0}x (>= 8x)"
        ),
    );
}

#[test]
fn criterion_03_energy_identity() {
    let g = GridSpec::new(2, 32).unwrap();
    let metric = SobolevMetric::new(2.5);
    let steps = 64;
    let state = State::at_identity(flat(&smooth_velocity(&g, 3, 0.1), &metric));
    let fixtures = [
        ("zero", ControlPath::zeros(&g, steps).unwrap()),
        (
            "constant",
            ControlPath::constant(smooth_velocity(&g, 4, 0.05), steps).unwrap(),
        ),
        ("varying", smooth_control(&g, steps, 5, 0.05)),
    ];
    let mut gap = 0.0f64;
    let mut holds = true;
    for (_, control) in &fixtures {
        let traj = forced_rollout_with(&state, control, &metric, Interpolation::Cubic).unwrap();
        let report = gronwall_monitor(&traj, control, &metric).unwrap();
        gap = gap.max(report.identity_gap);
        holds &= report.all_hold;
    }
    verdict(
        3,
        "energy identity",
        gap <= 1e-4 && holds,
        format!("max |f' - <a,xi>| {gap:.2e} (<= 1e-4) over 3 fixtures, bound holds at every node: {holds}"),
    );
}

#[test]
fn criterion_04_transport_residual() {
    let g = GridSpec::new(1, 128).unwrap();
    let metric = SobolevMetric::new(2.0);
    let state = State::at_identity(flat(&smooth_velocity(&g, 6, 0.2), &metric));
    let a = smooth_velocity(&g, 7, 0.4);
    let b = smooth_velocity(&g, 8, 0.4);
    let residual = |steps: usize| {
        let control = ControlPath::new(
            (0..=steps)
                .map(|j| {
                    let t = j as f64 / steps as f64;
                    let mut f = a.scaled((3.0 * t).sin());
                    f.axpy(1.0 - t * t, &b);
                    f
                })
                .collect(),
        )
        .unwrap();
        let traj = forced_rollout_with(&state, &control, &metric, Interpolation::Spectral).unwrap();
        transport_profile(&traj, &control, &metric).unwrap().max
    };
    let r: Vec<f64> = [16, 32, 64].iter().map(|&m| residual(m)).collect();
    let rate = (r[0] / r[2]).log2() / 2.0;
    verdict(
        4,
        "transport residual",
        r[2] <= 1e-4 && rate >= 1.8,
        format!(
            "residual at 64 steps {:.2e} (<= 1e-4); 16/32/64 steps {:.2e} {:.2e} {:.2e}, order {rate:.2} (>= 1.8)",
            r[2], r[0], r[1], r[2]
        ),
    );
}

fn gradient_error(settings: ProblemSettings, seed: u64, directions: u64) -> f64 {
    let g = settings.validate().unwrap();
    let boundary = Boundary {
        phi0: Diffeo::from_displacement(smooth_velocity(&g, seed, 0.1)).unwrap(),
        v0: smooth_velocity(&g, seed + 1, 0.2),
        phi1: Diffeo::from_displacement(smooth_velocity(&g, seed + 2, 0.2)).unwrap(),
        v1: smooth_velocity(&g, seed + 3, 0.2),
    };
    let problem = SplineProblem::new(settings, boundary).unwrap();
    let control = smooth_control(&g, problem.steps(), seed + 4, 0.3);
    let penalty = 10.0;
    let grad = gradient(&control, &problem, penalty).unwrap();
    let h = 1e-5;
    let mut worst = 0.0f64;
    for k in 0..directions {
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100 + k);
        let dir = ControlPath::new(
            (0..=problem.steps())
                .map(|_| VectorField::random_band_limited(&g, 3, 1.0, &mut rng))
                .collect(),
        )
        .unwrap();
        let analytic: f64 = grad
            .fields()
            .iter()
            .zip(dir.fields())
            .map(|(a, b)| a.dot(b).unwrap())
            .sum();
        let at = |s: f64| {
            let moved = control
                .fields()
                .iter()
                .zip(dir.fields())
                .map(|(a, d)| a + &d.scaled(s))
                .collect();
            penalized_objective(&ControlPath::new(moved).unwrap(), &problem, penalty).unwrap()
        };
        worst = worst.max(rel((at(h) - at(-h)) / (2.0 * h), analytic));
    }
    worst
}

#[test]
fn criterion_05_adjoint_exactness() {
    let e1 = gradient_error(ProblemSettings::new(1, 32, 2.0, 3.0, 16), 11, 20);
    let e2 = gradient_error(ProblemSettings::new(2, 16, 2.5, 3.5, 8), 21, 20);
    verdict(
        5,
        "adjoint exactness",
        e1 <= 1e-5 && e2 <= 1e-5,
        format!("worst relative error over 20 directions: d=1 n=32 M=16 {e1:.2e}, d=2 n=16 M=8 {e2:.2e} (<= 1e-5)"),
    );
}

#[test]
fn criterion_06_zero_acceleration_recovery() {
    let problem = geodesic_problem(ProblemSettings::new(2, 16, 2.5, 3.5, 16), 31, 0.2).unwrap();
    let (_, _, report) = solve(&problem, None).unwrap();
    let n = &report.numerics;
    let res = n.endpoint_residuals.unwrap();
    verdict(
        6,
        "zero-acceleration recovery",
        n.objective <= 1e-6 && res.position <= 1e-6 && res.velocity <= 1e-6 && n.rounds.len() <= 5,
        format!(
            "objective {:.2e} (<= 1e-6), endpoint residuals {:.2e} / {:.2e} (<= 1e-6), {} rounds (<= 5)",
            n.objective,
            res.position,
            res.velocity,
            n.rounds.len()
        ),
    );
}

#[test]
fn criterion_07_sequence_recovery() {
    let settings = ProblemSettings::new(1, 64, 2.0, 3.0, 24);
    let g = settings.validate().unwrap();
    let xi0 = smooth_velocity(&g, 5, 0.3);
    let (knots, truth) = geodesic_knots(&settings, &xi0, &[1.0 / 3.0, 2.0 / 3.0, 1.0], 1e-3).unwrap();
    let problem = SplineProblem::new(settings, Boundary::at_rest(&g)).unwrap();
    let (traj, _, report) = interpolate_sequence(&knots, &problem).unwrap();
    let metric = problem.metric();
    let err = norm_hs(&(&traj.velocity(0) - &truth.velocity(0)), metric);
    let objective = report.numerics.objective;
    verdict(
        7,
        "sequence recovery",
        objective <= 1e-5 && err <= 1e-3,
        format!("objective {objective:.2e} (<= 1e-5), initial velocity error {err:.2e} in H^s (<= 1e-3)"),
    );
}

#[test]
fn criterion_08_hypothesis_enforcement() {
    let mut rejected_order = 0;
    let mut order_cases = 0;
    let mut leaks = Vec::new();
    for dim in [1usize, 2] {
        let n = if dim == 1 { 32 } else { 16 };
        let floor = dim as f64 / 2.0 + 1.0;
        for s in [floor - 0.5, floor, floor + 0.25, floor + 1.0, 3.0] {
            for gap in [-0.5, 0.0, 0.5, 0.99, 1.0, 1.5] {
                let settings = ProblemSettings::new(dim, n, s, s + gap, 8);
                let valid = s > floor && gap >= 1.0;
                // construction validates before touching the boundary data
                let g = GridSpec::new(dim, n).unwrap();
                let built = SplineProblem::new(settings.clone(), Boundary::at_rest(&g));
                if settings.validate().is_ok() != valid || built.is_ok() != valid {
                    leaks.push(format!("d={dim} s={s} s'={}", s + gap));
                }
                if gap < 1.0 {
                    order_cases += 1;
                    rejected_order += usize::from(settings.validate().is_err());
                }
            }
        }
    }
    // the override opens s < s' < s + 1 only
    let mut experimental = ProblemSettings::new(1, 32, 2.0, 2.5, 8);
    experimental.allow_experimental_order = true;
    let opened = experimental.validate().is_ok();
    experimental.s_prime = 2.0;
    let still_closed = experimental.validate().is_err();
    verdict(
        8,
        "hypothesis enforcement",
        leaks.is_empty() && rejected_order == order_cases && opened && still_closed,
        format!(
            "{rejected_order}/{order_cases} configurations with s' < s + 1 rejected, mismatches {leaks:?}, override opens (s, s+1): {opened}, s' = s still rejected: {still_closed}"
        ),
    );
}

#[test]
fn criterion_09_reproducibility() {
    let mut settings = ProblemSettings::new(1, 32, 2.0, 3.0, 16);
    settings.tolerances.endpoint = 1e-10;
    let problem = translation_problem(settings, &[0.3]).unwrap();
    let init = random_control(&problem, 7, 0.05);
    let numerics = |init: Option<&ControlPath>| {
        let (_, _, report) = solve(&problem, init).unwrap();
        (
            serde_json::to_string(&report.numerics).unwrap(),
            report.numerics.objective,
        )
    };
    let (first, random) = numerics(Some(&init));
    let (second, _) = numerics(Some(&init));
    let (_, zero) = numerics(None);
    let identical = first == second;
    let agree = rel(zero, random) < 5e-4 && zero > 0.0;
    verdict(
        9,
        "reproducibility",
        identical && agree,
        format!("repeat run bit-identical: {identical}; objective zero init {zero:.6e} vs random init {random:.6e} (3 significant digits)"),
    );
}

#[test]
fn criterion_10_noncommuting_shears() {
    let mut settings = ProblemSettings::new(2, 32, 2.5, 3.5, 32);
    settings.tolerances.endpoint = 1e-4;
    let started = Instant::now();
    let outcome = shear_problem(settings, 0.3, 0.3).and_then(|p| solve(&p, None));
    let elapsed = started.elapsed().as_secs_f64();
    let (ok, details) = match outcome {
        Ok((_, _, report)) => {
            let n = &report.numerics;
            let res = n.endpoint_residuals.unwrap();
            let worst = res.position.max(res.velocity);
            (
                worst <= 1e-4 && n.objective.is_finite() && elapsed <= 600.0,
                format!(
                    "endpoint residual {worst:.2e} (<= 1e-4), objective {:.4}, {} rounds, {elapsed:.0} s (<= 600 s)",
                    n.objective,
                    n.rounds.len()
                ),
            )
        }
        Err(e) => (false, format!("error after {elapsed:.0} s: {e}")),
    };
    verdict(10, "non-commuting shears", ok, details);
}
