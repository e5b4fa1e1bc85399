//! Acceleration-minimizing splines: minimize `∫‖α‖²_{H^{s'}}` over controls of the
//! forced rollout, with boundary or knot constraints enforced by quadratic penalty
//! continuation and an exact discrete adjoint gradient.

mod lbfgs;
mod problem;
mod report;

use std::time::Instant;

use rand::SeedableRng;

use crate::diffeo::Diffeo;
use crate::dynamics::rollout::{self, project, Dynamics};
use crate::dynamics::{gronwall_monitor, momentum_forcing, transport_residual, ControlPath, State, Trajectory};
use crate::error::{Error, Result};
use crate::spectral::{bessel_potential, flat, norm_hs_squared, sharp, Momentum, SobolevMetric, VectorField};

pub use problem::{Boundary, GridSettings, KnotSequence, PenaltySchedule, ProblemSettings, SplineProblem, Tolerances};
pub use report::{
    EndpointResiduals, KnotReport, MonitorSummary, ReportNumerics, ReportTiming, RoundReport, SolveReport,
};

/// Trapezoid weights of the uniform time grid.
fn trapezoid_weights(steps: usize) -> Vec<f64> {
    let dt = 1.0 / steps as f64;
    (0..=steps)
        .map(|j| if j == 0 || j == steps { 0.5 * dt } else { dt })
        .collect()
}

/// Trapezoidal quadrature of `‖α(t)‖²_{H^{s'}}`.
pub fn objective(control: &ControlPath, objective_metric: &SobolevMetric) -> f64 {
    control
        .fields()
        .iter()
        .zip(trapezoid_weights(control.steps()))
        .map(|(a, w)| w * norm_hs_squared(a, objective_metric))
        .sum()
}

/// `(‖φ(1) − φ₁‖²_{H^s}, ‖ξ(1) − ξ₁‖²_{H^s})`, the first measured on displacements.
pub fn endpoint_residual(traj: &Trajectory, problem: &SplineProblem) -> (f64, f64) {
    let last = traj.last();
    let metric = problem.metric();
    let dphi = last.phi.displacement() - problem.boundary().phi1.displacement();
    let dxi = &sharp(&last.m, metric) - problem.final_velocity();
    (norm_hs_squared(&dphi, metric), norm_hs_squared(&dxi, metric))
}

enum Constraints<'a> {
    Boundary,
    Knots { knots: &'a KnotSequence, nodes: Vec<usize> },
}

/// The penalized functional of one problem.
struct Functional<'a> {
    problem: &'a SplineProblem,
    constraints: Constraints<'a>,
}

struct Evaluation {
    value: f64,
    objective: f64,
    speed: f64,
    residuals: Vec<f64>,
    trajectory: Trajectory,
    grad_control: Vec<VectorField>,
    grad_momentum: Momentum,
}

impl<'a> Functional<'a> {
    fn boundary(problem: &'a SplineProblem) -> Self {
        Self {
            problem,
            constraints: Constraints::Boundary,
        }
    }

    fn knots(problem: &'a SplineProblem, knots: &'a KnotSequence) -> Result<Self> {
        crate::spectral::ensure_same(problem.grid(), knots.targets()[0].grid())?;
        let nodes = knots.snap(problem.steps())?.into_iter().map(|(n, _)| n).collect();
        Ok(Self {
            problem,
            constraints: Constraints::Knots { knots, nodes },
        })
    }

    fn fixed_momentum(&self) -> Momentum {
        flat(self.problem.initial_velocity(), self.problem.metric())
    }

    /// `λ₀ ‖m₀^♯‖²_{H^{s'}}` in sequence mode, zero otherwise.
    fn speed(&self, m0: &Momentum) -> (f64, Option<Momentum>) {
        match &self.constraints {
            Constraints::Boundary => (0.0, None),
            Constraints::Knots { knots, .. } => {
                let s = self.problem.metric().order();
                let sp = self.problem.objective_metric().order();
                let lambda = knots.initial_speed_weight();
                let xi = bessel_potential(m0, -s).recast();
                let value = lambda * norm_hs_squared(&xi, self.problem.objective_metric());
                (value, Some(bessel_potential(m0, sp - 2.0 * s).scaled(2.0 * lambda)))
            }
        }
    }

    fn evaluate(&self, control: &ControlPath, m0: &Momentum, penalty: f64, with_grad: bool) -> Result<Evaluation> {
        let problem = self.problem;
        let metric = problem.metric();
        let state0 = State {
            phi: problem.boundary().phi0.clone(),
            m: m0.clone(),
        };
        let rec = rollout::rollout(&state0, control, metric, problem.interpolation(), with_grad)?;
        let traj = rec.trajectory;
        let objective = objective(control, problem.objective_metric());
        let (speed, speed_grad) = self.speed(m0);
        let steps = traj.steps();
        let grid = problem.grid();

        // residuals and the cotangents they seed at each node
        let mut residuals = Vec::new();
        let mut seeds: Vec<Option<(VectorField, Momentum)>> = vec![None; steps + 1];
        match &self.constraints {
            Constraints::Boundary => {
                let last = traj.last();
                let dphi = last.phi.displacement() - problem.boundary().phi1.displacement();
                let dxi = &sharp(&last.m, metric) - problem.final_velocity();
                residuals.push(norm_hs_squared(&dphi, metric));
                residuals.push(norm_hs_squared(&dxi, metric));
                seeds[steps] = Some((
                    flat(&dphi, metric).recast().scaled(2.0 * penalty),
                    dxi.recast().scaled(2.0 * penalty),
                ));
            }
            Constraints::Knots { knots, nodes } => {
                for (target, &node) in knots.targets().iter().zip(nodes) {
                    let dphi = traj.states()[node].phi.displacement() - target.displacement();
                    residuals.push(norm_hs_squared(&dphi, metric));
                    seeds[node] = Some((
                        flat(&dphi, metric).recast().scaled(2.0 * penalty),
                        Momentum::zeros(grid),
                    ));
                }
            }
        }
        let value = objective + speed + penalty * residuals.iter().sum::<f64>();

        let weights = trapezoid_weights(steps);
        let mut grad_control: Vec<VectorField> = Vec::new();
        let mut grad_momentum = Momentum::zeros(grid);
        if with_grad {
            let dynamics = Dynamics {
                metric: *metric,
                scheme: problem.interpolation(),
                grid: grid.clone(),
            };
            let h = control.dt();
            let mut dbar = VectorField::zeros(grid);
            let mut mbar = Momentum::zeros(grid);
            if let Some((d, m)) = &seeds[steps] {
                dbar += d;
                mbar += m;
            }
            let mut abar = vec![Momentum::zeros(grid); steps + 1];
            for j in (0..steps).rev() {
                let ((d, m), fb) = dynamics.step_vjp(&rec.tapes[j], h, &dbar, &mbar);
                dbar = d;
                mbar = m;
                let [left, mid, right] = fb;
                abar[j] += &left;
                abar[j].axpy(0.5, &mid);
                abar[j + 1] += &right;
                abar[j + 1].axpy(0.5, &mid);
                if let Some((d, m)) = &seeds[j] {
                    dbar += d;
                    mbar += m;
                }
            }
            let sp = problem.objective_metric();
            grad_control = abar
                .iter()
                .zip(control.fields())
                .zip(&weights)
                .map(|((ab, a), w)| {
                    let mut g: VectorField = momentum_forcing(&ab.clone().recast(), metric).recast();
                    g.axpy(2.0 * w, &flat(a, sp).recast());
                    g
                })
                .collect();
            grad_momentum = project(&mbar);
            if let Some(sg) = speed_grad {
                grad_momentum += &sg;
            }
        }
        Ok(Evaluation {
            value,
            objective,
            speed,
            residuals,
            trajectory: traj,
            grad_control,
            grad_momentum,
        })
    }
}

/// `objective + penalty · (sum of endpoint residuals)` for a boundary problem.
pub fn penalized_objective(control: &ControlPath, problem: &SplineProblem, penalty: f64) -> Result<f64> {
    let f = Functional::boundary(problem);
    Ok(f.evaluate(control, &f.fixed_momentum(), penalty, false)?.value)
}

/// Gradient of [`penalized_objective`] with respect to every control node, as the
/// representer in the grid pairing `⟨u, w⟩ = (1/N) Σ u·w`.
pub fn gradient(control: &ControlPath, problem: &SplineProblem, penalty: f64) -> Result<ControlPath> {
    let f = Functional::boundary(problem);
    ControlPath::new(f.evaluate(control, &f.fixed_momentum(), penalty, true)?.grad_control)
}

/// `λ₀‖m₀^♯‖²_{H^{s'}} + objective + penalty · Σ knot residuals`.
pub fn sequence_objective(
    control: &ControlPath,
    m0: &Momentum,
    knots: &KnotSequence,
    problem: &SplineProblem,
    penalty: f64,
) -> Result<f64> {
    Ok(Functional::knots(problem, knots)?
        .evaluate(control, m0, penalty, false)?
        .value)
}

/// Gradient of [`sequence_objective`] with respect to the control and the initial momentum.
pub fn sequence_gradient(
    control: &ControlPath,
    m0: &Momentum,
    knots: &KnotSequence,
    problem: &SplineProblem,
    penalty: f64,
) -> Result<(ControlPath, Momentum)> {
    let e = Functional::knots(problem, knots)?.evaluate(control, m0, penalty, true)?;
    Ok((ControlPath::new(e.grad_control)?, e.grad_momentum))
}

/// Seeded smooth random control, for multi-start runs.
pub fn random_control(problem: &SplineProblem, seed: u64, amplitude: f64) -> ControlPath {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let fields = (0..=problem.steps())
        .map(|_| VectorField::random_band_limited(problem.grid(), 2, amplitude, &mut rng))
        .collect();
    ControlPath::new(fields).expect("finite control on one grid")
}

/// Change of variables that turns the objective into a plain squared norm:
/// `α_j = Λ^{-s'/2} z_j / √w_j` and, in sequence mode, `m₀ = Λ^{s - s'/2} y`.
struct Whitening {
    grid: crate::spectral::GridSpec,
    s: f64,
    s_prime: f64,
    weights: Vec<f64>,
    with_momentum: bool,
}

impl Whitening {
    fn block(&self) -> usize {
        self.grid.dim() * self.grid.len()
    }

    fn pack(&self, control: &ControlPath, m0: &Momentum) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.block() * (self.weights.len() + 1));
        for (a, w) in control.fields().iter().zip(&self.weights) {
            x.extend(bessel_potential(a, 0.5 * self.s_prime).scaled(w.sqrt()).data());
        }
        if self.with_momentum {
            x.extend(bessel_potential(m0, 0.5 * self.s_prime - self.s).data());
        }
        x
    }

    fn unpack(&self, x: &[f64]) -> Option<(ControlPath, Option<Momentum>)> {
        let b = self.block();
        let fields = self
            .weights
            .iter()
            .enumerate()
            .map(|(j, w)| {
                let z = VectorField::from_vec(&self.grid, x[j * b..(j + 1) * b].to_vec()).ok()?;
                Some(bessel_potential(&z, -0.5 * self.s_prime).scaled(1.0 / w.sqrt()))
            })
            .collect::<Option<Vec<_>>>()?;
        let control = ControlPath::new(fields).ok()?;
        let m0 = if self.with_momentum {
            let off = self.weights.len() * b;
            let y = Momentum::from_vec(&self.grid, x[off..off + b].to_vec()).ok()?;
            Some(bessel_potential(&y, self.s - 0.5 * self.s_prime))
        } else {
            None
        };
        Some((control, m0))
    }

    /// Chain rule back to the whitened variables (the maps are symmetric).
    fn pull_gradient(&self, grad_control: &[VectorField], grad_momentum: &Momentum) -> Vec<f64> {
        let mut g = Vec::with_capacity(self.block() * (self.weights.len() + 1));
        for (ga, w) in grad_control.iter().zip(&self.weights) {
            g.extend(bessel_potential(ga, -0.5 * self.s_prime).scaled(1.0 / w.sqrt()).data());
        }
        if self.with_momentum {
            g.extend(bessel_potential(grad_momentum, self.s - 0.5 * self.s_prime).data());
        }
        g
    }
}

struct Solution {
    trajectory: Trajectory,
    control: ControlPath,
    report: SolveReport,
}

fn continuation(
    functional: &Functional,
    control0: &ControlPath,
    m0: &Momentum,
    with_momentum: bool,
) -> Result<Solution> {
    let started = Instant::now();
    let problem = functional.problem;
    let settings = problem.settings();
    crate::spectral::ensure_same(problem.grid(), control0.grid())?;
    if control0.steps() != problem.steps() {
        return Err(Error::Validation(format!(
            "initial control has {} steps, problem has {}",
            control0.steps(),
            problem.steps()
        )));
    }
    let whitening = Whitening {
        grid: problem.grid().clone(),
        s: problem.metric().order(),
        s_prime: problem.objective_metric().order(),
        weights: trapezoid_weights(problem.steps()),
        with_momentum,
    };
    let fixed_m0 = m0.clone();
    let decode = |x: &[f64]| -> Option<(ControlPath, Momentum)> {
        let (c, m) = whitening.unpack(x)?;
        Some((c, m.unwrap_or_else(|| fixed_m0.clone())))
    };

    // a failing starting point is a hard error
    functional.evaluate(control0, m0, settings.penalty.initial, false)?;

    let mut x = whitening.pack(control0, m0);
    let mut penalty = settings.penalty.initial;
    let mut rounds: Vec<RoundReport> = Vec::new();
    let mut round_seconds = Vec::new();
    let mut worst_residuals: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut stalled = false;
    let mut last_gradient_norm = f64::NAN;
    let tol = &settings.tolerances;
    for round in 0..settings.penalty.max_rounds {
        let round_start = Instant::now();
        if round > 0 {
            penalty *= settings.penalty.growth;
        }
        let opts = lbfgs::Options {
            gradient_tolerance: tol.gradient,
            max_iterations: tol.max_iterations,
            initial_scale: 0.5,
        };
        let outcome = lbfgs::minimize(x.clone(), &opts, |z| {
            let (c, m) = decode(z)?;
            let e = functional.evaluate(&c, &m, penalty, true).ok()?;
            e.value
                .is_finite()
                .then(|| (e.value, whitening.pull_gradient(&e.grad_control, &e.grad_momentum)))
        })
        .ok_or_else(|| Error::Validation("solver iterate left the admissible set".into()))?;
        x = outcome.x;
        last_gradient_norm = outcome.gradient_norm;
        let (c, m) = decode(&x).expect("accepted iterate decodes");
        let e = functional.evaluate(&c, &m, penalty, false)?;
        let worst = e.residuals.iter().cloned().fold(0.0, f64::max);
        rounds.push(RoundReport {
            penalty,
            iterations: outcome.iterations,
            evaluations: outcome.evaluations,
            start_value: outcome.history[0],
            end_value: outcome.value,
            gradient_norm: outcome.gradient_norm,
            stop: match outcome.stop {
                lbfgs::Stop::Gradient => "gradient",
                lbfgs::Stop::Iterations => "iterations",
                lbfgs::Stop::LineSearch => "line-search",
            }
            .to_string(),
            residuals: e.residuals.clone(),
            monotone: outcome.history.windows(2).all(|w| w[1] <= w[0]),
        });
        round_seconds.push(round_start.elapsed().as_secs_f64());
        worst_residuals.push(worst);
        if worst < tol.endpoint {
            converged = true;
            break;
        }
        let k = worst_residuals.len();
        if k >= 3
            && worst_residuals[k - 1] > 0.9 * worst_residuals[k - 2]
            && worst_residuals[k - 2] > 0.9 * worst_residuals[k - 3]
        {
            stalled = true;
            break;
        }
    }

    let (control, m0) = decode(&x).expect("final iterate decodes");
    let e = functional.evaluate(&control, &m0, penalty, false)?;
    let monitor_start = Instant::now();
    let trajectory = e.trajectory;
    let gronwall = gronwall_monitor(&trajectory, &control, problem.metric())?;
    let transport = transport_residual(&trajectory, &control, problem.metric())?;
    let monitor_seconds = monitor_start.elapsed().as_secs_f64();

    let (endpoint_residuals, knots) = match &functional.constraints {
        Constraints::Boundary => (
            Some(EndpointResiduals {
                position: e.residuals[0],
                velocity: e.residuals[1],
            }),
            Vec::new(),
        ),
        Constraints::Knots { knots, .. } => {
            let snapped = knots.snap(problem.steps())?;
            let reports = knots
                .times()
                .iter()
                .zip(snapped)
                .zip(&e.residuals)
                .map(|((&time, (node, distance)), &residual)| KnotReport {
                    time,
                    node,
                    snapping_distance: distance,
                    residual,
                })
                .collect();
            (None, reports)
        }
    };
    let numerics = ReportNumerics {
        mode: match functional.constraints {
            Constraints::Boundary => "boundary",
            Constraints::Knots { .. } => "sequence",
        }
        .to_string(),
        objective: e.objective,
        initial_speed_term: e.speed,
        penalized_objective: e.value,
        final_penalty: penalty,
        endpoint_residuals,
        knots,
        gradient_norm: last_gradient_norm,
        iterations_per_round: rounds.iter().map(|r| r.iterations).collect(),
        rounds,
        converged,
        stalled,
        initial_velocity_norm: crate::spectral::norm_hs(&trajectory.velocity(0), problem.metric()),
        monitors: MonitorSummary {
            gronwall_all_hold: gronwall.all_hold,
            gronwall_identity_gap: gronwall.identity_gap,
            energy_drift: gronwall.energy_drift,
            transport_residual: transport,
        },
    };
    Ok(Solution {
        trajectory,
        control,
        report: SolveReport {
            numerics,
            timing: ReportTiming {
                total_seconds: started.elapsed().as_secs_f64(),
                round_seconds,
                monitor_seconds,
            },
        },
    })
}

/// Minimizes the penalized boundary-value functional from `init` (zero control if absent).
pub fn solve(problem: &SplineProblem, init: Option<&ControlPath>) -> Result<(Trajectory, ControlPath, SolveReport)> {
    let functional = Functional::boundary(problem);
    let zero;
    let control0 = match init {
        Some(c) => c,
        None => {
            zero = ControlPath::zeros(problem.grid(), problem.steps())?;
            &zero
        }
    };
    let sol = continuation(&functional, control0, &functional.fixed_momentum(), false)?;
    Ok((sol.trajectory, sol.control, sol.report))
}

/// Fits a spline through the knots, starting from `φ₀` of `problem` with a free initial
/// velocity. The endpoint data `φ₁, v₁` of `problem` are not used.
pub fn interpolate_sequence(
    knots: &KnotSequence,
    problem: &SplineProblem,
) -> Result<(Trajectory, ControlPath, SolveReport)> {
    interpolate_sequence_from(knots, problem, None)
}

pub fn interpolate_sequence_from(
    knots: &KnotSequence,
    problem: &SplineProblem,
    init: Option<(&ControlPath, &Momentum)>,
) -> Result<(Trajectory, ControlPath, SolveReport)> {
    let functional = Functional::knots(problem, knots)?;
    let (control0, m0) = match init {
        Some((c, m)) => (c.clone(), m.clone()),
        None => (
            ControlPath::zeros(problem.grid(), problem.steps())?,
            functional.fixed_momentum(),
        ),
    };
    let sol = continuation(&functional, &control0, &m0, true)?;
    Ok((sol.trajectory, sol.control, sol.report))
}

/// Endpoint data of a zero-control rollout from `(φ₀, v₀)`: boundary conditions that a
/// geodesic meets exactly.
pub fn geodesic_boundary(problem_settings: &ProblemSettings, phi0: Diffeo, v0: VectorField) -> Result<Boundary> {
    let seed = SplineProblem::new(
        problem_settings.clone(),
        Boundary {
            phi1: phi0.clone(),
            v1: v0.clone(),
            phi0: phi0.clone(),
            v0: v0.clone(),
        },
    )?;
    let control = ControlPath::zeros(seed.grid(), seed.steps())?;
    let traj = crate::dynamics::forced_rollout_with(
        &State {
            phi: phi0.clone(),
            m: flat(seed.initial_velocity(), seed.metric()),
        },
        &control,
        seed.metric(),
        seed.interpolation(),
    )?;
    let last = traj.steps();
    Ok(Boundary {
        phi0,
        v0,
        phi1: traj.last().phi.clone(),
        v1: traj.lagrangian_velocity(last)?,
    })
}
