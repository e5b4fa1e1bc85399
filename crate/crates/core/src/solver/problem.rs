use serde::{Deserialize, Serialize};

use crate::diffeo::{compose_field_with, inverse_with, Diffeo, Interpolation};
use crate::error::{Error, Result};
use crate::spectral::{dealias, GridSpec, SobolevMetric, VectorField};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSettings {
    pub dim: usize,
    pub n: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PenaltySchedule {
    pub initial: f64,
    pub growth: f64,
    pub max_rounds: usize,
}

impl Default for PenaltySchedule {
    fn default() -> Self {
        Self {
            initial: 10.0,
            growth: 10.0,
            max_rounds: 5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Stop a penalty round once the gradient norm drops below this.
    pub gradient: f64,
    /// Converged once every endpoint or knot residual is below this.
    pub endpoint: f64,
    /// Quasi-Newton iterations per penalty round.
    pub max_iterations: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            gradient: 1e-8,
            endpoint: 1e-6,
            max_iterations: 200,
        }
    }
}

/// Numerical settings of a spline problem, everything except the field data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSettings {
    pub grid: GridSettings,
    pub s: f64,
    pub s_prime: f64,
    /// Permits `s < s' < s + 1`, outside the range where minimizers are known to exist.
    #[serde(default)]
    pub allow_experimental_order: bool,
    pub time_steps: usize,
    #[serde(default)]
    pub interpolation: Interpolation,
    #[serde(default)]
    pub penalty: PenaltySchedule,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl ProblemSettings {
    pub fn new(dim: usize, n: usize, s: f64, s_prime: f64, time_steps: usize) -> Self {
        Self {
            grid: GridSettings { dim, n },
            s,
            s_prime,
            allow_experimental_order: false,
            time_steps,
            interpolation: Interpolation::Cubic,
            penalty: PenaltySchedule::default(),
            tolerances: Tolerances::default(),
        }
    }

    /// Checks every hypothesis without touching field data.
    pub fn validate(&self) -> Result<GridSpec> {
        let grid = GridSpec::new(self.grid.dim, self.grid.n)?;
        SobolevMetric::new(self.s).validate_for(&grid)?;
        if !self.s_prime.is_finite() {
            return Err(Error::Validation("s_prime must be finite".into()));
        }
        if self.s_prime < self.s + 1.0 {
            if !self.allow_experimental_order {
                return Err(Error::Validation(format!(
                    "s_prime = {} violates the hypothesis s' >= s + 1 (s = {}); set allow_experimental_order to run s < s' < s + 1",
                    self.s_prime, self.s
                )));
            }
            if self.s_prime <= self.s {
                return Err(Error::Validation(format!(
                    "s_prime = {} must exceed s = {} even with allow_experimental_order",
                    self.s_prime, self.s
                )));
            }
        }
        if self.time_steps < 4 {
            return Err(Error::Validation(format!(
                "time_steps must be at least 4, got {}",
                self.time_steps
            )));
        }
        let p = &self.penalty;
        if !(p.initial > 0.0 && p.initial.is_finite())
            || !(p.growth >= 1.0 && p.growth.is_finite())
            || p.max_rounds == 0
        {
            return Err(Error::Validation(format!(
                "penalty schedule needs initial > 0, growth >= 1, max_rounds >= 1; got {}, {}, {}",
                p.initial, p.growth, p.max_rounds
            )));
        }
        let t = &self.tolerances;
        if [t.gradient, t.endpoint].iter().any(|v| v.is_nan() || *v < 0.0) {
            return Err(Error::Validation("tolerances must be nonnegative".into()));
        }
        Ok(grid)
    }
}

/// First-order boundary data: positions and Lagrangian velocities at `t = 0` and `t = 1`.
#[derive(Clone, Debug)]
pub struct Boundary {
    pub phi0: Diffeo,
    pub v0: VectorField,
    pub phi1: Diffeo,
    pub v1: VectorField,
}

impl Boundary {
    pub fn at_rest(grid: &GridSpec) -> Self {
        Self {
            phi0: Diffeo::identity(grid),
            v0: VectorField::zeros(grid),
            phi1: Diffeo::identity(grid),
            v1: VectorField::zeros(grid),
        }
    }
}

/// A validated boundary-value spline problem.
#[derive(Clone, Debug)]
pub struct SplineProblem {
    settings: ProblemSettings,
    grid: GridSpec,
    metric: SobolevMetric,
    objective_metric: SobolevMetric,
    boundary: Boundary,
    xi0: VectorField,
    xi1: VectorField,
}

impl SplineProblem {
    pub fn new(settings: ProblemSettings, boundary: Boundary) -> Result<Self> {
        let grid = settings.validate()?;
        for f in [
            boundary.phi0.displacement(),
            &boundary.v0,
            boundary.phi1.displacement(),
            &boundary.v1,
        ] {
            crate::spectral::ensure_same(&grid, f.grid())?;
            if !f.is_finite() {
                return Err(Error::Validation("boundary data has non-finite values".into()));
            }
        }
        boundary.phi0.check_nondegenerate()?;
        boundary.phi1.check_nondegenerate()?;
        // one-off conversions, done with spectral accuracy so that data exported from a
        // rollout round-trips without a cubic interpolation floor
        let scheme = Interpolation::Spectral;
        let eulerian = |v: &VectorField, phi: &Diffeo| -> Result<VectorField> {
            if v.max_abs() == 0.0 {
                return Ok(VectorField::zeros(&grid));
            }
            Ok(dealias(&compose_field_with(v, &inverse_with(phi, scheme)?, scheme)?))
        };
        let xi0 = eulerian(&boundary.v0, &boundary.phi0)?;
        let xi1 = eulerian(&boundary.v1, &boundary.phi1)?;
        Ok(Self {
            metric: SobolevMetric::new(settings.s),
            objective_metric: SobolevMetric::new(settings.s_prime),
            settings,
            grid,
            boundary,
            xi0,
            xi1,
        })
    }

    pub fn settings(&self) -> &ProblemSettings {
        &self.settings
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Order-`s` metric of the dynamics.
    pub fn metric(&self) -> &SobolevMetric {
        &self.metric
    }

    /// Order-`s'` metric of the acceleration objective.
    pub fn objective_metric(&self) -> &SobolevMetric {
        &self.objective_metric
    }

    pub fn boundary(&self) -> &Boundary {
        &self.boundary
    }

    pub fn steps(&self) -> usize {
        self.settings.time_steps
    }

    pub fn interpolation(&self) -> Interpolation {
        self.settings.interpolation
    }

    /// Eulerian initial velocity `v₀∘φ₀⁻¹`, restricted to the resolved band.
    pub fn initial_velocity(&self) -> &VectorField {
        &self.xi0
    }

    /// Eulerian final velocity `v₁∘φ₁⁻¹`, restricted to the resolved band.
    pub fn final_velocity(&self) -> &VectorField {
        &self.xi1
    }
}

/// Knot constraints `φ(tᵢ) = φᵢ` with an initial-speed penalty.
#[derive(Clone, Debug)]
pub struct KnotSequence {
    times: Vec<f64>,
    targets: Vec<Diffeo>,
    initial_speed_weight: f64,
}

impl KnotSequence {
    pub fn new(times: Vec<f64>, targets: Vec<Diffeo>, initial_speed_weight: f64) -> Result<Self> {
        if times.is_empty() || times.len() != targets.len() {
            return Err(Error::Validation(format!(
                "need one target per knot time, got {} times and {} targets",
                times.len(),
                targets.len()
            )));
        }
        if times.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
            return Err(Error::Validation("knot times must lie in (0, 1]".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Validation("knot times must be strictly increasing".into()));
        }
        // without a speed penalty the infimum over the torus can be zero and unattained
        if !(initial_speed_weight > 0.0 && initial_speed_weight.is_finite()) {
            return Err(Error::Validation(format!(
                "initial_speed_weight must be positive, got {initial_speed_weight}"
            )));
        }
        let grid = targets[0].grid().clone();
        for t in &targets {
            crate::spectral::ensure_same(&grid, t.grid())?;
            t.check_nondegenerate()?;
        }
        Ok(Self {
            times,
            targets,
            initial_speed_weight,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn targets(&self) -> &[Diffeo] {
        &self.targets
    }

    pub fn initial_speed_weight(&self) -> f64 {
        self.initial_speed_weight
    }

    /// Nearest time node of each knot and the distance moved.
    pub fn snap(&self, steps: usize) -> Result<Vec<(usize, f64)>> {
        let snapped: Vec<(usize, f64)> = self
            .times
            .iter()
            .map(|&t| {
                let node = ((t * steps as f64).round() as usize).clamp(1, steps);
                (node, (t - node as f64 / steps as f64).abs())
            })
            .collect();
        if snapped.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Validation(format!(
                "two knots snap to the same time node with {steps} steps; refine the time grid"
            )));
        }
        Ok(snapped)
    }
}
