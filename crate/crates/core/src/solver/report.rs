use serde::Serialize;

/// Outcome of a solve. Numeric results and wall-clock timings are kept apart so that
/// reproducibility checks can compare `numerics` alone.
#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub numerics: ReportNumerics,
    pub timing: ReportTiming,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReportNumerics {
    /// `"boundary"` or `"sequence"`.
    pub mode: String,
    /// `∫‖α‖²_{H^{s'}}` of the returned control.
    pub objective: f64,
    /// `λ₀‖ξ(0)‖²_{H^{s'}}`, zero for boundary problems.
    pub initial_speed_term: f64,
    /// Objective plus speed term plus the final penalty times the residuals.
    pub penalized_objective: f64,
    pub final_penalty: f64,
    pub endpoint_residuals: Option<EndpointResiduals>,
    pub knots: Vec<KnotReport>,
    pub gradient_norm: f64,
    pub iterations_per_round: Vec<usize>,
    pub rounds: Vec<RoundReport>,
    /// Every residual below the endpoint tolerance.
    pub converged: bool,
    /// Residuals stopped improving across two rounds.
    pub stalled: bool,
    pub initial_velocity_norm: f64,
    pub monitors: MonitorSummary,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct EndpointResiduals {
    pub position: f64,
    pub velocity: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct KnotReport {
    pub time: f64,
    pub node: usize,
    pub snapping_distance: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RoundReport {
    pub penalty: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub start_value: f64,
    pub end_value: f64,
    pub gradient_norm: f64,
    /// `"gradient"`, `"iterations"` or `"line-search"`.
    pub stop: String,
    pub residuals: Vec<f64>,
    /// Accepted iterates never increased the penalized objective.
    pub monotone: bool,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct MonitorSummary {
    pub gronwall_all_hold: bool,
    pub gronwall_identity_gap: f64,
    pub energy_drift: f64,
    pub transport_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReportTiming {
    pub total_seconds: f64,
    pub round_seconds: Vec<f64>,
    pub monitor_seconds: f64,
}
