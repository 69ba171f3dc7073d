use thiserror::Error;

use crate::model::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {}", join_violations(.0))]
    InvalidScenario(Vec<Violation>),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("multi-resource scenario: use solve_network_lp")]
    NotSingleResource,

    #[error("infeasible target fraction for class {class}: alpha = {alpha:.6} > 1")]
    InfeasibleTarget { class: usize, alpha: f64 },

    #[error("beta = {requested} exceeds the admissible bound {bound}")]
    BetaTooLarge { requested: f64, bound: f64 },

    #[error("class {class} has zero perturbed acceptance fraction; drop it before building a penalty policy")]
    ZeroPerturbedFraction { class: usize },

    #[error("assumption violated: mu_min/mu_max = {ratio:.6} < gamma* = {gamma:.6}")]
    RateMismatch { ratio: f64, gamma: f64 },

    #[error("initial fictitious load violates the penalty budget: log Psi = {log_psi:.6} > log Psi* = {log_psi_star:.6}")]
    PenaltyBudget { log_psi: f64, log_psi_star: f64 },

    #[error("feasibility fault at t = {time}: class {class} allocation {allocation} does not fit")]
    FeasibilityFault {
        time: f64,
        class: usize,
        allocation: usize,
    },

    #[error("unknown class index {0}")]
    UnknownClass(usize),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
