//! Admission control for loss networks: fluid LP bounds, exponential-penalty
//! policies, polytopic target tracking and a discrete-event simulator.

pub mod bounds;
pub mod error;
pub mod lp;
pub mod model;
pub mod policy;
pub mod polytope;
pub mod scenarios;
pub mod sim;

pub use error::{Error, Result};
pub use model::{
    load_balancing_alphas, offered_loads, scale_scenario, validate_scenario, RequestClass,
    Scenario, ServiceModel, Violation,
};
