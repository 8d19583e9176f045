//! Desk-scale testbeds: online linear problems for optimistic mirror descent,
//! smooth objectives for proxy gradient descent, and trace generators.
//!
//! Predictors inside every testbed consume gradients online, one observed
//! gradient at a time, so no run can use a gradient before it is revealed.

pub mod logreg;
pub mod omd;
pub mod planted;
pub mod proxy_gd;

pub use logreg::{generate_logreg_trace, LogRegConfig, LogRegOptimizer};
pub use omd::{run_omd, tune_eta, LossKind, OmdReport, OmdRun, OmdVariant, OnlineLinearProblem};
pub use planted::generate_planted_trace;
pub use proxy_gd::{
    descent_check, initial_point, run_proxy_gd, DescentReport, ObjectiveFamily, ProxyGdReport,
    ProxyGdRun, ProxySource, SmoothObjective,
};
