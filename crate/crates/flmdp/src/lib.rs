//! Planning in finite discounted MDPs with factored linear models.
//!
//! The library solves MDPs exactly, plans through compressed value iteration
//! on a factored linear model `P ≈ QR`, extracts a Bellman-lookahead policy,
//! and audits every supported policy-error bound against the exactly
//! computed policy error.

pub mod bounds;
pub mod counterexamples;
pub mod error;
pub mod factored;
pub mod gen;
pub mod io;
pub mod mdp;
pub mod norms;
pub mod planner;

pub use error::Error;
pub use factored::{FactoredLinearModel, RightFactor};
pub use mdp::{ActionValue, Mdp, Policy};
pub use norms::{NormSpec, PExp};
pub use planner::PlanResult;
