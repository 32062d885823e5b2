//! Compressed value iteration and policy extraction.
//!
//! The planner iterates `u <- M' T_{Pi^A Q} u` in the compressed space,
//! lifts the fixed point to `U* = M T_Q u*`, and extracts the one-step
//! lookahead policy `pi_hat = G T_Q u*`.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::factored::{self, FactoredLinearModel};
use crate::mdp::{self, Policy, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::norms::{self, NormSpec};

/// Iterates stop once the step size falls below `tol * (1 - kappa) / kappa`,
/// with the denominator floored to keep the threshold finite for tiny moduli.
const MODULUS_FLOOR: f64 = 1e-3;

/// Hard cap on iterate growth; past this the iteration is declared divergent.
const DIVERGENCE_GUARD: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct CompressedViResult {
    pub u: DVector<f64>,
    pub iterations: usize,
    /// Final step size `||u_{t+1} - u_t||` in the compressed norm.
    pub residual: f64,
    /// Contraction modulus `gamma ||Pi^A Q||` under the compressed norm,
    /// when that operator norm is available.
    pub modulus: Option<f64>,
    pub residual_history: Vec<f64>,
}

/// Fixed-point iteration for `u* = M' T_{Pi^A Q} u*` starting from zero.
///
/// Refuses to run when the modulus is at least one unless `force` is set;
/// forced runs still abort if the iterates blow up.
pub fn compressed_value_iteration(
    model: &FactoredLinearModel,
    w_spec: &NormSpec,
    tol: f64,
    max_iter: usize,
    force: bool,
) -> Result<CompressedViResult> {
    if tol <= 0.0 {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    w_spec.validate(model.compressed_dim())?;
    let modulus = match factored::contraction_modulus(model, w_spec) {
        Ok(kappa) => Some(kappa),
        Err(Error::UnsupportedPairing(_)) => None,
        Err(e) => return Err(e),
    };
    if let Some(kappa) = modulus {
        if kappa >= 1.0 && !force {
            return Err(Error::NotContractive { modulus: kappa });
        }
    }
    let threshold = match modulus {
        Some(kappa) if kappa < 1.0 => tol * (1.0 - kappa) / kappa.max(MODULUS_FLOOR),
        _ => tol,
    };
    let mut u = DVector::zeros(model.compressed_dim());
    let mut residual_history = Vec::new();
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let next = mdp::max_select(&factored::t_piaq(model, &u)?);
        residual = norms::vec_norm(&(&next - &u), w_spec)?;
        residual_history.push(residual);
        if !residual.is_finite() || next.amax() > DIVERGENCE_GUARD {
            return Err(Error::Diverged);
        }
        u = next;
        if residual <= threshold {
            return Ok(CompressedViResult { u, iterations: it, residual, modulus, residual_history });
        }
    }
    Err(Error::MaxIter { max_iter, residual })
}

/// Lifts a compressed vector to the state space: `U = M T_Q u`.
pub fn lift(model: &FactoredLinearModel, u: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(mdp::max_select(&factored::t_q(model, u)?))
}

/// One-step lookahead policy `G T_Q u`, ties to the lowest action index.
pub fn extract_policy(model: &FactoredLinearModel, u: &DVector<f64>) -> Result<Policy> {
    Ok(mdp::greedy(&factored::t_q(model, u)?))
}

#[derive(Debug, Clone)]
pub struct PlanResult {
    /// Compressed fixed point `u*`.
    pub u_star: DVector<f64>,
    /// Lifted value estimate `U* = M T_Q u*`.
    pub big_u_star: DVector<f64>,
    pub pi_hat: Policy,
    pub iterations: usize,
    pub residual: f64,
    pub modulus: Option<f64>,
    /// `||u* - R U*||_inf`; zero up to solver tolerance when `R` is a
    /// join-homomorphism, absent otherwise.
    pub join_hom_gap: Option<f64>,
}

/// Full planning pass: compressed value iteration, lift, policy extraction.
pub fn plan(
    model: &FactoredLinearModel,
    w_spec: &NormSpec,
    tol: f64,
    max_iter: usize,
    force: bool,
) -> Result<PlanResult> {
    let cvi = compressed_value_iteration(model, w_spec, tol, max_iter, force)?;
    let big_u_star = lift(model, &cvi.u)?;
    let pi_hat = extract_policy(model, &cvi.u)?;
    let join_hom_gap = if model.right_factor().is_join_hom() {
        let r_u = factored::apply_r(model.right_factor(), &big_u_star)?;
        Some((&cvi.u - r_u).amax())
    } else {
        None
    };
    Ok(PlanResult {
        u_star: cvi.u,
        big_u_star,
        pi_hat,
        iterations: cvi.iterations,
        residual: cvi.residual,
        modulus: cvi.modulus,
        join_hom_gap,
    })
}

/// Convenience wrapper with the library default tolerance and iteration cap.
pub fn plan_default(model: &FactoredLinearModel) -> Result<PlanResult> {
    plan(model, &NormSpec::Sup, DEFAULT_TOL, DEFAULT_MAX_ITER, false)
}

/// Lipschitz bounds for powers of the composed update `(M T_QR)^{m+1}`
/// acting on the state space, under the sup norm:
/// `Lip((M T_QR)^{m+1}) <= B' gamma^m Lip(R)` with
/// `B' = gamma max_a ||Q^a|| Lip-of-max = gamma max_a ||Q^a||`.
#[derive(Debug, Clone)]
pub struct ContractionDiagnostics {
    /// `gamma max_a ||Pi^A Q^a||` under the compressed sup norm.
    pub compressed_modulus: f64,
    /// `gamma max_a ||Q^a R||` under the state-space sup norm.
    pub lifted_modulus: f64,
    /// Upper bounds on `Lip((M T_QR)^{m+1})` for `m = 0..bounds.len()-1`.
    pub power_lip_bounds: Vec<f64>,
}

pub fn contraction_diagnostics(
    model: &FactoredLinearModel,
    powers: usize,
) -> Result<ContractionDiagnostics> {
    let sup = NormSpec::Sup;
    let compressed_modulus = model.gamma() * norms::op_norm_mixed(&model.pia_q(), &sup, &sup)?;
    let lifted_modulus = model.gamma() * norms::op_norm_mixed(&model.qr(), &sup, &sup)?;
    let r_mat = model.right_factor().to_matrix(model.num_states());
    let lip_r = norms::op_norm(&norms::NormedOperator {
        matrix: &r_mat,
        in_spec: &sup,
        out_spec: &sup,
    })?;
    let q_norm = norms::op_norm_mixed(model.q_all(), &sup, &sup)?;
    let b_prime = model.gamma() * q_norm;
    let power_lip_bounds = (0..powers)
        .map(|m| b_prime * compressed_modulus.powi(m as i32) * lip_r)
        .collect();
    Ok(ContractionDiagnostics { compressed_modulus, lifted_modulus, power_lip_bounds })
}
