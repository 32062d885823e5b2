//! Closed-form example MDPs with known planning behavior: a family where the
//! sup-norm policy-error bound is arbitrarily tight, a variant where the
//! sup-norm error is large while the stationary-measure error is zero, and a
//! family with independently dialable value gaps.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::factored::{FactoredLinearModel, RightFactor};
use crate::mdp::{self, Mdp};
use crate::norms::{self, NormSpec, PExp};
use crate::planner;

/// Exact quantities an example instance is known to satisfy.
#[derive(Debug, Clone, Default)]
pub struct Expected {
    pub v_star: Option<DVector<f64>>,
    pub big_u_star: Option<DVector<f64>>,
    pub u_star: Option<DVector<f64>>,
    /// Constraints `pi_hat(state) = action` in states where the choice is
    /// forced; unconstrained states are left out.
    pub planner_policy: Vec<(usize, usize)>,
    pub optimal_policy: Vec<(usize, usize)>,
    /// `||V* - V^pi_hat||_inf`.
    pub sup_policy_error: Option<f64>,
    /// `||V* - U*||_inf` and `||V^pi_hat - U*||_inf`.
    pub v_minus_u_sup: Option<f64>,
    pub vpi_minus_u_sup: Option<f64>,
    /// `|V*(x1) - U*(x1)|`, the gap at the fork state alone.
    pub fork_value_gap: Option<f64>,
    /// `(2 gamma / (1 - gamma)) ||(P - QR) U*||_inf`.
    pub lifted_residual_bound: Option<f64>,
    /// Upper bound on the sup-norm contraction modulus.
    pub max_modulus: Option<f64>,
    /// Upper bound on `||r||_inf`.
    pub reward_sup_bound: Option<f64>,
    /// Measures under which the L1 policy error vanishes.
    pub zero_error_measures: Vec<DVector<f64>>,
    /// States where `V*` and `U*` agree exactly.
    pub value_equalities: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct ExampleInstance {
    pub name: &'static str,
    pub mdp: Mdp,
    pub model: FactoredLinearModel,
    pub expected: Expected,
}

/// One verified claim: `pass` holds when `|actual - expected|` is within the
/// tolerance (or, for one-sided claims, when `actual <= expected + tol`).
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub expected: f64,
    pub actual: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct VerificationRecord {
    pub checks: Vec<CheckResult>,
    pub pass: bool,
}

impl VerificationRecord {
    fn push_eq(&mut self, name: impl Into<String>, expected: f64, actual: f64, tol: f64) {
        let pass = (expected - actual).abs() <= tol;
        self.pass &= pass;
        self.checks.push(CheckResult { name: name.into(), expected, actual, pass });
    }

    fn push_le(&mut self, name: impl Into<String>, bound: f64, actual: f64, tol: f64) {
        let pass = actual <= bound + tol;
        self.pass &= pass;
        self.checks.push(CheckResult { name: name.into(), expected: bound, actual, pass });
    }
}

fn fork_transitions() -> Vec<DMatrix<f64>> {
    vec![
        DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]),
        DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]),
    ]
}

/// Three-state fork MDP on which the sup-norm policy-error bound is tight:
/// the bound evaluates to `tau` while the actual error is `(1 - eps) tau`.
/// Requires `eps > 0`; at `eps = 0` the lookahead ties at the fork state and
/// the construction stops being well-posed under any fixed tie-break.
pub fn tightness_mdp(gamma: f64, tau: f64, eps: f64) -> Result<ExampleInstance> {
    if !(0.0..1.0).contains(&gamma) || gamma == 0.0 {
        return Err(Error::InvalidGamma(gamma));
    }
    if tau < 0.0 || !(0.0..1.0).contains(&eps) || eps == 0.0 {
        return Err(Error::InvalidParameter(
            "tightness example needs tau >= 0 and eps in (0, 1)".into(),
        ));
    }
    let c = tau * (1.0 - gamma * gamma) / (4.0 * gamma);
    let d = tau / 4.0 * (2.0 * eps + gamma - 1.0);
    let rewards = vec![
        DVector::from_vec(vec![-d, c, -c]),
        DVector::from_vec(vec![d, c, -c]),
    ];
    let mdp = Mdp::new(gamma, fork_transitions(), rewards.clone())?;
    let q = vec![
        DMatrix::from_row_slice(3, 2, &[-1.0, 0.0, 0.0, 1.0, 1.0, 0.0]),
        DMatrix::from_row_slice(3, 2, &[0.0, -1.0, 0.0, 1.0, 1.0, 0.0]),
    ];
    let model =
        FactoredLinearModel::new(gamma, rewards, q, RightFactor::point_evaluator(&[1, 2]))?;
    let v2 = tau / 4.0 * (1.0 + gamma) / gamma;
    let u2 = tau / 4.0 * (1.0 - gamma) / gamma;
    let expected = Expected {
        v_star: Some(DVector::from_vec(vec![tau / 2.0 * (1.0 - eps), v2, -v2])),
        big_u_star: Some(DVector::from_vec(vec![tau / 2.0 * eps, u2, -u2])),
        u_star: Some(DVector::from_vec(vec![u2, -u2])),
        planner_policy: vec![(0, 1)],
        optimal_policy: vec![(0, 0)],
        sup_policy_error: Some((1.0 - eps) * tau),
        // Terminal-state values put the sup gap at tau / 2; the fork-state
        // gap alone is |tau / 2 - tau eps|.
        v_minus_u_sup: Some(tau / 2.0),
        vpi_minus_u_sup: Some(tau / 2.0),
        fork_value_gap: Some((tau / 2.0 - tau * eps).abs()),
        lifted_residual_bound: Some(tau),
        max_modulus: Some(gamma),
        reward_sup_bound: Some(tau / 2.0 * f64::max(1.0, (1.0 - gamma * gamma) / gamma)),
        ..Expected::default()
    };
    Ok(ExampleInstance { name: "tightness", mdp, model, expected })
}

/// Four-state extension of the fork MDP in which the sup-norm policy error is
/// `tau / 2` while the error vanishes in `L^p` of the stationary measures of
/// both the optimal and the extracted policy (point mass on the absorbing
/// state `x4`).
pub fn harsh_mdp(gamma: f64, tau: f64) -> Result<ExampleInstance> {
    if !(0.0..1.0).contains(&gamma) || gamma == 0.0 {
        return Err(Error::InvalidGamma(gamma));
    }
    if tau <= 0.0 {
        return Err(Error::InvalidParameter("harsh example needs tau > 0".into()));
    }
    let tau_prime = tau / 2.0;
    let fork = tightness_mdp(gamma, tau, 0.5)?;
    let embed = |p3: &DMatrix<f64>| {
        let mut p = DMatrix::zeros(4, 4);
        p.view_mut((0, 0), (3, 3)).copy_from(p3);
        p
    };
    let mut p1 = embed(fork.mdp.transition(0));
    p1[(3, 3)] = 1.0;
    let mut p2 = embed(fork.mdp.transition(1));
    p2[(3, 0)] = 1.0;
    let rewards: Vec<DVector<f64>> = fork
        .mdp
        .rewards()
        .iter()
        .enumerate()
        .map(|(a, r3)| {
            let r4 = if a == 0 { 2.0 * (1.0 - gamma) * tau_prime } else { 0.0 };
            DVector::from_vec(vec![r3[0], r3[1], r3[2], r4])
        })
        .collect();
    let mdp = Mdp::new(gamma, vec![p1, p2], rewards.clone())?;
    // Anchors x2, x3, x4. The fork rows keep their left factors with zero
    // mass on x4; row x4 copies the transition mass landing on anchors, so
    // the a2 row is all zero (its successor x1 is not an anchor).
    let embed_q = |q3: &DMatrix<f64>, a: usize| {
        let mut q = DMatrix::zeros(4, 3);
        q.view_mut((0, 0), (3, 2)).copy_from(q3);
        if a == 0 {
            q[(3, 2)] = 1.0;
        }
        q
    };
    let q = vec![embed_q(fork.model.q(0), 0), embed_q(fork.model.q(1), 1)];
    let model =
        FactoredLinearModel::new(gamma, rewards, q, RightFactor::point_evaluator(&[1, 2, 3]))?;
    let point_mass = DVector::from_vec(vec![0.0, 0.0, 0.0, 1.0]);
    let fork_v = fork.expected.v_star.as_ref().unwrap();
    let fork_u = fork.expected.big_u_star.as_ref().unwrap();
    let expected = Expected {
        v_star: Some(DVector::from_vec(vec![fork_v[0], fork_v[1], fork_v[2], 2.0 * tau_prime])),
        big_u_star: Some(DVector::from_vec(vec![
            fork_u[0],
            fork_u[1],
            fork_u[2],
            2.0 * tau_prime,
        ])),
        planner_policy: vec![(0, 1), (3, 0)],
        optimal_policy: vec![(3, 0)],
        sup_policy_error: Some(tau_prime),
        max_modulus: Some(gamma),
        zero_error_measures: vec![point_mass],
        value_equalities: vec![0, 3],
        ..Expected::default()
    };
    Ok(ExampleInstance { name: "harsh", mdp, model, expected })
}

/// Fork MDP with a one-dimensional compressed space in which the three gaps
/// `||V* - U*||_inf = tau1`, `||V^pi_hat - U*||_inf = tau2` and
/// `||V* - V^pi_hat||_inf = tau1 + tau2` are set independently: a small
/// value-estimate gap says nothing about the policy error.
pub fn error_gaps_mdp(gamma: f64, tau1: f64, tau2: f64) -> Result<ExampleInstance> {
    if !(0.0..1.0).contains(&gamma) || gamma == 0.0 {
        return Err(Error::InvalidGamma(gamma));
    }
    if tau1 < 0.0 || tau2 < 0.0 {
        return Err(Error::InvalidParameter("error-gaps example needs tau1, tau2 >= 0".into()));
    }
    let tau_max = tau1.max(tau2);
    let rewards = vec![
        DVector::from_vec(vec![
            tau1,
            (1.0 - gamma) / gamma * (tau1 + tau_max),
            -(1.0 - gamma) / gamma * tau2,
        ]),
        DVector::from_vec(vec![
            tau1 + tau_max,
            (1.0 - gamma) / gamma * (tau1 + tau_max),
            -(1.0 - gamma) / gamma * tau2,
        ]),
    ];
    let mdp = Mdp::new(gamma, fork_transitions(), rewards.clone())?;
    let q3 = if tau_max == 0.0 { 0.0 } else { -tau2 / (tau1 + tau_max) };
    let q_col = DMatrix::from_row_slice(3, 1, &[0.0, 1.0, q3]);
    let model = FactoredLinearModel::new(
        gamma,
        rewards,
        vec![q_col.clone(), q_col],
        RightFactor::point_evaluator(&[1]),
    )?;
    let v_star = DVector::from_vec(vec![
        2.0 * tau1 + tau_max,
        (tau1 + tau_max) / gamma,
        -tau2 / gamma,
    ]);
    // With tau_max = 0 every reward vanishes and the lookahead ties at the
    // fork, so the policy constraint only binds in the nondegenerate case.
    let planner_policy = if tau_max > 0.0 { vec![(0, 1)] } else { vec![] };
    let expected = Expected {
        v_star: Some(v_star),
        planner_policy,
        sup_policy_error: Some(tau1 + tau2),
        v_minus_u_sup: Some(tau1),
        vpi_minus_u_sup: Some(tau2),
        max_modulus: Some(gamma),
        reward_sup_bound: Some(2.0 * tau_max / gamma),
        ..Expected::default()
    };
    Ok(ExampleInstance { name: "error_gaps", mdp, model, expected })
}

/// Recomputes every expected quantity with the exact solver and the planner
/// and checks it within `tol`, including self-consistency of the claimed
/// optimal values under the Bellman optimality equation.
pub fn verify_example(instance: &ExampleInstance, tol: f64) -> Result<VerificationRecord> {
    let mut rec = VerificationRecord { checks: Vec::new(), pass: true };
    let solver_tol = (tol * 1e-3).min(1e-12);
    let (v_star, pi_star) = mdp::solve_exact(&instance.mdp, solver_tol)?;
    let plan = planner::plan(
        &instance.model,
        &NormSpec::Sup,
        solver_tol,
        mdp::DEFAULT_MAX_ITER,
        false,
    )?;
    let v_pi = mdp::policy_evaluation(&instance.mdp, &plan.pi_hat)?;
    let exp = &instance.expected;

    if let Some(expected_v) = &exp.v_star {
        rec.push_eq("v_star", 0.0, (expected_v - &v_star).amax(), tol);
        // The claimed values solve the Bellman optimality equation.
        let tv = mdp::max_select(&mdp::bellman_return(&instance.mdp, expected_v)?);
        rec.push_eq("v_star_bellman_consistent", 0.0, (tv - expected_v).amax(), tol);
    }
    if let Some(expected_u) = &exp.big_u_star {
        rec.push_eq("big_u_star", 0.0, (expected_u - &plan.big_u_star).amax(), tol);
    }
    if let Some(expected_u) = &exp.u_star {
        rec.push_eq("u_star", 0.0, (expected_u - &plan.u_star).amax(), tol);
    }
    for &(x, a) in &exp.planner_policy {
        rec.push_eq(format!("pi_hat(x{})", x + 1), a as f64, plan.pi_hat.0[x] as f64, 0.0);
    }
    for &(x, a) in &exp.optimal_policy {
        rec.push_eq(format!("pi_star(x{})", x + 1), a as f64, pi_star.0[x] as f64, 0.0);
    }
    if let Some(err) = exp.sup_policy_error {
        rec.push_eq("sup_policy_error", err, (&v_star - &v_pi).amax(), tol);
    }
    if let Some(gap) = exp.v_minus_u_sup {
        rec.push_eq("v_minus_u_sup", gap, (&v_star - &plan.big_u_star).amax(), tol);
    }
    if let Some(gap) = exp.vpi_minus_u_sup {
        rec.push_eq("vpi_minus_u_sup", gap, (&v_pi - &plan.big_u_star).amax(), tol);
    }
    if let Some(gap) = exp.fork_value_gap {
        rec.push_eq("fork_value_gap", gap, (v_star[0] - plan.big_u_star[0]).abs(), tol);
    }
    if let Some(bound) = exp.lifted_residual_bound {
        let gamma = instance.mdp.gamma();
        let residual: f64 = instance
            .model
            .qr()
            .iter()
            .zip(instance.mdp.transitions())
            .map(|(qr, p)| ((p - qr) * &plan.big_u_star).amax())
            .fold(0.0, f64::max);
        rec.push_eq(
            "lifted_residual_bound",
            bound,
            2.0 * gamma / (1.0 - gamma) * residual,
            tol,
        );
    }
    if let Some(max_modulus) = exp.max_modulus {
        let modulus = crate::factored::contraction_modulus(&instance.model, &NormSpec::Sup)?;
        rec.push_le("contraction_modulus", max_modulus, modulus, tol);
    }
    if let Some(bound) = exp.reward_sup_bound {
        let r_sup = instance
            .mdp
            .rewards()
            .iter()
            .map(|r| r.amax())
            .fold(0.0, f64::max);
        rec.push_le("reward_sup_bound", bound, r_sup, tol);
    }
    for (i, mu) in exp.zero_error_measures.iter().enumerate() {
        let spec = NormSpec::Lp { p: PExp::One, mu: mu.clone() };
        let err = norms::vec_norm(&(&v_star - &v_pi), &spec)?;
        rec.push_eq(format!("zero_error_measure_{i}"), 0.0, err, tol);
    }
    for &x in &exp.value_equalities {
        rec.push_eq(
            format!("v_star_eq_big_u_star(x{})", x + 1),
            v_star[x],
            plan.big_u_star[x],
            tol,
        );
    }
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_all_pass(rec: &VerificationRecord) {
        for c in &rec.checks {
            assert!(
                c.pass,
                "check {} failed: expected {} got {}",
                c.name, c.expected, c.actual
            );
        }
        assert!(rec.pass);
    }

    #[test]
    fn tightness_closed_form() {
        let inst = tightness_mdp(0.5, 4.0, 0.25).unwrap();
        let exp = inst.expected.clone();
        assert_eq!(
            exp.v_star.unwrap(),
            DVector::from_vec(vec![1.5, 3.0, -3.0])
        );
        assert_eq!(
            exp.big_u_star.unwrap(),
            DVector::from_vec(vec![0.5, 1.0, -1.0])
        );
        assert_all_pass(&verify_example(&inst, 1e-9).unwrap());
    }

    #[test]
    fn tightness_bound_vs_actual() {
        // Bound tau, actual error (1 - eps) tau: the ratio approaches one as
        // eps shrinks.
        let inst = tightness_mdp(0.9, 10.0, 0.1).unwrap();
        let rec = verify_example(&inst, 1e-9).unwrap();
        assert_all_pass(&rec);
        let err = rec.checks.iter().find(|c| c.name == "sup_policy_error").unwrap();
        assert!((err.actual - 9.0).abs() < 1e-9);
        let bound = rec.checks.iter().find(|c| c.name == "lifted_residual_bound").unwrap();
        assert!((bound.actual - 10.0).abs() < 1e-8);
    }

    #[test]
    fn tightness_grid() {
        for &gamma in &[0.1, 0.5, 0.9] {
            for &tau in &[0.5, 4.0, 16.0] {
                for &eps in &[0.05, 0.5, 0.95] {
                    let inst = tightness_mdp(gamma, tau, eps).unwrap();
                    assert_all_pass(&verify_example(&inst, 1e-9).unwrap());
                }
            }
        }
    }

    #[test]
    fn tightness_rejects_degenerate_eps() {
        assert!(tightness_mdp(0.5, 1.0, 0.0).is_err());
        assert!(tightness_mdp(0.5, 1.0, 1.0).is_err());
        assert!(tightness_mdp(0.5, -1.0, 0.5).is_err());
    }

    #[test]
    fn harsh_sup_error_large_stationary_error_zero() {
        let inst = harsh_mdp(0.5, 2.0).unwrap();
        let rec = verify_example(&inst, 1e-9).unwrap();
        assert_all_pass(&rec);
        let sup = rec.checks.iter().find(|c| c.name == "sup_policy_error").unwrap();
        assert!((sup.actual - 1.0).abs() < 1e-9);
        let zero = rec.checks.iter().find(|c| c.name == "zero_error_measure_0").unwrap();
        assert!(zero.actual.abs() < 1e-9);
    }

    #[test]
    fn harsh_absorbing_state_values() {
        let inst = harsh_mdp(0.7, 3.0).unwrap();
        let tau_prime = 1.5;
        let v = inst.expected.v_star.as_ref().unwrap();
        assert!((v[3] - 2.0 * tau_prime).abs() < 1e-12);
        assert_all_pass(&verify_example(&inst, 1e-9).unwrap());
    }

    #[test]
    fn error_gaps_triples() {
        for &gamma in &[0.3, 0.7] {
            for &(t1, t2) in &[(0.0, 1.0), (1.0, 0.0), (1.0, 2.0), (5.0, 3.0)] {
                let inst = error_gaps_mdp(gamma, t1, t2).unwrap();
                let rec = verify_example(&inst, 1e-9).unwrap();
                assert_all_pass(&rec);
            }
        }
        // The headline instance: gaps (1, 2) with policy error 3.
        let inst = error_gaps_mdp(0.5, 1.0, 2.0).unwrap();
        let rec = verify_example(&inst, 1e-9).unwrap();
        let get = |n: &str| rec.checks.iter().find(|c| c.name == n).unwrap().actual;
        assert!((get("v_minus_u_sup") - 1.0).abs() < 1e-9);
        assert!((get("vpi_minus_u_sup") - 2.0).abs() < 1e-9);
        assert!((get("sup_policy_error") - 3.0).abs() < 1e-9);
    }

    #[test]
    fn error_gaps_degenerate_taus() {
        let inst = error_gaps_mdp(0.5, 0.0, 0.0).unwrap();
        assert_all_pass(&verify_example(&inst, 1e-9).unwrap());
    }
}
