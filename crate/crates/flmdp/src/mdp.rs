//! Finite discounted MDPs and the exact-model operators: the Bellman return
//! operator, maximum/policy selection, greedy extraction, value iteration and
//! exact policy evaluation.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Tolerance on row sums when validating stochasticity.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// A finite discounted MDP: `k` row-stochastic transition matrices of shape
/// `m x m`, `k` reward vectors of length `m`, and a discount in `[0, 1)`.
#[derive(Debug, Clone)]
pub struct Mdp {
    gamma: f64,
    transitions: Vec<DMatrix<f64>>,
    rewards: Vec<DVector<f64>>,
}

/// One value vector per action.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionValue(pub Vec<DVector<f64>>);

impl ActionValue {
    pub fn num_actions(&self) -> usize {
        self.0.len()
    }

    pub fn dim(&self) -> usize {
        self.0.first().map_or(0, |v| v.len())
    }

    /// Per-state maximum of absolute values across actions; the vector whose
    /// base norm defines the mixed max-norm.
    pub fn abs_max(&self) -> DVector<f64> {
        let mut out: DVector<f64> = DVector::zeros(self.dim());
        for comp in &self.0 {
            for (o, c) in out.iter_mut().zip(comp.iter()) {
                *o = o.max(c.abs());
            }
        }
        out
    }

    pub fn sub(&self, other: &ActionValue) -> ActionValue {
        ActionValue(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }
}

/// A deterministic Markov policy: one action index per state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Policy(pub Vec<usize>);

impl Mdp {
    pub fn new(
        gamma: f64,
        transitions: Vec<DMatrix<f64>>,
        rewards: Vec<DVector<f64>>,
    ) -> Result<Self> {
        Self::build(gamma, transitions, rewards, false)
    }

    /// Like [`Mdp::new`] but renormalizes rows whose sums are off by more
    /// than `ROW_SUM_TOL` instead of rejecting them.
    pub fn new_repaired(
        gamma: f64,
        transitions: Vec<DMatrix<f64>>,
        rewards: Vec<DVector<f64>>,
    ) -> Result<Self> {
        Self::build(gamma, transitions, rewards, true)
    }

    fn build(
        gamma: f64,
        mut transitions: Vec<DMatrix<f64>>,
        rewards: Vec<DVector<f64>>,
        repair: bool,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidGamma(gamma));
        }
        if transitions.is_empty() || transitions.len() != rewards.len() {
            return Err(Error::DimensionMismatch {
                expected: transitions.len().max(1),
                got: rewards.len(),
                context: "one reward vector per action",
            });
        }
        let m = transitions[0].nrows();
        if m == 0 {
            return Err(Error::InvalidParameter("state count must be >= 1".into()));
        }
        for (a, p) in transitions.iter_mut().enumerate() {
            if p.nrows() != m || p.ncols() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: p.nrows().max(p.ncols()),
                    context: "transition matrix shape",
                });
            }
            for x in 0..m {
                let mut sum = 0.0;
                for y in 0..m {
                    let v = p[(x, y)];
                    if !v.is_finite() || v < 0.0 {
                        return Err(Error::NotStochastic { action: a, row: x, sum: v });
                    }
                    sum += v;
                }
                if (sum - 1.0).abs() > ROW_SUM_TOL {
                    if repair && sum > 0.0 {
                        for y in 0..m {
                            p[(x, y)] /= sum;
                        }
                    } else {
                        return Err(Error::NotStochastic { action: a, row: x, sum });
                    }
                }
            }
        }
        for r in &rewards {
            if r.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: r.len(),
                    context: "reward vector length",
                });
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("rewards"));
            }
        }
        Ok(Mdp { gamma, transitions, rewards })
    }

    pub fn num_states(&self) -> usize {
        self.transitions[0].nrows()
    }

    pub fn num_actions(&self) -> usize {
        self.transitions.len()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn transition(&self, a: usize) -> &DMatrix<f64> {
        &self.transitions[a]
    }

    pub fn transitions(&self) -> &[DMatrix<f64>] {
        &self.transitions
    }

    pub fn reward(&self, a: usize) -> &DVector<f64> {
        &self.rewards[a]
    }

    pub fn rewards(&self) -> &[DVector<f64>] {
        &self.rewards
    }
}

/// Bellman return operator: `(T_P V)^a = r^a + gamma P^a V`.
pub fn bellman_return(mdp: &Mdp, v: &DVector<f64>) -> Result<ActionValue> {
    if v.len() != mdp.num_states() {
        return Err(Error::DimensionMismatch {
            expected: mdp.num_states(),
            got: v.len(),
            context: "bellman_return value vector",
        });
    }
    Ok(ActionValue(
        (0..mdp.num_actions())
            .map(|a| mdp.reward(a) + mdp.transition(a) * v * mdp.gamma)
            .collect(),
    ))
}

/// Maximum selection: `(MV)(x) = max_a V^a(x)`.
pub fn max_select(v: &ActionValue) -> DVector<f64> {
    let mut out = v.0[0].clone();
    for comp in &v.0[1..] {
        for (o, c) in out.iter_mut().zip(comp.iter()) {
            *o = o.max(*c);
        }
    }
    out
}

/// Policy selection: `(M^pi V)(x) = V^{pi(x)}(x)`.
pub fn policy_select(v: &ActionValue, pi: &Policy) -> Result<DVector<f64>> {
    let m = v.dim();
    let k = v.num_actions();
    if pi.0.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: pi.0.len(),
            context: "policy length",
        });
    }
    let mut out = DVector::zeros(m);
    for (x, &a) in pi.0.iter().enumerate() {
        if a >= k {
            return Err(Error::InvalidAction { action: a, state: x, k });
        }
        out[x] = v.0[a][x];
    }
    Ok(out)
}

/// Greedy operator: per-state argmax over actions, ties broken by lowest
/// action index.
pub fn greedy(v: &ActionValue) -> Policy {
    let m = v.dim();
    let mut choice = vec![0usize; m];
    for x in 0..m {
        let mut best = v.0[0][x];
        for (a, comp) in v.0.iter().enumerate().skip(1) {
            if comp[x] > best {
                best = comp[x];
                choice[x] = a;
            }
        }
    }
    Policy(choice)
}

#[derive(Debug, Clone)]
pub struct ValueIterationResult {
    pub values: DVector<f64>,
    pub iterations: usize,
    pub residual: f64,
}

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 1_000_000;

/// Value iteration to within `tol` of `V*` in sup norm.
///
/// Stops when `||V_{k+1} - V_k||_inf <= tol (1 - gamma) / gamma`, which by
/// the standard contraction argument guarantees `||V_k - V*||_inf <= tol`.
pub fn value_iteration(mdp: &Mdp, tol: f64, max_iter: usize) -> Result<ValueIterationResult> {
    if tol <= 0.0 {
        return Err(Error::InvalidParameter("tol must be positive".into()));
    }
    let gamma = mdp.gamma();
    let threshold = if gamma > 0.0 {
        tol * (1.0 - gamma) / gamma
    } else {
        f64::INFINITY
    };
    let mut v = DVector::zeros(mdp.num_states());
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let next = max_select(&bellman_return(mdp, &v)?);
        residual = (&next - &v).amax();
        v = next;
        if residual <= threshold {
            return Ok(ValueIterationResult { values: v, iterations: it, residual });
        }
    }
    Err(Error::MaxIter { max_iter, residual })
}

/// Exact policy evaluation: solves `(I - gamma P^pi) V = r^pi` by dense LU.
pub fn policy_evaluation(mdp: &Mdp, pi: &Policy) -> Result<DVector<f64>> {
    let m = mdp.num_states();
    let k = mdp.num_actions();
    if pi.0.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: pi.0.len(),
            context: "policy length",
        });
    }
    let mut a_mat = DMatrix::identity(m, m);
    let mut rhs = DVector::zeros(m);
    for (x, &a) in pi.0.iter().enumerate() {
        if a >= k {
            return Err(Error::InvalidAction { action: a, state: x, k });
        }
        for y in 0..m {
            a_mat[(x, y)] -= mdp.gamma() * mdp.transition(a)[(x, y)];
        }
        rhs[x] = mdp.reward(a)[x];
    }
    a_mat
        .lu()
        .solve(&rhs)
        .ok_or(Error::SolveFailed("(I - gamma P^pi) is singular"))
}

/// Solves the MDP exactly: value iteration to locate the greedy policy, then
/// exact evaluation of that policy. For tight stopping tolerances the result
/// is `V*` up to linear-solve precision.
pub fn solve_exact(mdp: &Mdp, tol: f64) -> Result<(DVector<f64>, Policy)> {
    let vi = value_iteration(mdp, tol, DEFAULT_MAX_ITER)?;
    let pi = greedy(&bellman_return(mdp, &vi.values)?);
    let v = policy_evaluation(mdp, &pi)?;
    Ok((v, pi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn scalar_mdp() -> Mdp {
        Mdp::new(
            0.5,
            vec![DMatrix::from_row_slice(1, 1, &[1.0])],
            vec![DVector::from_vec(vec![1.0])],
        )
        .unwrap()
    }

    fn two_by_two() -> ActionValue {
        ActionValue(vec![
            DVector::from_vec(vec![1.0, 2.0]),
            DVector::from_vec(vec![3.0, 0.0]),
        ])
    }

    fn random_mdp(rng: &mut impl Rng, m: usize, k: usize, gamma: f64) -> Mdp {
        let transitions = (0..k)
            .map(|_| {
                DMatrix::from_fn(m, m, |_, _| -(rng.gen::<f64>().max(1e-12)).ln())
            })
            .map(|mut p| {
                for x in 0..m {
                    let s: f64 = p.row(x).iter().sum();
                    for y in 0..m {
                        p[(x, y)] /= s;
                    }
                }
                p
            })
            .collect();
        let rewards = (0..k)
            .map(|_| DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0)))
            .collect();
        Mdp::new_repaired(gamma, transitions, rewards).unwrap()
    }

    #[test]
    fn bellman_return_scalar() {
        let mdp = scalar_mdp();
        let av = bellman_return(&mdp, &DVector::from_vec(vec![0.0])).unwrap();
        assert_eq!(av.0[0][0], 1.0);
        let av = bellman_return(&mdp, &DVector::from_vec(vec![2.0])).unwrap();
        assert_eq!(av.0[0][0], 2.0);
    }

    #[test]
    fn bellman_return_matches_summation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mdp = random_mdp(&mut rng, 2, 2, 0.9);
        let v = DVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0));
        let av = bellman_return(&mdp, &v).unwrap();
        for a in 0..2 {
            for x in 0..2 {
                let mut expected = mdp.reward(a)[x];
                for y in 0..2 {
                    expected += mdp.gamma() * mdp.transition(a)[(x, y)] * v[y];
                }
                assert!((av.0[a][x] - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn max_select_componentwise() {
        assert_eq!(max_select(&two_by_two()), DVector::from_vec(vec![3.0, 2.0]));
        let single = ActionValue(vec![DVector::from_vec(vec![1.0, -2.0])]);
        assert_eq!(max_select(&single), single.0[0]);
    }

    #[test]
    fn max_select_equals_pairwise_fold() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let av = ActionValue(
            (0..4)
                .map(|_| DVector::from_fn(6, |_, _| rng.gen_range(-5.0..5.0)))
                .collect(),
        );
        let mut folded = av.0[0].clone();
        for comp in &av.0[1..] {
            folded = folded.zip_map(comp, f64::max);
        }
        assert_eq!(max_select(&av), folded);
    }

    #[test]
    fn policy_select_and_greedy() {
        let av = two_by_two();
        let v = policy_select(&av, &Policy(vec![0, 0])).unwrap();
        assert_eq!(v, DVector::from_vec(vec![1.0, 2.0]));

        let pi = greedy(&av);
        assert_eq!(pi, Policy(vec![1, 0]));
        assert_eq!(policy_select(&av, &pi).unwrap(), max_select(&av));

        let equal = ActionValue(vec![
            DVector::from_vec(vec![1.0, 1.0]),
            DVector::from_vec(vec![1.0, 1.0]),
        ]);
        assert_eq!(greedy(&equal), Policy(vec![0, 0]));

        assert!(matches!(
            policy_select(&av, &Policy(vec![2, 0])),
            Err(Error::InvalidAction { .. })
        ));
    }

    #[test]
    fn greedy_matches_scan_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let av = ActionValue(
            (0..3)
                .map(|_| DVector::from_fn(8, |_, _| rng.gen_range(-5.0..5.0)))
                .collect(),
        );
        let pi = greedy(&av);
        for x in 0..8 {
            let mut best = 0;
            for a in 1..3 {
                if av.0[a][x] > av.0[best][x] {
                    best = a;
                }
            }
            assert_eq!(pi.0[x], best);
        }
    }

    #[test]
    fn value_iteration_geometric_series() {
        let mdp = scalar_mdp();
        let res = value_iteration(&mdp, 1e-10, 10_000).unwrap();
        assert!((res.values[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn value_iteration_self_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let gamma = rng.gen_range(0.2..0.95);
            let mdp = random_mdp(&mut rng, 6, 3, gamma);
            let tol = 1e-10;
            let res = value_iteration(&mdp, tol, DEFAULT_MAX_ITER).unwrap();
            // Bellman residual bounded by 2 tol.
            let tv = max_select(&bellman_return(&mdp, &res.values).unwrap());
            assert!((&tv - &res.values).amax() <= 2.0 * tol);
            // Greedy policy evaluation agrees within 10 tol.
            let pi = greedy(&bellman_return(&mdp, &res.values).unwrap());
            let v_pi = policy_evaluation(&mdp, &pi).unwrap();
            assert!((&v_pi - &res.values).amax() <= 10.0 * tol);
            // Policy error nonnegative for random policies.
            for _ in 0..5 {
                let pi = Policy((0..6).map(|_| rng.gen_range(0..3)).collect());
                let v_pi = policy_evaluation(&mdp, &pi).unwrap();
                for x in 0..6 {
                    assert!(v_pi[x] <= res.values[x] + tol);
                }
            }
        }
    }

    #[test]
    fn policy_evaluation_neumann_series_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mdp = random_mdp(&mut rng, 5, 2, 0.8);
        let pi = Policy((0..5).map(|_| rng.gen_range(0..2)).collect());
        let v = policy_evaluation(&mdp, &pi).unwrap();

        // Truncated Neumann series sum gamma^t (P^pi)^t r^pi.
        let m = 5;
        let mut p_pi = DMatrix::zeros(m, m);
        let mut r_pi = DVector::zeros(m);
        for (x, &a) in pi.0.iter().enumerate() {
            for y in 0..m {
                p_pi[(x, y)] = mdp.transition(a)[(x, y)];
            }
            r_pi[x] = mdp.reward(a)[x];
        }
        let mut acc = DVector::zeros(m);
        let mut term = r_pi.clone();
        for _ in 0..200 {
            acc += &term;
            term = &p_pi * term * mdp.gamma();
        }
        assert!((&acc - &v).amax() < 1e-8);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            Mdp::new(
                1.0,
                vec![DMatrix::identity(1, 1)],
                vec![DVector::zeros(1)]
            ),
            Err(Error::InvalidGamma(_))
        ));
        assert!(matches!(
            Mdp::new(
                0.5,
                vec![DMatrix::from_row_slice(1, 1, &[0.7])],
                vec![DVector::zeros(1)]
            ),
            Err(Error::NotStochastic { .. })
        ));
        // Repair flag renormalizes instead.
        let mdp = Mdp::new_repaired(
            0.5,
            vec![DMatrix::from_row_slice(1, 1, &[0.7])],
            vec![DVector::zeros(1)],
        )
        .unwrap();
        assert!((mdp.transition(0)[(0, 0)] - 1.0).abs() < 1e-15);
    }
}
