//! Factored linear models `<X, A, Q, R, r>`: the right factor `R` (general
//! linear or join-homomorphism form), the per-action left factors `Q^a`, the
//! compressed Bellman operators, and the standard constructors (point
//! evaluators, aggregation, KBRL, unfactored identity, random normalized).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mdp::{ActionValue, Mdp};
use crate::norms::{self, NormSpec};

/// The right factor `R: V -> W`.
///
/// Linear join-homomorphisms are exactly the scaled coordinate selections
/// `(Rv)_i = a_i v_{J_i}`, which `JoinHom` stores directly.
#[derive(Debug, Clone, PartialEq)]
pub enum RightFactor {
    General(DMatrix<f64>),
    JoinHom { scale: DVector<f64>, index: Vec<usize> },
}

/// Evidence that a matrix fails to be a join-homomorphism: a row and a pair
/// of vectors with `R(u v v) != (Ru) v (Rv)` in that row.
#[derive(Debug, Clone)]
pub struct JoinHomRejection {
    pub row: usize,
    pub u: DVector<f64>,
    pub v: DVector<f64>,
    pub lhs: f64,
    pub rhs: f64,
}

impl RightFactor {
    pub fn out_dim(&self) -> usize {
        match self {
            RightFactor::General(m) => m.nrows(),
            RightFactor::JoinHom { scale, .. } => scale.len(),
        }
    }

    pub fn in_dim(&self, m_hint: usize) -> usize {
        match self {
            RightFactor::General(m) => m.ncols(),
            RightFactor::JoinHom { .. } => m_hint,
        }
    }

    pub fn is_join_hom(&self) -> bool {
        matches!(self, RightFactor::JoinHom { .. })
    }

    /// Materializes the factor as an `n x m` matrix.
    pub fn to_matrix(&self, m: usize) -> DMatrix<f64> {
        match self {
            RightFactor::General(mat) => mat.clone(),
            RightFactor::JoinHom { scale, index } => {
                let mut out = DMatrix::zeros(scale.len(), m);
                for (i, (&a, &j)) in scale.iter().zip(index.iter()).enumerate() {
                    out[(i, j)] = a;
                }
                out
            }
        }
    }

    /// Point evaluator over anchor states: `(Rv)_i = v(x_i)`.
    pub fn point_evaluator(anchors: &[usize]) -> RightFactor {
        RightFactor::JoinHom {
            scale: DVector::from_element(anchors.len(), 1.0),
            index: anchors.to_vec(),
        }
    }
}

/// Applies the right factor to a length-`m` vector.
pub fn apply_r(r: &RightFactor, v: &DVector<f64>) -> Result<DVector<f64>> {
    match r {
        RightFactor::General(mat) => {
            if mat.ncols() != v.len() {
                return Err(Error::DimensionMismatch {
                    expected: mat.ncols(),
                    got: v.len(),
                    context: "apply_r input",
                });
            }
            Ok(mat * v)
        }
        RightFactor::JoinHom { scale, index } => {
            let mut out = DVector::zeros(scale.len());
            for (i, (&a, &j)) in scale.iter().zip(index.iter()).enumerate() {
                if j >= v.len() {
                    return Err(Error::DimensionMismatch {
                        expected: v.len(),
                        got: j,
                        context: "apply_r join-hom index",
                    });
                }
                out[i] = a * v[j];
            }
            Ok(out)
        }
    }
}

/// Accepts a matrix as a linear join-homomorphism iff every row has at most
/// one nonzero entry and that entry is nonnegative. All-zero rows map to
/// index 0 with scale 0. Rejection carries a numeric witness.
pub fn validate_join_hom(
    mat: &DMatrix<f64>,
) -> std::result::Result<(DVector<f64>, Vec<usize>), JoinHomRejection> {
    let (n, m) = (mat.nrows(), mat.ncols());
    let mut scale = DVector::zeros(n);
    let mut index = vec![0usize; n];
    for i in 0..n {
        let nonzeros: Vec<usize> = (0..m).filter(|&j| mat[(i, j)] != 0.0).collect();
        match nonzeros.as_slice() {
            [] => {}
            [j] if mat[(i, *j)] > 0.0 => {
                scale[i] = mat[(i, *j)];
                index[i] = *j;
            }
            [j] => {
                // Single negative entry: witnessed against the zero vector.
                let u = basis(m, *j);
                let v = DVector::zeros(m);
                let c = mat[(i, *j)];
                return Err(JoinHomRejection { row: i, u, v, lhs: c, rhs: c.max(0.0) });
            }
            [j1, j2, ..] => {
                let u = basis(m, *j1);
                let v = basis(m, *j2);
                let join = u.zip_map(&v, f64::max);
                let lhs = (mat * join)[i];
                let rhs = (mat * &u)[i].max((mat * &v)[i]);
                return Err(JoinHomRejection { row: i, u, v, lhs, rhs });
            }
        }
    }
    Ok((scale, index))
}

fn basis(m: usize, j: usize) -> DVector<f64> {
    DVector::from_fn(m, |i, _| if i == j { 1.0 } else { 0.0 })
}

/// A factored linear model sharing its reward function and discount with the
/// true MDP it approximates.
#[derive(Debug, Clone)]
pub struct FactoredLinearModel {
    gamma: f64,
    rewards: Vec<DVector<f64>>,
    /// Per-action left factors, each `m x n`.
    q: Vec<DMatrix<f64>>,
    r_factor: RightFactor,
    /// Per-action right factors; defaults to `k` copies of `r_factor`.
    pi_a: Vec<RightFactor>,
}

impl FactoredLinearModel {
    pub fn new(
        gamma: f64,
        rewards: Vec<DVector<f64>>,
        q: Vec<DMatrix<f64>>,
        r_factor: RightFactor,
    ) -> Result<Self> {
        let pi_a = vec![r_factor.clone(); q.len()];
        Self::with_pi_a(gamma, rewards, q, r_factor, pi_a)
    }

    pub fn with_pi_a(
        gamma: f64,
        rewards: Vec<DVector<f64>>,
        q: Vec<DMatrix<f64>>,
        r_factor: RightFactor,
        pi_a: Vec<RightFactor>,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidGamma(gamma));
        }
        if q.is_empty() || q.len() != rewards.len() || q.len() != pi_a.len() {
            return Err(Error::InvalidModel(
                "need one Q matrix, reward vector and right factor per action".into(),
            ));
        }
        let m = rewards[0].len();
        let n = q[0].ncols();
        for qa in &q {
            if qa.nrows() != m || qa.ncols() != n {
                return Err(Error::InvalidModel("inconsistent Q shapes".into()));
            }
            if qa.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("Q"));
            }
        }
        for r in &rewards {
            if r.len() != m || r.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidModel("bad reward vector".into()));
            }
        }
        if r_factor.out_dim() != n || r_factor.in_dim(m) != m {
            return Err(Error::InvalidModel("right factor shape mismatch".into()));
        }
        for p in &pi_a {
            if p.out_dim() != n || p.in_dim(m) != m {
                return Err(Error::InvalidModel("per-action right factor shape mismatch".into()));
            }
        }
        if r_factor.is_join_hom() {
            // The join-homomorphism path defines (Pi^A V)^a := R V^a for all a.
            for p in &pi_a {
                if *p != r_factor {
                    return Err(Error::InvalidModel(
                        "join-homomorphism R requires piA^a = R for every action".into(),
                    ));
                }
            }
        }
        Ok(FactoredLinearModel { gamma, rewards, q, r_factor, pi_a })
    }

    pub fn num_states(&self) -> usize {
        self.rewards[0].len()
    }

    pub fn num_actions(&self) -> usize {
        self.q.len()
    }

    pub fn compressed_dim(&self) -> usize {
        self.q[0].ncols()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn rewards(&self) -> &[DVector<f64>] {
        &self.rewards
    }

    pub fn q(&self, a: usize) -> &DMatrix<f64> {
        &self.q[a]
    }

    pub fn q_all(&self) -> &[DMatrix<f64>] {
        &self.q
    }

    pub fn right_factor(&self) -> &RightFactor {
        &self.r_factor
    }

    pub fn pi_a(&self, a: usize) -> &RightFactor {
        &self.pi_a[a]
    }

    /// The composed operators `(Pi^A Q)^a = piA^a Q^a`, each `n x n`.
    pub fn pia_q(&self) -> Vec<DMatrix<f64>> {
        let m = self.num_states();
        self.pi_a
            .iter()
            .zip(&self.q)
            .map(|(p, qa)| p.to_matrix(m) * qa)
            .collect()
    }

    /// The product `Q^a R`, each `m x m`.
    pub fn qr(&self) -> Vec<DMatrix<f64>> {
        let r_mat = self.r_factor.to_matrix(self.num_states());
        self.q.iter().map(|qa| qa * &r_mat).collect()
    }

    /// Checks the model's shape against the true MDP it approximates.
    pub fn matches(&self, mdp: &Mdp) -> Result<()> {
        if self.num_states() != mdp.num_states()
            || self.num_actions() != mdp.num_actions()
            || (self.gamma - mdp.gamma()).abs() > 0.0
        {
            return Err(Error::InvalidModel("model shape does not match MDP".into()));
        }
        Ok(())
    }
}

/// Compressed Bellman return: `(T_Q u)^a = r^a + gamma Q^a u`.
pub fn t_q(model: &FactoredLinearModel, u: &DVector<f64>) -> Result<ActionValue> {
    if u.len() != model.compressed_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.compressed_dim(),
            got: u.len(),
            context: "t_q input",
        });
    }
    Ok(ActionValue(
        model
            .q
            .iter()
            .zip(&model.rewards)
            .map(|(qa, ra)| ra + qa * u * model.gamma)
            .collect(),
    ))
}

/// `T_{Pi^A Q} u = Pi^A T_Q u`: per-action right factors applied to the
/// compressed Bellman return, yielding `k` vectors of length `n`.
pub fn t_piaq(model: &FactoredLinearModel, u: &DVector<f64>) -> Result<ActionValue> {
    let tq = t_q(model, u)?;
    Ok(ActionValue(
        model
            .pi_a
            .iter()
            .zip(&tq.0)
            .map(|(p, comp)| apply_r(p, comp))
            .collect::<Result<Vec<_>>>()?,
    ))
}

/// Contraction modulus of `M' T_{Pi^A Q}` under the given compressed-space
/// norm: `gamma ||Pi^A Q||`. Equals `lyapunov_beta(eta, Pi^A Q, gamma)` when
/// the norm is `WeightedSup(eta)`.
pub fn contraction_modulus(model: &FactoredLinearModel, w_spec: &NormSpec) -> Result<f64> {
    w_spec.validate(model.compressed_dim())?;
    let mats = model.pia_q();
    Ok(model.gamma * norms::op_norm_mixed(&mats, w_spec, w_spec)?)
}

// ---------------------------------------------------------------------------
// Constructors
// ---------------------------------------------------------------------------

/// Point-evaluator model: `R` evaluates at the anchors and `Q^a` collects
/// the exact transition mass each anchor receives, so `QR` agrees with `P`
/// whenever the chain only moves between anchors.
pub fn point_evaluator(mdp: &Mdp, anchors: &[usize]) -> Result<FactoredLinearModel> {
    if anchors.is_empty() || anchors.iter().any(|&x| x >= mdp.num_states()) {
        return Err(Error::InvalidParameter("anchors must be nonempty valid states".into()));
    }
    let q = mdp
        .transitions()
        .iter()
        .map(|p| {
            DMatrix::from_fn(mdp.num_states(), anchors.len(), |x, i| p[(x, anchors[i])])
        })
        .collect();
    FactoredLinearModel::new(
        mdp.gamma(),
        mdp.rewards().to_vec(),
        q,
        RightFactor::point_evaluator(anchors),
    )
}

/// Hard aggregation: `partition[x]` names the block of state `x`; `R`
/// evaluates at each block's first state and `Q^a` sums transition mass per
/// block, so `Q^a` is stochastic.
pub fn hard_aggregation(mdp: &Mdp, partition: &[usize]) -> Result<FactoredLinearModel> {
    let m = mdp.num_states();
    if partition.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: partition.len(),
            context: "partition length",
        });
    }
    let n = partition.iter().max().map_or(0, |b| b + 1);
    let mut representative = vec![usize::MAX; n];
    for (x, &b) in partition.iter().enumerate() {
        if representative[b] == usize::MAX {
            representative[b] = x;
        }
    }
    if representative.iter().any(|&r| r == usize::MAX) {
        return Err(Error::InvalidParameter("partition has empty blocks".into()));
    }
    let q = mdp
        .transitions()
        .iter()
        .map(|p| {
            let mut qa = DMatrix::zeros(m, n);
            for x in 0..m {
                for (y, &b) in partition.iter().enumerate() {
                    qa[(x, b)] += p[(x, y)];
                }
            }
            qa
        })
        .collect();
    FactoredLinearModel::new(
        mdp.gamma(),
        mdp.rewards().to_vec(),
        q,
        RightFactor::point_evaluator(&representative),
    )
}

/// Soft aggregation from a row-stochastic `n x m` matrix `D`: `R = D` and
/// `Q^a = P^a Phi` with `Phi` the column-normalized membership matrix, so
/// each `Q^a` is stochastic.
pub fn soft_aggregation(mdp: &Mdp, d: &DMatrix<f64>) -> Result<FactoredLinearModel> {
    let m = mdp.num_states();
    let n = d.nrows();
    if d.ncols() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: d.ncols(),
            context: "soft aggregation D columns",
        });
    }
    for i in 0..n {
        let sum: f64 = d.row(i).iter().sum();
        if (sum - 1.0).abs() > 1e-9 || d.row(i).iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "row {i} of D is not a distribution (sum {sum})"
            )));
        }
    }
    let mut phi = DMatrix::zeros(m, n);
    for y in 0..m {
        let col_mass: f64 = (0..n).map(|i| d[(i, y)]).sum();
        if col_mass == 0.0 {
            return Err(Error::InvalidParameter(format!("state {y} has zero membership mass")));
        }
        for i in 0..n {
            phi[(y, i)] = d[(i, y)] / col_mass;
        }
    }
    let q = mdp.transitions().iter().map(|p| p * &phi).collect();
    FactoredLinearModel::new(
        mdp.gamma(),
        mdp.rewards().to_vec(),
        q,
        RightFactor::General(d.clone()),
    )
}

/// Unfactored reduction: `n = m`, `Q^a = P^a`, `R` the identity point
/// evaluator. The model reproduces the true MDP exactly.
pub fn unfactored_identity(mdp: &Mdp) -> Result<FactoredLinearModel> {
    let anchors: Vec<usize> = (0..mdp.num_states()).collect();
    FactoredLinearModel::new(
        mdp.gamma(),
        mdp.rewards().to_vec(),
        mdp.transitions().to_vec(),
        RightFactor::point_evaluator(&anchors),
    )
}

/// Kernel-based model: Gaussian weights between next-state and anchor
/// embeddings, row-normalized so each `Q^a` is stochastic. `R` is the point
/// evaluator at the anchors.
pub fn kbrl_model(
    mdp: &Mdp,
    anchors: &[usize],
    bandwidth: f64,
    embedding: &[f64],
) -> Result<FactoredLinearModel> {
    if bandwidth <= 0.0 {
        return Err(Error::InvalidParameter("kernel bandwidth must be positive".into()));
    }
    let m = mdp.num_states();
    if embedding.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: embedding.len(),
            context: "state embedding",
        });
    }
    if anchors.is_empty() || anchors.iter().any(|&x| x >= m) {
        return Err(Error::InvalidParameter("anchors must be nonempty valid states".into()));
    }
    let q = mdp
        .transitions()
        .iter()
        .map(|p| {
            let mut qa = DMatrix::zeros(m, anchors.len());
            for x in 0..m {
                for (i, &anchor) in anchors.iter().enumerate() {
                    let mut w = 0.0;
                    for y in 0..m {
                        let d = embedding[y] - embedding[anchor];
                        w += p[(x, y)] * (-d * d / (2.0 * bandwidth * bandwidth)).exp();
                    }
                    qa[(x, i)] = w;
                }
                let sum: f64 = qa.row(x).iter().sum();
                for i in 0..anchors.len() {
                    qa[(x, i)] /= sum;
                }
            }
            qa
        })
        .collect();
    FactoredLinearModel::new(
        mdp.gamma(),
        mdp.rewards().to_vec(),
        q,
        RightFactor::point_evaluator(anchors),
    )
}

/// Rescales the `Q^a` uniformly so `||Pi^A Q||` under the sup norm is at
/// most one, making the compressed Bellman operator a gamma-contraction.
pub fn normalize_contraction(model: &mut FactoredLinearModel) -> Result<()> {
    let norm = norms::op_norm_mixed(&model.pia_q(), &NormSpec::Sup, &NormSpec::Sup)?;
    if norm > 1.0 {
        for qa in &mut model.q {
            *qa /= norm;
        }
    }
    Ok(())
}
