//! Vector norms (sup, weighted sup, L^p(mu)), mixed max-norms over actions,
//! induced operator norms between weighted spaces, and Lyapunov contraction
//! coefficients.
//!
//! Supported p values are {1, 2, inf}: closed-form induced norms exist only
//! there and general-p induced norms are intractable. Cross-family pairings
//! (sup-type input, L^p output) return a sign-aligned upper bound which is
//! exact for entrywise-nonnegative operators.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mdp::ActionValue;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PExp {
    One,
    Two,
    Inf,
}

/// A norm on a finite-dimensional space of value functions.
#[derive(Debug, Clone, PartialEq)]
pub enum NormSpec {
    Sup,
    WeightedSup(DVector<f64>),
    Lp { p: PExp, mu: DVector<f64> },
}

impl NormSpec {
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            NormSpec::Sup => Ok(()),
            NormSpec::WeightedSup(w) => {
                if w.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: w.len(),
                        context: "weighted-sup weight",
                    });
                }
                if w.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
                    return Err(Error::InvalidNorm("weights must be strictly positive".into()));
                }
                Ok(())
            }
            NormSpec::Lp { mu, .. } => {
                if mu.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: mu.len(),
                        context: "Lp measure",
                    });
                }
                if mu.iter().any(|&x| x < 0.0 || !x.is_finite()) {
                    return Err(Error::InvalidNorm("measure must be nonnegative".into()));
                }
                if mu.iter().all(|&x| x == 0.0) {
                    return Err(Error::InvalidNorm("measure must have positive mass".into()));
                }
                Ok(())
            }
        }
    }

    /// Unit weights of the given dimension, for sup-as-weighted-sup reuse.
    fn weights_or_ones(&self, dim: usize) -> Option<DVector<f64>> {
        match self {
            NormSpec::Sup => Some(DVector::from_element(dim, 1.0)),
            NormSpec::WeightedSup(w) => Some(w.clone()),
            NormSpec::Lp { .. } => None,
        }
    }
}

/// Norm of a vector under the given spec.
///
/// `Lp` with `p = inf` is the mu-essential sup: states with zero mass are
/// excluded.
pub fn vec_norm(v: &DVector<f64>, spec: &NormSpec) -> Result<f64> {
    spec.validate(v.len())?;
    Ok(match spec {
        NormSpec::Sup => v.amax(),
        NormSpec::WeightedSup(w) => v
            .iter()
            .zip(w.iter())
            .map(|(x, w)| x.abs() / w)
            .fold(0.0, f64::max),
        NormSpec::Lp { p, mu } => match p {
            PExp::One => v.iter().zip(mu.iter()).map(|(x, m)| m * x.abs()).sum(),
            PExp::Two => v
                .iter()
                .zip(mu.iter())
                .map(|(x, m)| m * x * x)
                .sum::<f64>()
                .sqrt(),
            PExp::Inf => v
                .iter()
                .zip(mu.iter())
                .filter(|(_, &m)| m > 0.0)
                .map(|(x, _)| x.abs())
                .fold(0.0, f64::max),
        },
    })
}

/// Mixed max-norm of an action-value function: base norm of the per-state
/// maximum of absolute action components.
pub fn mixed_norm(v: &ActionValue, spec: &NormSpec) -> Result<f64> {
    vec_norm(&v.abs_max(), spec)
}

#[derive(Debug, Clone)]
pub struct NormedOperator<'a> {
    pub matrix: &'a DMatrix<f64>,
    pub in_spec: &'a NormSpec,
    pub out_spec: &'a NormSpec,
}

/// Induced operator norm for the supported pairing table. Returns `+inf`
/// where the pairing makes the norm genuinely unbounded (measure mismatch),
/// and an error for unsupported pairings.
pub fn op_norm(op: &NormedOperator) -> Result<f64> {
    let j = op.matrix;
    op.in_spec.validate(j.ncols())?;
    op.out_spec.validate(j.nrows())?;
    match (op.in_spec, op.out_spec) {
        // Sup / weighted-sup family on both sides: max weighted row abs-sum.
        (i @ (NormSpec::Sup | NormSpec::WeightedSup(_)), o @ (NormSpec::Sup | NormSpec::WeightedSup(_))) => {
            let w_in = i.weights_or_ones(j.ncols()).unwrap();
            let w_out = o.weights_or_ones(j.nrows()).unwrap();
            Ok(weighted_row_sup(j, &w_in, &w_out))
        }
        // Sup-type input, Lp output: sign-aligned upper bound (exact for
        // nonnegative J): out-norm of the row vector x -> sum_y |J(x,y)| w(y).
        (i @ (NormSpec::Sup | NormSpec::WeightedSup(_)), o @ NormSpec::Lp { .. }) => {
            let w_in = i.weights_or_ones(j.ncols()).unwrap();
            let rows = DVector::from_fn(j.nrows(), |x, _| {
                (0..j.ncols()).map(|y| j[(x, y)].abs() * w_in[y]).sum()
            });
            vec_norm(&rows, o)
        }
        (NormSpec::Lp { p: p_in, mu: mu_in }, NormSpec::Lp { p: p_out, mu: mu_out }) => {
            if p_in != p_out {
                return Err(Error::UnsupportedPairing(
                    "Lp input and output must share the same p".into(),
                ));
            }
            match p_in {
                PExp::One => Ok(l1_op_norm(j, mu_in, mu_out)),
                PExp::Inf => Ok(linf_op_norm(j, mu_in, mu_out)),
                PExp::Two => Ok(l2_op_norm(j, mu_in, mu_out)),
            }
        }
        (NormSpec::Lp { .. }, NormSpec::Sup | NormSpec::WeightedSup(_)) => Err(
            Error::UnsupportedPairing("Lp input with sup-type output".into()),
        ),
    }
}

fn weighted_row_sup(j: &DMatrix<f64>, w_in: &DVector<f64>, w_out: &DVector<f64>) -> f64 {
    (0..j.nrows())
        .map(|x| {
            (0..j.ncols())
                .map(|y| j[(x, y)].abs() * w_in[y])
                .sum::<f64>()
                / w_out[x]
        })
        .fold(0.0, f64::max)
}

/// `max_y (sum_x mu_out(x) |J(x,y)|) / mu_in(y)`, infinite when a zero-mass
/// column carries mu_out-mass.
fn l1_op_norm(j: &DMatrix<f64>, mu_in: &DVector<f64>, mu_out: &DVector<f64>) -> f64 {
    let mut best = 0.0f64;
    for y in 0..j.ncols() {
        let col_mass: f64 = (0..j.nrows()).map(|x| mu_out[x] * j[(x, y)].abs()).sum();
        if mu_in[y] == 0.0 {
            if col_mass > 0.0 {
                return f64::INFINITY;
            }
        } else {
            best = best.max(col_mass / mu_in[y]);
        }
    }
    best
}

/// Essential-sup pairing: row abs-sums over the supports; infinite when a
/// row in the output support reads a column outside the input support.
fn linf_op_norm(j: &DMatrix<f64>, mu_in: &DVector<f64>, mu_out: &DVector<f64>) -> f64 {
    let mut best = 0.0f64;
    for x in 0..j.nrows() {
        if mu_out[x] == 0.0 {
            continue;
        }
        let mut sum = 0.0;
        for y in 0..j.ncols() {
            let v = j[(x, y)].abs();
            if v > 0.0 {
                if mu_in[y] == 0.0 {
                    return f64::INFINITY;
                }
                sum += v;
            }
        }
        best = best.max(sum);
    }
    best
}

const POWER_ITER_TOL: f64 = 1e-12;
const POWER_ITER_MAX: usize = 10_000;

/// Largest singular value of `D_out^{1/2} J D_in^{-1/2}` by power iteration
/// on the Gram matrix, restricted to the measure supports.
fn l2_op_norm(j: &DMatrix<f64>, mu_in: &DVector<f64>, mu_out: &DVector<f64>) -> f64 {
    // Column outside the input support reaching the output support: unbounded.
    for y in 0..j.ncols() {
        if mu_in[y] == 0.0 {
            for x in 0..j.nrows() {
                if mu_out[x] > 0.0 && j[(x, y)] != 0.0 {
                    return f64::INFINITY;
                }
            }
        }
    }
    let cols: Vec<usize> = (0..j.ncols()).filter(|&y| mu_in[y] > 0.0).collect();
    let rows: Vec<usize> = (0..j.nrows()).filter(|&x| mu_out[x] > 0.0).collect();
    if cols.is_empty() || rows.is_empty() {
        return 0.0;
    }
    let scaled = DMatrix::from_fn(rows.len(), cols.len(), |ri, ci| {
        let (x, y) = (rows[ri], cols[ci]);
        mu_out[x].sqrt() * j[(x, y)] / mu_in[y].sqrt()
    });
    power_iteration_sigma_max(&scaled, 0)
}

/// Power iteration on `A^T A`; `restart` selects a deterministic start
/// vector so independent restarts can be cross-checked.
pub fn power_iteration_sigma_max(a: &DMatrix<f64>, restart: u64) -> f64 {
    let n = a.ncols();
    let mut v = DVector::from_fn(n, |i, _| {
        // Deterministic pseudo-random start, varied per restart.
        let x = (i as u64 + 1).wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(restart.wrapping_mul(0xD1B54A32D192ED03));
        1.0 + ((x >> 11) as f64 / (1u64 << 53) as f64)
    });
    v /= v.norm();
    let mut sigma_sq = 0.0f64;
    for _ in 0..POWER_ITER_MAX {
        let w = a.transpose() * (a * &v);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = w / norm;
        let rayleigh = (a * &next).norm_squared();
        v = next;
        if (rayleigh - sigma_sq).abs() <= POWER_ITER_TOL * rayleigh.max(1.0) {
            return rayleigh.sqrt();
        }
        sigma_sq = rayleigh;
    }
    sigma_sq.sqrt()
}

/// Mixed-over-actions operator norm for a `W -> V^A` family of matrices,
/// used for `B = ||Q||` and the contraction modulus. The input norm must be
/// sup-type; for sup-type outputs the per-action max is exact, for Lp
/// outputs the sign-aligned bound is applied to the rowwise action max.
pub fn op_norm_mixed(
    mats: &[DMatrix<f64>],
    in_spec: &NormSpec,
    out_spec: &NormSpec,
) -> Result<f64> {
    if mats.is_empty() {
        return Err(Error::InvalidParameter("empty operator family".into()));
    }
    let n = mats[0].ncols();
    in_spec.validate(n)?;
    let w_in = in_spec.weights_or_ones(n).ok_or_else(|| {
        Error::UnsupportedPairing("mixed operator norm requires a sup-type input norm".into())
    })?;
    match out_spec {
        NormSpec::Sup | NormSpec::WeightedSup(_) => {
            let mut best = 0.0f64;
            for m in mats {
                let op = NormedOperator { matrix: m, in_spec, out_spec };
                best = best.max(op_norm(&op)?);
            }
            Ok(best)
        }
        NormSpec::Lp { .. } => {
            let rows = DVector::from_fn(mats[0].nrows(), |x, _| {
                mats.iter()
                    .map(|m| (0..n).map(|y| m[(x, y)].abs() * w_in[y]).sum::<f64>())
                    .fold(0.0, f64::max)
            });
            vec_norm(&rows, out_spec)
        }
    }
}

/// Lyapunov coefficient `beta_{w,J} = gamma sup_{|f|=w} ||Jf||_{inf,w}`,
/// taken over the action family: the closed form is the gamma-scaled maximum
/// over actions and rows of `sum_y |J^a(x,y)| w(y) / w(x)`.
pub fn lyapunov_beta(w: &DVector<f64>, mats: &[DMatrix<f64>], gamma: f64) -> Result<f64> {
    if w.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::InvalidNorm("Lyapunov weight must be strictly positive".into()));
    }
    let mut best = 0.0f64;
    for j in mats {
        if j.ncols() != w.len() || j.nrows() != w.len() {
            return Err(Error::DimensionMismatch {
                expected: w.len(),
                got: j.nrows().max(j.ncols()),
                context: "lyapunov_beta operator shape",
            });
        }
        best = best.max(weighted_row_sup(j, w, w));
    }
    Ok(gamma * best)
}

/// Lipschitz constant of a point evaluator between `L^p(mu)` and `L^p(rho)`
/// spaces: `||d rho'/d mu||_inf^{1/p}` where `rho'` aggregates the compressed
/// measure onto the anchor states, `+inf` when `rho'` is not absolutely
/// continuous w.r.t. `mu`.
pub fn lip_point_evaluator_lp(
    rho: &DVector<f64>,
    mu: &DVector<f64>,
    anchors: &[usize],
    p: PExp,
) -> Result<f64> {
    if rho.len() != anchors.len() {
        return Err(Error::DimensionMismatch {
            expected: anchors.len(),
            got: rho.len(),
            context: "compressed measure length",
        });
    }
    let mut pushed = vec![0.0f64; mu.len()];
    for (i, &x) in anchors.iter().enumerate() {
        if x >= mu.len() {
            return Err(Error::InvalidParameter(format!("anchor {x} out of range")));
        }
        pushed[x] += rho[i];
    }
    let mut best = 0.0f64;
    for (x, &mass) in pushed.iter().enumerate() {
        if mass > 0.0 {
            if mu[x] == 0.0 {
                return Ok(f64::INFINITY);
            }
            best = best.max(mass / mu[x]);
        }
    }
    Ok(match p {
        PExp::One => best,
        PExp::Two => best.sqrt(),
        // (d rho / d mu)^{1/p} -> 1 as p -> inf on the support.
        PExp::Inf => {
            if best > 0.0 {
                1.0
            } else {
                0.0
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn vec_norm_examples() {
        let v = DVector::from_vec(vec![3.0, -4.0]);
        assert_eq!(vec_norm(&v, &NormSpec::Sup).unwrap(), 4.0);
        let w = NormSpec::WeightedSup(DVector::from_vec(vec![3.0, 2.0]));
        assert_eq!(vec_norm(&v, &w).unwrap(), 2.0);
        let l1 = NormSpec::Lp { p: PExp::One, mu: DVector::from_vec(vec![0.5, 0.5]) };
        assert_eq!(vec_norm(&v, &l1).unwrap(), 3.5);
        // Essential sup excludes zero-mass states.
        let linf = NormSpec::Lp { p: PExp::Inf, mu: DVector::from_vec(vec![1.0, 0.0]) };
        assert_eq!(vec_norm(&v, &linf).unwrap(), 3.0);
    }

    #[test]
    fn mixed_norm_examples() {
        let av = ActionValue(vec![
            DVector::from_vec(vec![1.0, -2.0]),
            DVector::from_vec(vec![0.0, 1.0]),
        ]);
        assert_eq!(mixed_norm(&av, &NormSpec::Sup).unwrap(), 2.0);
        let single = ActionValue(vec![DVector::from_vec(vec![1.0, -2.0])]);
        assert_eq!(
            mixed_norm(&single, &NormSpec::Sup).unwrap(),
            vec_norm(&single.0[0], &NormSpec::Sup).unwrap()
        );
    }

    #[test]
    fn sup_op_norm_is_max_row_abs_sum() {
        let j = DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 0.0, 3.0]);
        let op = NormedOperator { matrix: &j, in_spec: &NormSpec::Sup, out_spec: &NormSpec::Sup };
        assert_eq!(op_norm(&op).unwrap(), 3.0);

        let p = DMatrix::from_row_slice(2, 2, &[0.25, 0.75, 0.5, 0.5]);
        let op = NormedOperator { matrix: &p, in_spec: &NormSpec::Sup, out_spec: &NormSpec::Sup };
        assert!((op_norm(&op).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn l1_op_norm_matches_basis_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let j = DMatrix::from_fn(5, 5, |_, _| rng.gen_range(-2.0..2.0));
        let mu = DVector::from_element(5, 0.2);
        let spec = NormSpec::Lp { p: PExp::One, mu: mu.clone() };
        let op = NormedOperator { matrix: &j, in_spec: &spec, out_spec: &spec };
        let norm = op_norm(&op).unwrap();
        let mut brute = 0.0f64;
        for y in 0..5 {
            let e = DVector::from_fn(5, |i, _| if i == y { 1.0 } else { 0.0 });
            let num = vec_norm(&(&j * &e), &spec).unwrap();
            let den = vec_norm(&e, &spec).unwrap();
            brute = brute.max(num / den);
        }
        assert!((norm - brute).abs() < 1e-12);
    }

    #[test]
    fn l1_measure_mismatch_is_infinite() {
        let j = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let mu_in = DVector::from_vec(vec![1.0, 0.0]);
        let mu_out = DVector::from_vec(vec![1.0, 1.0]);
        let in_spec = NormSpec::Lp { p: PExp::One, mu: mu_in };
        let out_spec = NormSpec::Lp { p: PExp::One, mu: mu_out };
        let op = NormedOperator { matrix: &j, in_spec: &in_spec, out_spec: &out_spec };
        assert_eq!(op_norm(&op).unwrap(), f64::INFINITY);
    }

    #[test]
    fn l2_power_iteration_restarts_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let a = DMatrix::from_fn(6, 6, |_, _| rng.gen_range(-1.0..1.0));
            let s0 = power_iteration_sigma_max(&a, 0);
            let s1 = power_iteration_sigma_max(&a, 1);
            assert!((s0 - s1).abs() < 1e-8);
            let svd = a.clone().svd(false, false);
            let sigma = svd.singular_values.amax();
            assert!((s0 - sigma).abs() < 1e-8);
        }
    }

    #[test]
    fn lyapunov_beta_stochastic_ones() {
        let p = DMatrix::from_row_slice(2, 2, &[0.3, 0.7, 0.9, 0.1]);
        let ones = DVector::from_element(2, 1.0);
        let beta = lyapunov_beta(&ones, &[p], 0.8).unwrap();
        assert!((beta - 0.8).abs() < 1e-14);
    }

    #[test]
    fn lyapunov_beta_equals_gamma_lip() {
        // Prop: gamma Lip(J) = beta_{w,J} under the weighted sup norm.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let j = DMatrix::from_fn(4, 4, |_, _| rng.gen_range(-1.0..1.0));
            let w = DVector::from_fn(4, |_, _| rng.gen_range(0.2..3.0));
            let spec = NormSpec::WeightedSup(w.clone());
            let op = NormedOperator { matrix: &j, in_spec: &spec, out_spec: &spec };
            let gamma = 0.7;
            let lip = op_norm(&op).unwrap();
            let beta = lyapunov_beta(&w, &[j.clone()], gamma).unwrap();
            assert!((gamma * lip - beta).abs() < 1e-12);
        }
    }

    #[test]
    fn lyapunov_beta_sign_pattern_oracle() {
        // Exhaustive max over f with |f| = w for small n.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let n = rng.gen_range(2..=6);
            let j = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-2.0..2.0));
            let w = DVector::from_fn(n, |_, _| rng.gen_range(0.1..2.0));
            let gamma = 0.9;
            let beta = lyapunov_beta(&w, &[j.clone()], gamma).unwrap();
            let spec = NormSpec::WeightedSup(w.clone());
            let mut brute = 0.0f64;
            for mask in 0..(1u32 << n) {
                let f = DVector::from_fn(n, |i, _| {
                    if mask >> i & 1 == 1 {
                        w[i]
                    } else {
                        -w[i]
                    }
                });
                brute = brute.max(vec_norm(&(&j * f), &spec).unwrap());
            }
            assert!((beta - gamma * brute).abs() < 1e-12);
        }
    }

    #[test]
    fn lip_point_evaluator_examples() {
        // rho = mu restricted to anchors covering all of X -> 1.
        let mu = DVector::from_vec(vec![0.25, 0.25, 0.5]);
        let rho = mu.clone();
        let lip = lip_point_evaluator_lp(&rho, &mu, &[0, 1, 2], PExp::One).unwrap();
        assert!((lip - 1.0).abs() < 1e-15);
        // Anchor with zero mu-mass -> infinity.
        let mu0 = DVector::from_vec(vec![1.0, 0.0]);
        let rho = DVector::from_vec(vec![0.5, 0.5]);
        assert_eq!(
            lip_point_evaluator_lp(&rho, &mu0, &[0, 1], PExp::One).unwrap(),
            f64::INFINITY
        );
    }

    #[test]
    fn lip_point_evaluator_subset_oracle() {
        // sup over indicator vectors of subsets from the proof.
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let m = 5;
        let mu = DVector::from_fn(m, |_, _| rng.gen_range(0.1..1.0));
        let anchors = [0usize, 2, 2, 4];
        let rho = DVector::from_fn(anchors.len(), |_, _| rng.gen_range(0.0..1.0));
        let lip = lip_point_evaluator_lp(&rho, &mu, &anchors, PExp::One).unwrap();
        let mut pushed = vec![0.0; m];
        for (i, &x) in anchors.iter().enumerate() {
            pushed[x] += rho[i];
        }
        let mut brute = 0.0f64;
        for mask in 1..(1u32 << m) {
            let rho_mass: f64 = (0..m).filter(|&x| mask >> x & 1 == 1).map(|x| pushed[x]).sum();
            let mu_mass: f64 = (0..m).filter(|&x| mask >> x & 1 == 1).map(|x| mu[x]).sum();
            if mu_mass > 0.0 {
                brute = brute.max(rho_mass / mu_mass);
            }
        }
        assert!((lip - brute).abs() < 1e-12);
    }

    proptest! {
        // Absolute monotonicity: |u| <= |v| componentwise implies the norm order.
        #[test]
        fn norms_absolutely_monotone(vals in proptest::collection::vec((-10.0f64..10.0, 0.0f64..1.0), 1..8)) {
            let v = DVector::from_iterator(vals.len(), vals.iter().map(|(x, _)| *x));
            let u = DVector::from_iterator(vals.len(), vals.iter().map(|(x, s)| x * s));
            let n = vals.len();
            let specs = [
                NormSpec::Sup,
                NormSpec::WeightedSup(DVector::from_element(n, 0.5)),
                NormSpec::Lp { p: PExp::One, mu: DVector::from_element(n, 1.0 / n as f64) },
                NormSpec::Lp { p: PExp::Two, mu: DVector::from_element(n, 1.0 / n as f64) },
                NormSpec::Lp { p: PExp::Inf, mu: DVector::from_element(n, 1.0 / n as f64) },
            ];
            for spec in &specs {
                prop_assert!(vec_norm(&u, spec).unwrap() <= vec_norm(&v, spec).unwrap() + 1e-12);
            }
        }

        // op_norm(J) ||v|| >= ||Jv|| for all v (sup pairing).
        #[test]
        fn op_norm_dominates_action(entries in proptest::collection::vec(-5.0f64..5.0, 9),
                                    vvals in proptest::collection::vec(-5.0f64..5.0, 3)) {
            let j = DMatrix::from_row_slice(3, 3, &entries);
            let v = DVector::from_vec(vvals);
            let op = NormedOperator { matrix: &j, in_spec: &NormSpec::Sup, out_spec: &NormSpec::Sup };
            let n = op_norm(&op).unwrap();
            let lhs = vec_norm(&(&j * &v), &NormSpec::Sup).unwrap();
            let rhs = n * vec_norm(&v, &NormSpec::Sup).unwrap();
            prop_assert!(lhs <= rhs + 1e-9);
        }
    }
}
