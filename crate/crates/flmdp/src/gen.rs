//! Random MDP and model generators with a counter-based seed protocol:
//! trial `i` of a batch uses `trial_seed(master_seed, i)`, so trials are
//! reproducible and order-independent under parallel execution.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::factored::{self, FactoredLinearModel};
use crate::mdp::Mdp;

/// Mixes a master seed and a trial index into an independent stream seed
/// (splitmix64 finalizer).
pub fn trial_seed(master_seed: u64, trial_index: u64) -> u64 {
    let mut z = master_seed
        .wrapping_add(trial_index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Row-stochastic matrix with Dirichlet(1) rows (normalized exponentials).
pub fn random_stochastic(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    let mut p = DMatrix::from_fn(rows, cols, |_, _| -f64::ln(rng.gen_range(f64::MIN_POSITIVE..1.0)));
    for x in 0..rows {
        let s: f64 = p.row(x).iter().sum();
        for y in 0..cols {
            p[(x, y)] /= s;
        }
    }
    p
}

/// Random MDP: Dirichlet(1) transition rows, uniform[-1, 1] rewards.
pub fn random_mdp(rng: &mut ChaCha8Rng, m: usize, k: usize, gamma: f64) -> Result<Mdp> {
    let transitions = (0..k).map(|_| random_stochastic(rng, m, m)).collect();
    let rewards = (0..k)
        .map(|_| DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0)))
        .collect();
    Mdp::new(gamma, transitions, rewards)
}

/// Surjective random partition of `m` states into `n` blocks.
pub fn random_partition(rng: &mut ChaCha8Rng, m: usize, n: usize) -> Vec<usize> {
    assert!(n >= 1 && n <= m);
    let mut partition: Vec<usize> = (0..m)
        .map(|x| if x < n { x } else { rng.gen_range(0..n) })
        .collect();
    // Shuffle block labels over states beyond the forced prefix.
    for x in (1..m).rev() {
        let y = rng.gen_range(0..=x);
        partition.swap(x, y);
    }
    // Re-establish surjectivity after the shuffle.
    let mut seen = vec![false; n];
    for &b in &partition {
        seen[b] = true;
    }
    let mut missing: Vec<usize> = (0..n).filter(|&b| !seen[b]).collect();
    for x in 0..m {
        if missing.is_empty() {
            break;
        }
        let b = partition[x];
        if partition.iter().filter(|&&c| c == b).count() > 1 {
            partition[x] = missing.pop().unwrap();
        }
    }
    partition
}

/// Model with a random-partition point-evaluator `R` and `Q` built from the
/// exact block compression plus elementwise noise, rescaled so the
/// compressed operator is a non-expansion.
pub fn random_normalized_model(
    rng: &mut ChaCha8Rng,
    mdp: &Mdp,
    n: usize,
    noise: f64,
) -> Result<FactoredLinearModel> {
    let m = mdp.num_states();
    let partition = random_partition(rng, m, n);
    let exact = factored::hard_aggregation(mdp, &partition)?;
    let q = exact
        .q_all()
        .iter()
        .map(|qa| qa.map(|v| v + rng.gen_range(-noise..noise)))
        .collect();
    let mut model = FactoredLinearModel::new(
        mdp.gamma(),
        mdp.rewards().to_vec(),
        q,
        exact.right_factor().clone(),
    )?;
    factored::normalize_contraction(&mut model)?;
    Ok(model)
}

/// A generated trial: the true MDP plus a factored model satisfying the
/// non-expansion assumption.
#[derive(Debug, Clone)]
pub struct RandomInstance {
    pub seed: u64,
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub gamma: f64,
    pub mdp: Mdp,
    pub model: FactoredLinearModel,
}

/// Draws a full instance from a single stream seed. Dimensions are sampled
/// uniformly from the inclusive ranges.
pub fn random_instance(
    seed: u64,
    m_range: (usize, usize),
    n_max: usize,
    k_range: (usize, usize),
    gamma_range: (f64, f64),
    noise: f64,
) -> Result<RandomInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.gen_range(m_range.0..=m_range.1);
    let k = rng.gen_range(k_range.0..=k_range.1);
    let gamma = rng.gen_range(gamma_range.0..gamma_range.1);
    let n = rng.gen_range(1..=n_max.min(m));
    let mdp = random_mdp(&mut rng, m, k, gamma)?;
    let model = random_normalized_model(&mut rng, &mdp, n, noise)?;
    Ok(RandomInstance { seed, m, n, k, gamma, mdp, model })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::NormSpec;

    #[test]
    fn trial_seeds_distinct_and_reproducible() {
        let a = trial_seed(42, 0);
        let b = trial_seed(42, 1);
        let c = trial_seed(43, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, trial_seed(42, 0));
    }

    #[test]
    fn random_mdp_rows_stochastic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mdp = random_mdp(&mut rng, 10, 3, 0.8).unwrap();
        for a in 0..3 {
            for x in 0..10 {
                let s: f64 = mdp.transition(a).row(x).iter().sum();
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn random_partition_surjective() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let m = rng.gen_range(1..20);
            let n = rng.gen_range(1..=m);
            let partition = random_partition(&mut rng, m, n);
            assert_eq!(partition.len(), m);
            let mut seen = vec![false; n];
            for &b in &partition {
                assert!(b < n);
                seen[b] = true;
            }
            assert!(seen.iter().all(|&s| s));
        }
    }

    #[test]
    fn generated_models_are_non_expansions() {
        for trial in 0..30 {
            let seed = trial_seed(7, trial);
            let inst = random_instance(seed, (2, 12), 6, (1, 3), (0.1, 0.95), 0.1).unwrap();
            let modulus =
                factored::contraction_modulus(&inst.model, &NormSpec::Sup).unwrap();
            assert!(modulus <= inst.gamma + 1e-12);
        }
    }

    #[test]
    fn instances_reproducible_from_seed() {
        let a = random_instance(99, (2, 10), 5, (1, 4), (0.1, 0.9), 0.05).unwrap();
        let b = random_instance(99, (2, 10), 5, (1, 4), (0.1, 0.9), 0.05).unwrap();
        assert_eq!(a.m, b.m);
        for act in 0..a.k {
            assert_eq!(a.mdp.transition(act), b.mdp.transition(act));
            assert_eq!(a.model.q(act), b.model.q(act));
        }
    }
}
