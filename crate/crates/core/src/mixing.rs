//! The three dependence coefficients alpha(n), rho(n), beta(n) of a
//! finite-state stationary Markov chain, computed exactly from the joint law
//! of (X_0, X_n), plus brute-force oracle routes for cross-validation.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::chain::{ChainModel, JointDistribution, PowerCache};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Subset enumeration bound for the exact alpha coefficient.
pub const ALPHA_MAX_STATES: usize = 24;

/// Per-lag table of (alpha, rho, beta), over contiguous lags 1..N plus the
/// doubling lags 2^0..2^m.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixingProfile {
    pub lags: Vec<u64>,
    pub alpha: Vec<f64>,
    pub rho: Vec<f64>,
    pub beta: Vec<f64>,
}

/// beta(n) = 1/2 sum |J(i,j) - mu_i mu_j|. The supremum over finite
/// partitions is attained at the atom partition: refining a partition can
/// only grow the absolute-deviation sum.
pub fn beta_coefficient(joint: &JointDistribution) -> f64 {
    let k = joint.marginal.len();
    let mut total = 0.0;
    for i in 0..k {
        for j in 0..k {
            total += (joint.table[(i, j)] - joint.marginal[i] * joint.marginal[j]).abs();
        }
    }
    0.5 * total
}

/// alpha(n) = max over subsets A, B of |J(AxB) - mu(A)mu(B)|.
///
/// A is enumerated in Gray-code order over half the subset lattice (the
/// objective is invariant under complementing A); for fixed A the inner
/// maximum over B is a sign set of the column deviations d_j, so it reduces
/// to max(sum d_j^+, sum d_j^-).
pub fn alpha_coefficient(joint: &JointDistribution) -> Result<f64> {
    let k = joint.marginal.len();
    if k > ALPHA_MAX_STATES {
        return Err(Error::StateSpaceTooLarge {
            k,
            max: ALPHA_MAX_STATES,
        });
    }
    let mut dev = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            dev[(i, j)] = joint.table[(i, j)] - joint.marginal[i] * joint.marginal[j];
        }
    }
    if k == 1 {
        return Ok(0.0);
    }
    // Gray-code walk over subsets of {0, .., k-2}; state k-1 stays outside A.
    let half = 1u64 << (k - 1);
    let mut d = vec![0.0f64; k];
    let mut best = 0.0f64;
    let mut prev_gray = 0u64;
    for idx in 1..half {
        let gray = idx ^ (idx >> 1);
        let flipped = (gray ^ prev_gray).trailing_zeros() as usize;
        prev_gray = gray;
        if gray >> flipped & 1 == 1 {
            for j in 0..k {
                d[j] += dev[(flipped, j)];
            }
        } else {
            for j in 0..k {
                d[j] -= dev[(flipped, j)];
            }
        }
        let mut pos = 0.0;
        let mut neg = 0.0;
        for &x in &d {
            if x > 0.0 {
                pos += x;
            } else {
                neg -= x;
            }
        }
        best = best.max(pos.max(neg));
    }
    Ok(best)
}

/// rho(n) as the largest singular value of the centered kernel
/// Q(i,j) = (J(i,j) - mu_i mu_j) / sqrt(mu_i mu_j) over support states.
///
/// Substituting a_i = g(i) sqrt(mu_i), b_j = h(j) sqrt(mu_j) turns the
/// mean-zero unit-variance maximal-correlation problem into a constrained
/// bilinear form whose maximum is this singular value. The equivalent route
/// via the second singular value of the uncentered kernel J/sqrt(mu mu) is
/// computed alongside and the two are required to agree.
pub fn rho_coefficient(joint: &JointDistribution) -> f64 {
    let support: Vec<usize> = (0..joint.marginal.len())
        .filter(|&i| joint.marginal[i] > 0.0)
        .collect();
    let m = support.len();
    if m <= 1 {
        return 0.0;
    }
    let mut centered = DMatrix::zeros(m, m);
    let mut uncentered = DMatrix::zeros(m, m);
    for (r, &i) in support.iter().enumerate() {
        for (c, &j) in support.iter().enumerate() {
            let scale = (joint.marginal[i] * joint.marginal[j]).sqrt();
            centered[(r, c)] =
                (joint.table[(i, j)] - joint.marginal[i] * joint.marginal[j]) / scale;
            uncentered[(r, c)] = joint.table[(i, j)] / scale;
        }
    }
    let rho = top_singular_value(centered).min(1.0);
    let mut svs: Vec<f64> = uncentered.svd(false, false).singular_values.iter().copied().collect();
    svs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let second = svs.get(1).copied().unwrap_or(0.0).min(1.0);
    assert!(
        (rho - second).abs() <= 1e-9,
        "centered/uncentered rho routes disagree: {rho} vs {second}"
    );
    rho
}

fn top_singular_value(m: DMatrix<f64>) -> f64 {
    m.svd(false, false)
        .singular_values
        .iter()
        .fold(0.0f64, |a, &b| a.max(b))
}

/// Direct maximization of E[g(X_0) h(X_n)] over unit-ball mean-zero score
/// pairs by alternating conditional-mean updates from seeded random starts.
/// A test oracle: never exceeds the SVD route, and matches it on small chains.
pub fn rho_bruteforce_oracle(joint: &JointDistribution, restarts: u32, seed: u64) -> f64 {
    let k = joint.marginal.len();
    let support: Vec<usize> = (0..k).filter(|&i| joint.marginal[i] > 0.0).collect();
    if support.len() <= 1 {
        return 0.0;
    }
    let mu = &joint.marginal;
    let normalize = |v: &mut [f64]| -> bool {
        let mean: f64 = support.iter().map(|&i| v[i] * mu[i]).sum();
        for &i in &support {
            v[i] -= mean;
        }
        let norm: f64 = support
            .iter()
            .map(|&i| v[i] * v[i] * mu[i])
            .sum::<f64>()
            .sqrt();
        if norm < 1e-300 {
            return false;
        }
        for &i in &support {
            v[i] /= norm;
        }
        true
    };
    let mut rng = SplitMix64::new(seed);
    let mut best = 0.0f64;
    for _ in 0..restarts {
        let mut g = vec![0.0f64; k];
        for &i in &support {
            g[i] = rng.next_f64() * 2.0 - 1.0;
        }
        if !normalize(&mut g) {
            continue;
        }
        let mut h = vec![0.0f64; k];
        let mut value = 0.0f64;
        for _ in 0..10_000 {
            // optimal h given g: conditional mean of g(X_0) given X_n
            for &j in &support {
                h[j] = support.iter().map(|&i| g[i] * joint.table[(i, j)]).sum::<f64>() / mu[j];
            }
            if !normalize(&mut h) {
                break;
            }
            for &i in &support {
                g[i] = support.iter().map(|&j| h[j] * joint.table[(i, j)]).sum::<f64>() / mu[i];
            }
            if !normalize(&mut g) {
                break;
            }
            let new_value: f64 = support
                .iter()
                .map(|&i| {
                    support
                        .iter()
                        .map(|&j| g[i] * h[j] * joint.table[(i, j)])
                        .sum::<f64>()
                })
                .sum();
            if (new_value - value).abs() < 1e-13 {
                value = new_value;
                break;
            }
            value = new_value;
        }
        best = best.max(value);
    }
    best.min(1.0)
}

/// Computes all three coefficients over lags 1..max_lag plus the doubling
/// lags 2^0..2^max_doubling, and asserts the profile invariants (lag
/// monotonicity and the inequalities 4 alpha <= rho, 2 alpha <= beta).
pub fn mixing_profile(chain: &ChainModel, max_lag: u64, max_doubling: u32) -> Result<MixingProfile> {
    assert!(max_lag >= 1);
    let mut lags: Vec<u64> = (1..=max_lag).collect();
    for e in 0..=max_doubling {
        let lag = 1u64 << e;
        if !lags.contains(&lag) {
            lags.push(lag);
        }
    }
    lags.sort_unstable();
    let mut cache = PowerCache::new(chain.transition().clone());
    let mut alpha = Vec::with_capacity(lags.len());
    let mut rho = Vec::with_capacity(lags.len());
    let mut beta = Vec::with_capacity(lags.len());
    for &lag in &lags {
        let joint = chain.joint_at_lag_cached(lag, &mut cache);
        alpha.push(alpha_coefficient(&joint)?);
        rho.push(rho_coefficient(&joint));
        beta.push(beta_coefficient(&joint));
    }
    let profile = MixingProfile {
        lags,
        alpha,
        rho,
        beta,
    };
    profile.assert_invariants();
    Ok(profile)
}

impl MixingProfile {
    /// Lag monotonicity and the coefficient inequalities, to 1e-10.
    pub fn assert_invariants(&self) {
        const TOL: f64 = 1e-10;
        for w in 0..self.lags.len() {
            let (a, r, b) = (self.alpha[w], self.rho[w], self.beta[w]);
            assert!((0.0..=0.25 + TOL).contains(&a), "alpha out of range: {a}");
            assert!((0.0..=1.0 + TOL).contains(&r), "rho out of range: {r}");
            assert!((0.0..=1.0 + TOL).contains(&b), "beta out of range: {b}");
            assert!(4.0 * a <= r + TOL, "4*alpha > rho at lag {}", self.lags[w]);
            assert!(2.0 * a <= b + TOL, "2*alpha > beta at lag {}", self.lags[w]);
            if w > 0 {
                assert!(self.alpha[w] <= self.alpha[w - 1] + TOL, "alpha not monotone");
                assert!(self.rho[w] <= self.rho[w - 1] + TOL, "rho not monotone");
                assert!(self.beta[w] <= self.beta[w - 1] + TOL, "beta not monotone");
            }
        }
    }

    pub fn value_at(&self, lag: u64) -> Option<(f64, f64, f64)> {
        let idx = self.lags.iter().position(|&l| l == lag)?;
        Some((self.alpha[idx], self.rho[idx], self.beta[idx]))
    }

    /// CSV with 17-significant-digit scientific notation, locale-free.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lag,alpha,rho,beta\n");
        for i in 0..self.lags.len() {
            out.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e}\n",
                self.lags[i], self.alpha[i], self.rho[i], self.beta[i]
            ));
        }
        out
    }
}

/// Independent oracle routes, used by the test and acceptance suites.
pub mod oracles {
    use super::*;

    /// Full 2^k x 2^k enumeration of alpha, no greedy inner step.
    pub fn alpha_exhaustive(joint: &JointDistribution) -> f64 {
        let k = joint.marginal.len();
        assert!(k <= 16, "exhaustive alpha oracle limited to k <= 16");
        let mut dev = vec![vec![0.0f64; k]; k];
        for i in 0..k {
            for j in 0..k {
                dev[i][j] = joint.table[(i, j)] - joint.marginal[i] * joint.marginal[j];
            }
        }
        let mut best = 0.0f64;
        for a in 0u64..(1 << k) {
            let mut d = vec![0.0f64; k];
            for i in 0..k {
                if a >> i & 1 == 1 {
                    for j in 0..k {
                        d[j] += dev[i][j];
                    }
                }
            }
            for b in 0u64..(1 << k) {
                let mut s = 0.0;
                for (j, &dj) in d.iter().enumerate() {
                    if b >> j & 1 == 1 {
                        s += dj;
                    }
                }
                best = best.max(s.abs());
            }
        }
        best
    }

    /// Maximum of 1/2 sum |P(A_i x B_j) - P(A_i) P(B_j)| over all pairs of
    /// set partitions of the state space, enumerated via restricted growth
    /// strings. Validates the atom-partition closed form for beta.
    pub fn beta_partition_enumeration(joint: &JointDistribution) -> f64 {
        let k = joint.marginal.len();
        assert!(k <= 6, "partition oracle limited to k <= 6");
        let partitions = set_partitions(k);
        let mut best = 0.0f64;
        for pa in &partitions {
            for pb in &partitions {
                let na = pa.iter().max().unwrap() + 1;
                let nb = pb.iter().max().unwrap() + 1;
                let mut jm = vec![vec![0.0f64; nb]; na];
                let mut ma = vec![0.0f64; na];
                let mut mb = vec![0.0f64; nb];
                for i in 0..k {
                    ma[pa[i]] += joint.marginal[i];
                    mb[pb[i]] += joint.marginal[i];
                    for j in 0..k {
                        jm[pa[i]][pb[j]] += joint.table[(i, j)];
                    }
                }
                let mut total = 0.0;
                for (bi, row) in jm.iter().enumerate() {
                    for (bj, &v) in row.iter().enumerate() {
                        total += (v - ma[bi] * mb[bj]).abs();
                    }
                }
                best = best.max(0.5 * total);
            }
        }
        best
    }

    /// All set partitions of {0..k-1} as block-index vectors.
    fn set_partitions(k: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut current = vec![0usize; k];
        fn rec(current: &mut Vec<usize>, pos: usize, max_used: usize, out: &mut Vec<Vec<usize>>) {
            if pos == current.len() {
                out.push(current.clone());
                return;
            }
            for block in 0..=max_used + 1 {
                current[pos] = block;
                rec(current, pos + 1, max_used.max(block), out);
            }
        }
        if k == 0 {
            return vec![vec![]];
        }
        current[0] = 0;
        rec(&mut current, 1, 0, &mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::ChainModel;
    use crate::generators;

    fn two_state(p: f64) -> ChainModel {
        ChainModel::validate(None, vec![vec![1.0 - p, p], vec![p, 1.0 - p]], None).unwrap()
    }

    fn iid_uniform(k: usize) -> ChainModel {
        let row: Vec<f64> = vec![1.0 / k as f64; k];
        ChainModel::validate(None, vec![row; k], None).unwrap()
    }

    #[test]
    fn iid_chain_has_zero_coefficients() {
        let chain = iid_uniform(3);
        for n in [1u64, 2, 8] {
            let joint = chain.joint_at_lag(n);
            assert!(beta_coefficient(&joint).abs() < 1e-15);
            assert!(alpha_coefficient(&joint).unwrap().abs() < 1e-15);
            assert!(rho_coefficient(&joint).abs() < 1e-7);
        }
    }

    #[test]
    fn identity_chain_beta_is_half() {
        let chain = ChainModel::validate(
            None,
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            Some(vec![0.5, 0.5]),
        )
        .unwrap();
        let joint = chain.joint_at_lag(5);
        assert!((beta_coefficient(&joint) - 0.5).abs() < 1e-15);
        assert!((alpha_coefficient(&joint).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn two_state_quarter_at_lag_one() {
        let chain = two_state(0.25);
        let joint = chain.joint_at_lag(1);
        assert!((beta_coefficient(&joint) - 0.25).abs() < 1e-15);
        assert!((alpha_coefficient(&joint).unwrap() - 0.125).abs() < 1e-15);
        assert!((rho_coefficient(&joint) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn two_state_rho_is_geometric() {
        let chain = two_state(0.25);
        for n in 1..=10u64 {
            let joint = chain.joint_at_lag(n);
            assert!(
                (rho_coefficient(&joint) - 0.5f64.powi(n as i32)).abs() < 1e-12,
                "lag {n}"
            );
        }
    }

    #[test]
    fn four_state_chain_rho_one_then_zero() {
        let chain = generators::make_four_state_counterexample();
        let r1 = rho_coefficient(&chain.joint_at_lag(1));
        let r2 = rho_coefficient(&chain.joint_at_lag(2));
        assert!((r1 - 1.0).abs() < 1e-12);
        assert!(r2.abs() < 1e-12);
    }

    #[test]
    fn alpha_rejects_large_state_space() {
        let chain = iid_uniform(25);
        let joint = chain.joint_at_lag(1);
        assert!(matches!(
            alpha_coefficient(&joint),
            Err(Error::StateSpaceTooLarge { .. })
        ));
    }

    #[test]
    fn alpha_matches_exhaustive_enumeration() {
        for seed in 0..20u64 {
            let chain = generators::make_random_stochastic(5, seed);
            for n in [1u64, 2, 4] {
                let joint = chain.joint_at_lag(n);
                let fast = alpha_coefficient(&joint).unwrap();
                let slow = oracles::alpha_exhaustive(&joint);
                assert!((fast - slow).abs() < 1e-15, "seed {seed} lag {n}");
            }
        }
    }

    #[test]
    fn beta_matches_partition_enumeration() {
        for seed in 0..10u64 {
            let chain = generators::make_random_stochastic(4, seed);
            let joint = chain.joint_at_lag(1);
            let closed = beta_coefficient(&joint);
            let oracle = oracles::beta_partition_enumeration(&joint);
            assert!((closed - oracle).abs() < 1e-12, "seed {seed}");
        }
    }

    #[test]
    fn bruteforce_rho_matches_svd() {
        let chain = two_state(0.25);
        let joint = chain.joint_at_lag(1);
        let bf = rho_bruteforce_oracle(&joint, 8, 123);
        assert!((bf - 0.5).abs() < 1e-6);
        assert!(bf <= rho_coefficient(&joint) + 1e-9);
    }

    #[test]
    fn bruteforce_rho_on_four_state_chain() {
        let chain = generators::make_four_state_counterexample();
        let bf1 = rho_bruteforce_oracle(&chain.joint_at_lag(1), 8, 5);
        let bf2 = rho_bruteforce_oracle(&chain.joint_at_lag(2), 8, 5);
        assert!((bf1 - 1.0).abs() < 1e-6);
        assert!(bf2.abs() < 1e-6);
    }

    #[test]
    fn profile_of_four_state_chain() {
        let chain = generators::make_four_state_counterexample();
        let profile = mixing_profile(&chain, 4, 2).unwrap();
        let rho: Vec<f64> = profile.rho.clone();
        assert!((rho[0] - 1.0).abs() < 1e-12);
        for &r in &rho[1..] {
            assert!(r.abs() < 1e-12);
        }
    }

    #[test]
    fn profile_of_two_cycle_is_constant() {
        let chain = ChainModel::validate(None, vec![vec![0.0, 1.0], vec![1.0, 0.0]], None).unwrap();
        let profile = mixing_profile(&chain, 6, 2).unwrap();
        for i in 0..profile.lags.len() {
            assert!((profile.rho[i] - 1.0).abs() < 1e-10);
            assert!((profile.beta[i] - 0.5).abs() < 1e-12);
            assert!((profile.alpha[i] - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn rho_submultiplicative() {
        for seed in 0..10u64 {
            let chain = generators::make_random_stochastic(4, seed);
            let rho: Vec<f64> = (1..=8u64)
                .map(|n| rho_coefficient(&chain.joint_at_lag(n)))
                .collect();
            for m in 1..=4usize {
                for n in 1..=4usize {
                    assert!(
                        rho[m + n - 1] <= rho[m - 1] * rho[n - 1] + 1e-10,
                        "seed {seed} m={m} n={n}"
                    );
                }
            }
        }
    }

    #[test]
    fn rho_invariant_under_relabeling() {
        let chain = generators::make_random_stochastic(5, 99);
        let joint = chain.joint_at_lag(1);
        let perm = [2usize, 0, 4, 1, 3];
        let k = 5;
        let mut table = DMatrix::zeros(k, k);
        let mut marginal = nalgebra::DVector::zeros(k);
        for i in 0..k {
            marginal[perm[i]] = joint.marginal[i];
            for j in 0..k {
                table[(perm[i], perm[j])] = joint.table[(i, j)];
            }
        }
        let permuted = JointDistribution {
            lag: 1,
            table,
            marginal,
        };
        assert!((rho_coefficient(&joint) - rho_coefficient(&permuted)).abs() < 1e-12);
    }

    #[test]
    fn csv_has_17_significant_digits() {
        let chain = two_state(0.25);
        let profile = mixing_profile(&chain, 2, 1).unwrap();
        let csv = profile.to_csv();
        assert!(csv.starts_with("lag,alpha,rho,beta\n"));
        assert!(csv.contains("5.0000000000000000e-1"));
    }
}
