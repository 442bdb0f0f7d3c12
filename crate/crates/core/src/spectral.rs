//! Spectral analysis of reversible chains and doubling-lag correlation
//! diagnostics.
//!
//! For a reversible chain the symmetrization S = D^{1/2} P D^{-1/2}
//! (D = diag(mu), restricted to the support) is a symmetric matrix whose
//! eigenvalues are real. Autocorrelations along doubling lags,
//! c_n = E[g(X_0) g(X_{2^n})], then admit the expansion
//! c_n = sum_e a_e^2 lambda_e^{2^n}, which makes the roots c_n^{1/2^n}
//! nondecreasing and identifies their limit r(g) as the largest |lambda_e|
//! carried by a nonzero coefficient. The subset functional R(D) maximizes
//! r over centered indicators of subsets of D.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::chain::{ChainModel, PowerCache};
use crate::error::{Error, Result};

/// Eigen-coefficient threshold below which a component is treated as absent.
const COMPONENT_TOL: f64 = 1e-12;
/// Subset enumeration bound for `max_subset_rate`.
pub const SUBSET_MAX_STATES: usize = 20;

/// A real score function g on the state space, used through the geometry of
/// L2(mu): mean E[g(X_0)] and norm E[g(X_0)^2]^{1/2}.
#[derive(Debug, Clone)]
pub struct ScoreFunction {
    pub values: DVector<f64>,
}

impl ScoreFunction {
    pub fn new(values: Vec<f64>) -> Self {
        ScoreFunction {
            values: DVector::from_vec(values),
        }
    }

    /// The centered indicator of a state subset: I_A - mu(A). Mean zero by
    /// construction, and inside the unit ball since Var(I_A) <= 1/4.
    pub fn centered_indicator(chain: &ChainModel, subset: &[usize]) -> Self {
        let k = chain.len();
        let mass: f64 = subset.iter().map(|&i| chain.mu(i)).sum();
        let mut values = DVector::from_element(k, -mass);
        for &i in subset {
            values[i] += 1.0;
        }
        ScoreFunction { values }
    }

    pub fn mean(&self, chain: &ChainModel) -> f64 {
        (0..chain.len()).map(|i| chain.mu(i) * self.values[i]).sum()
    }

    pub fn norm(&self, chain: &ChainModel) -> f64 {
        (0..chain.len())
            .map(|i| chain.mu(i) * self.values[i] * self.values[i])
            .sum::<f64>()
            .sqrt()
    }
}

/// E[g(X_0) h(X_n)] = g' J_n h under the given joint law.
pub fn expectation_product(
    joint: &crate::chain::JointDistribution,
    g: &ScoreFunction,
    h: &ScoreFunction,
) -> f64 {
    let k = joint.marginal.len();
    let mut total = 0.0;
    for i in 0..k {
        for j in 0..k {
            total += g.values[i] * joint.table[(i, j)] * h.values[j];
        }
    }
    total
}

/// Autocorrelations of a score function along doubling lags, with the root
/// sequence c_n^{1/2^n}.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DoublingDiagnostics {
    pub exponents: Vec<u32>,
    pub lags: Vec<u64>,
    /// c_n = E[g(X_0) g(X_{2^n})].
    pub correlations: Vec<f64>,
    /// c_n^{1/2^n} where c_n > 0, else 0.
    pub roots: Vec<f64>,
    pub reversible: bool,
}

/// Computes c_n = E[g(X_0) g(X_{2^n})] for n = 0..=max_doubling. The score
/// must be mean-zero and inside the unit ball of L2(mu). On reversible
/// chains the c_n are checked nonnegative and the roots nondecreasing; on
/// non-reversible chains negative correlations are legitimate (a 3-cycle
/// with a centered indicator already produces c_1 = -1/9) and no shape
/// checks apply.
pub fn doubling_diagnostics(
    chain: &ChainModel,
    g: &ScoreFunction,
    max_doubling: u32,
) -> Result<DoublingDiagnostics> {
    let norm = g.norm(chain);
    if norm > 1.0 + COMPONENT_TOL {
        return Err(Error::ScoreOutOfUnitBall { norm });
    }
    if g.mean(chain).abs() > 1e-10 {
        return Err(Error::BadParameter(format!(
            "score function has nonzero mean {:e}",
            g.mean(chain)
        )));
    }
    let reversible = chain.check_reversibility().0;
    let mut cache = PowerCache::new(chain.transition().clone());
    let mut exponents = Vec::new();
    let mut lags = Vec::new();
    let mut correlations = Vec::new();
    let mut roots = Vec::new();
    for n in 0..=max_doubling {
        let lag = 1u64 << n;
        let joint = chain.joint_at_lag_cached(lag, &mut cache);
        let c = expectation_product(&joint, g, g);
        let root = if c > 0.0 {
            c.powf(1.0 / lag as f64)
        } else {
            0.0
        };
        exponents.push(n);
        lags.push(lag);
        correlations.push(c);
        roots.push(root);
    }
    if reversible {
        // even lags only: c_n = ||P^{2^{n-1}} g||^2 >= 0 for n >= 1, while
        // the lag-1 correlation can be negative (negative eigenvalues)
        for (n, &c) in correlations.iter().enumerate().skip(1) {
            assert!(c >= -1e-12, "negative doubling correlation {c} at n={n}");
        }
        // restrict shape checks to correlations solidly above the roundoff
        // floor (~1e-17 from the lag-power products): the 2^n-th root of
        // noise is O(1) and meaningless
        for w in 1..roots.len() {
            if correlations[w] > 1e-12 && correlations[w - 1] > 1e-12 {
                assert!(
                    roots[w] >= roots[w - 1] - 1e-9,
                    "doubling roots decreased: {} -> {}",
                    roots[w - 1],
                    roots[w]
                );
            }
        }
    }
    Ok(DoublingDiagnostics {
        exponents,
        lags,
        correlations,
        roots,
        reversible,
    })
}

/// For a reversible chain, compares E[g(X_0) g(X_{2n})] against
/// ||E[g(X_n) | X_0]||^2 in L2(mu); self-adjointness of P makes the two
/// equal, which is the identity behind nonnegativity of even-lag
/// autocorrelations. Returns the pair (c_{2n}, squared conditional-mean
/// norm). Errors on non-reversible chains, where the identity fails.
pub fn conditional_mean_check(chain: &ChainModel, g: &ScoreFunction, n: u64) -> Result<(f64, f64)> {
    let (rev, witness) = chain.check_reversibility();
    if !rev {
        let (i, j, imbalance) = witness.unwrap();
        return Err(Error::NotReversible { i, j, imbalance });
    }
    let joint = chain.joint_at_lag(2 * n);
    let c2n = expectation_product(&joint, g, g);
    let pn = PowerCache::new(chain.transition().clone()).power(n);
    let png = &pn * &g.values;
    let norm_sq: f64 = (0..chain.len()).map(|i| chain.mu(i) * png[i] * png[i]).sum();
    Ok((c2n, norm_sq))
}

/// Eigendecomposition of a reversible chain via its symmetrization on the
/// support: eigenvalues, the support states, per-state rows of the
/// orthonormal eigenvectors (scaled back by sqrt(mu)), and the index of the
/// eigenvector with maximal overlap with sqrt(mu) (the top Perron vector).
struct ReversibleSpectrum {
    support: Vec<usize>,
    eigenvalues: Vec<f64>,
    /// u[(r, e)] = component of the e-th orthonormal eigenvector of the
    /// symmetrized matrix at support state r.
    u: DMatrix<f64>,
    perron: usize,
}

fn reversible_spectrum(chain: &ChainModel) -> Result<ReversibleSpectrum> {
    let (rev, witness) = chain.check_reversibility();
    if !rev {
        let (i, j, imbalance) = witness.unwrap();
        return Err(Error::NotReversible { i, j, imbalance });
    }
    let support = chain.support();
    let m = support.len();
    let mut s = DMatrix::zeros(m, m);
    for (r, &i) in support.iter().enumerate() {
        for (c, &j) in support.iter().enumerate() {
            let val = (chain.mu(i) / chain.mu(j)).sqrt() * chain.p(i, j);
            s[(r, c)] = val;
        }
    }
    // enforce exact symmetry before the symmetric eigensolver
    for r in 0..m {
        for c in (r + 1)..m {
            let avg = 0.5 * (s[(r, c)] + s[(c, r)]);
            s[(r, c)] = avg;
            s[(c, r)] = avg;
        }
    }
    let eig = s.symmetric_eigen();
    let eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let u = eig.eigenvectors;
    let sqrt_mu: Vec<f64> = support.iter().map(|&i| chain.mu(i).sqrt()).collect();
    let mut perron = 0;
    let mut best = -1.0;
    for e in 0..m {
        let overlap: f64 = (0..m).map(|r| sqrt_mu[r] * u[(r, e)]).sum::<f64>().abs();
        if overlap > best {
            best = overlap;
            perron = e;
        }
    }
    Ok(ReversibleSpectrum {
        support,
        eigenvalues,
        u,
        perron,
    })
}

impl ReversibleSpectrum {
    /// Coefficient of g on each eigenvector: a_e = sum_i sqrt(mu_i) g(i) u_e(i).
    fn coefficients(&self, chain: &ChainModel, g: &ScoreFunction) -> Vec<f64> {
        let m = self.support.len();
        (0..m)
            .map(|e| {
                self.support
                    .iter()
                    .enumerate()
                    .map(|(r, &i)| chain.mu(i).sqrt() * g.values[i] * self.u[(r, e)])
                    .sum()
            })
            .collect()
    }

    /// Largest |eigenvalue| outside the top Perron vector carried by a
    /// coefficient above threshold.
    fn rate_from_coefficients(&self, coeffs: &[f64]) -> f64 {
        let mut rate = 0.0f64;
        for e in 0..self.eigenvalues.len() {
            if e == self.perron {
                continue;
            }
            if coeffs[e].abs() > COMPONENT_TOL {
                rate = rate.max(self.eigenvalues[e].abs());
            }
        }
        rate.min(1.0)
    }
}

/// r(g) for a mean-zero unit-ball score on a reversible chain: the largest
/// |eigenvalue| whose eigencomponent of g is nonzero, excluding the Perron
/// direction. This closed form is the limit of the doubling roots
/// c_n^{1/2^n}; the expansion c_n = sum a_e^2 lambda_e^{2^n} <= r^{2^n}
/// also gives the finite-n bound root_n <= r, which is asserted against the
/// actually computed doubling roots.
pub fn score_rate(chain: &ChainModel, g: &ScoreFunction) -> Result<f64> {
    let spectrum = reversible_spectrum(chain)?;
    let coeffs = spectrum.coefficients(chain, g);
    let rate = spectrum.rate_from_coefficients(&coeffs);
    let diag = doubling_diagnostics(chain, g, 6)?;
    for (w, &root) in diag.roots.iter().enumerate() {
        // correlations below the roundoff floor carry no rate information
        if diag.correlations[w] <= 1e-12 {
            continue;
        }
        assert!(
            root <= rate + 1e-8,
            "doubling root {root} exceeds spectral rate {rate}"
        );
    }
    Ok(rate)
}

/// r of the centered indicator of a subset.
pub fn subset_rate(chain: &ChainModel, subset: &[usize]) -> Result<f64> {
    score_rate(chain, &ScoreFunction::centered_indicator(chain, subset))
}

/// R(D) = max over nonempty A contained in D of r(I_A - mu(A)), by
/// Gray-code enumeration of the 2^|D| - 1 subsets with incremental
/// coefficient updates. |D| is capped at 20.
pub fn max_subset_rate(chain: &ChainModel, d: &[usize]) -> Result<f64> {
    if d.len() > SUBSET_MAX_STATES {
        return Err(Error::SubsetTooLarge {
            size: d.len(),
            max: SUBSET_MAX_STATES,
        });
    }
    let spectrum = reversible_spectrum(chain)?;
    let m = spectrum.support.len();
    if d.is_empty() {
        return Ok(0.0);
    }
    // per-state coefficient increments: adding state i to A changes a_e by
    // sqrt(mu_i) u_e(i) - mu_i * sum_j sqrt(mu_j) u_e(j)
    let mut delta = vec![vec![0.0f64; m]; d.len()];
    for e in 0..m {
        let total: f64 = spectrum
            .support
            .iter()
            .enumerate()
            .map(|(r, &j)| chain.mu(j).sqrt() * spectrum.u[(r, e)])
            .sum();
        for (pos, &i) in d.iter().enumerate() {
            let own = spectrum
                .support
                .iter()
                .position(|&s| s == i)
                .map(|r| chain.mu(i).sqrt() * spectrum.u[(r, e)])
                .unwrap_or(0.0);
            delta[pos][e] = own - chain.mu(i) * total;
        }
    }
    let mut coeffs = vec![0.0f64; m];
    let mut best = 0.0f64;
    let mut prev_gray = 0u64;
    for idx in 1..(1u64 << d.len()) {
        let gray = idx ^ (idx >> 1);
        let flipped = (gray ^ prev_gray).trailing_zeros() as usize;
        prev_gray = gray;
        let sign = if gray >> flipped & 1 == 1 { 1.0 } else { -1.0 };
        for e in 0..m {
            coeffs[e] += sign * delta[flipped][e];
        }
        best = best.max(spectrum.rate_from_coefficients(&coeffs));
    }
    Ok(best)
}

/// Eigen summary of a chain. On reversible chains the eigenvalues (sorted
/// descending) come from the symmetrized matrix on the support, the
/// second-largest eigenvalue modulus from the non-Perron spectrum, and
/// agreement with rho(1) is asserted. On non-reversible chains the
/// eigenvalue fields are absent and the modulus is taken directly as
/// rho(1), the top singular value of the centered kernel.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralReport {
    pub reversible: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eigenvalues: Option<Vec<f64>>,
    /// Second-largest eigenvalue modulus (reversible) or rho(1) otherwise.
    pub slem: f64,
    /// 1 - slem.
    pub gap: f64,
    pub rho_1: f64,
}

pub fn slem_and_gap(chain: &ChainModel) -> SpectralReport {
    let rho_1 = crate::mixing::rho_coefficient(&chain.joint_at_lag(1));
    match reversible_spectrum(chain) {
        Ok(spectrum) => {
            let mut slem = 0.0f64;
            for e in 0..spectrum.eigenvalues.len() {
                if e != spectrum.perron {
                    slem = slem.max(spectrum.eigenvalues[e].abs());
                }
            }
            slem = slem.min(1.0);
            assert!(
                (slem - rho_1).abs() <= 1e-9,
                "eigen and singular-value routes disagree: {slem} vs {rho_1}"
            );
            let mut eigenvalues = spectrum.eigenvalues.clone();
            eigenvalues.sort_by(|a, b| b.partial_cmp(a).unwrap());
            SpectralReport {
                reversible: true,
                eigenvalues: Some(eigenvalues),
                slem,
                gap: 1.0 - slem,
                rho_1,
            }
        }
        Err(_) => SpectralReport {
            reversible: false,
            eigenvalues: None,
            slem: rho_1,
            gap: 1.0 - rho_1,
            rho_1,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators;

    fn two_state(p: f64) -> ChainModel {
        ChainModel::validate(None, vec![vec![1.0 - p, p], vec![p, 1.0 - p]], None).unwrap()
    }

    fn three_cycle() -> ChainModel {
        ChainModel::validate(
            None,
            vec![
                vec![0.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0],
                vec![1.0, 0.0, 0.0],
            ],
            None,
        )
        .unwrap()
    }

    #[test]
    fn centered_indicator_is_mean_zero_unit_ball() {
        let chain = generators::make_random_reversible(6, 1);
        let g = ScoreFunction::centered_indicator(&chain, &[0, 2, 5]);
        assert!(g.mean(&chain).abs() < 1e-14);
        assert!(g.norm(&chain) <= 0.5 + 1e-14);
    }

    #[test]
    fn two_state_eigenvalues_and_gap() {
        let report = slem_and_gap(&two_state(0.25));
        assert!(report.reversible);
        let eig = report.eigenvalues.unwrap();
        assert!((eig[0] - 1.0).abs() < 1e-12);
        assert!((eig[1] - 0.5).abs() < 1e-12);
        assert!((report.slem - 0.5).abs() < 1e-12);
        assert!((report.gap - 0.5).abs() < 1e-12);
    }

    #[test]
    fn non_reversible_chain_has_no_eigen_fields() {
        let report = slem_and_gap(&generators::make_four_state_counterexample());
        assert!(!report.reversible);
        assert!(report.eigenvalues.is_none());
        assert!((report.slem - 1.0).abs() < 1e-12);
        assert!(report.gap.abs() < 1e-12);
    }

    #[test]
    fn three_cycle_negative_even_lag_correlation() {
        // without reversibility, even-lag autocorrelations can go negative
        let chain = three_cycle();
        let g = ScoreFunction::centered_indicator(&chain, &[0]);
        let diag = doubling_diagnostics(&chain, &g, 2).unwrap();
        assert!(!diag.reversible);
        // lag 2: E[g(X_0) g(X_2)] = -1/9
        assert!((diag.correlations[1] - (-1.0 / 9.0)).abs() < 1e-12);
    }

    #[test]
    fn reversible_doubling_roots_nondecreasing() {
        for seed in 0..10u64 {
            let chain = generators::make_random_reversible(5, seed);
            let g = ScoreFunction::centered_indicator(&chain, &[0, 3]);
            let diag = doubling_diagnostics(&chain, &g, 8).unwrap();
            for w in 1..diag.roots.len() {
                if diag.correlations[w] > 1e-12 && diag.correlations[w - 1] > 1e-12 {
                    assert!(diag.roots[w] >= diag.roots[w - 1] - 1e-9);
                }
            }
        }
    }

    #[test]
    fn rejects_score_outside_unit_ball() {
        let chain = two_state(0.25);
        let g = ScoreFunction::new(vec![2.0, -2.0]);
        assert!(matches!(
            doubling_diagnostics(&chain, &g, 3),
            Err(Error::ScoreOutOfUnitBall { .. })
        ));
    }

    #[test]
    fn conditional_mean_identity_on_reversible_chain() {
        let chain = generators::make_random_reversible(5, 3);
        let g = ScoreFunction::centered_indicator(&chain, &[1, 4]);
        for n in [1u64, 2, 4] {
            let (c2n, norm_sq) = conditional_mean_check(&chain, &g, n).unwrap();
            assert!((c2n - norm_sq).abs() < 1e-13, "n={n}");
            assert!(c2n >= -1e-13);
        }
    }

    #[test]
    fn conditional_mean_check_gated_on_reversibility() {
        let chain = generators::make_four_state_counterexample();
        let g = ScoreFunction::centered_indicator(&chain, &[0]);
        assert!(matches!(
            conditional_mean_check(&chain, &g, 1),
            Err(Error::NotReversible { .. })
        ));
    }

    #[test]
    fn two_state_subset_rate_is_slem() {
        let chain = two_state(0.25);
        assert!((subset_rate(&chain, &[0]).unwrap() - 0.5).abs() < 1e-12);
        // the full space gives the zero score, hence rate 0
        assert!(subset_rate(&chain, &[0, 1]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn score_rate_rejects_non_reversible() {
        let chain = generators::make_four_state_counterexample();
        let g = ScoreFunction::centered_indicator(&chain, &[0]);
        assert!(matches!(
            score_rate(&chain, &g),
            Err(Error::NotReversible { .. })
        ));
    }

    #[test]
    fn max_subset_rate_matches_direct_enumeration() {
        let chain = generators::make_random_reversible(5, 17);
        let d = [0usize, 1, 2, 3, 4];
        let fast = max_subset_rate(&chain, &d).unwrap();
        let mut slow = 0.0f64;
        for mask in 1u32..(1 << d.len()) {
            let subset: Vec<usize> = d.iter().copied().filter(|&i| mask >> i & 1 == 1).collect();
            slow = slow.max(subset_rate(&chain, &subset).unwrap());
        }
        assert!((fast - slow).abs() < 1e-12);
    }

    #[test]
    fn max_subset_rate_monotone_in_inclusion() {
        let chain = generators::make_random_reversible(6, 8);
        let small = max_subset_rate(&chain, &[0, 2]).unwrap();
        let large = max_subset_rate(&chain, &[0, 1, 2, 3]).unwrap();
        assert!(small <= large + 1e-12);
    }

    #[test]
    fn full_space_rate_below_one_and_bounds_deviations() {
        for seed in 0..5u64 {
            let chain = generators::make_random_reversible(5, seed);
            let all: Vec<usize> = (0..5).collect();
            let r = max_subset_rate(&chain, &all).unwrap();
            assert!(r < 1.0 - 1e-9, "seed {seed}");
            // |J_{2^n}(A x B) - mu(A) mu(B)| <= r^{2^n} for all subsets
            for n in 0..4u32 {
                let lag = 1u64 << n;
                let joint = chain.joint_at_lag(lag);
                let bound = r.powi(lag as i32) + 1e-12;
                for a in 1u64..(1 << 5) {
                    for b in 1u64..(1 << 5) {
                        assert!(
                            joint.deviation(a, b).abs() <= bound,
                            "seed {seed} lag {lag} a={a} b={b}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn subset_rate_rejects_oversized_domain() {
        let chain = generators::make_random_reversible(4, 0);
        let d: Vec<usize> = (0..21).map(|i| i % 4).collect();
        assert!(matches!(
            max_subset_rate(&chain, &d),
            Err(Error::SubsetTooLarge { .. })
        ));
    }

    #[test]
    fn doubling_roots_bounded_by_spectral_rate() {
        for seed in 0..10u64 {
            let chain = generators::make_random_reversible(4, seed);
            let g = ScoreFunction::centered_indicator(&chain, &[0, 2]);
            // score_rate internally asserts root_n <= rate + 1e-8
            let r = score_rate(&chain, &g).unwrap();
            assert!((0.0..1.0).contains(&r));
        }
    }
}
