//! Chain constructors (named families, seeded random families), path
//! simulation under the stationary start, and empirical re-estimation of a
//! chain from a simulated path.

use serde::{Deserialize, Serialize};

use crate::chain::ChainModel;
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Declarative description of a chain to construct, as accepted on the
/// command line or in config files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// A simulated trajectory, with the chain's state labels for serialization.
#[derive(Debug, Clone)]
pub struct PathSample {
    pub states: Vec<usize>,
    pub labels: Vec<String>,
}

/// The 4-state chain with transition probabilities of 1/2 on the arcs
/// (1,1),(1,2),(2,3),(2,4),(3,1),(3,2),(4,3),(4,4) in 1-based labels.
/// Uniform stationary distribution; not reversible; the lag-2 joint law is
/// exactly the product measure.
pub fn make_four_state_counterexample() -> ChainModel {
    let h = 0.5;
    let transition = vec![
        vec![h, h, 0.0, 0.0],
        vec![0.0, 0.0, h, h],
        vec![h, h, 0.0, 0.0],
        vec![0.0, 0.0, h, h],
    ];
    ChainModel::validate(None, transition, Some(vec![0.25; 4])).unwrap()
}

/// Random reversible chain from a symmetric positive weight matrix W:
/// p(i,j) = W(i,j) / W(i,.), mu_i = W(i,.) / W(.,.). Detailed balance holds
/// by construction: mu_i p(i,j) = W(i,j) / W(.,.) is symmetric.
pub fn make_random_reversible(k: usize, seed: u64) -> ChainModel {
    make_random_reversible_with_bias(k, seed, 0.0)
}

/// Like `make_random_reversible`, with the diagonal weights boosted by
/// `self_loop_bias` to shift mass onto self-loops (larger bias, faster
/// mixing).
pub fn make_random_reversible_with_bias(k: usize, seed: u64, self_loop_bias: f64) -> ChainModel {
    assert!(k >= 1);
    assert!(self_loop_bias >= 0.0);
    let mut rng = SplitMix64::new(seed);
    let mut w = vec![vec![0.0f64; k]; k];
    for i in 0..k {
        for j in i..k {
            // bounded away from zero so every entry is positive
            let v = 0.05 + rng.next_f64() + if i == j { self_loop_bias } else { 0.0 };
            w[i][j] = v;
            w[j][i] = v;
        }
    }
    let row_sums: Vec<f64> = w.iter().map(|row| row.iter().sum()).collect();
    let total: f64 = row_sums.iter().sum();
    let mut transition = vec![vec![0.0f64; k]; k];
    for i in 0..k {
        for j in 0..k {
            transition[i][j] = w[i][j] / row_sums[i];
        }
        // re-normalize exactly so row sums are 1 to machine precision
        let s: f64 = transition[i].iter().sum();
        for j in 0..k {
            transition[i][j] /= s;
        }
    }
    let stationary: Vec<f64> = row_sums.iter().map(|&r| r / total).collect();
    ChainModel::validate(None, transition, Some(stationary)).unwrap()
}

/// Random row-stochastic chain with strictly positive entries; the
/// stationary vector is computed by linear solve.
pub fn make_random_stochastic(k: usize, seed: u64) -> ChainModel {
    assert!(k >= 1);
    let mut rng = SplitMix64::new(seed);
    let mut transition = vec![vec![0.0f64; k]; k];
    for row in transition.iter_mut() {
        let mut sum = 0.0;
        for entry in row.iter_mut() {
            *entry = 0.05 + rng.next_f64();
            sum += *entry;
        }
        for entry in row.iter_mut() {
            *entry /= sum;
        }
    }
    ChainModel::validate(None, transition, None).unwrap()
}

/// Named chain families. `kind` is one of: `two-state` (needs p), `cycle`
/// (needs states), `identity` (needs states), `iid` (needs states),
/// `random-stochastic` / `random-reversible` (need states and seed),
/// `birth-death` (needs states and p; reflecting tridiagonal walk).
pub fn make_named(spec: &GeneratorSpec) -> Result<ChainModel> {
    let need_states = || {
        spec.states
            .filter(|&k| k >= 1)
            .ok_or_else(|| Error::BadParameter(format!("`{}` requires states >= 1", spec.kind)))
    };
    let need_p = || {
        spec.p
            .filter(|p| (0.0..=1.0).contains(p))
            .ok_or_else(|| Error::BadParameter(format!("`{}` requires p in [0, 1]", spec.kind)))
    };
    match spec.kind.as_str() {
        "example-4state" => Ok(make_four_state_counterexample()),
        "two-state" => {
            let p = need_p()?;
            ChainModel::validate(
                None,
                vec![vec![1.0 - p, p], vec![p, 1.0 - p]],
                Some(vec![0.5, 0.5]),
            )
        }
        "cycle" | "k-cycle" => {
            let k = need_states()?;
            if k < 2 {
                return Err(Error::BadParameter("cycle requires states >= 2".into()));
            }
            let mut t = vec![vec![0.0f64; k]; k];
            for (i, row) in t.iter_mut().enumerate() {
                row[(i + 1) % k] = 1.0;
            }
            ChainModel::validate(None, t, Some(vec![1.0 / k as f64; k]))
        }
        "identity" => {
            let k = need_states()?;
            let mut t = vec![vec![0.0f64; k]; k];
            for (i, row) in t.iter_mut().enumerate() {
                row[i] = 1.0;
            }
            ChainModel::validate(None, t, Some(vec![1.0 / k as f64; k]))
        }
        "iid" => {
            let k = need_states()?;
            let row = vec![1.0 / k as f64; k];
            ChainModel::validate(None, vec![row; k], None)
        }
        "random-stochastic" => {
            let k = need_states()?;
            Ok(make_random_stochastic(k, spec.seed.unwrap_or(0)))
        }
        "random-reversible" => {
            let k = need_states()?;
            Ok(make_random_reversible(k, spec.seed.unwrap_or(0)))
        }
        "birth-death" => {
            let k = need_states()?;
            let p = need_p()?;
            if k < 2 {
                return Err(Error::BadParameter(
                    "birth-death requires states >= 2".into(),
                ));
            }
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::BadParameter(
                    "birth-death requires p strictly inside (0, 1)".into(),
                ));
            }
            // reflecting tridiagonal walk: up with prob p, down with prob
            // 1-p, excess mass at the boundaries stays put
            let q = 1.0 - p;
            let mut t = vec![vec![0.0f64; k]; k];
            t[0][0] = q;
            t[0][1] = p;
            t[k - 1][k - 1] = p;
            t[k - 1][k - 2] = q;
            for i in 1..k - 1 {
                t[i][i - 1] = q;
                t[i][i + 1] = p;
            }
            ChainModel::validate(None, t, None)
        }
        other => Err(Error::BadParameter(format!("unknown chain kind `{other}`"))),
    }
}

/// Simulates a stationary path of length T: X_0 ~ mu, then transitions by
/// inverse-CDF draws from the relevant row.
pub fn simulate_path(chain: &ChainModel, length: usize, seed: u64) -> Result<PathSample> {
    if length == 0 {
        return Err(Error::EmptyPath);
    }
    let k = chain.len();
    let mut rng = SplitMix64::new(seed);
    let mu: Vec<f64> = chain.stationary().iter().copied().collect();
    let rows: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| chain.p(i, j)).collect())
        .collect();
    let mut states = Vec::with_capacity(length);
    let mut current = rng.next_categorical(&mu);
    states.push(current);
    for _ in 1..length {
        current = rng.next_categorical(&rows[current]);
        states.push(current);
    }
    Ok(PathSample {
        states,
        labels: chain.states().to_vec(),
    })
}

impl PathSample {
    /// Newline-delimited state labels.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for &s in &self.states {
            out.push_str(&self.labels[s]);
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str, labels: &[String]) -> Result<Self> {
        let mut states = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let idx = labels
                .iter()
                .position(|l| l == line)
                .ok_or_else(|| Error::Parse(format!("unknown state label `{line}`")))?;
            states.push(idx);
        }
        if states.is_empty() {
            return Err(Error::EmptyPath);
        }
        Ok(PathSample {
            states,
            labels: labels.to_vec(),
        })
    }
}

/// Re-estimates a chain from a path by transition counts (no smoothing).
/// States never left from (unvisited, or only seen at the final position) get
/// a self-loop row. The stationarity check is relaxed to 5/sqrt(T) since the
/// empirical occupancy only converges at that rate.
pub fn estimate_chain(path: &PathSample) -> Result<ChainModel> {
    if path.states.is_empty() {
        return Err(Error::EmptyPath);
    }
    let k = path.labels.len();
    let mut counts = vec![vec![0u64; k]; k];
    let mut occupancy = vec![0u64; k];
    for &s in &path.states {
        occupancy[s] += 1;
    }
    for w in path.states.windows(2) {
        counts[w[0]][w[1]] += 1;
    }
    let mut transition = vec![vec![0.0f64; k]; k];
    for i in 0..k {
        let total: u64 = counts[i].iter().sum();
        if total == 0 {
            transition[i][i] = 1.0;
        } else {
            for j in 0..k {
                transition[i][j] = counts[i][j] as f64 / total as f64;
            }
        }
    }
    // Sanity-check the empirical occupation frequencies against the exact
    // stationary distribution of the estimated matrix, then build the model
    // on the exact solution so every downstream joint distribution is
    // internally consistent to machine precision.
    let t = path.states.len() as f64;
    let tol = 5.0 / t.sqrt();
    let model = ChainModel::validate(Some(path.labels.clone()), transition, None)?;
    for i in 0..k {
        let empirical = occupancy[i] as f64 / t;
        if (model.mu(i) - empirical).abs() > tol.max(1e-3) {
            return Err(Error::NotStationary {
                max_dev: (model.mu(i) - empirical).abs(),
            });
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_state_chain_rows() {
        let chain = make_four_state_counterexample();
        assert!((chain.p(0, 1) - 0.5).abs() < 1e-15);
        assert!((chain.p(1, 2) - 0.5).abs() < 1e-15);
        assert!((chain.p(2, 0) - 0.5).abs() < 1e-15);
        assert!((chain.p(3, 3) - 0.5).abs() < 1e-15);
        assert!(chain.p(1, 0).abs() < 1e-15);
    }

    #[test]
    fn random_reversible_satisfies_detailed_balance() {
        for seed in 0..10u64 {
            let chain = make_random_reversible(6, seed);
            let (rev, _) = chain.check_reversibility();
            assert!(rev, "seed {seed}");
        }
    }

    #[test]
    fn random_reversible_is_deterministic_in_seed() {
        let a = make_random_reversible(5, 7);
        let b = make_random_reversible(5, 7);
        assert_eq!(a.transition(), b.transition());
    }

    #[test]
    fn named_two_state() {
        let spec = GeneratorSpec {
            kind: "two-state".into(),
            states: None,
            p: Some(0.25),
            seed: None,
        };
        let chain = make_named(&spec).unwrap();
        assert!((chain.p(0, 1) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn named_cycle_has_period_k() {
        let spec = GeneratorSpec {
            kind: "cycle".into(),
            states: Some(5),
            p: None,
            seed: None,
        };
        let chain = make_named(&spec).unwrap();
        let s = chain.check_structure();
        assert_eq!(s.period, 5);
    }

    #[test]
    fn named_birth_death_is_reversible() {
        let spec = GeneratorSpec {
            kind: "birth-death".into(),
            states: Some(6),
            p: Some(0.3),
            seed: None,
        };
        let chain = make_named(&spec).unwrap();
        assert!(chain.check_reversibility().0);
        let s = chain.check_structure();
        assert!(s.irreducible);
    }

    #[test]
    fn named_rejects_unknown_kind() {
        let spec = GeneratorSpec {
            kind: "bogus".into(),
            states: None,
            p: None,
            seed: None,
        };
        assert!(matches!(make_named(&spec), Err(Error::BadParameter(_))));
    }

    #[test]
    fn named_rejects_bad_p() {
        let spec = GeneratorSpec {
            kind: "two-state".into(),
            states: None,
            p: Some(1.5),
            seed: None,
        };
        assert!(matches!(make_named(&spec), Err(Error::BadParameter(_))));
    }

    #[test]
    fn simulation_is_deterministic_in_seed() {
        let chain = make_four_state_counterexample();
        let a = simulate_path(&chain, 500, 11).unwrap();
        let b = simulate_path(&chain, 500, 11).unwrap();
        assert_eq!(a.states, b.states);
        let c = simulate_path(&chain, 500, 12).unwrap();
        assert_ne!(a.states, c.states);
    }

    #[test]
    fn simulation_respects_support() {
        let chain = make_four_state_counterexample();
        let path = simulate_path(&chain, 2000, 3).unwrap();
        // arc (1,0) has probability zero
        for w in path.states.windows(2) {
            assert!(!(w[0] == 1 && w[1] == 0));
        }
    }

    #[test]
    fn path_round_trips_through_text() {
        let chain = make_four_state_counterexample();
        let path = simulate_path(&chain, 100, 42).unwrap();
        let text = path.to_text();
        let back = PathSample::from_text(&text, chain.states()).unwrap();
        assert_eq!(path.states, back.states);
    }

    #[test]
    fn estimate_recovers_transition_probabilities() {
        let chain = make_four_state_counterexample();
        let path = simulate_path(&chain, 200_000, 9).unwrap();
        let est = estimate_chain(&path).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!(
                    (est.p(i, j) - chain.p(i, j)).abs() < 0.02,
                    "p({i},{j}) est {} true {}",
                    est.p(i, j),
                    chain.p(i, j)
                );
            }
        }
    }

    #[test]
    fn estimate_rejects_empty_path() {
        assert!(matches!(
            simulate_path(&make_four_state_counterexample(), 0, 1),
            Err(Error::EmptyPath)
        ));
    }

    #[test]
    fn estimate_gives_self_loop_to_unvisited_state() {
        let path = PathSample {
            states: vec![0, 1, 0, 1, 0],
            labels: vec!["a".into(), "b".into(), "c".into()],
        };
        let est = estimate_chain(&path).unwrap();
        assert!((est.p(2, 2) - 1.0).abs() < 1e-15);
    }
}
