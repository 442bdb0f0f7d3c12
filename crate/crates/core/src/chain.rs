//! Core representation of finite-state stationary Markov chains: validation,
//! stationary distributions, joint laws at arbitrary lags, and structural
//! analysis (reversibility, irreducibility, periodicity, small sets).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Entry-exactness tolerance for validating user input.
pub const VALIDATION_TOL: f64 = 1e-12;
/// Tolerance for the stationarity equation mu'P = mu'.
pub const STATIONARITY_TOL: f64 = 1e-10;

/// A strictly stationary finite-state Markov chain: the pair (mu, P).
#[derive(Debug, Clone, PartialEq)]
pub struct ChainModel {
    states: Vec<String>,
    transition: DMatrix<f64>,
    stationary: DVector<f64>,
}

/// The law of (X_0, X_n): J(i,j) = mu_i * P^n(i,j), with both marginals mu.
#[derive(Debug, Clone)]
pub struct JointDistribution {
    pub lag: u64,
    pub table: DMatrix<f64>,
    pub marginal: DVector<f64>,
}

/// Structural facts about a chain: support, reversibility, irreducibility,
/// periodicity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StructureReport {
    pub support: Vec<usize>,
    pub reversible: bool,
    /// Pair (i, j) maximizing |mu_i p(i,j) - mu_j p(j,i)|, with that value,
    /// when detailed balance fails.
    pub reversibility_witness: Option<(usize, usize, f64)>,
    pub irreducible: bool,
    pub period: u64,
    pub aperiodic: bool,
}

/// A small set (C, t, n): J_n(i,j) >= t * mu_i * mu_j for all i,j in C.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmallSet {
    pub states: Vec<usize>,
    pub t: f64,
    pub n: u64,
}

/// On-disk chain file: states, transition rows, optional stationary vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainFile {
    pub states: Vec<String>,
    pub transition: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stationary: Option<Vec<f64>>,
}

impl ChainModel {
    /// Validates a raw transition matrix (and optional stationary vector)
    /// into a `ChainModel`. When no stationary vector is supplied, one is
    /// computed by `compute_stationary`.
    pub fn validate(
        labels: Option<Vec<String>>,
        raw_transition: Vec<Vec<f64>>,
        raw_stationary: Option<Vec<f64>>,
    ) -> Result<Self> {
        Self::validate_with_tolerance(labels, raw_transition, raw_stationary, STATIONARITY_TOL)
    }

    /// Like `validate`, with a caller-chosen stationarity tolerance. Used by
    /// the empirical estimator, where the tolerance is relaxed to 5/sqrt(T).
    pub fn validate_with_tolerance(
        labels: Option<Vec<String>>,
        raw_transition: Vec<Vec<f64>>,
        raw_stationary: Option<Vec<f64>>,
        stationarity_tol: f64,
    ) -> Result<Self> {
        let k = raw_transition.len();
        if k == 0 {
            return Err(Error::EmptyStateSpace);
        }
        for row in &raw_transition {
            if row.len() != k {
                return Err(Error::NotSquare {
                    rows: k,
                    cols: row.len(),
                });
            }
        }
        let states = match labels {
            Some(s) => {
                if s.len() != k {
                    return Err(Error::BadParameter(format!(
                        "{} labels for {} states",
                        s.len(),
                        k
                    )));
                }
                s
            }
            None => (0..k).map(|i| i.to_string()).collect(),
        };
        for (idx, s) in states.iter().enumerate() {
            if states[..idx].contains(s) {
                return Err(Error::DuplicateState(s.clone()));
            }
        }
        let mut transition = DMatrix::zeros(k, k);
        for (i, row) in raw_transition.iter().enumerate() {
            let mut sum = 0.0;
            for (j, &p) in row.iter().enumerate() {
                if p < 0.0 {
                    return Err(Error::NegativeEntry { i, j, value: p });
                }
                transition[(i, j)] = p;
                sum += p;
            }
            if (sum - 1.0).abs() > VALIDATION_TOL {
                return Err(Error::RowSumViolation { row: i, sum });
            }
        }
        let stationary = match raw_stationary {
            Some(mu) => {
                if mu.len() != k {
                    return Err(Error::BadParameter(format!(
                        "stationary vector has length {}, expected {}",
                        mu.len(),
                        k
                    )));
                }
                let mut sum = 0.0;
                for (i, &m) in mu.iter().enumerate() {
                    if m < 0.0 {
                        return Err(Error::NegativeEntry { i, j: i, value: m });
                    }
                    sum += m;
                }
                if (sum - 1.0).abs() > VALIDATION_TOL {
                    return Err(Error::RowSumViolation { row: k, sum });
                }
                let mu = DVector::from_vec(mu);
                let residual = &transition.transpose() * &mu - &mu;
                let max_dev = residual.amax();
                if max_dev > stationarity_tol {
                    return Err(Error::NotStationary { max_dev });
                }
                mu
            }
            None => compute_stationary(&transition)?,
        };
        Ok(ChainModel {
            states,
            transition,
            stationary,
        })
    }

    pub fn from_file(file: ChainFile) -> Result<Self> {
        Self::validate(Some(file.states), file.transition, file.stationary)
    }

    pub fn to_file(&self) -> ChainFile {
        let k = self.len();
        ChainFile {
            states: self.states.clone(),
            transition: (0..k)
                .map(|i| (0..k).map(|j| self.transition[(i, j)]).collect())
                .collect(),
            stationary: Some(self.stationary.iter().copied().collect()),
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }

    pub fn stationary(&self) -> &DVector<f64> {
        &self.stationary
    }

    pub fn p(&self, i: usize, j: usize) -> f64 {
        self.transition[(i, j)]
    }

    pub fn mu(&self, i: usize) -> f64 {
        self.stationary[i]
    }

    /// States with positive stationary mass.
    pub fn support(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.stationary[i] > 0.0).collect()
    }

    /// The joint law of (X_0, X_n) as J = diag(mu) * P^n.
    pub fn joint_at_lag(&self, n: u64) -> JointDistribution {
        let mut cache = PowerCache::new(self.transition.clone());
        self.joint_at_lag_cached(n, &mut cache)
    }

    pub fn joint_at_lag_cached(&self, n: u64, cache: &mut PowerCache) -> JointDistribution {
        assert!(n >= 1, "lag must be positive");
        let pn = cache.power(n);
        let k = self.len();
        let mut table = pn;
        for i in 0..k {
            for j in 0..k {
                table[(i, j)] *= self.stationary[i];
            }
        }
        JointDistribution {
            lag: n,
            table,
            marginal: self.stationary.clone(),
        }
    }

    /// Detailed-balance check. Returns (reversible, witness): the witness is
    /// the pair maximizing |mu_i p(i,j) - mu_j p(j,i)| when the check fails.
    pub fn check_reversibility(&self) -> (bool, Option<(usize, usize, f64)>) {
        let k = self.len();
        let mut worst = (0usize, 0usize, 0.0f64);
        for i in 0..k {
            for j in (i + 1)..k {
                let d = (self.stationary[i] * self.transition[(i, j)]
                    - self.stationary[j] * self.transition[(j, i)])
                    .abs();
                if d > worst.2 {
                    worst = (i, j, d);
                }
            }
        }
        if worst.2 <= VALIDATION_TOL {
            (true, None)
        } else {
            (false, Some(worst))
        }
    }

    /// Full structural report: support, reversibility, irreducibility on the
    /// support digraph, and its period.
    pub fn check_structure(&self) -> StructureReport {
        let support = self.support();
        let (reversible, reversibility_witness) = self.check_reversibility();
        let sccs = strongly_connected_components(&self.transition, &support);
        let irreducible = sccs.len() == 1 && sccs[0].len() == support.len();
        let mut period = 0u64;
        for scc in &sccs {
            if let Some(p) = scc_period(&self.transition, scc) {
                period = gcd(period, p);
            }
        }
        if period == 0 {
            period = 1;
        }
        StructureReport {
            support,
            reversible,
            reversibility_witness,
            irreducible,
            period,
            aperiodic: period == 1,
        }
    }

    /// Searches for a small set (C, t, n): the largest support subset C with
    /// J_n(i,j) >= t * mu_i * mu_j > 0 on C x C for some n <= max_n, greedily
    /// shrinking C by removing the state involved in the most zero-mass pairs.
    /// When no multi-lag candidate exists within max_n, falls back to a
    /// singleton {i} at the first lag n <= max(2k, max_n) with J_n(i,i) > 0.
    pub fn find_small_set(&self, max_n: u64) -> Option<SmallSet> {
        let support = self.support();
        if support.is_empty() {
            return None;
        }
        let mut cache = PowerCache::new(self.transition.clone());
        let mut best: Option<SmallSet> = None;
        for n in 1..=max_n {
            let joint = self.joint_at_lag_cached(n, &mut cache);
            let mut c: Vec<usize> = support.clone();
            loop {
                if c.is_empty() {
                    break;
                }
                // count zero-ratio pairs per member
                let mut zero_counts = vec![0usize; c.len()];
                for (a, &i) in c.iter().enumerate() {
                    for (b, &j) in c.iter().enumerate() {
                        if joint.table[(i, j)] <= 0.0 {
                            zero_counts[a] += 1;
                            if a != b {
                                zero_counts[b] += 1;
                            }
                        }
                    }
                }
                if zero_counts.iter().all(|&z| z == 0) {
                    break;
                }
                let worst = zero_counts
                    .iter()
                    .enumerate()
                    .max_by_key(|&(idx, &z)| (z, std::cmp::Reverse(idx)))
                    .map(|(idx, _)| idx)
                    .unwrap();
                c.remove(worst);
            }
            if c.is_empty() {
                continue;
            }
            let mut t = f64::INFINITY;
            for &i in &c {
                for &j in &c {
                    t = t.min(joint.table[(i, j)] / (self.stationary[i] * self.stationary[j]));
                }
            }
            if !(t > 0.0) {
                continue;
            }
            let cand = SmallSet { states: c, t, n };
            let better = match &best {
                None => true,
                Some(b) => {
                    cand.states.len() > b.states.len()
                        || (cand.states.len() == b.states.len() && cand.t > b.t)
                }
            };
            if better {
                best = Some(cand);
            }
        }
        if best.is_some() {
            return best;
        }
        // singleton fallback: first support state with a positive return
        // probability at some lag
        let bound = max_n.max(2 * self.len() as u64);
        for n in 1..=bound {
            let joint = self.joint_at_lag_cached(n, &mut cache);
            for &i in &support {
                let t = joint.table[(i, i)] / (self.stationary[i] * self.stationary[i]);
                if t > 0.0 {
                    return Some(SmallSet {
                        states: vec![i],
                        t,
                        n,
                    });
                }
            }
        }
        None
    }
}

impl JointDistribution {
    /// Checks non-negativity, total mass 1, and that both marginals equal mu.
    pub fn check_invariants(&self) -> Result<()> {
        let k = self.marginal.len();
        let mut total = 0.0;
        for i in 0..k {
            let mut row = 0.0;
            let mut col = 0.0;
            for j in 0..k {
                if self.table[(i, j)] < -VALIDATION_TOL {
                    return Err(Error::NegativeEntry {
                        i,
                        j,
                        value: self.table[(i, j)],
                    });
                }
                row += self.table[(i, j)];
                col += self.table[(j, i)];
            }
            total += row;
            if (row - self.marginal[i]).abs() > STATIONARITY_TOL
                || (col - self.marginal[i]).abs() > STATIONARITY_TOL
            {
                return Err(Error::NotStationary {
                    max_dev: (row - self.marginal[i]).abs().max((col - self.marginal[i]).abs()),
                });
            }
        }
        if (total - 1.0).abs() > VALIDATION_TOL {
            return Err(Error::RowSumViolation { row: k, sum: total });
        }
        Ok(())
    }

    /// J(A x B) - mu(A) mu(B) for index subsets given as bitmasks.
    pub fn deviation(&self, a_mask: u64, b_mask: u64) -> f64 {
        let k = self.marginal.len();
        let mut jab = 0.0;
        let mut mua = 0.0;
        let mut mub = 0.0;
        for i in 0..k {
            if a_mask >> i & 1 == 1 {
                mua += self.marginal[i];
                for j in 0..k {
                    if b_mask >> j & 1 == 1 {
                        jab += self.table[(i, j)];
                    }
                }
            }
            if b_mask >> i & 1 == 1 {
                mub += self.marginal[i];
            }
        }
        jab - mua * mub
    }
}

/// Computes the stationary distribution of a row-stochastic matrix by direct
/// linear solve. Reducible chains get the uniform convex mixture of the
/// per-recurrent-class stationary vectors, a deterministic canonical choice.
pub fn compute_stationary(transition: &DMatrix<f64>) -> Result<DVector<f64>> {
    let k = transition.nrows();
    let all: Vec<usize> = (0..k).collect();
    let sccs = strongly_connected_components(transition, &all);
    // recurrent classes: no edge leaves the class
    let mut class_of = vec![usize::MAX; k];
    for (ci, scc) in sccs.iter().enumerate() {
        for &s in scc {
            class_of[s] = ci;
        }
    }
    let mut recurrent: Vec<&Vec<usize>> = Vec::new();
    'class_loop: for scc in &sccs {
        for &i in scc {
            for j in 0..k {
                if transition[(i, j)] > 0.0 && class_of[j] != class_of[i] {
                    continue 'class_loop;
                }
            }
        }
        recurrent.push(scc);
    }
    if recurrent.is_empty() {
        return Err(Error::BadParameter(
            "no recurrent class found".to_string(),
        ));
    }
    let mut mu = DVector::zeros(k);
    let weight = 1.0 / recurrent.len() as f64;
    for class in recurrent {
        let m = class.len();
        // solve mu' P_c = mu' with sum = 1 on the restricted matrix
        let mut a = DMatrix::zeros(m, m);
        for (r, &i) in class.iter().enumerate() {
            for (c, &j) in class.iter().enumerate() {
                a[(r, c)] = transition[(j, i)];
            }
            a[(r, r)] -= 1.0;
        }
        for c in 0..m {
            a[(m - 1, c)] = 1.0;
        }
        let mut b = DVector::zeros(m);
        b[m - 1] = 1.0;
        let sol = a
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::BadParameter("singular stationary system".to_string()))?;
        for (r, &i) in class.iter().enumerate() {
            // clip tiny negative round-off
            mu[i] = weight * sol[r].max(0.0);
        }
    }
    let total: f64 = mu.iter().sum();
    mu /= total;
    Ok(mu)
}

/// Matrix powers by repeated squaring, caching the binary powers P^(2^i).
/// Doubling lags 2^n are the natural clock for the rate conditions, so the
/// cache pays off across a profile computation.
pub struct PowerCache {
    binary: Vec<DMatrix<f64>>,
}

impl PowerCache {
    pub fn new(base: DMatrix<f64>) -> Self {
        PowerCache { binary: vec![base] }
    }

    fn binary_power(&mut self, i: usize) -> &DMatrix<f64> {
        while self.binary.len() <= i {
            let last = self.binary.last().unwrap();
            let next = last * last;
            self.binary.push(next);
        }
        &self.binary[i]
    }

    /// P^n via the binary expansion of n. Requires n >= 1.
    pub fn power(&mut self, n: u64) -> DMatrix<f64> {
        assert!(n >= 1);
        let mut result: Option<DMatrix<f64>> = None;
        for i in 0..64 {
            if n >> i & 1 == 1 {
                let p = self.binary_power(i).clone();
                result = Some(match result {
                    None => p,
                    Some(acc) => acc * p,
                });
            }
        }
        result.unwrap()
    }
}

/// Plain iterated product, kept as an independent route for cross-checking
/// the repeated-squaring cache.
pub fn naive_power(base: &DMatrix<f64>, n: u64) -> DMatrix<f64> {
    assert!(n >= 1);
    let mut acc = base.clone();
    for _ in 1..n {
        acc = &acc * base;
    }
    acc
}

/// Tarjan's algorithm (iterative) restricted to the given vertex set, with
/// edges where p(i,j) > 0.
pub fn strongly_connected_components(
    transition: &DMatrix<f64>,
    vertices: &[usize],
) -> Vec<Vec<usize>> {
    let k = transition.nrows();
    let mut in_set = vec![false; k];
    for &v in vertices {
        in_set[v] = true;
    }
    let mut index = vec![usize::MAX; k];
    let mut lowlink = vec![usize::MAX; k];
    let mut on_stack = vec![false; k];
    let mut stack: Vec<usize> = Vec::new();
    let mut next_index = 0usize;
    let mut components: Vec<Vec<usize>> = Vec::new();

    for &root in vertices {
        if index[root] != usize::MAX {
            continue;
        }
        // explicit DFS stack: (vertex, next neighbor to try)
        let mut dfs: Vec<(usize, usize)> = vec![(root, 0)];
        while let Some(&mut (v, ref mut next)) = dfs.last_mut() {
            if *next == 0 {
                index[v] = next_index;
                lowlink[v] = next_index;
                next_index += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            let mut advanced = false;
            while *next < k {
                let w = *next;
                *next += 1;
                if !in_set[w] || transition[(v, w)] <= 0.0 || w == v {
                    continue;
                }
                if index[w] == usize::MAX {
                    dfs.push((w, 0));
                    advanced = true;
                    break;
                } else if on_stack[w] {
                    lowlink[v] = lowlink[v].min(index[w]);
                }
            }
            if advanced {
                continue;
            }
            // finished v
            dfs.pop();
            if let Some(&(parent, _)) = dfs.last() {
                lowlink[parent] = lowlink[parent].min(lowlink[v]);
            }
            if lowlink[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().unwrap();
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                components.push(comp);
            }
        }
    }
    components
}

/// Period of one strongly connected component: gcd of (level(u)+1-level(v))
/// over internal edges from a BFS levelling. `None` when the component has no
/// internal edge (a transient singleton has no cycle).
fn scc_period(transition: &DMatrix<f64>, scc: &[usize]) -> Option<u64> {
    let k = transition.nrows();
    let mut in_scc = vec![false; k];
    for &v in scc {
        in_scc[v] = true;
    }
    let root = scc[0];
    let mut level = vec![i64::MIN; k];
    level[root] = 0;
    let mut queue = std::collections::VecDeque::from([root]);
    let mut g: u64 = 0;
    let mut has_edge = false;
    while let Some(u) = queue.pop_front() {
        for w in 0..k {
            if !in_scc[w] || transition[(u, w)] <= 0.0 {
                continue;
            }
            has_edge = true;
            if level[w] == i64::MIN {
                level[w] = level[u] + 1;
                queue.push_back(w);
            } else {
                let diff = (level[u] + 1 - level[w]).unsigned_abs();
                g = gcd(g, diff);
            }
        }
    }
    if !has_edge {
        return None;
    }
    Some(if g == 0 { 1 } else { g })
}

pub(crate) fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}
