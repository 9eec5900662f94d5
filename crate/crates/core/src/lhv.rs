//! Local-hidden-variable bound by exhaustive enumeration of deterministic
//! strategies.
//!
//! A strategy's score is always summed in the same order, `Σ_x Σ_y` over the
//! joint block followed by Alice's then Bob's marginal terms. Strategies are
//! visited in lexicographic order of `(assign_a, assign_b)` with setting 0 as
//! the most significant digit.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{uniform_weights, Behavior, BellFunctional, Scenario};

/// Default limit on `d^{2m}`.
pub const DEFAULT_ENUMERATION_CAP: u128 = 100_000_000;

/// Below this many strategies the enumeration runs on the calling thread.
const PARALLEL_THRESHOLD: u128 = 1 << 16;

/// One outcome per setting for each party.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DeterministicStrategy {
    pub assign_a: Vec<usize>,
    pub assign_b: Vec<usize>,
}

impl DeterministicStrategy {
    pub fn new(assign_a: Vec<usize>, assign_b: Vec<usize>) -> Self {
        Self { assign_a, assign_b }
    }

    fn check(&self, sc: Scenario) -> Result<()> {
        sc.check_len("assign_a", self.assign_a.len(), sc.m())?;
        sc.check_len("assign_b", self.assign_b.len(), sc.m())?;
        if self.assign_a.iter().chain(&self.assign_b).any(|&o| o >= sc.d()) {
            return Err(Error::Domain(format!("strategy outcome not below d={}", sc.d())));
        }
        Ok(())
    }

    /// Value of `f` on this strategy.
    pub fn score(&self, f: &BellFunctional) -> f64 {
        score_of(f, &self.assign_a, &self.assign_b)
    }

    /// The vertex `p(ab|xy) = [a = assign_a(x)]·[b = assign_b(y)]`.
    pub fn behavior(&self, sc: Scenario) -> Result<Behavior> {
        self.check(sc)?;
        Ok(Behavior::from_parts(sc, self.joint_table(sc), uniform_weights(sc)))
    }

    /// Indicator table of the strategy over the joint coefficients.
    pub fn joint_table(&self, sc: Scenario) -> Vec<f64> {
        let mut t = vec![0.0; sc.joint_len()];
        for x in 0..sc.m() {
            for y in 0..sc.m() {
                t[sc.joint_index(x, y, self.assign_a[x], self.assign_b[y])] = 1.0;
            }
        }
        t
    }
}

/// Deterministic vertex of the local polytope.
pub fn strategy_behavior(strategy: &DeterministicStrategy, sc: Scenario) -> Result<Behavior> {
    strategy.behavior(sc)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LhvResult {
    pub bound: f64,
    /// Every strategy within the tie tolerance of `bound`, in enumeration order.
    pub maximizers: Vec<DeterministicStrategy>,
}

/// Tie tolerance for the maximizer list.
pub fn tie_tolerance(bound: f64) -> f64 {
    1e-9 * bound.abs().max(1.0)
}

#[inline]
fn score_of(f: &BellFunctional, assign_a: &[usize], assign_b: &[usize]) -> f64 {
    let sc = f.scenario();
    let joint = f.joint();
    let mut total = 0.0;
    for (x, &a) in assign_a.iter().enumerate() {
        for (y, &b) in assign_b.iter().enumerate() {
            total += joint[sc.joint_index(x, y, a, b)];
        }
    }
    let (ma, mb) = (f.marginal_a(), f.marginal_b());
    for (x, &a) in assign_a.iter().enumerate() {
        total += ma[sc.marginal_index(x, a)];
    }
    for (y, &b) in assign_b.iter().enumerate() {
        total += mb[sc.marginal_index(y, b)];
    }
    total
}

/// Writes the base-`d` digits of `index` into `out`, most significant first.
fn decode(mut index: usize, d: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = index % d;
        index /= d;
    }
}

fn strategy_count(sc: Scenario) -> u128 {
    (sc.d() as u128).pow(2 * sc.m() as u32)
}

fn per_party(sc: Scenario) -> usize {
    sc.d().pow(sc.m() as u32)
}

fn check_cap(sc: Scenario, cap: u128) -> Result<()> {
    let n = strategy_count(sc);
    if n > cap {
        return Err(Error::Capacity { strategies: n, cap });
    }
    Ok(())
}

/// Best score and lexicographically first exact argmax among Alice strategy
/// `ia` combined with every Bob strategy.
fn best_for_alice(f: &BellFunctional, ia: usize) -> (f64, usize) {
    let sc = f.scenario();
    let mut a = vec![0; sc.m()];
    let mut b = vec![0; sc.m()];
    decode(ia, sc.d(), &mut a);
    let mut best = (f64::NEG_INFINITY, 0);
    for ib in 0..per_party(sc) {
        decode(ib, sc.d(), &mut b);
        let v = score_of(f, &a, &b);
        if v > best.0 {
            best = (v, ib);
        }
    }
    best
}

fn argmax(f: &BellFunctional) -> (f64, usize, usize) {
    let sc = f.scenario();
    let n = per_party(sc);
    let per_alice: Vec<(f64, usize)> = if strategy_count(sc) >= PARALLEL_THRESHOLD {
        (0..n).into_par_iter().map(|ia| best_for_alice(f, ia)).collect()
    } else {
        (0..n).map(|ia| best_for_alice(f, ia)).collect()
    };
    let mut best = (f64::NEG_INFINITY, 0, 0);
    for (ia, (v, ib)) in per_alice.into_iter().enumerate() {
        if v > best.0 {
            best = (v, ia, ib);
        }
    }
    best
}

fn strategy_from_indices(sc: Scenario, ia: usize, ib: usize) -> DeterministicStrategy {
    let mut a = vec![0; sc.m()];
    let mut b = vec![0; sc.m()];
    decode(ia, sc.d(), &mut a);
    decode(ib, sc.d(), &mut b);
    DeterministicStrategy::new(a, b)
}

/// `C(s)` with the default enumeration cap.
pub fn lhv_bound(f: &BellFunctional) -> Result<LhvResult> {
    lhv_bound_with_cap(f, DEFAULT_ENUMERATION_CAP)
}

pub fn lhv_bound_with_cap(f: &BellFunctional, cap: u128) -> Result<LhvResult> {
    let sc = f.scenario();
    check_cap(sc, cap)?;
    let (bound, _, _) = argmax(f);
    let tol = tie_tolerance(bound);
    let n = per_party(sc);
    let collect_for = |ia: usize| {
        let mut a = vec![0; sc.m()];
        let mut b = vec![0; sc.m()];
        decode(ia, sc.d(), &mut a);
        let mut out = Vec::new();
        for ib in 0..n {
            decode(ib, sc.d(), &mut b);
            if score_of(f, &a, &b) >= bound - tol {
                out.push(DeterministicStrategy::new(a.clone(), b.clone()));
            }
        }
        out
    };
    let maximizers: Vec<DeterministicStrategy> = if strategy_count(sc) >= PARALLEL_THRESHOLD {
        (0..n).into_par_iter().map(collect_for).flatten().collect()
    } else {
        (0..n).flat_map(collect_for).collect()
    };
    Ok(LhvResult { bound, maximizers })
}

/// Joint table of the lexicographically first exact maximizer. `C` is the
/// pointwise max of the linear maps `s ↦ score(λ)`, so this is a
/// subgradient of `C` at `f` with respect to the joint coefficients.
pub fn lhv_subgradient(f: &BellFunctional) -> Result<Vec<f64>> {
    let sc = f.scenario();
    check_cap(sc, DEFAULT_ENUMERATION_CAP)?;
    let (_, ia, ib) = argmax(f);
    Ok(strategy_from_indices(sc, ia, ib).joint_table(sc))
}

/// All deterministic strategies of a scenario with their joint index sets
/// precomputed, for repeated scoring of many functionals.
#[derive(Debug, Clone)]
pub struct LocalVertices {
    scenario: Scenario,
    /// `m²` joint indices per strategy, strategies in enumeration order.
    joint_idx: Vec<usize>,
    marg_a_idx: Vec<usize>,
    marg_b_idx: Vec<usize>,
    count: usize,
}

impl LocalVertices {
    pub fn new(sc: Scenario, cap: u128) -> Result<Self> {
        check_cap(sc, cap)?;
        let n = per_party(sc);
        let count = n * n;
        let m = sc.m();
        let mut joint_idx = Vec::with_capacity(count * m * m);
        let mut marg_a_idx = Vec::with_capacity(count * m);
        let mut marg_b_idx = Vec::with_capacity(count * m);
        let mut a = vec![0; m];
        let mut b = vec![0; m];
        for ia in 0..n {
            decode(ia, sc.d(), &mut a);
            for ib in 0..n {
                decode(ib, sc.d(), &mut b);
                for x in 0..m {
                    for y in 0..m {
                        joint_idx.push(sc.joint_index(x, y, a[x], b[y]));
                    }
                }
                marg_a_idx.extend((0..m).map(|x| sc.marginal_index(x, a[x])));
                marg_b_idx.extend((0..m).map(|y| sc.marginal_index(y, b[y])));
            }
        }
        Ok(Self {
            scenario: sc,
            joint_idx,
            marg_a_idx,
            marg_b_idx,
            count,
        })
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    /// Joint indices selected by strategy `k`.
    pub fn joint_indices(&self, k: usize) -> &[usize] {
        let mm = self.scenario.m() * self.scenario.m();
        &self.joint_idx[k * mm..(k + 1) * mm]
    }

    /// Score of strategy `k` on a joint-only coefficient vector, summed in
    /// the same order as [`lhv_bound`].
    #[inline]
    pub fn joint_score(&self, k: usize, joint: &[f64]) -> f64 {
        let mut total = 0.0;
        for &i in self.joint_indices(k) {
            total += joint[i];
        }
        total
    }

    /// Score of strategy `k` on a full functional.
    pub fn score(&self, k: usize, f: &BellFunctional) -> f64 {
        let m = self.scenario.m();
        let mut total = self.joint_score(k, f.joint());
        for &i in &self.marg_a_idx[k * m..(k + 1) * m] {
            total += f.marginal_a()[i];
        }
        for &i in &self.marg_b_idx[k * m..(k + 1) * m] {
            total += f.marginal_b()[i];
        }
        total
    }

    /// Scores of all strategies on joint coefficients, written into `out`.
    pub fn joint_scores_into(&self, joint: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend((0..self.count).map(|k| self.joint_score(k, joint)));
    }

    pub fn strategy(&self, k: usize) -> DeterministicStrategy {
        let n = per_party(self.scenario);
        strategy_from_indices(self.scenario, k / n, k % n)
    }
}
