//! Scenario-indexed probability and coefficient tables.
//!
//! Every table is stored dense in row-major `(x, y, a, b)` order, with
//! marginal blocks in `(x, a)` / `(y, b)` order. Marginals of a behavior are
//! always obtained by averaging over the other party's setting, which is
//! well defined even when the behavior signals.

use crate::error::{Error, Result};

/// Normalization tolerance for behaviors read from user input.
pub const INGEST_TOL: f64 = 1e-9;
/// Normalization tolerance for behaviors generated internally.
pub const INTERNAL_TOL: f64 = 1e-12;

/// Bipartite Bell scenario: `m` settings and `d` outcomes per party.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Scenario {
    m: usize,
    d: usize,
}

impl Scenario {
    pub fn new(m: usize, d: usize) -> Result<Self> {
        if m < 1 {
            return Err(Error::Domain(format!("need at least one setting, got m={m}")));
        }
        if d < 2 {
            return Err(Error::Domain(format!("need at least two outcomes, got d={d}")));
        }
        Ok(Self { m, d })
    }

    /// The two-setting, two-outcome scenario.
    pub const fn chsh() -> Self {
        Self { m: 2, d: 2 }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// The `d·m` shift of the ratio objective.
    pub fn shift(&self) -> f64 {
        (self.d * self.m) as f64
    }

    pub fn joint_len(&self) -> usize {
        self.m * self.m * self.d * self.d
    }

    pub fn marginal_len(&self) -> usize {
        self.m * self.d
    }

    pub fn blocks(&self) -> usize {
        self.m * self.m
    }

    pub fn block_len(&self) -> usize {
        self.d * self.d
    }

    #[inline]
    pub fn joint_index(&self, x: usize, y: usize, a: usize, b: usize) -> usize {
        ((x * self.m + y) * self.d + a) * self.d + b
    }

    #[inline]
    pub fn marginal_index(&self, setting: usize, outcome: usize) -> usize {
        setting * self.d + outcome
    }

    #[inline]
    pub fn block_index(&self, x: usize, y: usize) -> usize {
        x * self.m + y
    }

    /// Inverse of [`Scenario::joint_index`].
    pub fn joint_coords(&self, index: usize) -> (usize, usize, usize, usize) {
        let b = index % self.d;
        let a = (index / self.d) % self.d;
        let y = (index / (self.d * self.d)) % self.m;
        let x = index / (self.d * self.d * self.m);
        (x, y, a, b)
    }

    pub(crate) fn check_same(&self, other: &Scenario) -> Result<()> {
        if self != other {
            return Err(Error::Shape(format!(
                "scenario (m={}, d={}) does not match (m={}, d={})",
                self.m, self.d, other.m, other.d
            )));
        }
        Ok(())
    }

    pub(crate) fn check_len(&self, what: &str, got: usize, want: usize) -> Result<()> {
        if got != want {
            return Err(Error::Shape(format!(
                "{what} has {got} entries, scenario (m={}, d={}) needs {want}",
                self.m, self.d
            )));
        }
        Ok(())
    }
}

/// Coefficients of a Bell expression: joint terms `s^{ab}_{xy}` plus
/// optional single-party marginal terms.
#[derive(Debug, Clone, PartialEq)]
pub struct BellFunctional {
    scenario: Scenario,
    joint: Vec<f64>,
    marginal_a: Vec<f64>,
    marginal_b: Vec<f64>,
}

impl BellFunctional {
    pub fn new(
        scenario: Scenario,
        joint: Vec<f64>,
        marginal_a: Vec<f64>,
        marginal_b: Vec<f64>,
    ) -> Result<Self> {
        scenario.check_len("joint block", joint.len(), scenario.joint_len())?;
        scenario.check_len("marginal_a block", marginal_a.len(), scenario.marginal_len())?;
        scenario.check_len("marginal_b block", marginal_b.len(), scenario.marginal_len())?;
        if joint
            .iter()
            .chain(&marginal_a)
            .chain(&marginal_b)
            .any(|v| !v.is_finite())
        {
            return Err(Error::Domain("functional coefficients must be finite".into()));
        }
        Ok(Self {
            scenario,
            joint,
            marginal_a,
            marginal_b,
        })
    }

    /// A functional with all-zero marginal blocks.
    pub fn joint_only(scenario: Scenario, joint: Vec<f64>) -> Result<Self> {
        let zeros = vec![0.0; scenario.marginal_len()];
        Self::new(scenario, joint, zeros.clone(), zeros)
    }

    pub fn zero(scenario: Scenario) -> Self {
        Self {
            scenario,
            joint: vec![0.0; scenario.joint_len()],
            marginal_a: vec![0.0; scenario.marginal_len()],
            marginal_b: vec![0.0; scenario.marginal_len()],
        }
    }

    /// CHSH in correlator form, `s^{ab}_{xy} = (-1)^{a+b+xy}`.
    pub fn chsh() -> Self {
        let sc = Scenario::chsh();
        let mut joint = vec![0.0; sc.joint_len()];
        for x in 0..2 {
            for y in 0..2 {
                for a in 0..2 {
                    for b in 0..2 {
                        let parity = (a + b + x * y) % 2;
                        joint[sc.joint_index(x, y, a, b)] = if parity == 0 { 1.0 } else { -1.0 };
                    }
                }
            }
        }
        Self::zero(sc).with_joint(joint)
    }

    fn with_joint(mut self, joint: Vec<f64>) -> Self {
        self.joint = joint;
        self
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn joint(&self) -> &[f64] {
        &self.joint
    }

    pub fn marginal_a(&self) -> &[f64] {
        &self.marginal_a
    }

    pub fn marginal_b(&self) -> &[f64] {
        &self.marginal_b
    }

    pub fn joint_at(&self, x: usize, y: usize, a: usize, b: usize) -> f64 {
        self.joint[self.scenario.joint_index(x, y, a, b)]
    }

    pub fn has_marginals(&self) -> bool {
        self.marginal_a
            .iter()
            .chain(&self.marginal_b)
            .any(|&v| v != 0.0)
    }

    /// Largest absolute joint coefficient.
    pub fn max_abs_joint(&self) -> f64 {
        self.joint.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Value of the functional on `behavior`, with marginal terms evaluated
    /// on the setting-averaged marginals.
    pub fn evaluate(&self, behavior: &Behavior) -> Result<f64> {
        self.scenario.check_same(&behavior.scenario)?;
        let joint: f64 = self
            .joint
            .iter()
            .zip(&behavior.p)
            .map(|(s, p)| s * p)
            .sum();
        if !self.has_marginals() {
            return Ok(joint);
        }
        let marg = behavior.marginals();
        let a: f64 = self.marginal_a.iter().zip(&marg.a).map(|(s, p)| s * p).sum();
        let b: f64 = self.marginal_b.iter().zip(&marg.b).map(|(s, p)| s * p).sum();
        Ok(joint + a + b)
    }

    /// Multiplies every coefficient block by `kappa > 0`.
    pub fn rescale(&self, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::Domain(format!("rescale factor must be positive, got {kappa}")));
        }
        Ok(self.scaled(kappa))
    }

    pub(crate) fn scaled(&self, kappa: f64) -> Self {
        let mul = |v: &[f64]| v.iter().map(|s| s * kappa).collect::<Vec<_>>();
        Self {
            scenario: self.scenario,
            joint: mul(&self.joint),
            marginal_a: mul(&self.marginal_a),
            marginal_b: mul(&self.marginal_b),
        }
    }

    /// Coefficient-wise sum.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.scenario.check_same(&other.scenario)?;
        let add = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a + b).collect::<Vec<_>>();
        Ok(Self {
            scenario: self.scenario,
            joint: add(&self.joint, &other.joint),
            marginal_a: add(&self.marginal_a, &other.marginal_a),
            marginal_b: add(&self.marginal_b, &other.marginal_b),
        })
    }

    /// Folds the marginal blocks into the joint coefficients,
    /// `s^{ab}_{xy} + s^a_x/m + s^b_y/m`. Agrees with the original on every
    /// no-signaling behavior.
    pub fn absorb_marginals(&self) -> Self {
        let sc = self.scenario;
        let m = sc.m() as f64;
        let mut joint = self.joint.clone();
        for x in 0..sc.m() {
            for y in 0..sc.m() {
                for a in 0..sc.d() {
                    for b in 0..sc.d() {
                        let i = sc.joint_index(x, y, a, b);
                        joint[i] = self.joint[i]
                            + (self.marginal_a[sc.marginal_index(x, a)]
                                + self.marginal_b[sc.marginal_index(y, b)])
                                / m;
                    }
                }
            }
        }
        Self::zero(sc).with_joint(joint)
    }
}

/// Setting-averaged single-party marginals, `a[(x, a)]` and `b[(y, b)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginals {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

/// Worst-case mismatch of the no-signaling equalities on each side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NsResidual {
    /// Alice's marginal changing with Bob's setting.
    pub max_a_violation: f64,
    /// Bob's marginal changing with Alice's setting.
    pub max_b_violation: f64,
}

impl NsResidual {
    pub fn max(&self) -> f64 {
        self.max_a_violation.max(self.max_b_violation)
    }
}

/// Conditional joint distribution `p(ab|xy)` with setting frequencies `f(x,y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Behavior {
    scenario: Scenario,
    p: Vec<f64>,
    setting_weights: Vec<f64>,
}

impl Behavior {
    /// Validates a user-supplied table. Weights default to uniform.
    pub fn new(scenario: Scenario, p: Vec<f64>, setting_weights: Option<Vec<f64>>) -> Result<Self> {
        Self::validated(scenario, p, setting_weights, INGEST_TOL)
    }

    pub(crate) fn validated(
        scenario: Scenario,
        p: Vec<f64>,
        setting_weights: Option<Vec<f64>>,
        tol: f64,
    ) -> Result<Self> {
        scenario.check_len("probability table", p.len(), scenario.joint_len())?;
        let weights = match setting_weights {
            Some(w) => {
                scenario.check_len("setting weights", w.len(), scenario.blocks())?;
                if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(Error::Domain("setting weights must be nonnegative".into()));
                }
                let total: f64 = w.iter().sum();
                if (total - 1.0).abs() > tol {
                    return Err(Error::Domain(format!("setting weights sum to {total}, not 1")));
                }
                w
            }
            None => uniform_weights(scenario),
        };
        if let Some(v) = p.iter().find(|v| !v.is_finite() || **v < -tol || **v > 1.0 + tol) {
            return Err(Error::Domain(format!("probability {v} outside [0, 1]")));
        }
        let bl = scenario.block_len();
        for (k, block) in p.chunks(bl).enumerate() {
            let total: f64 = block.iter().sum();
            if (total - 1.0).abs() > tol {
                let (x, y) = (k / scenario.m(), k % scenario.m());
                return Err(Error::Domain(format!(
                    "block (x={x}, y={y}) sums to {total}, not 1"
                )));
            }
        }
        Ok(Self {
            scenario,
            p,
            setting_weights: weights,
        })
    }

    /// Internally generated table; normalization is checked in debug builds.
    pub(crate) fn from_parts(scenario: Scenario, p: Vec<f64>, setting_weights: Vec<f64>) -> Self {
        debug_assert_eq!(p.len(), scenario.joint_len());
        debug_assert!(p
            .chunks(scenario.block_len())
            .all(|blk| (blk.iter().sum::<f64>() - 1.0).abs() <= 1e-9));
        Self {
            scenario,
            p,
            setting_weights,
        }
    }

    /// `p = 1/d²` in every block.
    pub fn uniform(scenario: Scenario) -> Self {
        let v = 1.0 / scenario.block_len() as f64;
        Self::from_parts(scenario, vec![v; scenario.joint_len()], uniform_weights(scenario))
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    pub fn setting_weights(&self) -> &[f64] {
        &self.setting_weights
    }

    pub fn p(&self, x: usize, y: usize, a: usize, b: usize) -> f64 {
        self.p[self.scenario.joint_index(x, y, a, b)]
    }

    /// Same probabilities with different setting weights.
    pub fn with_setting_weights(&self, weights: Vec<f64>) -> Result<Self> {
        Self::validated(self.scenario, self.p.clone(), Some(weights), INGEST_TOL)
    }

    /// `p_A(a|x) = (1/m) Σ_{y,b} p(ab|xy)` and symmetrically for Bob.
    pub fn marginals(&self) -> Marginals {
        let sc = self.scenario;
        let (m, d) = (sc.m(), sc.d());
        let mut a_marg = vec![0.0; sc.marginal_len()];
        let mut b_marg = vec![0.0; sc.marginal_len()];
        for x in 0..m {
            for y in 0..m {
                for a in 0..d {
                    for b in 0..d {
                        let p = self.p[sc.joint_index(x, y, a, b)];
                        a_marg[sc.marginal_index(x, a)] += p;
                        b_marg[sc.marginal_index(y, b)] += p;
                    }
                }
            }
        }
        let inv = 1.0 / m as f64;
        a_marg.iter_mut().chain(b_marg.iter_mut()).for_each(|v| *v *= inv);
        Marginals { a: a_marg, b: b_marg }
    }

    /// Alice's marginal as seen in block `(x, y)` only.
    fn local_a(&self, x: usize, y: usize, a: usize) -> f64 {
        (0..self.scenario.d()).map(|b| self.p(x, y, a, b)).sum()
    }

    fn local_b(&self, x: usize, y: usize, b: usize) -> f64 {
        (0..self.scenario.d()).map(|a| self.p(x, y, a, b)).sum()
    }

    /// Largest violation of the no-signaling equalities.
    pub fn ns_residual(&self) -> NsResidual {
        let (m, d) = (self.scenario.m(), self.scenario.d());
        let mut res = NsResidual {
            max_a_violation: 0.0,
            max_b_violation: 0.0,
        };
        for s in 0..m {
            for o in 0..d {
                for t in 0..m {
                    for u in (t + 1)..m {
                        let da = (self.local_a(s, t, o) - self.local_a(s, u, o)).abs();
                        let db = (self.local_b(t, s, o) - self.local_b(u, s, o)).abs();
                        res.max_a_violation = res.max_a_violation.max(da);
                        res.max_b_violation = res.max_b_violation.max(db);
                    }
                }
            }
        }
        res
    }

    /// `λ·self + (1−λ)·other`, including setting weights.
    pub fn mix(&self, other: &Self, lambda: f64) -> Result<Self> {
        self.scenario.check_same(&other.scenario)?;
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::Domain(format!("mixing weight {lambda} outside [0, 1]")));
        }
        let lerp = |u: &[f64], v: &[f64]| {
            u.iter()
                .zip(v)
                .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
                .collect::<Vec<_>>()
        };
        Ok(Self::from_parts(
            self.scenario,
            lerp(&self.p, &other.p),
            lerp(&self.setting_weights, &other.setting_weights),
        ))
    }
}

pub(crate) fn uniform_weights(scenario: Scenario) -> Vec<f64> {
    vec![1.0 / scenario.blocks() as f64; scenario.blocks()]
}
