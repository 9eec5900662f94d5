//! Canonical form of two-outcome functionals and critical detection
//! efficiencies.
//!
//! Under no-signaling every outcome-1 probability can be written through
//! outcome-0 ones:
//!
//! ```text
//! p(0,1|x,y) = p_A(0|x) − p(0,0|x,y)
//! p(1,0|x,y) = p_B(0|y) − p(0,0|x,y)
//! p(1,1|x,y) = 1 − p_A(0|x) − p_B(0|y) + p(0,0|x,y)
//! p_A(1|x)   = 1 − p_A(0|x)
//! ```
//!
//! so a functional becomes `scale · canonical + offset`, where the canonical
//! part only sees `p(0,0|x,y)`, `p_A(0|x)` and `p_B(0|y)`. Mapping a
//! non-detection to outcome 1 turns finite efficiency into the substitution
//! `p(0,0) → η_A η_B p(0,0)`, `p_A(0) → η_A p_A(0)`, `p_B(0) → η_B p_B(0)`.

use crate::error::{Error, Result};
use crate::lhv::{lhv_bound, DEFAULT_ENUMERATION_CAP};
use crate::model::{Behavior, BellFunctional, Scenario};

/// Tolerance on the canonical bound below which a behavior counts as
/// sitting exactly on it.
const EQUALITY_TOL: f64 = 1e-12;
const DISCRIMINANT_TOL: f64 = 1e-12;

/// Outcome-0-only coefficients with the constant and normalization that
/// relate them to the source functional.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalFunctional {
    scenario: Scenario,
    /// `joint0[x * m + y]`, coefficient of `p(0,0|x,y)`.
    joint0: Vec<f64>,
    /// Coefficient of `p_A(0|x)`.
    marg_a0: Vec<f64>,
    /// Coefficient of `p_B(0|y)`.
    marg_b0: Vec<f64>,
    offset: f64,
    scale: f64,
    source: BellFunctional,
}

impl CanonicalFunctional {
    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn joint0(&self) -> &[f64] {
        &self.joint0
    }

    pub fn joint0_at(&self, x: usize, y: usize) -> f64 {
        self.joint0[x * self.scenario.m() + y]
    }

    pub fn marg_a0(&self) -> &[f64] {
        &self.marg_a0
    }

    pub fn marg_b0(&self) -> &[f64] {
        &self.marg_b0
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// The functional this form was derived from.
    pub fn source(&self) -> &BellFunctional {
        &self.source
    }

    /// `(J, A, B)`: the joint, Alice and Bob parts of the canonical value.
    pub fn parts(&self, behavior: &Behavior) -> Result<(f64, f64, f64)> {
        self.scenario.check_same(&behavior.scenario())?;
        let m = self.scenario.m();
        let marg = behavior.marginals();
        let mut joint = 0.0;
        for x in 0..m {
            for y in 0..m {
                joint += self.joint0_at(x, y) * behavior.p(x, y, 0, 0);
            }
        }
        let sc = self.scenario;
        let a: f64 = (0..m).map(|x| self.marg_a0[x] * marg.a[sc.marginal_index(x, 0)]).sum();
        let b: f64 = (0..m).map(|y| self.marg_b0[y] * marg.b[sc.marginal_index(y, 0)]).sum();
        Ok((joint, a, b))
    }

    /// Canonical value `J + A + B` on a behavior.
    pub fn evaluate(&self, behavior: &Behavior) -> Result<f64> {
        let (j, a, b) = self.parts(behavior)?;
        Ok(j + a + b)
    }

    /// `scale · canonical + offset`, equal to the source functional's value
    /// on no-signaling behaviors.
    pub fn reconstruct(&self, behavior: &Behavior) -> Result<f64> {
        Ok(self.scale * self.evaluate(behavior)? + self.offset)
    }

    /// The canonical bound obtained from the source functional's LHV bound,
    /// `(C − offset) / scale`.
    pub fn bound_from_source(&self) -> Result<f64> {
        Ok((lhv_bound(&self.source)?.bound - self.offset) / self.scale)
    }
}

/// Rewrites a two-outcome functional in outcome-0 probabilities only.
/// `normalize`, when given, divides every canonical coefficient by that
/// positive constant and is recorded as the scale.
pub fn canonicalize(f: &BellFunctional, normalize: Option<f64>) -> Result<CanonicalFunctional> {
    let sc = f.scenario();
    if sc.d() != 2 {
        return Err(Error::UnsupportedScenario(format!(
            "canonical form needs two outcomes, got d={}",
            sc.d()
        )));
    }
    let scale = match normalize {
        None => 1.0,
        Some(k) if k > 0.0 && k.is_finite() => k,
        Some(k) => return Err(Error::Domain(format!("normalization must be positive, got {k}"))),
    };
    let m = sc.m();
    let s = |x, y, a, b| f.joint_at(x, y, a, b);
    let sa = |x, a| f.marginal_a()[sc.marginal_index(x, a)];
    let sb = |y, b| f.marginal_b()[sc.marginal_index(y, b)];

    let mut joint0 = vec![0.0; m * m];
    let mut marg_a0 = vec![0.0; m];
    let mut marg_b0 = vec![0.0; m];
    let mut offset = 0.0;
    for x in 0..m {
        for y in 0..m {
            joint0[x * m + y] = s(x, y, 0, 0) - s(x, y, 0, 1) - s(x, y, 1, 0) + s(x, y, 1, 1);
            marg_a0[x] += s(x, y, 0, 1) - s(x, y, 1, 1);
            marg_b0[y] += s(x, y, 1, 0) - s(x, y, 1, 1);
            offset += s(x, y, 1, 1);
        }
    }
    for k in 0..m {
        marg_a0[k] += sa(k, 0) - sa(k, 1);
        marg_b0[k] += sb(k, 0) - sb(k, 1);
        offset += sa(k, 1) + sb(k, 1);
    }
    for v in joint0.iter_mut().chain(&mut marg_a0).chain(&mut marg_b0) {
        *v /= scale;
    }
    Ok(CanonicalFunctional {
        scenario: sc,
        joint0,
        marg_a0,
        marg_b0,
        offset,
        scale,
        source: f.clone(),
    })
}

/// Maximum of the canonical form over deterministic strategies, enumerated
/// directly on the canonical coefficients.
pub fn canonical_lhv_bound(cf: &CanonicalFunctional) -> Result<f64> {
    let m = cf.scenario.m();
    let strategies = 1u128 << (2 * m).min(127);
    if 2 * m >= 127 || strategies > DEFAULT_ENUMERATION_CAP {
        return Err(Error::Capacity {
            strategies: if 2 * m >= 127 { u128::MAX } else { strategies },
            cap: DEFAULT_ENUMERATION_CAP,
        });
    }
    // Bit x of `zeros_a` is set when Alice outputs 0 on setting x.
    let mut best = f64::NEG_INFINITY;
    for zeros_a in 0u64..(1 << m) {
        let a_part: f64 = (0..m).filter(|&x| zeros_a >> x & 1 == 1).map(|x| cf.marg_a0[x]).sum();
        for zeros_b in 0u64..(1 << m) {
            let mut value = a_part;
            for y in (0..m).filter(|&y| zeros_b >> y & 1 == 1) {
                value += cf.marg_b0[y];
                for x in (0..m).filter(|&x| zeros_a >> x & 1 == 1) {
                    value += cf.joint0_at(x, y);
                }
            }
            best = best.max(value);
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EfficiencyMode {
    /// Bob's detectors are perfect; solve for Alice's.
    AsymmetricBPerfect,
    /// Both parties share one efficiency.
    Symmetric,
}

impl EfficiencyMode {
    pub fn name(self) -> &'static str {
        match self {
            EfficiencyMode::AsymmetricBPerfect => "asymmetric_b_perfect",
            EfficiencyMode::Symmetric => "symmetric",
        }
    }
}

impl std::str::FromStr for EfficiencyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "asymmetric" | "asymmetric_b_perfect" => Ok(EfficiencyMode::AsymmetricBPerfect),
            "symmetric" => Ok(EfficiencyMode::Symmetric),
            other => Err(Error::Domain(format!("unknown efficiency mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencyResult {
    pub eta_a: f64,
    pub eta_b: f64,
    pub mode: EfficiencyMode,
}

/// Canonical value with detection efficiencies applied.
pub fn value_at_efficiency(cf: &CanonicalFunctional, b: &Behavior, eta_a: f64, eta_b: f64) -> Result<f64> {
    let (j, a, bb) = cf.parts(b)?;
    Ok(eta_a * eta_b * j + eta_a * a + eta_b * bb)
}

/// Lowest efficiency at which `b` still reaches the canonical LHV bound.
pub fn critical_efficiency(
    cf: &CanonicalFunctional,
    b: &Behavior,
    mode: EfficiencyMode,
) -> Result<EfficiencyResult> {
    let (j, a, bb) = cf.parts(b)?;
    let bound = canonical_lhv_bound(cf)?;
    let value = j + a + bb;
    let tol = EQUALITY_TOL * bound.abs().max(1.0);
    if value < bound - tol {
        return Err(Error::NoViolation { value, bound });
    }
    let result = |eta: f64| match mode {
        EfficiencyMode::AsymmetricBPerfect => EfficiencyResult { eta_a: eta, eta_b: 1.0, mode },
        EfficiencyMode::Symmetric => EfficiencyResult { eta_a: eta, eta_b: eta, mode },
    };
    if value <= bound + tol {
        return Ok(result(1.0));
    }
    let eta = match mode {
        EfficiencyMode::AsymmetricBPerfect => linear_root(j + a, bound - bb),
        EfficiencyMode::Symmetric => quadratic_root(j, a + bb, -bound),
    }
    .ok_or(Error::Infeasible)?;
    Ok(result(eta))
}

fn in_unit(eta: f64) -> Option<f64> {
    if eta > 0.0 && eta <= 1.0 + 1e-12 {
        Some(eta.min(1.0))
    } else {
        None
    }
}

/// Root of `slope · η = rhs` in `(0, 1]`.
fn linear_root(slope: f64, rhs: f64) -> Option<f64> {
    if slope == 0.0 {
        return None;
    }
    in_unit(rhs / slope)
}

/// Smallest root of `quad·η² + lin·η + constant = 0` in `(0, 1]`.
fn quadratic_root(quad: f64, lin: f64, constant: f64) -> Option<f64> {
    let size = quad.abs().max(lin.abs()).max(constant.abs());
    if quad.abs() <= 1e-14 * size {
        return linear_root(lin, -constant);
    }
    let mut disc = lin * lin - 4.0 * quad * constant;
    if disc < -DISCRIMINANT_TOL * size * size {
        return None;
    }
    disc = disc.max(0.0);
    // Cancellation-free pair of roots.
    let q = -0.5 * (lin + lin.signum() * disc.sqrt());
    let mut roots = vec![q / quad];
    if q != 0.0 {
        roots.push(constant / q);
    }
    roots.into_iter().filter_map(in_unit).reduce(f64::min)
}
