//! Two-qubit pure states, projective qubit measurements, and the tilted
//! CHSH family with its optimal realization.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{uniform_weights, Behavior, BellFunctional, Scenario};

/// Row-major 2×2 complex matrix.
pub type Matrix2 = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Amplitudes over `|00⟩, |01⟩, |10⟩, |11⟩` (Alice's qubit first).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoQubitState {
    amplitudes: [Complex64; 4],
}

impl TwoQubitState {
    pub fn new(amplitudes: [Complex64; 4]) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("state has squared norm {norm}")));
        }
        Ok(Self { amplitudes })
    }

    /// Normalizes the given amplitudes.
    pub fn normalized(amplitudes: [Complex64; 4]) -> Result<Self> {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Domain("cannot normalize a zero vector".into()));
        }
        Ok(Self {
            amplitudes: amplitudes.map(|a| a / norm),
        })
    }

    /// `cos θ |00⟩ + sin θ |11⟩`.
    pub fn schmidt(theta: f64) -> Self {
        Self {
            amplitudes: [Complex64::new(theta.cos(), 0.0), ZERO, ZERO, Complex64::new(theta.sin(), 0.0)],
        }
    }

    pub fn amplitudes(&self) -> &[Complex64; 4] {
        &self.amplitudes
    }

    /// `⟨ψ| P ⊗ Q |ψ⟩`.
    fn expectation(&self, pa: &Matrix2, pb: &Matrix2) -> f64 {
        let psi = &self.amplitudes;
        let mut acc = ZERO;
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        acc += psi[2 * i + j].conj() * pa[i][k] * pb[j][l] * psi[2 * k + l];
                    }
                }
            }
        }
        acc.re
    }
}

/// Two-outcome projective measurement on a qubit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    projectors: [Matrix2; 2],
}

fn outer(v: [Complex64; 2]) -> Matrix2 {
    [
        [v[0] * v[0].conj(), v[0] * v[1].conj()],
        [v[1] * v[0].conj(), v[1] * v[1].conj()],
    ]
}

impl Measurement {
    pub fn new(projectors: [Matrix2; 2]) -> Result<Self> {
        let tol = 1e-10;
        for (k, p) in projectors.iter().enumerate() {
            for i in 0..2 {
                for j in 0..2 {
                    let square: Complex64 = (0..2).map(|l| p[i][l] * p[l][j]).sum();
                    if (square - p[i][j]).norm() > tol {
                        return Err(Error::Measurement(format!("projector {k} is not idempotent")));
                    }
                    if (p[i][j] - p[j][i].conj()).norm() > tol {
                        return Err(Error::Measurement(format!("projector {k} is not Hermitian")));
                    }
                }
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                let id = if i == j { ONE } else { ZERO };
                if (projectors[0][i][j] + projectors[1][i][j] - id).norm() > tol {
                    return Err(Error::Measurement("projectors do not sum to identity".into()));
                }
            }
        }
        Ok(Self { projectors })
    }

    /// Eigenbasis of `cos φ σ_z + sin φ σ_x`; outcome 0 is the +1 eigenvector.
    pub fn xz_plane(phi: f64) -> Self {
        let (c, s) = ((phi / 2.0).cos(), (phi / 2.0).sin());
        let plus = [Complex64::new(c, 0.0), Complex64::new(s, 0.0)];
        let minus = [Complex64::new(-s, 0.0), Complex64::new(c, 0.0)];
        Self {
            projectors: [outer(plus), outer(minus)],
        }
    }

    pub fn sigma_z() -> Self {
        Self::xz_plane(0.0)
    }

    pub fn sigma_x() -> Self {
        Self::xz_plane(std::f64::consts::FRAC_PI_2)
    }

    pub fn projector(&self, outcome: usize) -> &Matrix2 {
        &self.projectors[outcome]
    }
}

/// Born-rule statistics `p(ab|xy) = ⟨ψ| Π_a^x ⊗ Π_b^y |ψ⟩`.
pub fn born_behavior(
    state: &TwoQubitState,
    meas_a: &[Measurement],
    meas_b: &[Measurement],
) -> Result<Behavior> {
    if meas_a.is_empty() || meas_a.len() != meas_b.len() {
        return Err(Error::Shape(format!(
            "need the same nonzero number of settings per party, got {} and {}",
            meas_a.len(),
            meas_b.len()
        )));
    }
    let sc = Scenario::new(meas_a.len(), 2)?;
    let mut p = vec![0.0; sc.joint_len()];
    for (x, ma) in meas_a.iter().enumerate() {
        for (y, mb) in meas_b.iter().enumerate() {
            for a in 0..2 {
                for b in 0..2 {
                    // Clamp rounding noise below zero.
                    let v = state.expectation(ma.projector(a), mb.projector(b)).max(0.0);
                    p[sc.joint_index(x, y, a, b)] = v;
                }
            }
        }
    }
    Ok(Behavior::from_parts(sc, p, uniform_weights(sc)))
}

/// Tilted CHSH: `α [p_A(0|0) − p_A(1|0)] + Σ (−1)^{xy} [p(a=b) − p(a≠b)]`.
pub fn tilted_functional(alpha: f64) -> Result<BellFunctional> {
    check_alpha(alpha)?;
    let sc = Scenario::chsh();
    let mut joint = vec![0.0; sc.joint_len()];
    for x in 0..2 {
        for y in 0..2 {
            let sign = if x * y == 1 { -1.0 } else { 1.0 };
            for a in 0..2 {
                for b in 0..2 {
                    joint[sc.joint_index(x, y, a, b)] = if a == b { sign } else { -sign };
                }
            }
        }
    }
    let mut marginal_a = vec![0.0; sc.marginal_len()];
    marginal_a[sc.marginal_index(0, 0)] = alpha;
    marginal_a[sc.marginal_index(0, 1)] = -alpha;
    BellFunctional::new(sc, joint, marginal_a, vec![0.0; sc.marginal_len()])
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=2.0).contains(&alpha) {
        return Err(Error::Domain(format!("tilting parameter {alpha} outside [0, 2]")));
    }
    Ok(())
}

/// `√((1 − (α/2)²) / (1 + (α/2)²))`, which is both `sin 2θ` and `tan μ`.
fn tilt_ratio(alpha: f64) -> f64 {
    let t = (alpha / 2.0).powi(2);
    ((1.0 - t) / (1.0 + t)).sqrt()
}

/// `(C_α, Q_α) = (α + 2, √(8 + 2α²))`.
pub fn tilted_constants(alpha: f64) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    Ok((alpha + 2.0, (8.0 + 2.0 * alpha * alpha).sqrt()))
}

/// Concurrence of `cos θ|00⟩ + sin θ|11⟩`.
pub fn concurrence(theta: f64) -> f64 {
    (2.0 * theta).sin()
}

/// Tilting parameter whose optimal state has the given concurrence.
pub fn alpha_for_concurrence(c: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::Domain(format!("concurrence {c} outside [0, 1]")));
    }
    let c2 = c * c;
    Ok(2.0 * ((1.0 - c2) / (1.0 + c2)).sqrt())
}

/// State and settings attaining `Q_α` for the tilted functional.
#[derive(Debug, Clone, PartialEq)]
pub struct TiltedRealization {
    pub alpha: f64,
    pub theta: f64,
    pub mu: f64,
    pub state: TwoQubitState,
    pub meas_a: [Measurement; 2],
    pub meas_b: [Measurement; 2],
}

impl TiltedRealization {
    pub fn behavior(&self) -> Behavior {
        born_behavior(&self.state, &self.meas_a, &self.meas_b)
            .expect("tilted realization has two settings per party")
    }

    pub fn concurrence(&self) -> f64 {
        concurrence(self.theta)
    }
}

/// `A_0 = σ_z`, `A_1 = σ_x`, `B_{0,1} = cos μ σ_z ± sin μ σ_x` on
/// `cos θ|00⟩ + sin θ|11⟩`.
pub fn tilted_realization(alpha: f64) -> Result<TiltedRealization> {
    check_alpha(alpha)?;
    let r = tilt_ratio(alpha);
    let theta = 0.5 * r.asin();
    let mu = r.atan();
    Ok(TiltedRealization {
        alpha,
        theta,
        mu,
        state: TwoQubitState::schmidt(theta),
        meas_a: [Measurement::sigma_z(), Measurement::sigma_x()],
        meas_b: [Measurement::xz_plane(mu), Measurement::xz_plane(-mu)],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_4, SQRT_2};

    #[test]
    fn product_state_in_z_basis() {
        let s = TwoQubitState::schmidt(0.0);
        let z = [Measurement::sigma_z()];
        let b = born_behavior(&s, &z, &z).unwrap();
        assert_abs_diff_eq!(b.p(0, 0, 0, 0), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn chsh_realization_reaches_tsirelson() {
        let r = tilted_realization(0.0).unwrap();
        let q = tilted_functional(0.0).unwrap().evaluate(&r.behavior()).unwrap();
        assert_abs_diff_eq!(q, 2.0 * SQRT_2, epsilon = 1e-12);
        assert_abs_diff_eq!(r.theta, FRAC_PI_4, epsilon = 1e-15);
        assert_abs_diff_eq!(r.mu, FRAC_PI_4, epsilon = 1e-15);
    }

    #[test]
    fn alpha_two_is_product() {
        let r = tilted_realization(2.0).unwrap();
        assert_eq!(r.theta, 0.0);
        assert_eq!(r.mu, 0.0);
        let b = r.behavior();
        assert_abs_diff_eq!(b.p(0, 0, 0, 0), 1.0, epsilon = 1e-15);
        assert_eq!(tilted_constants(2.0).unwrap(), (4.0, 4.0));
    }

    #[test]
    fn realization_values() {
        // sin 2θ equals the arcsin argument, √(3/5) at α = 1.
        let r = tilted_realization(1.0).unwrap();
        assert_abs_diff_eq!(r.concurrence(), 0.6_f64.sqrt(), epsilon = 1e-15);
        let q = tilted_functional(1.0).unwrap().evaluate(&r.behavior()).unwrap();
        assert_abs_diff_eq!(q, 10.0_f64.sqrt(), epsilon = 1e-12);
        let r = tilted_realization(0.5).unwrap();
        assert_abs_diff_eq!(r.concurrence(), (0.9375_f64 / 1.0625).sqrt(), epsilon = 1e-15);
        let q = tilted_functional(0.5).unwrap().evaluate(&r.behavior()).unwrap();
        assert_abs_diff_eq!(q, 8.5_f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn alice_marginal_matches_state() {
        let r = tilted_realization(1.0).unwrap();
        let marg = r.behavior().marginals();
        assert_abs_diff_eq!(marg.a[0], r.theta.cos().powi(2), epsilon = 1e-14);
    }

    #[test]
    fn domain_checks() {
        assert!(tilted_functional(-0.1).is_err());
        assert!(tilted_realization(2.5).is_err());
        assert!(tilted_constants(f64::NAN).is_err());
        assert!(alpha_for_concurrence(1.2).is_err());
    }

    #[test]
    fn concurrence_inverse() {
        for c in [0.0, 0.193, 0.375, 0.582, 0.835, 0.986, 1.0] {
            let r = tilted_realization(alpha_for_concurrence(c).unwrap()).unwrap();
            assert_abs_diff_eq!(r.concurrence(), c, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(concurrence(FRAC_PI_4), 1.0, epsilon = 1e-15);
        assert_eq!(concurrence(0.0), 0.0);
    }

    #[test]
    fn invalid_projectors_are_rejected() {
        let half = Complex64::new(0.5, 0.0);
        let p = [[half, ZERO], [ZERO, half]];
        assert!(Measurement::new([p, p]).is_err());
        let z = Measurement::sigma_z();
        assert!(Measurement::new([*z.projector(0), *z.projector(0)]).is_err());
        assert!(Measurement::new([*z.projector(0), *z.projector(1)]).is_ok());
    }

    #[test]
    fn mismatched_settings() {
        let s = TwoQubitState::schmidt(0.3);
        assert!(born_behavior(&s, &[Measurement::sigma_z()], &[]).is_err());
    }
}
