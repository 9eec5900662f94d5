mod common;

use bellgap::loophole::{canonical_lhv_bound, canonicalize, critical_efficiency, value_at_efficiency, EfficiencyMode};
use bellgap::quantum::tilted_realization;
use bellgap::{tilted_functional, Behavior, BellFunctional, Error, Scenario};
use common::*;
use rand::Rng;

#[test]
fn canonical_identity_on_ns_behaviors() {
    let mut r = rng(31);
    for m in 1..=3 {
        let sc = Scenario::new(m, 2).unwrap();
        let f = random_functional(sc, &mut r, true);
        let scale = r.random_range(0.5..4.0);
        let cf = canonicalize(&f, Some(scale)).unwrap();
        for _ in 0..100 {
            let b = random_ns(sc, &mut r);
            assert!((cf.reconstruct(&b).unwrap() - f.evaluate(&b).unwrap()).abs() < 1e-10);
        }
    }
}

#[test]
fn both_bound_routes_agree() {
    let mut r = rng(32);
    for m in 1..=4 {
        let sc = Scenario::new(m, 2).unwrap();
        for _ in 0..10 {
            let f = random_functional(sc, &mut r, true);
            let cf = canonicalize(&f, Some(r.random_range(0.5..4.0))).unwrap();
            let direct = canonical_lhv_bound(&cf).unwrap();
            assert!((direct - cf.bound_from_source().unwrap()).abs() < 1e-10);
        }
    }
}

fn violating_instances() -> Vec<(BellFunctional, Behavior)> {
    let mut r = rng(33);
    let mut out = Vec::new();
    for k in 0..=8 {
        let alpha = k as f64 * 0.2;
        let ideal = tilted_realization(alpha).unwrap().behavior();
        let noisy = ideal.mix(&Behavior::uniform(Scenario::chsh()), r.random_range(0.97..1.0)).unwrap();
        out.push((tilted_functional(alpha).unwrap(), noisy));
        out.push((BellFunctional::chsh(), ideal));
    }
    out
}

#[test]
fn symmetric_threshold_is_at_least_asymmetric() {
    for (f, b) in violating_instances() {
        let cf = canonicalize(&f, None).unwrap();
        let bound = canonical_lhv_bound(&cf).unwrap();
        let sym = critical_efficiency(&cf, &b, EfficiencyMode::Symmetric);
        let asym = critical_efficiency(&cf, &b, EfficiencyMode::AsymmetricBPerfect);
        match (sym, asym) {
            (Ok(s), Ok(a)) => {
                assert!(s.eta_a >= a.eta_a - 1e-12);
                for res in [s, a] {
                    let lhs = value_at_efficiency(&cf, &b, res.eta_a, res.eta_b).unwrap();
                    assert!((lhs - bound).abs() < 1e-9);
                }
            }
            (Err(Error::NoViolation { .. }), Err(Error::NoViolation { .. })) => {}
            other => panic!("unexpected outcome {other:?}"),
        }
    }
}

#[test]
fn stronger_violation_never_raises_thresholds() {
    for alpha in [0.0, 0.4, 0.9] {
        let f = tilted_functional(alpha).unwrap();
        let cf = canonicalize(&f, Some(4.0)).unwrap();
        let ideal = tilted_realization(alpha).unwrap().behavior();
        let noise = Behavior::uniform(Scenario::chsh());
        for mode in [EfficiencyMode::Symmetric, EfficiencyMode::AsymmetricBPerfect] {
            let mut last = f64::INFINITY;
            for k in 0..=20 {
                let b = ideal.mix(&noise, 0.9 + 0.005 * k as f64).unwrap();
                match critical_efficiency(&cf, &b, mode) {
                    Ok(res) => {
                        assert!(res.eta_a <= last + 1e-12);
                        last = res.eta_a;
                    }
                    Err(Error::NoViolation { .. } | Error::Infeasible) => {
                        assert!(last.is_infinite(), "lost the violation after finding it");
                    }
                    Err(e) => panic!("{e}"),
                }
            }
            assert!(last.is_finite());
        }
    }
}
