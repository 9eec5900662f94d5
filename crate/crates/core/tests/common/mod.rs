#![allow(dead_code)]

use bellgap::lhv::DeterministicStrategy;
use bellgap::quantum::Measurement;
use bellgap::{Behavior, BellFunctional, Scenario};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_functional(sc: Scenario, rng: &mut ChaCha8Rng, marginals: bool) -> BellFunctional {
    let mut draw = |n: usize| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
    let joint = draw(sc.joint_len());
    let (ma, mb) = if marginals {
        (draw(sc.marginal_len()), draw(sc.marginal_len()))
    } else {
        (vec![0.0; sc.marginal_len()], vec![0.0; sc.marginal_len()])
    };
    BellFunctional::new(sc, joint, ma, mb).unwrap()
}

pub fn random_strategy(sc: Scenario, rng: &mut ChaCha8Rng) -> DeterministicStrategy {
    let mut pick = || (0..sc.m()).map(|_| rng.random_range(0..sc.d())).collect::<Vec<_>>();
    let a = pick();
    DeterministicStrategy::new(a, pick())
}

/// Convex mixture of a few deterministic behaviors.
pub fn random_local(sc: Scenario, rng: &mut ChaCha8Rng) -> Behavior {
    let mut acc = random_strategy(sc, rng).behavior(sc).unwrap();
    for k in 1..5 {
        let next = random_strategy(sc, rng).behavior(sc).unwrap();
        let keep = k as f64 / (k as f64 + 1.0) * rng.random_range(0.5..1.0);
        acc = acc.mix(&next, keep).unwrap();
    }
    acc
}

/// Correlation box with `b − a ≡ shift(x, y) (mod d)` and uniform marginals.
pub fn shifted_box(sc: Scenario, rng: &mut ChaCha8Rng) -> Behavior {
    let (m, d) = (sc.m(), sc.d());
    let shifts: Vec<usize> = (0..m * m).map(|_| rng.random_range(0..d)).collect();
    let mut p = vec![0.0; sc.joint_len()];
    for x in 0..m {
        for y in 0..m {
            for a in 0..d {
                let b = (a + shifts[x * m + y]) % d;
                p[sc.joint_index(x, y, a, b)] = 1.0 / d as f64;
            }
        }
    }
    Behavior::new(sc, p, None).unwrap()
}

/// Random no-signaling behavior, usually outside the local polytope.
pub fn random_ns(sc: Scenario, rng: &mut ChaCha8Rng) -> Behavior {
    let local = random_local(sc, rng);
    let nonlocal = shifted_box(sc, rng);
    let uniform = Behavior::uniform(sc);
    let mixed = nonlocal.mix(&local, rng.random_range(0.0..1.0)).unwrap();
    mixed.mix(&uniform, rng.random_range(0.5..1.0)).unwrap()
}

pub fn random_measurement(rng: &mut ChaCha8Rng) -> Measurement {
    let theta: f64 = rng.random_range(0.0..std::f64::consts::PI);
    let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let plus = [
        Complex64::new((theta / 2.0).cos(), 0.0),
        Complex64::from_polar((theta / 2.0).sin(), phase),
    ];
    let minus = [-plus[1].conj(), plus[0].conj()];
    let outer = |v: [Complex64; 2]| {
        [
            [v[0] * v[0].conj(), v[0] * v[1].conj()],
            [v[1] * v[0].conj(), v[1] * v[1].conj()],
        ]
    };
    Measurement::new([outer(plus), outer(minus)]).unwrap()
}

/// Adds a setting-dependent bias to Alice's outcome 0 and renormalizes.
pub fn signaling(b: &Behavior, rng: &mut ChaCha8Rng, size: f64) -> Behavior {
    let sc = b.scenario();
    let mut p = b.probabilities().to_vec();
    for x in 0..sc.m() {
        for y in 0..sc.m() {
            let bump = size * rng.random_range(0.0..1.0);
            for bo in 0..sc.d() {
                p[sc.joint_index(x, y, 0, bo)] += bump / sc.d() as f64;
            }
            let total: f64 = (0..sc.d())
                .flat_map(|a| (0..sc.d()).map(move |bo| (a, bo)))
                .map(|(a, bo)| p[sc.joint_index(x, y, a, bo)])
                .sum();
            for a in 0..sc.d() {
                for bo in 0..sc.d() {
                    p[sc.joint_index(x, y, a, bo)] /= total;
                }
            }
        }
    }
    Behavior::new(sc, p, None).unwrap()
}
