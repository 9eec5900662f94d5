//! Coincidence counts, Poisson error propagation and the maximum-likelihood
//! (KL) projection onto the no-signaling polytope.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::model::{Behavior, BellFunctional, Scenario};

/// Identifies the count sampler: ChaCha8 seeded with `seed_from_u64`, one
/// `rand_distr` 0.5 Poisson draw per table entry in row-major order.
pub const SAMPLER_VERSION: &str = "chacha8-rand_distr0.5-poisson/1";

/// Raw coincidence counts `c(ab|xy)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountTable {
    scenario: Scenario,
    counts: Vec<u64>,
}

impl CountTable {
    pub fn new(scenario: Scenario, counts: Vec<u64>) -> Result<Self> {
        scenario.check_len("count table", counts.len(), scenario.joint_len())?;
        Ok(Self { scenario, counts })
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn count(&self, x: usize, y: usize, a: usize, b: usize) -> u64 {
        self.counts[self.scenario.joint_index(x, y, a, b)]
    }

    /// `Σ_{ab} c(ab|xy)` for every block, in block order.
    pub fn block_totals(&self) -> Vec<u64> {
        self.counts
            .chunks(self.scenario.block_len())
            .map(|blk| blk.iter().sum())
            .collect()
    }

    /// Fails naming the first block with no recorded events.
    pub fn check_positive(&self) -> Result<()> {
        let m = self.scenario.m();
        match self.block_totals().iter().position(|&t| t == 0) {
            Some(k) => Err(Error::DegenerateData { x: k / m, y: k % m }),
            None => Ok(()),
        }
    }
}

/// Relative frequencies `c(ab|xy) / Σ c(·|xy)`. Setting weights come from
/// `setting_weights` when given, else from normalized block totals.
pub fn frequencies(counts: &CountTable, setting_weights: Option<Vec<f64>>) -> Result<Behavior> {
    counts.check_positive()?;
    let sc = counts.scenario;
    let totals = counts.block_totals();
    let mut p = Vec::with_capacity(sc.joint_len());
    for (blk, &n) in counts.counts.chunks(sc.block_len()).zip(&totals) {
        let n = n as f64;
        p.extend(blk.iter().map(|&c| c as f64 / n));
    }
    let weights = match setting_weights {
        Some(w) => w,
        None => {
            let grand: u64 = totals.iter().sum();
            totals.iter().map(|&t| t as f64 / grand as f64).collect()
        }
    };
    Behavior::validated(sc, p, Some(weights), 1e-9)
}

/// Independent Poisson counts with mean `n_per_setting · p(ab|xy)`.
pub fn poisson_sample(behavior: &Behavior, n_per_setting: u64, seed: u64) -> CountTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n_per_setting as f64;
    let counts = behavior
        .probabilities()
        .iter()
        .map(|&p| {
            let mean = n * p;
            if mean > 0.0 {
                let draw: f64 = Poisson::new(mean).expect("finite positive mean").sample(&mut rng);
                draw as u64
            } else {
                0
            }
        })
        .collect();
    CountTable {
        scenario: behavior.scenario(),
        counts,
    }
}

/// Expected counts `round(n · p)`, i.e. a noiseless data set.
pub fn expected_counts(behavior: &Behavior, n_per_setting: u64) -> CountTable {
    let n = n_per_setting as f64;
    CountTable {
        scenario: behavior.scenario(),
        counts: behavior
            .probabilities()
            .iter()
            .map(|&p| (n * p).round() as u64)
            .collect(),
    }
}

/// `Q`, its Poisson standard error, and `∂Q/∂c(ab|xy)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub q: f64,
    pub delta_q: f64,
    pub partials: Vec<f64>,
}

/// Effective per-entry weights `s^{ab}_{xy} + (s^a_x + s^b_y)/m`.
pub fn effective_weights(f: &BellFunctional) -> Vec<f64> {
    let sc = f.scenario();
    let m = sc.m() as f64;
    let (ma, mb) = (f.marginal_a(), f.marginal_b());
    let mut w = f.joint().to_vec();
    for (i, v) in w.iter_mut().enumerate() {
        let (x, y, a, b) = sc.joint_coords(i);
        *v += (ma[sc.marginal_index(x, a)] + mb[sc.marginal_index(y, b)]) / m;
    }
    w
}

/// Value of `f` on the raw frequencies, with Gaussian propagation of
/// `(Δc)² = c` through the analytic partial derivatives.
pub fn error_propagation(f: &BellFunctional, counts: &CountTable) -> Result<ErrorReport> {
    f.scenario().check_same(&counts.scenario)?;
    counts.check_positive()?;
    let sc = counts.scenario;
    let w = effective_weights(f);
    let bl = sc.block_len();
    let mut q = 0.0;
    let mut var = 0.0;
    let mut partials = vec![0.0; sc.joint_len()];
    for (k, blk) in counts.counts.chunks(bl).enumerate() {
        let wb = &w[k * bl..(k + 1) * bl];
        let n: f64 = blk.iter().map(|&c| c as f64).sum();
        let weighted: f64 = blk.iter().zip(wb).map(|(&c, w)| w * c as f64).sum();
        let mut block_q = 0.0;
        for (j, (&c, &wj)) in blk.iter().zip(wb).enumerate() {
            let c = c as f64;
            block_q += c / n * wj;
            let d = (wj * n - weighted) / (n * n);
            partials[k * bl + j] = d;
            var += d * d * c;
        }
        q += block_q;
    }
    Ok(ErrorReport {
        q,
        delta_q: var.sqrt(),
        partials,
    })
}

/// `D_KL(f‖p) = Σ f(x,y) f(ab|xy) log₂[f(ab|xy)/p(ab|xy)]`, weighted by the
/// setting frequencies of `f`.
pub fn kl_divergence(f: &Behavior, p: &Behavior) -> Result<f64> {
    let sc = f.scenario();
    sc.check_same(&p.scenario())?;
    let bl = sc.block_len();
    let mut total = 0.0;
    for (k, &wk) in f.setting_weights().iter().enumerate() {
        let fb = &f.probabilities()[k * bl..(k + 1) * bl];
        let pb = &p.probabilities()[k * bl..(k + 1) * bl];
        let mut block = 0.0;
        for (j, (&fi, &pi)) in fb.iter().zip(pb).enumerate() {
            if fi <= 0.0 {
                continue;
            }
            if pi <= 0.0 {
                let (x, y, a, b) = sc.joint_coords(k * bl + j);
                return Err(Error::InfiniteDivergence { x, y, a, b });
            }
            block += fi * (fi / pi).log2();
        }
        total += wk * block;
    }
    Ok(total)
}

/// Linear constraints whose null space is the tangent space of the
/// no-signaling affine hull.
fn ns_constraints(sc: Scenario) -> DMatrix<f64> {
    let (m, d) = (sc.m(), sc.d());
    let n = sc.joint_len();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for x in 0..m {
        for y in 0..m {
            let mut r = vec![0.0; n];
            for a in 0..d {
                for b in 0..d {
                    r[sc.joint_index(x, y, a, b)] = 1.0;
                }
            }
            rows.push(r);
        }
    }
    for s in 0..m {
        for o in 0..d {
            for t in 1..m {
                let mut ra = vec![0.0; n];
                let mut rb = vec![0.0; n];
                for u in 0..d {
                    ra[sc.joint_index(s, t, o, u)] += 1.0;
                    ra[sc.joint_index(s, 0, o, u)] -= 1.0;
                    rb[sc.joint_index(t, s, u, o)] += 1.0;
                    rb[sc.joint_index(0, s, u, o)] -= 1.0;
                }
                rows.push(ra);
                rows.push(rb);
            }
        }
    }
    DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j])
}

/// Orthonormal basis (columns) of the null space of the NS constraints.
fn ns_tangent_basis(sc: Scenario) -> DMatrix<f64> {
    let e = ns_constraints(sc);
    let gram = e.transpose() * &e;
    let eig = SymmetricEigen::new(gram);
    let cols: Vec<DVector<f64>> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &v)| v.abs() < 1e-9)
        .map(|(i, _)| eig.eigenvectors.column(i).into_owned())
        .collect();
    DMatrix::from_columns(&cols)
}

/// Settings of the barrier path-following solver.
#[derive(Debug, Clone, Copy)]
pub struct ProjectionOptions {
    pub max_iterations: usize,
    /// Final barrier weight; the duality gap is at most `n · t_final`.
    pub t_final: f64,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            t_final: 1e-15,
        }
    }
}

/// Maximum-likelihood no-signaling behavior: the minimizer of
/// `kl_divergence(f, ·)` over the no-signaling polytope.
pub fn ns_project(f: &Behavior) -> Result<Behavior> {
    ns_project_with(f, ProjectionOptions::default())
}

pub fn ns_project_with(f: &Behavior, opts: ProjectionOptions) -> Result<Behavior> {
    let sc = f.scenario();
    let n = sc.joint_len();
    let bl = sc.block_len();
    let basis = ns_tangent_basis(sc);
    let start = vec![1.0 / bl as f64; n];
    // Per-entry data weight f(x,y)·f(ab|xy).
    let data: Vec<f64> = f
        .probabilities()
        .iter()
        .enumerate()
        .map(|(i, &p)| f.setting_weights()[i / bl] * p)
        .collect();

    let point = |z: &DVector<f64>| -> Vec<f64> {
        let dz = &basis * z;
        start.iter().zip(dz.iter()).map(|(s, d)| s + d).collect()
    };
    let barrier = |p: &[f64], t: f64| -> f64 {
        p.iter()
            .zip(&data)
            .map(|(&pi, &wi)| -(wi + t) * pi.max(1e-300).ln())
            .sum()
    };

    let mut z = DVector::zeros(basis.ncols());
    let mut p = start.clone();
    let mut t = 1e-2;
    let mut iterations = 0;
    loop {
        // Centering step for the current barrier weight.
        loop {
            if iterations >= opts.max_iterations {
                return Err(Error::Convergence {
                    iterations,
                    best: Box::new(finish(sc, p, f)),
                });
            }
            iterations += 1;
            let coef: Vec<f64> = p.iter().zip(&data).map(|(&pi, &wi)| (wi + t) / pi).collect();
            let grad_p = DVector::from_iterator(n, coef.iter().map(|c| -c));
            let g = basis.transpose() * grad_p;
            let diag = DVector::from_iterator(n, p.iter().zip(&coef).map(|(&pi, &c)| c / pi));
            let scaled = DMatrix::from_fn(n, basis.ncols(), |i, j| basis[(i, j)] * diag[i]);
            let h = basis.transpose() * scaled;
            let Some(chol) = h.cholesky() else {
                return Err(Error::Convergence {
                    iterations,
                    best: Box::new(finish(sc, p, f)),
                });
            };
            let step = -chol.solve(&g);
            let decrement = -g.dot(&step);
            if decrement <= 1e-20 {
                break;
            }
            let dp = &basis * &step;
            let mut s = 1.0;
            while p.iter().zip(dp.iter()).any(|(pi, di)| pi + s * di <= 0.0) {
                s *= 0.5;
            }
            let f0 = barrier(&p, t);
            let mut accepted = false;
            for _ in 0..60 {
                let cand = &z + &step * s;
                let pc = point(&cand);
                if barrier(&pc, t) <= f0 - 0.25 * s * decrement {
                    z = cand;
                    p = pc;
                    accepted = true;
                    break;
                }
                s *= 0.5;
            }
            if !accepted || decrement < 1e-16 {
                break;
            }
        }
        if t <= opts.t_final {
            break;
        }
        t = (t * 0.1).max(opts.t_final);
    }
    Ok(finish(sc, p, f))
}

fn finish(sc: Scenario, mut p: Vec<f64>, f: &Behavior) -> Behavior {
    for v in p.iter_mut() {
        *v = v.max(0.0);
    }
    Behavior::from_parts(sc, p, f.setting_weights().to_vec())
}
