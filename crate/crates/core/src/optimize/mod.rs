//! Maximization of the error-adjusted ratio
//!
//! ```text
//! R(s) = (Q(s) − ΔQ(s) + dm) / (C(s) + dm)
//! ```
//!
//! over joint coefficients `s ∈ [−1, 1]^{(dm)²}` for fixed count data. The
//! data is nonlocal exactly when the maximum exceeds 1, since
//! `Q − ΔQ − C = (R − 1)(C + dm)`.
//!
//! Four engines are available: projected subgradient ascent (the default)
//! and three direct searches treating `R` as a black box. Every engine runs
//! from `restarts` random starts plus a set of witness functionals; restart
//! `i` draws from its own ChaCha8 stream `(seed, i)` so results do not depend
//! on scheduling, and the best value wins with ties going to the lower index.

mod annealing;
mod evolution;
mod gradient;
mod nelder_mead;
mod objective;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lhv::lhv_bound;
use crate::model::{BellFunctional, Scenario};
use crate::stats::{error_propagation, frequencies, ns_project, CountTable};

pub use objective::{ratio, Evaluation, Objective, PENALTY};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Engine {
    Gradient,
    NelderMead,
    DifferentialEvolution,
    SimulatedAnnealing,
}

impl Engine {
    pub const ALL: [Engine; 4] = [
        Engine::Gradient,
        Engine::NelderMead,
        Engine::DifferentialEvolution,
        Engine::SimulatedAnnealing,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Engine::Gradient => "gradient",
            Engine::NelderMead => "nelder_mead",
            Engine::DifferentialEvolution => "differential_evolution",
            Engine::SimulatedAnnealing => "simulated_annealing",
        }
    }
}

impl std::str::FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Engine::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown engine `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub engine: Engine,
    pub restarts: usize,
    pub seed: u64,
    pub max_iters: usize,
    pub step_init: f64,
    pub convergence_tol: f64,
    pub denom_floor: f64,
    /// Evaluate `Q` on the NS-projected frequencies; `ΔQ` always uses raw counts.
    pub projected: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            engine: Engine::Gradient,
            restarts: 200,
            seed: 0,
            max_iters: 5000,
            step_init: 0.05,
            convergence_tol: 1e-9,
            denom_floor: 1e-6,
            projected: false,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.max_iters == 0 {
            return Err(Error::Domain("restarts and max_iters must be positive".into()));
        }
        for (name, v) in [
            ("step_init", self.step_init),
            ("convergence_tol", self.convergence_tol),
            ("denom_floor", self.denom_floor),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// `Q`, `ΔQ`, `C` and the derived figures of merit for one functional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionalScore {
    pub q: f64,
    pub delta_q: f64,
    pub c: f64,
    pub r: f64,
    /// `(Q − C)/ΔQ`; `None` when `ΔQ = 0`.
    pub sdn: Option<f64>,
    pub nonlocal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    /// Joint-only, every entry in `[−1, 1]`.
    pub functional: BellFunctional,
    pub r: f64,
    pub q: f64,
    pub delta_q: f64,
    pub c: f64,
    pub sdn: Option<f64>,
    pub nonlocal: bool,
    /// Best objective value reached by each start, in start order.
    pub engine_trace: Vec<f64>,
    pub best_start: usize,
}

/// A user functional mapped into the joint-only search box.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchPoint {
    pub functional: BellFunctional,
    /// Factor applied after absorbing marginals (1 when already in the box).
    pub rescale: f64,
}

/// Absorbs marginal terms into the joint block and, if any coefficient then
/// exceeds 1 in magnitude, rescales by `1/max|s|`. `R` is not scale
/// invariant, so the factor is reported.
pub fn to_search_point(f: &BellFunctional) -> SearchPoint {
    let absorbed = f.absorb_marginals();
    let peak = absorbed.max_abs_joint();
    if peak > 1.0 {
        SearchPoint {
            functional: absorbed.scaled(1.0 / peak),
            rescale: 1.0 / peak,
        }
    } else {
        SearchPoint {
            functional: absorbed,
            rescale: 1.0,
        }
    }
}

/// `(q − c)/ΔQ`, the gap in units of the experimental error.
pub fn sdn(q: f64, delta_q: f64, c: f64) -> Result<f64> {
    if !(delta_q > 0.0) {
        return Err(Error::Domain(format!("standard error must be positive, got {delta_q}")));
    }
    Ok((q - c) / delta_q)
}

/// Scores any functional (marginal terms allowed) on count data.
pub fn score_functional(
    f: &BellFunctional,
    counts: &CountTable,
    denom_floor: f64,
    projected: bool,
) -> Result<FunctionalScore> {
    let report = error_propagation(f, counts)?;
    let q = if projected {
        f.evaluate(&ns_project(&frequencies(counts, None)?)?)?
    } else {
        report.q
    };
    let c = lhv_bound(f)?.bound;
    let (r, _) = ratio(q, report.delta_q, c, f.scenario().shift(), denom_floor);
    Ok(FunctionalScore {
        q,
        delta_q: report.delta_q,
        c,
        r,
        sdn: sdn(q, report.delta_q, c).ok(),
        nonlocal: r > 1.0,
    })
}

/// `R` for a joint-only functional inside the search box.
pub fn objective_r(f: &BellFunctional, counts: &CountTable) -> Result<f64> {
    if f.has_marginals() {
        return Err(Error::Domain("objective is defined on joint-only functionals".into()));
    }
    if f.max_abs_joint() > 1.0 {
        return Err(Error::Domain("coefficients must lie in [-1, 1]".into()));
    }
    Ok(score_functional(f, counts, OptimizerConfig::default().denom_floor, false)?.r)
}

pub(crate) struct EngineOutcome {
    pub point: Vec<f64>,
    pub value: f64,
}

pub(crate) fn clip_to_box(s: &mut [f64]) {
    for v in s.iter_mut() {
        *v = v.clamp(-1.0, 1.0);
    }
}

fn restart_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Witnesses always tried: the zero functional and, in the CHSH scenario,
/// CHSH itself.
pub fn default_witnesses(sc: Scenario) -> Vec<BellFunctional> {
    let mut out = vec![BellFunctional::zero(sc)];
    if sc == Scenario::chsh() {
        out.push(BellFunctional::chsh());
    }
    out
}

pub fn maximize_r(counts: &CountTable, cfg: &OptimizerConfig) -> Result<OptimizationResult> {
    maximize_r_with_witnesses(counts, cfg, &[])
}

/// Like [`maximize_r`], additionally starting from each witness (mapped into
/// the box with [`to_search_point`]), so the result is never worse than any
/// of them.
pub fn maximize_r_with_witnesses(
    counts: &CountTable,
    cfg: &OptimizerConfig,
    witnesses: &[BellFunctional],
) -> Result<OptimizationResult> {
    cfg.validate()?;
    let sc = counts.scenario();
    let obj = Objective::new(counts, cfg.denom_floor, cfg.projected)?;
    let mut witness_starts = Vec::new();
    for w in default_witnesses(sc).iter().chain(witnesses) {
        sc.check_same(&w.scenario())?;
        witness_starts.push(to_search_point(w).functional.joint().to_vec());
    }
    let total = cfg.restarts + witness_starts.len();
    let outcomes: Vec<EngineOutcome> = (0..total)
        .into_par_iter()
        .map(|i| {
            let mut rng = restart_rng(cfg.seed, i);
            let start: Vec<f64> = if i < cfg.restarts {
                (0..obj.dim()).map(|_| rng.random_range(-1.0..=1.0)).collect()
            } else {
                witness_starts[i - cfg.restarts].clone()
            };
            run_engine(&obj, &start, cfg, &mut rng)
        })
        .collect();

    let best_start = (0..total).fold(0, |best, i| {
        if outcomes[i].value > outcomes[best].value {
            i
        } else {
            best
        }
    });
    if outcomes.iter().all(|o| o.value <= PENALTY) {
        return Err(Error::DegenerateObjective);
    }
    let functional = BellFunctional::joint_only(sc, outcomes[best_start].point.clone())?;
    let score = score_functional(&functional, counts, cfg.denom_floor, cfg.projected)?;
    Ok(OptimizationResult {
        functional,
        r: score.r,
        q: score.q,
        delta_q: score.delta_q,
        c: score.c,
        sdn: score.sdn,
        nonlocal: score.nonlocal,
        engine_trace: outcomes.iter().map(|o| o.value).collect(),
        best_start,
    })
}

fn run_engine(obj: &Objective, start: &[f64], cfg: &OptimizerConfig, rng: &mut ChaCha8Rng) -> EngineOutcome {
    match cfg.engine {
        Engine::Gradient => gradient::run(obj, start, cfg),
        Engine::NelderMead => nelder_mead::run(obj, start, cfg),
        Engine::DifferentialEvolution => evolution::run(obj, start, cfg, rng),
        Engine::SimulatedAnnealing => annealing::run(obj, start, cfg, rng),
    }
}
