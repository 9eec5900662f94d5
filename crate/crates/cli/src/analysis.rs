//! The full pipeline on one counts file: optimize, score the reference
//! functionals, compute detection thresholds and assemble the report.

use bellgap::loophole::{canonicalize, critical_efficiency, EfficiencyMode};
use bellgap::optimize::{
    maximize_r_with_witnesses, score_functional, to_search_point, FunctionalScore, OptimizerConfig,
};
use bellgap::quantum::{alpha_for_concurrence, tilted_realization};
use bellgap::stats::{frequencies, ns_project};
use bellgap::{tilted_functional, Behavior, BellFunctional};
use serde_json::{json, Value};

use crate::error::CliResult;
use crate::files::{functional_json, CountsFile, FORMAT_VERSION};

pub const OPTIMIZED: &str = "optimized";
pub const TILTED: &str = "tilted";

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Thresholds {
    pub asymmetric: Option<f64>,
    pub symmetric: Option<f64>,
}

/// Headline numbers per functional, used for the figure series.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub concurrence: Option<f64>,
    pub sdn_optimized: Option<f64>,
    pub sdn_tilted: Option<f64>,
    pub eta_optimized: Thresholds,
    pub eta_tilted: Thresholds,
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub report: Value,
    pub optimized: BellFunctional,
    pub summary: Summary,
}

/// Tilting parameter and concurrence recorded in a file's source block.
pub fn source_alpha(data: &CountsFile) -> CliResult<(Option<f64>, Option<f64>)> {
    let Some(src) = &data.source else {
        return Ok((None, None));
    };
    let alpha = match (src.alpha, src.concurrence) {
        (Some(a), _) => Some(a),
        (None, Some(c)) => Some(alpha_for_concurrence(c)?),
        (None, None) => None,
    };
    let concurrence = match (src.concurrence, alpha) {
        (Some(c), _) => Some(c),
        (None, Some(a)) => Some(tilted_realization(a)?.concurrence()),
        (None, None) => None,
    };
    Ok((alpha, concurrence))
}

fn number(v: f64) -> Value {
    // Non-finite values become null.
    Value::from(v)
}

fn optional(v: Option<f64>) -> Value {
    v.map_or(Value::Null, number)
}

fn score_block(name: &str, s: &FunctionalScore) -> Value {
    json!({
        "name": name,
        "q": number(s.q),
        "delta_q": number(s.delta_q),
        "c": number(s.c),
        "sdn": optional(s.sdn),
        "r": number(s.r),
        "nonlocal": s.nonlocal,
    })
}

fn thresholds(f: &BellFunctional, data: &Behavior) -> (Thresholds, Value) {
    let cf = match canonicalize(f, None) {
        Ok(cf) => cf,
        Err(e) => {
            let reason = json!({ "unavailable": e.to_string() });
            return (Thresholds::default(), json!({ "asymmetric": reason, "symmetric": reason }));
        }
    };
    let mut out = Thresholds::default();
    let mut block = serde_json::Map::new();
    for mode in [EfficiencyMode::AsymmetricBPerfect, EfficiencyMode::Symmetric] {
        let (key, entry) = match critical_efficiency(&cf, data, mode) {
            Ok(res) => match mode {
                EfficiencyMode::AsymmetricBPerfect => {
                    out.asymmetric = Some(res.eta_a);
                    ("asymmetric", json!({ "eta_a": number(res.eta_a), "eta_b": number(res.eta_b) }))
                }
                EfficiencyMode::Symmetric => {
                    out.symmetric = Some(res.eta_a);
                    ("symmetric", json!({ "eta": number(res.eta_a) }))
                }
            },
            Err(e) => {
                let key = if mode == EfficiencyMode::Symmetric { "symmetric" } else { "asymmetric" };
                (key, json!({ "unavailable": e.to_string() }))
            }
        };
        block.insert(key.into(), entry);
    }
    (out, Value::Object(block))
}

pub fn config_json(cfg: &OptimizerConfig) -> Value {
    json!({
        "engine": cfg.engine.name(),
        "restarts": cfg.restarts,
        "seed": cfg.seed,
        "max_iters": cfg.max_iters,
        "step_init": cfg.step_init,
        "convergence_tol": cfg.convergence_tol,
        "denom_floor": cfg.denom_floor,
        "projected": cfg.projected,
    })
}

/// Runs the optimizer on `data` with the tilted functional of its source
/// block (if any) and the given named witnesses as extra starts.
pub fn analyze(
    data: &CountsFile,
    digest: &str,
    witnesses: &[(String, BellFunctional)],
    cfg: &OptimizerConfig,
) -> CliResult<Analysis> {
    let counts = &data.counts;
    let (alpha, concurrence) = source_alpha(data)?;
    let mut named: Vec<(String, BellFunctional)> = Vec::new();
    if let Some(alpha) = alpha {
        if counts.scenario() == bellgap::Scenario::chsh() {
            named.push((TILTED.to_owned(), tilted_functional(alpha)?));
        }
    }
    named.extend(witnesses.iter().cloned());

    let mut deviations = Vec::new();
    if cfg.projected {
        deviations.push(
            "no-signaling projection substituted for quantum-set projection: Q and efficiencies use the \
             projected frequencies, ΔQ uses the raw counts"
                .to_owned(),
        );
    } else {
        deviations.push(
            "critical efficiencies use the setting-averaged marginals of the raw frequencies".to_owned(),
        );
    }
    for (name, f) in &named {
        if f.has_marginals() {
            let point = to_search_point(f);
            let mut note = format!("witness `{name}` absorbed into joint coefficients for the search start");
            if point.rescale != 1.0 {
                note.push_str(&format!(", rescaled by {}", point.rescale));
            }
            deviations.push(note);
        } else if f.max_abs_joint() > 1.0 {
            let point = to_search_point(f);
            deviations.push(format!("witness `{name}` rescaled by {} for the search start", point.rescale));
        }
    }

    let plain: Vec<BellFunctional> = named.iter().map(|(_, f)| f.clone()).collect();
    let result = maximize_r_with_witnesses(counts, cfg, &plain)?;

    let behavior = if cfg.projected {
        ns_project(&frequencies(counts, None)?)?
    } else {
        frequencies(counts, None)?
    };

    let mut scores = Vec::new();
    let mut efficiency = Vec::new();
    let mut summary = Summary {
        concurrence,
        sdn_optimized: result.sdn,
        sdn_tilted: None,
        eta_optimized: Thresholds::default(),
        eta_tilted: Thresholds::default(),
    };
    let optimized_score = FunctionalScore {
        q: result.q,
        delta_q: result.delta_q,
        c: result.c,
        r: result.r,
        sdn: result.sdn,
        nonlocal: result.nonlocal,
    };
    let all = std::iter::once((OPTIMIZED.to_owned(), result.functional.clone())).chain(named);
    for (name, f) in all {
        let score = if name == OPTIMIZED {
            optimized_score
        } else {
            score_functional(&f, counts, cfg.denom_floor, cfg.projected)?
        };
        scores.push(score_block(&name, &score));
        let (eta, mut block) = thresholds(&f, &behavior);
        block["name"] = Value::from(name.as_str());
        efficiency.push(block);
        if name == OPTIMIZED {
            summary.eta_optimized = eta;
        } else if name == TILTED {
            summary.sdn_tilted = score.sdn;
            summary.eta_tilted = eta;
        }
    }

    let sc = counts.scenario();
    let source = data
        .source
        .as_ref()
        .map_or(Value::Null, |s| serde_json::to_value(s).expect("source serializes"));
    let report = json!({
        "format_version": FORMAT_VERSION,
        "kind": "analysis_report",
        "version": env!("CARGO_PKG_VERSION"),
        "input": { "sha256": digest, "source": source },
        "scenario": { "m": sc.m(), "d": sc.d() },
        "config": config_json(cfg),
        "functionals": scores,
        "efficiency": efficiency,
        "optimizer": {
            "best_start": result.best_start,
            "starts": result.engine_trace.len(),
        },
        "optimized_functional": functional_json(&result.functional, Some(OPTIMIZED)),
        "deviations": deviations,
    });
    Ok(Analysis {
        report,
        optimized: result.functional,
        summary,
    })
}
