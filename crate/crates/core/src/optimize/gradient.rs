//! Projected (sub)gradient ascent on the ratio objective.
//!
//! `C` is a max of linear maps, so at or near a kink a single subgradient
//! may not be an ascent direction. Every strategy whose score is within
//! `ε` of the bound is treated as active, with `ε` tied to the trial step,
//! and the ascent direction is the min-norm element of the convex hull of
//! the corresponding objective gradients, projected onto the tangent cone
//! of the box.

use super::objective::{Evaluation, Objective};
use super::{clip_to_box, EngineOutcome, OptimizerConfig};

/// At most this many active strategies enter the hull.
const MAX_ACTIVE: usize = 64;
/// Consecutive sub-tolerance improvements before declaring convergence.
const PATIENCE: usize = 20;
const MIN_STEP: f64 = 1e-13;

pub(crate) fn run(obj: &Objective, start: &[f64], cfg: &OptimizerConfig) -> EngineOutcome {
    let n = obj.dim();
    let m = obj.scenario().m() as f64;
    let shift = obj.scenario().shift();
    let mut s = start.to_vec();
    clip_to_box(&mut s);
    let mut ev = obj.evaluate(&s);
    let mut step = cfg.step_init;
    let mut grad_num = vec![0.0; n];
    let mut scores = Vec::new();
    let mut trial = vec![0.0; n];
    let mut quiet = 0;

    for _ in 0..cfg.max_iters {
        if ev.penalized {
            break;
        }
        obj.numerator_gradient(&s, ev.delta_q, &mut grad_num);
        obj.vertices().joint_scores_into(&s, &mut scores);
        let num = ev.q - ev.delta_q + shift;
        let den = ev.c + shift;

        let mut t = step;
        let mut accepted: Option<(Vec<f64>, Evaluation)> = None;
        let mut last_active: Option<Vec<usize>> = None;
        let mut dir = vec![0.0; n];
        while t >= MIN_STEP {
            let eps = (2.0 * m * t).max(1e-12);
            let active = active_set(&scores, ev.c, eps);
            if last_active.as_ref() != Some(&active) {
                dir = ascent_direction(obj, &s, &active, &grad_num, num, den, step);
                last_active = Some(active);
            }
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < 1e-15 {
                // Stationary for this active set; a smaller ε may still help.
                t *= 0.5;
                continue;
            }
            for i in 0..n {
                trial[i] = s[i] + t * dir[i] / norm;
            }
            clip_to_box(&mut trial);
            let cand = obj.evaluate(&trial);
            if cand.r > ev.r {
                accepted = Some((trial.clone(), cand));
                break;
            }
            t *= 0.5;
        }
        let Some((next, cand)) = accepted else {
            break;
        };
        let gain = cand.r - ev.r;
        s = next;
        ev = cand;
        step = (2.0 * t).min(1.0);
        if gain < cfg.convergence_tol {
            quiet += 1;
            if quiet >= PATIENCE {
                break;
            }
        } else {
            quiet = 0;
        }
    }
    EngineOutcome { point: s, value: ev.r }
}

/// Indices of strategies scoring within `eps` of `c`, best first.
fn active_set(scores: &[f64], c: f64, eps: f64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).filter(|&k| scores[k] >= c - eps).collect();
    if idx.len() > MAX_ACTIVE {
        idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        idx.truncate(MAX_ACTIVE);
        idx.sort_unstable();
    }
    idx
}

/// Steepest feasible ascent direction: the min-norm element of
/// `P_T(conv{(∇N·D − N·T_k)/D²})` over active strategies `k`, where `P_T`
/// projects onto the tangent cone of the box at `s` (coordinates within
/// `bound_eps` of a face count as on it).
fn ascent_direction(
    obj: &Objective,
    s: &[f64],
    active: &[usize],
    grad_num: &[f64],
    num: f64,
    den: f64,
    bound_eps: f64,
) -> Vec<f64> {
    let n = grad_num.len();
    let scale = 1.0 / (den * den);
    let base: Vec<f64> = grad_num.iter().map(|g| g * den * scale).collect();
    let gradients: Vec<Vec<f64>> = active
        .iter()
        .map(|&k| {
            let mut g = base.clone();
            for &i in obj.vertices().joint_indices(k) {
                g[i] -= num * scale;
            }
            g
        })
        .collect();
    let faces: Vec<Face> = s
        .iter()
        .map(|&x| {
            if x >= 1.0 - bound_eps {
                Face::Upper
            } else if x <= -1.0 + bound_eps {
                Face::Lower
            } else {
                Face::Interior
            }
        })
        .collect();
    let weights = min_norm_weights(&gradients, &faces);
    let mut out = vec![0.0; n];
    for (w, g) in weights.iter().zip(&gradients) {
        for i in 0..n {
            out[i] += w * g[i];
        }
    }
    project_tangent(&faces, &mut out);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Face {
    Interior,
    Upper,
    Lower,
}

/// Simplex weights minimizing `‖P_T(Σ λ_k g_k)‖²`, by projected gradient.
pub(crate) fn min_norm_weights(vectors: &[Vec<f64>], faces: &[Face]) -> Vec<f64> {
    let k = vectors.len();
    let mut lambda = vec![1.0 / k as f64; k];
    if k == 1 {
        return lambda;
    }
    let n = faces.len();
    let gram: Vec<f64> = (0..k * k)
        .map(|ij| {
            let (i, j) = (ij / k, ij % k);
            vectors[i].iter().zip(&vectors[j]).map(|(a, b)| a * b).sum()
        })
        .collect();
    // The projection is 1-Lipschitz, so the Gram bound still applies.
    let lipschitz = (0..k)
        .map(|i| (0..k).map(|j| gram[i * k + j].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    if lipschitz <= 0.0 {
        return lambda;
    }
    let mut combo = vec![0.0; n];
    let mut grad = vec![0.0; k];
    for _ in 0..400 {
        combo.iter_mut().for_each(|v| *v = 0.0);
        for (w, g) in lambda.iter().zip(vectors) {
            for i in 0..n {
                combo[i] += w * g[i];
            }
        }
        project_tangent(faces, &mut combo);
        for (gk, v) in grad.iter_mut().zip(vectors) {
            *gk = v.iter().zip(&combo).map(|(a, b)| a * b).sum();
        }
        let previous = lambda.clone();
        for i in 0..k {
            lambda[i] -= grad[i] / lipschitz;
        }
        project_simplex(&mut lambda);
        let moved = lambda.iter().zip(&previous).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if moved < 1e-12 {
            break;
        }
    }
    lambda
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &mut [f64]) {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let t = (cumulative - 1.0) / (i + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
}

/// Drops components that would leave the box through an active face.
fn project_tangent(faces: &[Face], dir: &mut [f64]) {
    for (face, d) in faces.iter().zip(dir.iter_mut()) {
        match face {
            Face::Upper if *d > 0.0 => *d = 0.0,
            Face::Lower if *d < 0.0 => *d = 0.0,
            _ => {}
        }
    }
}
