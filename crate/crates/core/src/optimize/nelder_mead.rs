//! Nelder–Mead simplex search with dimension-adaptive coefficients
//! (Gao & Han), maximizing the objective on the clipped box.

use super::objective::Objective;
use super::{clip_to_box, EngineOutcome, OptimizerConfig};

/// Edge length of the initial simplex.
const INITIAL_EDGE: f64 = 0.25;

pub(crate) fn run(obj: &Objective, start: &[f64], cfg: &OptimizerConfig) -> EngineOutcome {
    let n = obj.dim();
    let nf = n as f64;
    let (reflect, expand) = (1.0, 1.0 + 2.0 / nf);
    let contract = 0.75 - 1.0 / (2.0 * nf);
    let shrink = 1.0 - 1.0 / nf;

    // Minimize the negated objective.
    let cost = |x: &mut Vec<f64>| {
        clip_to_box(x);
        -obj.value(x)
    };

    let mut x0 = start.to_vec();
    let f0 = cost(&mut x0);
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(x0.clone(), f0)];
    for i in 0..n {
        let mut v = x0.clone();
        v[i] += if v[i] + INITIAL_EDGE <= 1.0 { INITIAL_EDGE } else { -INITIAL_EDGE };
        let fv = cost(&mut v);
        simplex.push((v, fv));
    }

    for _ in 0..cfg.max_iters {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if (worst - best).abs() <= cfg.convergence_tol * 1e-3 && diameter(&simplex) < 1e-10 {
            break;
        }
        let mut centroid = vec![0.0; n];
        for (v, _) in &simplex[..n] {
            for i in 0..n {
                centroid[i] += v[i] / nf;
            }
        }
        let along = |coef: f64| -> Vec<f64> {
            (0..n)
                .map(|i| centroid[i] + coef * (centroid[i] - simplex[n].0[i]))
                .collect()
        };
        let mut xr = along(reflect);
        let fr = cost(&mut xr);
        if fr < best {
            let mut xe = along(reflect * expand);
            let fe = cost(&mut xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let outside = fr < worst;
            let mut xc = if outside { along(reflect * contract) } else { along(-contract) };
            let fc = cost(&mut xc);
            if (outside && fc <= fr) || (!outside && fc < worst) {
                simplex[n] = (xc, fc);
            } else {
                let anchor = simplex[0].0.clone();
                for (v, fv) in simplex.iter_mut().skip(1) {
                    for i in 0..n {
                        v[i] = anchor[i] + shrink * (v[i] - anchor[i]);
                    }
                    *fv = cost(v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (point, value) = simplex.swap_remove(0);
    EngineOutcome { point, value: -value }
}

fn diameter(simplex: &[(Vec<f64>, f64)]) -> f64 {
    let base = &simplex[0].0;
    simplex[1..]
        .iter()
        .map(|(v, _)| v.iter().zip(base).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max)
}
