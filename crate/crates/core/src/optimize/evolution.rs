//! Differential evolution, `rand/1/bin`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::objective::Objective;
use super::{clip_to_box, EngineOutcome, OptimizerConfig};

const DIFFERENTIAL_WEIGHT: f64 = 0.7;
const CROSSOVER: f64 = 0.9;

pub(crate) fn run(
    obj: &Objective,
    start: &[f64],
    cfg: &OptimizerConfig,
    rng: &mut ChaCha8Rng,
) -> EngineOutcome {
    let n = obj.dim();
    let pop_size = (2 * n).max(20);
    let mut pop: Vec<Vec<f64>> = Vec::with_capacity(pop_size);
    let mut first = start.to_vec();
    clip_to_box(&mut first);
    pop.push(first);
    while pop.len() < pop_size {
        pop.push((0..n).map(|_| rng.random_range(-1.0..=1.0)).collect());
    }
    let mut fitness: Vec<f64> = pop.iter().map(|p| obj.value(p)).collect();

    let mut trial = vec![0.0; n];
    for _ in 0..cfg.max_iters {
        for i in 0..pop_size {
            let [a, b, c] = distinct_three(rng, pop_size, i);
            let forced = rng.random_range(0..n);
            for j in 0..n {
                trial[j] = if j == forced || rng.random::<f64>() < CROSSOVER {
                    pop[a][j] + DIFFERENTIAL_WEIGHT * (pop[b][j] - pop[c][j])
                } else {
                    pop[i][j]
                };
            }
            clip_to_box(&mut trial);
            let ft = obj.value(&trial);
            if ft >= fitness[i] {
                pop[i].copy_from_slice(&trial);
                fitness[i] = ft;
            }
        }
        let (lo, hi) = fitness
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        if hi - lo < cfg.convergence_tol {
            break;
        }
    }
    let best = (0..pop_size)
        .fold(0, |best, i| if fitness[i] > fitness[best] { i } else { best });
    EngineOutcome {
        point: pop.swap_remove(best),
        value: fitness[best],
    }
}

fn distinct_three(rng: &mut ChaCha8Rng, len: usize, exclude: usize) -> [usize; 3] {
    let mut out = [exclude; 3];
    let mut filled = 0;
    while filled < 3 {
        let k = rng.random_range(0..len);
        if k != exclude && !out[..filled].contains(&k) {
            out[filled] = k;
            filled += 1;
        }
    }
    out
}
