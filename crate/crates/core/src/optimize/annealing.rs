//! Simulated annealing with Gaussian moves and geometric cooling.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::objective::Objective;
use super::{clip_to_box, EngineOutcome, OptimizerConfig};

const INITIAL_TEMPERATURE: f64 = 1e-2;
const FINAL_TEMPERATURE: f64 = 1e-9;

pub(crate) fn run(
    obj: &Objective,
    start: &[f64],
    cfg: &OptimizerConfig,
    rng: &mut ChaCha8Rng,
) -> EngineOutcome {
    let n = obj.dim();
    let mut current = start.to_vec();
    clip_to_box(&mut current);
    let mut current_value = obj.value(&current);
    let mut best = (current.clone(), current_value);

    let iters = cfg.max_iters.max(1);
    let cooling = (FINAL_TEMPERATURE / INITIAL_TEMPERATURE).powf(1.0 / iters as f64);
    let mut temperature = INITIAL_TEMPERATURE;
    let mut proposal = vec![0.0; n];
    for k in 0..iters {
        // Move size shrinks from 4·step_init down to step_init/100.
        let progress = k as f64 / iters as f64;
        let scale = cfg.step_init * 4.0 * (1.0f64 / 400.0).powf(progress);
        for i in 0..n {
            let z: f64 = StandardNormal.sample(rng);
            proposal[i] = current[i] + scale * z;
        }
        clip_to_box(&mut proposal);
        let value = obj.value(&proposal);
        let delta = value - current_value;
        if delta >= 0.0 || rng.random::<f64>() < (delta / temperature).exp() {
            current.copy_from_slice(&proposal);
            current_value = value;
            if value > best.1 {
                best = (proposal.clone(), value);
            }
        }
        temperature *= cooling;
    }
    EngineOutcome {
        point: best.0,
        value: best.1,
    }
}
