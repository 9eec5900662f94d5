use crate::error::Result;
use crate::lhv::{LocalVertices, DEFAULT_ENUMERATION_CAP};
use crate::model::Scenario;
use crate::stats::{frequencies, ns_project, CountTable};

/// Objective value reported when `C + dm` falls below the denominator floor.
pub const PENALTY: f64 = -1e6;

/// Below this `ΔQ` the error term contributes no gradient.
const DELTA_Q_GRAD_FLOOR: f64 = 1e-12;

/// One evaluation of the ratio objective at a joint-only coefficient vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub q: f64,
    pub delta_q: f64,
    pub c: f64,
    pub r: f64,
    pub penalized: bool,
}

/// `(q − ΔQ + dm) / (c + dm)`, or [`PENALTY`] below the floor.
pub fn ratio(q: f64, delta_q: f64, c: f64, shift: f64, denom_floor: f64) -> (f64, bool) {
    let den = c + shift;
    if den < denom_floor {
        (PENALTY, true)
    } else {
        ((q - delta_q + shift) / den, false)
    }
}

/// Precomputed data for repeated evaluation of the ratio objective over
/// joint-only functionals.
#[derive(Debug, Clone)]
pub struct Objective {
    scenario: Scenario,
    /// Probabilities entering `Q`: raw frequencies or their NS projection.
    q_probs: Vec<f64>,
    counts: Vec<f64>,
    totals: Vec<f64>,
    vertices: LocalVertices,
    denom_floor: f64,
}

impl Objective {
    pub fn new(counts: &CountTable, denom_floor: f64, projected: bool) -> Result<Self> {
        let sc = counts.scenario();
        let freq = frequencies(counts, None)?;
        let q_probs = if projected {
            ns_project(&freq)?.probabilities().to_vec()
        } else {
            freq.probabilities().to_vec()
        };
        Ok(Self {
            scenario: sc,
            q_probs,
            counts: counts.counts().iter().map(|&c| c as f64).collect(),
            totals: counts.block_totals().iter().map(|&t| t as f64).collect(),
            vertices: LocalVertices::new(sc, DEFAULT_ENUMERATION_CAP)?,
            denom_floor,
        })
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn dim(&self) -> usize {
        self.scenario.joint_len()
    }

    pub(crate) fn vertices(&self) -> &LocalVertices {
        &self.vertices
    }

    fn q(&self, s: &[f64]) -> f64 {
        let bl = self.scenario.block_len();
        let mut q = 0.0;
        for (pb, sb) in self.q_probs.chunks(bl).zip(s.chunks(bl)) {
            let mut block = 0.0;
            for (p, w) in pb.iter().zip(sb) {
                block += p * w;
            }
            q += block;
        }
        q
    }

    /// `ΔQ` and, per block, `Σ_ab s·c`.
    fn delta_q(&self, s: &[f64]) -> f64 {
        let bl = self.scenario.block_len();
        let mut var = 0.0;
        for ((cb, sb), &n) in self.counts.chunks(bl).zip(s.chunks(bl)).zip(&self.totals) {
            let weighted: f64 = cb.iter().zip(sb).map(|(c, w)| w * c).sum();
            for (&c, &w) in cb.iter().zip(sb) {
                let d = (w * n - weighted) / (n * n);
                var += d * d * c;
            }
        }
        var.sqrt()
    }

    fn c(&self, s: &[f64]) -> f64 {
        (0..self.vertices.len())
            .map(|k| self.vertices.joint_score(k, s))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn evaluate(&self, s: &[f64]) -> Evaluation {
        let q = self.q(s);
        let delta_q = self.delta_q(s);
        let c = self.c(s);
        let (r, penalized) = ratio(q, delta_q, c, self.scenario.shift(), self.denom_floor);
        Evaluation {
            q,
            delta_q,
            c,
            r,
            penalized,
        }
    }

    /// Objective value only.
    pub fn value(&self, s: &[f64]) -> f64 {
        self.evaluate(s).r
    }

    /// Gradient of the numerator `Q − ΔQ` with respect to `s`.
    pub(crate) fn numerator_gradient(&self, s: &[f64], delta_q: f64, out: &mut [f64]) {
        out.copy_from_slice(&self.q_probs);
        if delta_q < DELTA_Q_GRAD_FLOOR {
            return;
        }
        let bl = self.scenario.block_len();
        for (k, &n) in self.totals.iter().enumerate() {
            let range = k * bl..(k + 1) * bl;
            let cb = &self.counts[range.clone()];
            let sb = &s[range.clone()];
            let weighted: f64 = cb.iter().zip(sb).map(|(c, w)| w * c).sum();
            for (j, i) in range.enumerate() {
                let d = (sb[j] * n - weighted) / (n * n);
                out[i] -= d * cb[j] / (n * delta_q);
            }
        }
    }
}
