//! Static splitting: each arrival independently joins queue 1 with
//! probability `p1`, so the queues are independent M/M/1 systems.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::oracle::single_queue_moments;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StaticSplit {
    pub params: ModelParams,
    pub p1: f64,
}

impl StaticSplit {
    /// Requires both queues to be stable: `1 − μ2/λ < p1 < μ1/λ`.
    pub fn new(params: &ModelParams, p1: f64) -> Result<Self> {
        params.validate()?;
        let (lo, hi) = Self::window(params);
        if !(p1 > lo && p1 < hi) {
            return Err(Error::Unstable {
                lambda: params.lambda,
                capacity: if p1 >= hi { params.mu1 } else { params.mu2 },
            });
        }
        Ok(StaticSplit { params: *params, p1 })
    }

    /// Open interval of stable splitting probabilities.
    pub fn window(params: &ModelParams) -> (f64, f64) {
        let lam = params.lambda;
        let lo = (1.0 - params.mu2 / lam).max(0.0);
        let hi = (params.mu1 / lam).min(1.0);
        // the end points themselves are fine when the other queue is idle
        let lo = if lo == 0.0 { -f64::EPSILON } else { lo };
        let hi = if hi == 1.0 { 1.0 + f64::EPSILON } else { hi };
        (lo, hi)
    }

    /// Splitting that equalizes the two utilizations.
    pub fn balanced(params: &ModelParams) -> Result<Self> {
        Self::new(params, params.mu1 / (params.mu1 + params.mu2))
    }

    pub fn p2(&self) -> f64 {
        1.0 - self.p1
    }

    pub fn utilizations(&self) -> (f64, f64) {
        let lam = self.params.lambda;
        (self.p1 * lam / self.params.mu1, self.p2() * lam / self.params.mu2)
    }

    fn queues(&self) -> [(f64, f64, f64); 2] {
        let lam = self.params.lambda;
        [
            (self.p1, self.p1 * lam, self.params.mu1),
            (self.p2(), self.p2() * lam, self.params.mu2),
        ]
    }
}

/// `M_1 ..= M_K` of the mixture when both queues serve by processor sharing.
pub fn static_moments(split: &StaticSplit, order: usize) -> Result<Vec<f64>> {
    let mut total = vec![0.0; order];
    for (p, lam, mu) in split.queues() {
        if p == 0.0 {
            continue;
        }
        let m = single_queue_moments(lam, mu, order)?;
        for (t, v) in total.iter_mut().zip(&m[1..]) {
            *t += p * v;
        }
    }
    Ok(total)
}

/// Same mixture with first-come-first-served queues, whose sojourn times
/// are exponential with rate `μ − λ`.
pub fn fcfs_moments(split: &StaticSplit, order: usize) -> Vec<f64> {
    (1..=order)
        .map(|k| {
            let factorial: f64 = (1..=k).map(|i| i as f64).product();
            split
                .queues()
                .iter()
                .filter(|(p, _, _)| *p > 0.0)
                .map(|(p, lam, mu)| p * factorial / (mu - lam).powi(k as i32))
                .sum()
        })
        .collect()
}
