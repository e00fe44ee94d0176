use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two exponential servers fed by one Poisson stream under JSQ routing.
///
/// Ties are broken towards queue 1 with probability `a1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub lambda: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub a1: f64,
}

impl ModelParams {
    pub fn new(lambda: f64, mu1: f64, mu2: f64, a1: f64) -> Result<Self> {
        let params = ModelParams {
            lambda,
            mu1,
            mu2,
            a1,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.lambda, self.mu1, self.mu2, self.a1]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParams("parameters must be finite".into()));
        }
        if self.lambda < 0.0 {
            return Err(Error::InvalidParams(format!(
                "arrival rate {} is negative",
                self.lambda
            )));
        }
        if self.mu1 <= 0.0 || self.mu2 <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "service rates must be positive (mu1 = {}, mu2 = {})",
                self.mu1, self.mu2
            )));
        }
        if !(0.0..=1.0).contains(&self.a1) {
            return Err(Error::InvalidParams(format!(
                "tie-break probability a1 = {} outside [0, 1]",
                self.a1
            )));
        }
        if self.lambda >= self.mu1 + self.mu2 {
            return Err(Error::Unstable {
                lambda: self.lambda,
                capacity: self.mu1 + self.mu2,
            });
        }
        Ok(())
    }

    pub fn a2(&self) -> f64 {
        1.0 - self.a1
    }

    /// The same system with the queue labels exchanged.
    pub fn swapped(&self) -> Self {
        ModelParams {
            lambda: self.lambda,
            mu1: self.mu2,
            mu2: self.mu1,
            a1: self.a2(),
        }
    }

    /// Radius of convergence assumed for the queue-length generating function.
    pub fn g_radius(&self) -> f64 {
        (self.mu1 + self.mu2) / self.lambda
    }
}

pub fn utilization(params: &ModelParams) -> f64 {
    params.lambda / (params.mu1 + params.mu2)
}
