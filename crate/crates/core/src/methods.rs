//! Named solution methods behind one interface, so front ends can pick a
//! method by name and compare several on the same parameters.

use num_complex::Complex64 as C64;

use crate::baselines::{fcfs_moments, static_moments, StaticSplit};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::oracle;
use crate::pipeline::{SpectralConfig, SpectralModel};
use crate::simulator::{simulate, SimConfig, MOMENTS};

pub trait Method: Send + Sync {
    fn name(&self) -> &'static str;

    fn describe(&self) -> &'static str;

    /// `M_1 ..= M_K`.
    fn moments(&self, params: &ModelParams, order: usize) -> Result<Vec<f64>>;

    /// Response-time transform at `s`, where the method has one.
    fn lst(&self, _params: &ModelParams, s: C64) -> Result<C64> {
        Err(Error::Unsupported(format!(
            "method {} has no transform at s = {s}",
            self.name()
        )))
    }
}

pub struct Spectral(pub SpectralConfig);

impl Method for Spectral {
    fn name(&self) -> &'static str {
        "spectral"
    }

    fn describe(&self) -> &'static str {
        "generating-function equations solved on circle grids"
    }

    fn moments(&self, params: &ModelParams, order: usize) -> Result<Vec<f64>> {
        Ok(SpectralModel::build(params, self.0)?.moments(order)?.m)
    }

    fn lst(&self, params: &ModelParams, s: C64) -> Result<C64> {
        SpectralModel::build(params, self.0)?.wstar(s)
    }
}

/// Truncated balance equations; refined automatically when no truncation is
/// fixed.
pub struct Oracle(pub Option<usize>);

impl Method for Oracle {
    fn name(&self) -> &'static str {
        "oracle"
    }

    fn describe(&self) -> &'static str {
        "truncated balance equations solved directly"
    }

    fn moments(&self, params: &ModelParams, order: usize) -> Result<Vec<f64>> {
        let m = match self.0 {
            Some(n) => oracle::moments_direct(params, n, order)?,
            None => oracle::moments_refined(params, order, 1e-9)?.1,
        };
        Ok(m[1..].to_vec())
    }

    fn lst(&self, params: &ModelParams, s: C64) -> Result<C64> {
        let n = match self.0 {
            Some(n) => n,
            None => oracle::settled_truncation(params, s)?,
        };
        oracle::wstar_direct(params, s, n)
    }
}

pub struct Simulation {
    pub cycles: usize,
    pub seed: u64,
}

impl Method for Simulation {
    fn name(&self) -> &'static str {
        "simulation"
    }

    fn describe(&self) -> &'static str {
        "regenerative simulation"
    }

    fn moments(&self, params: &ModelParams, order: usize) -> Result<Vec<f64>> {
        if order > MOMENTS {
            return Err(Error::Unsupported(format!(
                "simulation estimates at most {MOMENTS} moments"
            )));
        }
        let est = simulate(&SimConfig::new(*params, self.cycles, self.seed))?;
        Ok(est.moments[..order].to_vec())
    }
}

/// Static splitting with the given `p1`, or the utilization-balancing one.
fn split(params: &ModelParams, p1: Option<f64>) -> Result<StaticSplit> {
    match p1 {
        Some(p1) => StaticSplit::new(params, p1),
        None => StaticSplit::balanced(params),
    }
}

pub struct StaticPs(pub Option<f64>);

impl Method for StaticPs {
    fn name(&self) -> &'static str {
        "static-ps"
    }

    fn describe(&self) -> &'static str {
        "random splitting to processor-sharing queues"
    }

    fn moments(&self, params: &ModelParams, order: usize) -> Result<Vec<f64>> {
        static_moments(&split(params, self.0)?, order)
    }

    fn lst(&self, params: &ModelParams, s: C64) -> Result<C64> {
        let sp = split(params, self.0)?;
        let mut total = C64::new(0.0, 0.0);
        for (p, mu) in [(sp.p1, params.mu1), (sp.p2(), params.mu2)] {
            if p > 0.0 {
                total += p * oracle::single_queue_lst(p * params.lambda, mu, s)?;
            }
        }
        Ok(total)
    }
}

pub struct StaticFcfs(pub Option<f64>);

impl Method for StaticFcfs {
    fn name(&self) -> &'static str {
        "static-fcfs"
    }

    fn describe(&self) -> &'static str {
        "random splitting to first-come-first-served queues"
    }

    fn moments(&self, params: &ModelParams, order: usize) -> Result<Vec<f64>> {
        Ok(fcfs_moments(&split(params, self.0)?, order))
    }

    fn lst(&self, params: &ModelParams, s: C64) -> Result<C64> {
        let sp = split(params, self.0)?;
        let mut total = C64::new(0.0, 0.0);
        for (p, mu) in [(sp.p1, params.mu1), (sp.p2(), params.mu2)] {
            if p > 0.0 {
                let rate = mu - p * params.lambda;
                total += p * rate / (s + rate);
            }
        }
        Ok(total)
    }
}

/// Settings shared by the standard set of methods.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodSettings {
    pub spectral: SpectralConfig,
    pub oracle_truncation: Option<usize>,
    pub cycles: usize,
    pub seed: u64,
    pub p1: Option<f64>,
}

impl Default for MethodSettings {
    fn default() -> Self {
        MethodSettings {
            spectral: SpectralConfig::default(),
            oracle_truncation: None,
            cycles: crate::simulator::DEFAULT_CYCLES,
            seed: 1,
            p1: None,
        }
    }
}

pub struct Registry {
    methods: Vec<Box<dyn Method>>,
}

impl Registry {
    pub fn empty() -> Self {
        Registry { methods: Vec::new() }
    }

    pub fn standard(settings: &MethodSettings) -> Self {
        let mut reg = Registry::empty();
        reg.register(Box::new(Spectral(settings.spectral)));
        reg.register(Box::new(Oracle(settings.oracle_truncation)));
        reg.register(Box::new(Simulation {
            cycles: settings.cycles,
            seed: settings.seed,
        }));
        reg.register(Box::new(StaticPs(settings.p1)));
        reg.register(Box::new(StaticFcfs(settings.p1)));
        reg
    }

    /// Replaces any method with the same name.
    pub fn register(&mut self, method: Box<dyn Method>) {
        self.methods.retain(|m| m.name() != method.name());
        self.methods.push(method);
    }

    pub fn get(&self, name: &str) -> Result<&dyn Method> {
        self.methods
            .iter()
            .find(|m| m.name() == name)
            .map(|m| m.as_ref())
            .ok_or_else(|| {
                Error::Unsupported(format!(
                    "unknown method {name:?}; available: {}",
                    self.names().join(", ")
                ))
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.methods.iter().map(|m| m.name()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_by_name() {
        let reg = Registry::standard(&MethodSettings::default());
        assert_eq!(
            reg.names(),
            ["spectral", "oracle", "simulation", "static-ps", "static-fcfs"]
        );
        assert!(matches!(reg.get("nope"), Err(Error::Unsupported(_))));
        let p = ModelParams::new(1.0, 0.4, 0.8, 0.5).unwrap();
        let m = reg.get("static-fcfs").unwrap().moments(&p, 1).unwrap();
        assert!((m[0] - 10.0).abs() < 1e-12);
        assert!(reg.get("simulation").unwrap().lst(&p, C64::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn registering_replaces() {
        let mut reg = Registry::standard(&MethodSettings::default());
        reg.register(Box::new(StaticPs(Some(0.3))));
        assert_eq!(reg.names().len(), 5);
        assert_eq!(reg.names().last(), Some(&"static-ps"));
    }

    #[test]
    fn static_transforms_match_moments() {
        let p = ModelParams::new(1.0, 0.4, 0.8, 0.5).unwrap();
        for method in [&StaticPs(None) as &dyn Method, &StaticFcfs(None)] {
            let h = 1e-5;
            let w = |s: f64| method.lst(&p, C64::new(s, 0.0)).unwrap().re;
            let slope = (w(h) - w(0.0)) / h;
            let m1 = method.moments(&p, 1).unwrap()[0];
            assert!((w(0.0) - 1.0).abs() < 1e-10);
            assert!((-slope - m1).abs() < 1e-2 * m1, "{}", method.name());
        }
    }

    #[test]
    fn spectral_and_oracle_agree() {
        let p = ModelParams::new(1.0, 0.9, 1.1, 0.5).unwrap();
        let spectral = Spectral(SpectralConfig { n: 32, ..Default::default() });
        let a = spectral.lst(&p, C64::new(0.5, 0.0)).unwrap();
        let b = Oracle(None).lst(&p, C64::new(0.5, 0.0)).unwrap();
        assert!((a - b).norm() < 1e-3);
    }
}
