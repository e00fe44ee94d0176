//! End-to-end spectral solver: stationary distribution, generating function
//! on the outer circle, response-time systems, deconditioning.

use std::sync::Arc;

use log::info;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::contour::{GridSpec, SampleVector};
use crate::decondition::{self, MomentsResult};
use crate::error::Result;
use crate::model::ModelParams;
use crate::operators::{OperatorSet, Scheme};
use crate::qlen::{default_truncation, eval_g, solve_pi, PiGrid, DEFAULT_TOL};
use crate::rt_solver::{ConditionalSolution, SolverOptions, SystemTemplate};
use crate::talbot::{self, DensitySeries};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpectralConfig {
    pub n: usize,
    /// Outer radius; the model default when absent.
    pub r2: Option<f64>,
    pub scheme: Scheme,
    /// Initial truncation of the stationary chain; a load-based default when
    /// absent.
    pub n_trunc: Option<usize>,
    pub estimate_condition: bool,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig {
            n: 64,
            r2: None,
            scheme: Scheme::Truncated,
            n_trunc: None,
            estimate_condition: true,
        }
    }
}

impl SpectralConfig {
    pub fn grid(&self, params: &ModelParams) -> Result<GridSpec> {
        match self.r2 {
            Some(r2) => GridSpec::with_r2(self.n, r2),
            None => GridSpec::for_model(params, self.n),
        }
    }
}

pub struct SpectralModel {
    pub params: ModelParams,
    pub config: SpectralConfig,
    pub ops: Arc<OperatorSet>,
    pub pi: PiGrid,
    pub g: SampleVector,
    template: SystemTemplate,
}

impl SpectralModel {
    pub fn build(params: &ModelParams, config: SpectralConfig) -> Result<Self> {
        params.validate()?;
        let spec = config.grid(params)?;
        let ops = Arc::new(OperatorSet::build(&spec)?);
        SpectralModel::with_operators(params, config, ops)
    }

    /// Uses prebuilt operators, which must match the grid of `config`.
    pub fn with_operators(params: &ModelParams, config: SpectralConfig, ops: Arc<OperatorSet>) -> Result<Self> {
        params.validate()?;
        let spec = config.grid(params)?;
        if ops.spec != spec {
            return Err(crate::Error::RadiusMismatch(format!(
                "operators built for n = {}, r1 = {} but the run needs n = {}, r1 = {}",
                ops.spec.n, ops.spec.r1, spec.n, spec.r1
            )));
        }
        let n_trunc = config.n_trunc.unwrap_or_else(|| default_truncation(params));
        let pi = solve_pi(params, n_trunc, DEFAULT_TOL)?;
        info!("stationary distribution on side {}", pi.side());
        // In the truncated scheme E and F carry no coefficients of degree n
        // or more, so G is cut to match.
        let max_degree = match config.scheme {
            Scheme::Truncated => Some(spec.n),
            Scheme::Collocation => None,
        };
        let g = eval_g(&pi, &spec, max_degree)?;
        let options = SolverOptions {
            scheme: config.scheme,
            estimate_condition: config.estimate_condition,
            ..SolverOptions::default()
        };
        let template = SystemTemplate::new(params, &ops, options)?;
        Ok(SpectralModel {
            params: *params,
            config,
            ops,
            pi,
            g,
            template,
        })
    }

    pub fn spec(&self) -> GridSpec {
        self.ops.spec
    }

    pub fn conditional(&self, s: C64) -> Result<ConditionalSolution> {
        let gs = self.template.assemble(s)?;
        self.template.solve_conditional(&gs, &self.ops)
    }

    pub fn wstar(&self, s: C64) -> Result<C64> {
        let cs = self.conditional(s)?;
        Ok(decondition::wstar(&cs, &self.g, &self.params)?.w)
    }

    pub fn moments(&self, order: usize) -> Result<MomentsResult> {
        let mv = self.template.moment_vectors(&self.ops, order)?;
        decondition::moments(&mv, &self.g, &self.params, order)
    }

    pub fn density(&self, tpoints: &[f64], nodes: usize) -> Result<DensitySeries> {
        let mut series = talbot::invert(|s| self.wstar(s), tpoints, nodes)?;
        series.grid_n = Some(self.spec().n);
        Ok(series)
    }
}
