//! Linear systems for the conditional response-time generating functions
//! `E(x, y, s)` (tagged job at queue 1) and `F(x, y, s)` (queue 2).

use log::warn;
use num_complex::Complex64 as C64;

use crate::contour::{build_grid, coeffs, resample, sample, CoeffGrid, GridSpec, SampleVector};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::operators::{mult_x, mult_y, OperatorSet, Scheme, SpectralOp};
use crate::sparse::{Factored, Pencil};

pub const RESIDUAL_TOL: f64 = 1e-8;
pub const CONDITION_WARN: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub scheme: Scheme,
    /// Estimate condition numbers at every `s` (a handful of extra solves).
    pub estimate_condition: bool,
    pub residual_tol: f64,
    pub condition_warn: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            scheme: Scheme::Truncated,
            estimate_condition: true,
            residual_tol: RESIDUAL_TOL,
            condition_warn: CONDITION_WARN,
        }
    }
}

/// Left-hand sides of both equations as `L0 + s·S`, ready to factor at any
/// `s`. `S = I + Λ(x)M10` for E and `I + Λ(y)M01` for F.
pub struct SystemTemplate {
    pub params: ModelParams,
    pub spec: GridSpec,
    pub options: SolverOptions,
    pencil_e: Pencil,
    pencil_f: Pencil,
    slope_e: SpectralOp,
    slope_f: SpectralOp,
    rhs_e: Vec<C64>,
    rhs_f: Vec<C64>,
}

impl SystemTemplate {
    pub fn new(params: &ModelParams, ops: &OperatorSet, options: SolverOptions) -> Result<Self> {
        params.validate()?;
        let spec = ops.spec;
        if spec.r1 >= 1.0 {
            return Err(Error::InvalidGrid(
                "the response-time equations need r1 < 1 to keep x = 1 off the grid".into(),
            ));
        }
        let (lam, mu1, mu2, a1, a2) = (params.lambda, params.mu1, params.mu2, params.a1, params.a2());
        let id = &ops.identity;
        let lx = mult_x(&spec, options.scheme);
        let ly = mult_y(&spec, options.scheme);
        // Λ(λ + (1−x)μ1 + (1−y)μ2)
        let rates = id
            .scale(lam + mu1 + mu2)
            .sub(&lx.scale(mu1))
            .sub(&ly.scale(mu2));

        let slope_e = id.add(&lx.compose(&ops.m10));
        let l0_e = rates
            .compose(&slope_e)
            .sub(&ops.v0.add(&lx.compose(&ops.v0).compose(&ops.m10)).scale(mu2))
            .sub(&ops.m10.compose(&id.sub(&ops.pgeq)).scale(lam))
            .sub(&slope_e.compose(&ops.pgeq).compose(&ops.b).scale(lam))
            .sub(&ops.m10.compose(&ops.peq).scale(lam * a1))
            .sub(&ly.compose(&slope_e).compose(&ops.peq).compose(&ops.d).scale(lam * a2));

        let slope_f = id.add(&ly.compose(&ops.m01));
        let l0_f = rates
            .compose(&slope_f)
            .sub(&ops.u0.add(&ly.compose(&ops.u0).compose(&ops.m01)).scale(mu1))
            .sub(&ops.m01.compose(&id.sub(&ops.pleq)).scale(lam))
            .sub(&slope_f.compose(&ops.pleq).compose(&ops.a).scale(lam))
            .sub(&ops.m01.compose(&ops.peq).scale(lam * a2))
            .sub(&lx.compose(&slope_f).compose(&ops.peq).compose(&ops.c).scale(lam * a1));

        let unit_rhs = unit_rhs(&spec, options.scheme)?;
        let solver_err = |reason: String| Error::Solver {
            s: "symbolic".into(),
            reason,
        };
        Ok(SystemTemplate {
            params: *params,
            spec,
            options,
            pencil_e: Pencil::new(&l0_e.mat, &slope_e.mat).map_err(solver_err)?,
            pencil_f: Pencil::new(&l0_f.mat, &slope_f.mat).map_err(solver_err)?,
            rhs_e: unit_rhs.values.iter().map(|v| v * mu1).collect(),
            rhs_f: unit_rhs.values.iter().map(|v| v * mu2).collect(),
            slope_e,
            slope_f,
        })
    }

    /// Factors both systems at `s`.
    pub fn assemble(&self, s: C64) -> Result<GammaSystem> {
        if !s.re.is_finite() || !s.im.is_finite() {
            return Err(Error::Solver {
                s: s.to_string(),
                reason: "transform variable is not finite".into(),
            });
        }
        let factor = |pencil: &Pencil| -> Result<(Factored, f64)> {
            let lu = pencil.factor(s).map_err(|reason| Error::Solver {
                s: s.to_string(),
                reason,
            })?;
            let cond = if self.options.estimate_condition {
                lu.condition_estimate()
            } else {
                f64::NAN
            };
            if !(cond <= 1e16) && self.options.estimate_condition {
                return Err(Error::Solver {
                    s: s.to_string(),
                    reason: format!("numerically singular, condition estimate {cond:e}"),
                });
            }
            if cond > self.options.condition_warn {
                warn!("condition estimate {cond:e} at s = {s} exceeds {:e}", self.options.condition_warn);
            }
            Ok((lu, cond))
        };
        let (gamma_e, cond_e) = factor(&self.pencil_e)?;
        let (gamma_f, cond_f) = factor(&self.pencil_f)?;
        Ok(GammaSystem {
            s,
            gamma_e,
            gamma_f,
            cond_e,
            cond_f,
        })
    }

    pub fn solve_conditional(&self, gs: &GammaSystem, ops: &OperatorSet) -> Result<ConditionalSolution> {
        let e = self.checked_solve(&gs.gamma_e, &self.rhs_e, gs.s)?;
        let f = self.checked_solve(&gs.gamma_f, &self.rhs_f, gs.s)?;
        Ok(ConditionalSolution::from_coeffs(
            gs.s,
            self.to_grid(e),
            self.to_grid(f),
            ops,
        ))
    }

    /// Vectors of `∂^k E/∂s^k` and `∂^k F/∂s^k` at `s = 0`, `k = 0..=order`,
    /// from one factorization.
    pub fn moment_vectors(&self, ops: &OperatorSet, order: usize) -> Result<MomentVectors> {
        let zero = C64::new(0.0, 0.0);
        let gs = self.assemble(zero)?;
        let mut e = self.checked_solve(&gs.gamma_e, &self.rhs_e, zero)?;
        let mut f = self.checked_solve(&gs.gamma_f, &self.rhs_f, zero)?;
        let mut orders = vec![ConditionalSolution::from_coeffs(
            zero,
            self.to_grid(e.clone()),
            self.to_grid(f.clone()),
            ops,
        )];
        for k in 1..=order {
            let scale = C64::new(-(k as f64), 0.0);
            let rhs_e: Vec<C64> = self
                .slope_e
                .apply_coeffs(&self.to_grid(e))
                .values
                .iter()
                .map(|v| v * scale)
                .collect();
            let rhs_f: Vec<C64> = self
                .slope_f
                .apply_coeffs(&self.to_grid(f))
                .values
                .iter()
                .map(|v| v * scale)
                .collect();
            e = self.checked_solve(&gs.gamma_e, &rhs_e, zero)?;
            f = self.checked_solve(&gs.gamma_f, &rhs_f, zero)?;
            orders.push(ConditionalSolution::from_coeffs(
                zero,
                self.to_grid(e.clone()),
                self.to_grid(f.clone()),
                ops,
            ));
        }
        Ok(MomentVectors {
            orders,
            cond_e: gs.cond_e,
            cond_f: gs.cond_f,
        })
    }

    fn checked_solve(&self, lu: &Factored, rhs: &[C64], s: C64) -> Result<Vec<C64>> {
        let x = lu.solve(rhs);
        if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Solver {
                s: s.to_string(),
                reason: "solution is not finite".into(),
            });
        }
        let residual = lu.relative_residual(&x, rhs);
        if residual > self.options.residual_tol {
            return Err(Error::Solver {
                s: s.to_string(),
                reason: format!("relative residual {residual:e} above {:e}", self.options.residual_tol),
            });
        }
        Ok(x)
    }

    fn to_grid(&self, values: Vec<C64>) -> CoeffGrid {
        CoeffGrid {
            n: self.spec.n,
            values,
        }
    }
}

/// Coefficients of `1/((1−x)(1−y))` as seen by the scheme: the truncated
/// series (all ones) or the aliased grid samples.
fn unit_rhs(spec: &GridSpec, scheme: Scheme) -> Result<CoeffGrid> {
    match scheme {
        Scheme::Truncated => Ok(CoeffGrid {
            n: spec.n,
            values: vec![C64::new(1.0, 0.0); spec.n * spec.n],
        }),
        Scheme::Collocation => {
            let grid = build_grid(spec)?;
            let v = sample(&grid.cx, &grid.cy, |x, y| 1.0 / ((1.0 - x) * (1.0 - y)))?;
            Ok(coeffs(&v))
        }
    }
}

/// Factorized left-hand sides at one value of `s`.
pub struct GammaSystem {
    pub s: C64,
    pub gamma_e: Factored,
    pub gamma_f: Factored,
    /// 1-norm condition estimates in the coefficient basis (NaN when not
    /// estimated).
    pub cond_e: f64,
    pub cond_f: f64,
}

pub fn assemble_gamma(
    params: &ModelParams,
    ops: &OperatorSet,
    s: C64,
    options: SolverOptions,
) -> Result<(SystemTemplate, GammaSystem)> {
    let template = SystemTemplate::new(params, ops, options)?;
    let gs = template.assemble(s)?;
    Ok((template, gs))
}

/// `E`, `F` and their partializations at one value of `s`.
#[derive(Debug, Clone)]
pub struct ConditionalSolution {
    pub s: C64,
    pub e_coeffs: CoeffGrid,
    pub f_coeffs: CoeffGrid,
    pub e: SampleVector,
    pub f: SampleVector,
    /// `(I − P≥) e`
    pub e_lt: SampleVector,
    /// `(I − P≤) f`
    pub f_gt: SampleVector,
    pub e_eq: SampleVector,
    pub f_eq: SampleVector,
}

impl ConditionalSolution {
    pub fn from_coeffs(s: C64, e_coeffs: CoeffGrid, f_coeffs: CoeffGrid, ops: &OperatorSet) -> Self {
        let r = ops.spec.r1;
        let id = &ops.identity;
        let e_lt = id.sub(&ops.pgeq).apply_coeffs(&e_coeffs);
        let f_gt = id.sub(&ops.pleq).apply_coeffs(&f_coeffs);
        let e_eq = ops.peq.apply_coeffs(&e_coeffs);
        let f_eq = ops.peq.apply_coeffs(&f_coeffs);
        ConditionalSolution {
            s,
            e: resample(&e_coeffs, r),
            f: resample(&f_coeffs, r),
            e_lt: resample(&e_lt, r),
            f_gt: resample(&f_gt, r),
            e_eq: resample(&e_eq, r),
            f_eq: resample(&f_eq, r),
            e_coeffs,
            f_coeffs,
        }
    }

    /// `U*_{i,j}(s)`: coefficient of `x^i y^j` in `E`.
    pub fn u(&self, i: usize, j: usize) -> C64 {
        self.e_coeffs.get(i, j)
    }

    /// `V*_{i,j}(s)`: coefficient of `x^i y^j` in `F`.
    pub fn v(&self, i: usize, j: usize) -> C64 {
        self.f_coeffs.get(i, j)
    }
}

/// Solves both equations at `s`, building the system from scratch.
pub fn solve_conditional(
    params: &ModelParams,
    ops: &OperatorSet,
    s: C64,
    options: SolverOptions,
) -> Result<ConditionalSolution> {
    let (template, gs) = assemble_gamma(params, ops, s, options)?;
    template.solve_conditional(&gs, ops)
}

/// Derivative vectors at `s = 0`; `orders[k]` holds `∂^k/∂s^k` of E and F
/// with their partializations.
#[derive(Debug, Clone)]
pub struct MomentVectors {
    pub orders: Vec<ConditionalSolution>,
    pub cond_e: f64,
    pub cond_f: f64,
}

impl MomentVectors {
    pub fn e_k(&self, k: usize) -> &SampleVector {
        &self.orders[k].e
    }

    pub fn f_k(&self, k: usize) -> &SampleVector {
        &self.orders[k].f
    }

    pub fn max_order(&self) -> usize {
        self.orders.len() - 1
    }
}

pub fn moment_vectors(
    params: &ModelParams,
    ops: &OperatorSet,
    order: usize,
    options: SolverOptions,
) -> Result<MomentVectors> {
    SystemTemplate::new(params, ops, options)?.moment_vectors(ops, order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ops_for(params: &ModelParams, n: usize) -> OperatorSet {
        OperatorSet::build(&GridSpec::for_model(params, n).unwrap()).unwrap()
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn lone_customer_without_arrivals() {
        let p = ModelParams::new(0.0, 0.7, 1.3, 0.5).unwrap();
        let ops = ops_for(&p, 16);
        for s in [c(0.0, 0.0), c(0.5, 0.0), c(1.0, 1.0)] {
            let sol = solve_conditional(&p, &ops, s, SolverOptions::default()).unwrap();
            assert!((sol.u(0, 0) - 0.7 / (s + 0.7)).norm() < 1e-12);
            assert!((sol.v(0, 0) - 1.3 / (s + 1.3)).norm() < 1e-12);
        }
        let mv = moment_vectors(&p, &ops, 2, SolverOptions::default()).unwrap();
        // −dU/ds at 0 = 1/μ1, d²U/ds² at 0 = 2/μ1²
        assert_relative_eq!(-mv.orders[1].u(0, 0).re, 1.0 / 0.7, max_relative = 1e-12);
        assert_relative_eq!(mv.orders[2].u(0, 0).re, 2.0 / 0.49, max_relative = 1e-12);
    }

    #[test]
    fn medium_load_at_zero_is_well_conditioned() {
        let p = ModelParams::new(1.0, 0.9, 1.1, 0.0).unwrap();
        let ops = ops_for(&p, 64);
        let (template, gs) = assemble_gamma(&p, &ops, c(0.0, 0.0), SolverOptions::default()).unwrap();
        assert!(gs.cond_e.is_finite() && gs.cond_e < CONDITION_WARN);
        assert!(gs.cond_f.is_finite() && gs.cond_f < CONDITION_WARN);
        let sol = template.solve_conditional(&gs, &ops).unwrap();
        let tol = 1e-9;
        for v in sol.e_coeffs.values.iter().chain(&sol.f_coeffs.values) {
            assert!(v.im.abs() < tol && v.re > -tol && v.re < 1.0 + tol, "{v}");
        }
    }

    #[test]
    fn symmetric_queues_mirror_e_and_f() {
        let p = ModelParams::new(1.0, 1.0, 1.0, 0.5).unwrap();
        let ops = ops_for(&p, 24);
        for s in [c(0.0, 0.0), c(0.7, 0.0), c(1.0, 1.0)] {
            let sol = solve_conditional(&p, &ops, s, SolverOptions::default()).unwrap();
            assert!(sol.f.max_abs_diff(&sol.e.transposed()) < 1e-10);
        }
    }

    #[test]
    fn swapped_parameters_map_e_to_f() {
        let p = ModelParams::new(1.0, 0.8, 1.4, 0.3).unwrap();
        let ops = ops_for(&p, 24);
        let s = c(0.4, 0.2);
        let a = solve_conditional(&p, &ops, s, SolverOptions::default()).unwrap();
        let b = solve_conditional(&p.swapped(), &ops, s, SolverOptions::default()).unwrap();
        assert!(a.e.max_abs_diff(&b.f.transposed()) < 1e-10);
        assert!(a.f.max_abs_diff(&b.e.transposed()) < 1e-10);
    }

    #[test]
    fn partializations_recompose() {
        let p = ModelParams::new(1.0, 0.9, 1.1, 0.3).unwrap();
        let ops = ops_for(&p, 16);
        let sol = solve_conditional(&p, &ops, c(0.5, 0.0), SolverOptions::default()).unwrap();
        let strict_gt = ops.pgeq.sub(&ops.peq).apply(&sol.e).unwrap();
        let total: Vec<C64> = (0..sol.e.len())
            .map(|i| sol.e_lt.values[i] + strict_gt.values[i] + sol.e_eq.values[i])
            .collect();
        let total = SampleVector::new(16, sol.e.radius, total).unwrap();
        assert!(total.max_abs_diff(&sol.e) < 1e-12);
    }

    #[test]
    fn first_derivative_matches_difference_quotient() {
        let p = ModelParams::new(1.0, 0.9, 1.1, 0.5).unwrap();
        let ops = ops_for(&p, 16);
        let mv = moment_vectors(&p, &ops, 1, SolverOptions::default()).unwrap();
        let h = 1e-5;
        let plus = solve_conditional(&p, &ops, c(h, 0.0), SolverOptions::default()).unwrap();
        let minus = solve_conditional(&p, &ops, c(-h, 0.0), SolverOptions::default()).unwrap();
        for (i, j) in [(0, 0), (1, 2), (3, 1)] {
            let fd = (plus.u(i, j) - minus.u(i, j)) / (2.0 * h);
            assert!((fd - mv.orders[1].u(i, j)).norm() < 1e-6);
        }
        // the zeroth order is the plain solve at s = 0
        let sol0 = solve_conditional(&p, &ops, c(0.0, 0.0), SolverOptions::default()).unwrap();
        assert!(sol0.e.max_abs_diff(mv.e_k(0)) < 1e-14);
    }

    #[test]
    fn collocation_scheme_solves() {
        let p = ModelParams::new(1.0, 0.9, 1.1, 0.0).unwrap();
        let ops = ops_for(&p, 32);
        let options = SolverOptions {
            scheme: Scheme::Collocation,
            ..SolverOptions::default()
        };
        let col = solve_conditional(&p, &ops, c(0.5, 0.0), options).unwrap();
        let tru = solve_conditional(&p, &ops, c(0.5, 0.0), SolverOptions::default()).unwrap();
        // the schemes differ only through aliasing of the top coefficients
        assert!((col.u(0, 0) - tru.u(0, 0)).norm() < 1e-4);
        assert!((col.u(0, 0) - tru.u(0, 0)).norm() > 0.0);
    }

    #[test]
    fn rejects_unit_radius() {
        let p = ModelParams::new(1.0, 0.9, 1.1, 0.0).unwrap();
        let ops = OperatorSet::build(&GridSpec::new(8, 1.0).unwrap()).unwrap();
        assert!(matches!(
            SystemTemplate::new(&p, &ops, SolverOptions::default()),
            Err(Error::InvalidGrid(_))
        ));
    }
}
