//! Brute-force reference: the balance equations of the conditional
//! response-time transforms solved on a truncated state box, and the direct
//! deconditioning sum.
//!
//! `U[i][j]` is the transform of the response time of a job that has just
//! joined queue 1 when queue 1 holds `i` other jobs and queue 2 holds `j`;
//! `V` is the same for queue 2. Each row of the system is the balance
//! equation multiplied by `i + 1`; references outside the box are dropped.

use log::debug;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::qlen::{solve_pi_fixed, PiGrid};
use crate::sparse::{self, Factored};

pub const MIN_TRUNCATION: usize = 8;
pub const MAX_TRUNCATION: usize = 512;
pub const DEFAULT_START: usize = 64;
pub const REFINE_TOL: f64 = 1e-9;
pub const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct TruncatedField {
    pub n_trunc: usize,
    pub s: C64,
    pub u: Vec<C64>,
    pub v: Vec<C64>,
}

impl TruncatedField {
    pub fn u(&self, i: usize, j: usize) -> C64 {
        self.u[i * (self.n_trunc + 1) + j]
    }

    pub fn v(&self, i: usize, j: usize) -> C64 {
        self.v[i * (self.n_trunc + 1) + j]
    }
}

/// The linear system for `U`; the `V` system is this one for the swapped
/// parameters, transposed.
struct QueueSystem {
    n_trunc: usize,
    lu: Factored,
    weights: Vec<f64>,
}

impl QueueSystem {
    fn new(params: &ModelParams, s: C64, n_trunc: usize) -> Result<Self> {
        let side = n_trunc + 1;
        let idx = |i: usize, j: usize| i * side + j;
        let (lam, mu1, mu2, a1, a2) = (params.lambda, params.mu1, params.mu2, params.a1, params.a2());
        let mut entries = Vec::with_capacity(6 * side * side);
        for i in 0..side {
            for j in 0..side {
                let row = idx(i, j);
                let w = (i + 1) as f64;
                let mut put = |ii: usize, jj: usize, v: C64| {
                    if ii <= n_trunc && jj <= n_trunc && v != C64::new(0.0, 0.0) {
                        entries.push((row, idx(ii, jj), v));
                    }
                };
                let busy2 = if j > 0 { mu2 } else { 0.0 };
                put(i, j, (s + lam + mu1 + busy2) * w);
                // the next arrival sees i + 1 jobs at queue 1, j at queue 2
                if i + 1 < j {
                    put(i + 1, j, C64::new(-lam * w, 0.0));
                } else if i + 1 > j {
                    put(i, j + 1, C64::new(-lam * w, 0.0));
                } else {
                    put(i + 1, j, C64::new(-lam * a1 * w, 0.0));
                    put(i, j + 1, C64::new(-lam * a2 * w, 0.0));
                }
                if j > 0 {
                    put(i, j - 1, C64::new(-mu2 * w, 0.0));
                }
                if i > 0 {
                    put(i - 1, j, C64::new(-mu1 * i as f64, 0.0));
                }
            }
        }
        let dim = side * side;
        let matrix = sparse::from_triplets(dim, dim, &entries);
        let lu = Factored::new(matrix).map_err(|reason| Error::Solver {
            s: s.to_string(),
            reason,
        })?;
        let weights = (0..dim).map(|r| (r / side + 1) as f64).collect();
        Ok(QueueSystem { n_trunc, lu, weights })
    }

    fn solve(&self, rhs: &[C64], s: C64) -> Result<Vec<C64>> {
        let x = self.lu.solve(rhs);
        let residual = self.lu.relative_residual(&x, rhs);
        if !(residual <= RESIDUAL_TOL) {
            return Err(Error::Solver {
                s: s.to_string(),
                reason: format!("oracle residual {residual:e} above {RESIDUAL_TOL:e}"),
            });
        }
        Ok(x)
    }

    /// The transform and its first `order` derivatives in `s`.
    fn derivatives(&self, rate: f64, s: C64, order: usize) -> Result<Vec<Vec<C64>>> {
        let dim = self.weights.len();
        let mut out = vec![self.solve(&vec![C64::new(rate, 0.0); dim], s)?];
        for k in 1..=order {
            let prev = &out[k - 1];
            let rhs: Vec<C64> = prev
                .iter()
                .zip(&self.weights)
                .map(|(u, w)| u * (-(k as f64) * w))
                .collect();
            out.push(self.solve(&rhs, s)?);
        }
        Ok(out)
    }
}

fn transpose(values: &[C64], side: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); values.len()];
    for i in 0..side {
        for j in 0..side {
            out[j * side + i] = values[i * side + j];
        }
    }
    out
}

fn check_truncation(n_trunc: usize) -> Result<()> {
    if n_trunc < MIN_TRUNCATION {
        return Err(Error::InvalidParams(format!(
            "oracle truncation {n_trunc} below {MIN_TRUNCATION}"
        )));
    }
    Ok(())
}

/// `U` and `V` on the box of side `N + 1`, without refinement.
pub fn solve_fixed(params: &ModelParams, s: C64, n_trunc: usize) -> Result<TruncatedField> {
    params.validate()?;
    check_truncation(n_trunc)?;
    let (u, v) = derivative_fields(params, s, n_trunc, 0)?;
    Ok(TruncatedField {
        n_trunc,
        s,
        u: u.into_iter().next().unwrap_or_default(),
        v: v.into_iter().next().unwrap_or_default(),
    })
}

/// One field per derivative order.
type Fields = Vec<Vec<C64>>;

fn derivative_fields(
    params: &ModelParams,
    s: C64,
    n_trunc: usize,
    order: usize,
) -> Result<(Fields, Fields)> {
    let side = n_trunc + 1;
    let u_sys = QueueSystem::new(params, s, n_trunc)?;
    let v_sys = QueueSystem::new(&params.swapped(), s, n_trunc)?;
    debug_assert_eq!(u_sys.n_trunc, n_trunc);
    let u = u_sys.derivatives(params.mu1, s, order)?;
    let v = v_sys
        .derivatives(params.mu2, s, order)?
        .iter()
        .map(|field| transpose(field, side))
        .collect();
    Ok((u, v))
}

/// Solves on growing boxes until `U[0][0]` moves by less than `tol`.
pub fn solve_truncated(params: &ModelParams, s: C64, n_trunc: usize, tol: f64) -> Result<TruncatedField> {
    let mut level = n_trunc;
    let mut field = solve_fixed(params, s, level)?;
    loop {
        if level * 2 > MAX_TRUNCATION {
            return Err(Error::TruncationFailure(format!(
                "U[0][0] not settled to {tol:e} by N={level}"
            )));
        }
        let finer = solve_fixed(params, s, level * 2)?;
        let moved = (finer.u(0, 0) - field.u(0, 0)).norm();
        debug!("oracle N={} -> {}: U00 moved {moved:e}", level, level * 2);
        level *= 2;
        field = finer;
        if moved < tol {
            return Ok(field);
        }
    }
}

/// `Σ (I_{i<j} U + I_{i>j} V + a1 I_{i=j} U + a2 I_{i=j} V) π_{ij}` over the box.
pub fn decondition_sum(params: &ModelParams, u: &[C64], v: &[C64], pi: &PiGrid) -> C64 {
    let side = pi.side();
    let (a1, a2) = (params.a1, params.a2());
    let mut total = C64::new(0.0, 0.0);
    for i in 0..side {
        for j in 0..side {
            let k = i * side + j;
            let weight = if i < j {
                u[k]
            } else if i > j {
                v[k]
            } else {
                a1 * u[k] + a2 * v[k]
            };
            total += weight * pi.get(i, j);
        }
    }
    total
}

/// Truncation level at which the oracle is settled for this `s`.
pub fn settled_truncation(params: &ModelParams, s: C64) -> Result<usize> {
    Ok(solve_truncated(params, s, DEFAULT_START, REFINE_TOL)?.n_trunc)
}

pub fn wstar_direct(params: &ModelParams, s: C64, n_trunc: usize) -> Result<C64> {
    let field = solve_fixed(params, s, n_trunc)?;
    let pi = solve_pi_fixed(params, n_trunc)?;
    Ok(decondition_sum(params, &field.u, &field.v, &pi))
}

/// `M_0 ..= M_K` from the derivative fields on one box.
pub fn moments_direct(params: &ModelParams, n_trunc: usize, order: usize) -> Result<Vec<f64>> {
    params.validate()?;
    check_truncation(n_trunc)?;
    let zero = C64::new(0.0, 0.0);
    let (u, v) = derivative_fields(params, zero, n_trunc, order)?;
    let pi = solve_pi_fixed(params, n_trunc)?;
    Ok((0..=order)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * decondition_sum(params, &u[k], &v[k], &pi).re
        })
        .collect())
}

/// Moments on growing boxes until every moment settles to relative `tol`.
pub fn moments_refined(params: &ModelParams, order: usize, tol: f64) -> Result<(usize, Vec<f64>)> {
    let mut level = DEFAULT_START;
    let mut last = moments_direct(params, level, order)?;
    while level * 2 <= MAX_TRUNCATION {
        level *= 2;
        let next = moments_direct(params, level, order)?;
        let settled = next
            .iter()
            .zip(&last)
            .all(|(a, b)| (a - b).abs() <= tol * a.abs().max(1.0));
        last = next;
        if settled {
            return Ok((level, last));
        }
    }
    Err(Error::TruncationFailure(format!(
        "moments not settled to {tol:e} by N={level}"
    )))
}

fn check_single_queue(lambda: f64, mu: f64) -> Result<()> {
    if !(lambda >= 0.0 && mu > 0.0 && lambda < mu) {
        return Err(Error::Unstable {
            lambda,
            capacity: mu,
        });
    }
    Ok(())
}

/// Doubles the truncation until every value moves by at most `1e-12`
/// relative.
fn refine_single<F>(what: &str, mut solve: F) -> Result<Vec<C64>>
where
    F: FnMut(usize) -> Result<Vec<C64>>,
{
    let mut level = DEFAULT_START;
    let mut last: Option<Vec<C64>> = None;
    while level <= 1 << 16 {
        let next = solve(level)?;
        if let Some(prev) = &last {
            let settled = next
                .iter()
                .zip(prev)
                .all(|(a, b)| (a - b).norm() <= 1e-12 * a.norm().max(1.0));
            if settled {
                return Ok(next);
            }
        }
        last = Some(next);
        level *= 2;
    }
    Err(Error::TruncationFailure(format!("single-queue {what} not settled")))
}

/// One M/M/1-PS queue with arrival rate `lambda` and service rate `mu`:
/// response-time moments `M_0 ..= M_K` from the same tagged-job equations
/// with the second queue removed.
pub fn single_queue_moments(lambda: f64, mu: f64, order: usize) -> Result<Vec<f64>> {
    check_single_queue(lambda, mu)?;
    let zero = C64::new(0.0, 0.0);
    let values = refine_single("moments", |level| {
        let fields = single_queue_system(lambda, mu, zero, level)?.derivatives(mu, zero, order)?;
        Ok(fields
            .iter()
            .enumerate()
            .map(|(k, field)| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                C64::new(sign * single_queue_decondition(lambda, mu, field).re, 0.0)
            })
            .collect())
    })?;
    Ok(values.iter().map(|v| v.re).collect())
}

/// Response-time transform of one M/M/1-PS queue at `s`.
pub fn single_queue_lst(lambda: f64, mu: f64, s: C64) -> Result<C64> {
    check_single_queue(lambda, mu)?;
    let values = refine_single("transform", |level| {
        let field = single_queue_system(lambda, mu, s, level)?.derivatives(mu, s, 0)?;
        Ok(vec![single_queue_decondition(lambda, mu, &field[0])])
    })?;
    Ok(values[0])
}

fn single_queue_decondition(lambda: f64, mu: f64, field: &[C64]) -> C64 {
    // stationary queue length is geometric
    let rho = lambda / mu;
    field
        .iter()
        .enumerate()
        .map(|(i, u)| u * ((1.0 - rho) * rho.powi(i as i32)))
        .sum()
}

fn single_queue_system(lambda: f64, mu: f64, s: C64, n_trunc: usize) -> Result<QueueSystem> {
    let side = n_trunc + 1;
    let mut entries = Vec::with_capacity(3 * side);
    for i in 0..side {
        let w = (i + 1) as f64;
        entries.push((i, i, (s + lambda + mu) * w));
        if i < n_trunc && lambda > 0.0 {
            entries.push((i, i + 1, C64::new(-lambda * w, 0.0)));
        }
        if i > 0 {
            entries.push((i, i - 1, C64::new(-mu * i as f64, 0.0)));
        }
    }
    let matrix = sparse::from_triplets(side, side, &entries);
    let lu = Factored::new(matrix).map_err(|reason| Error::Solver { s: s.to_string(), reason })?;
    Ok(QueueSystem {
        n_trunc,
        lu,
        weights: (0..side).map(|i| (i + 1) as f64).collect(),
    })
}
