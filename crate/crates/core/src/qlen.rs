//! Equilibrium queue lengths of the JSQ chain and their generating function.

use std::f64::consts::PI;
use std::io::Write;

use log::{debug, warn};
use num_complex::Complex64 as C64;

use crate::contour::{Contour, GridSpec, SampleVector};
use crate::error::{Error, Result};
use crate::model::{utilization, ModelParams};
use crate::sparse::{self, Factored};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const MAX_TRUNCATION: usize = 512;
pub const MIN_TRUNCATION: usize = 4;

/// Stationary probabilities `pi[i][j]` of `i` jobs at queue 1 and `j` at
/// queue 2, on the box `0 <= i, j <= N`.
#[derive(Debug, Clone)]
pub struct PiGrid {
    pub n_trunc: usize,
    pub pi: Vec<f64>,
    pub boundary_mass: f64,
}

impl PiGrid {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pi[i * (self.n_trunc + 1) + j]
    }

    pub fn side(&self) -> usize {
        self.n_trunc + 1
    }

    pub fn total(&self) -> f64 {
        self.pi.iter().sum()
    }

    /// `(P(queue 1 busy), P(queue 2 busy))`.
    pub fn busy(&self) -> (f64, f64) {
        let side = self.side();
        let mut b1 = 0.0;
        let mut b2 = 0.0;
        for i in 0..side {
            for j in 0..side {
                let p = self.get(i, j);
                if i > 0 {
                    b1 += p;
                }
                if j > 0 {
                    b2 += p;
                }
            }
        }
        (b1, b2)
    }

    pub fn mean_jobs(&self) -> f64 {
        let side = self.side();
        let mut total = 0.0;
        for i in 0..side {
            for j in 0..side {
                total += (i + j) as f64 * self.get(i, j);
            }
        }
        total
    }

    /// `|λ_eff − μ1·P(busy1) − μ2·P(busy2)|` where `λ_eff` excludes arrivals
    /// blocked at the corner of the box.
    pub fn flow_balance_gap(&self, params: &ModelParams) -> f64 {
        let (b1, b2) = self.busy();
        let corner = self.get(self.n_trunc, self.n_trunc);
        let accepted = params.lambda * (1.0 - corner);
        (accepted - params.mu1 * b1 - params.mu2 * b2).abs()
    }

    /// Max-norm of `πQ` over every state of the truncated chain.
    pub fn balance_residual(&self, params: &ModelParams) -> f64 {
        let side = self.side();
        let mut flow = vec![0.0; side * side];
        for (from, to, rate) in transitions(params, self.n_trunc) {
            let p = self.pi[from] * rate;
            flow[from] -= p;
            flow[to] += p;
        }
        flow.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// Mass on shells `max(i, j) = k`, weighted by `r^(i+j)`.
    pub fn shell_masses(&self, r: f64) -> Vec<f64> {
        let side = self.side();
        let mut shells = vec![0.0; side];
        let powers: Vec<f64> = (0..side).map(|k| r.powi(k as i32)).collect();
        for i in 0..side {
            for j in 0..side {
                shells[i.max(j)] += self.get(i, j) * powers[i] * powers[j];
            }
        }
        shells
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "i,j,probability")?;
        let side = self.side();
        for i in 0..side {
            for j in 0..side {
                writeln!(out, "{i},{j},{:e}", self.get(i, j))?;
            }
        }
        Ok(())
    }
}

/// Transitions `(from, to, rate)` of the chain on the box; arrivals that
/// would leave the box are blocked.
fn transitions(params: &ModelParams, n_trunc: usize) -> Vec<(usize, usize, f64)> {
    let side = n_trunc + 1;
    let idx = |i: usize, j: usize| i * side + j;
    let mut out = Vec::with_capacity(4 * side * side);
    let lambda = params.lambda;
    for i in 0..side {
        for j in 0..side {
            let s = idx(i, j);
            if lambda > 0.0 {
                if i < j {
                    out.push((s, idx(i + 1, j), lambda));
                } else if i > j {
                    out.push((s, idx(i, j + 1), lambda));
                } else if i < n_trunc {
                    if params.a1 > 0.0 {
                        out.push((s, idx(i + 1, j), lambda * params.a1));
                    }
                    if params.a2() > 0.0 {
                        out.push((s, idx(i, j + 1), lambda * params.a2()));
                    }
                }
            }
            if i > 0 {
                out.push((s, idx(i - 1, j), params.mu1));
            }
            if j > 0 {
                out.push((s, idx(i, j - 1), params.mu2));
            }
        }
    }
    out
}

/// Solves the chain on the box of side `N + 1` without refinement.
pub fn solve_pi_fixed(params: &ModelParams, n_trunc: usize) -> Result<PiGrid> {
    params.validate()?;
    let side = n_trunc + 1;
    let dim = side * side;
    // Rows are global balance equations (columns of the generator); the
    // equation of state (0,0) is replaced by the pin pi[0][0] = 1.
    let mut entries = Vec::with_capacity(6 * dim);
    for (from, to, rate) in transitions(params, n_trunc) {
        if to != 0 {
            entries.push((to, from, C64::new(rate, 0.0)));
        }
        if from != 0 {
            entries.push((from, from, C64::new(-rate, 0.0)));
        }
    }
    entries.push((0, 0, C64::new(1.0, 0.0)));
    let matrix = sparse::from_triplets(dim, dim, &entries);
    let lu = Factored::new(matrix).map_err(|reason| Error::Solver {
        s: "stationary".into(),
        reason,
    })?;
    let mut rhs = vec![C64::new(0.0, 0.0); dim];
    rhs[0] = C64::new(1.0, 0.0);
    let x = lu.solve(&rhs);
    let mut pi: Vec<f64> = x.iter().map(|v| v.re.max(0.0)).collect();
    let total: f64 = pi.iter().sum();
    if !total.is_finite() || total <= 0.0 {
        return Err(Error::Solver {
            s: "stationary".into(),
            reason: "stationary solve produced no mass".into(),
        });
    }
    for p in &mut pi {
        *p /= total;
    }
    let mut grid = PiGrid {
        n_trunc,
        pi,
        boundary_mass: 0.0,
    };
    grid.boundary_mass = *grid.shell_masses(1.0).last().unwrap_or(&0.0);
    Ok(grid)
}

/// Truncation level used when none is given.
pub fn default_truncation(params: &ModelParams) -> usize {
    if utilization(params) <= 0.6 {
        128
    } else {
        256
    }
}

/// Solves the truncated chain, doubling `N` until the mass on the outer
/// shell of the box is below `tol`.
pub fn solve_pi(params: &ModelParams, n_trunc: usize, tol: f64) -> Result<PiGrid> {
    params.validate()?;
    if n_trunc < MIN_TRUNCATION {
        return Err(Error::InvalidParams(format!(
            "truncation level {n_trunc} below {MIN_TRUNCATION}"
        )));
    }
    let mut level = n_trunc;
    loop {
        let grid = solve_pi_fixed(params, level)?;
        debug!("stationary solve N={level}: boundary mass {:e}", grid.boundary_mass);
        if grid.boundary_mass < tol {
            return Ok(grid);
        }
        if level * 2 > MAX_TRUNCATION {
            return Err(Error::TruncationFailure(format!(
                "boundary mass {:e} still above {tol:e} at N={level}",
                grid.boundary_mass
            )));
        }
        level *= 2;
    }
}

/// Number of shells worth summing when evaluating G at radius `r`, and
/// whether the weighted tail fell below `tol`. Summation stops at the
/// smallest weighted shell: past it the computed probabilities are
/// dominated by rounding, which the weight `r^(i+j)` would amplify.
pub fn effective_degree(pi: &PiGrid, r: f64, tol: f64) -> (usize, bool) {
    let shells = pi.shell_masses(r);
    let (k_min, m_min) = shells
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (k, &m)| if m <= acc.1 { (k, m) } else { acc });
    (k_min + 1, m_min < tol)
}

/// `G(x, y) = Σ pi[i][j] x^i y^j` at every grid pair on the radius-`r2`
/// circle, summing terms with `i, j < max_degree` (all retained shells when
/// `None`).
pub fn eval_g(pi: &PiGrid, spec: &GridSpec, max_degree: Option<usize>) -> Result<SampleVector> {
    let r2 = spec.r2();
    let outer = Contour::new(r2, spec.n)?;
    let (retained, converged) = effective_degree(pi, r2, DEFAULT_TOL);
    if !converged {
        warn!(
            "queue-length tail does not decay fast enough for r2 = {r2}; \
             generating function truncated at degree {retained}"
        );
    }
    let degree = max_degree.map_or(retained, |d| d.min(retained));
    Ok(sum_series(pi, &outer, degree))
}

/// Separable direct summation of the series with `i, j < degree`.
fn sum_series(pi: &PiGrid, contour: &Contour, degree: usize) -> SampleVector {
    let n = contour.n;
    let degree = degree.min(pi.side());
    // powers[i][m] = (r e^{2πi m/n})^i with the angle reduced exactly
    let mut powers = vec![C64::new(0.0, 0.0); degree * n];
    let mut modulus = 1.0;
    for i in 0..degree {
        for m in 0..n {
            let phase = 2.0 * PI * ((i * m) % n) as f64 / n as f64;
            powers[i * n + m] = C64::from_polar(modulus, phase);
        }
        modulus *= contour.radius;
    }
    // inner[i][m2] = Σ_j pi[i][j] y_{m2}^j
    let mut inner = vec![C64::new(0.0, 0.0); degree * n];
    for i in 0..degree {
        for j in 0..degree {
            let p = pi.get(i, j);
            if p == 0.0 {
                continue;
            }
            for m2 in 0..n {
                inner[i * n + m2] += powers[j * n + m2] * p;
            }
        }
    }
    let mut values = vec![C64::new(0.0, 0.0); n * n];
    for m1 in 0..n {
        for i in 0..degree {
            let xi = powers[i * n + m1];
            for m2 in 0..n {
                values[m1 * n + m2] += xi * inner[i * n + m2];
            }
        }
    }
    SampleVector {
        n,
        radius: contour.radius,
        values,
    }
}

/// Direct evaluation of the series at one point.
pub fn g_at(pi: &PiGrid, x: C64, y: C64) -> C64 {
    let side = pi.side();
    let mut total = C64::new(0.0, 0.0);
    let mut xi = C64::new(1.0, 0.0);
    for i in 0..side {
        let mut yj = C64::new(1.0, 0.0);
        let mut row = C64::new(0.0, 0.0);
        for j in 0..side {
            row += yj * pi.get(i, j);
            yj *= y;
        }
        total += xi * row;
        xi *= x;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(l: f64, m1: f64, m2: f64, a1: f64) -> ModelParams {
        ModelParams::new(l, m1, m2, a1).unwrap()
    }

    #[test]
    fn symmetric_queues_give_symmetric_grid() {
        let p = params(1.0, 1.0, 1.0, 0.5);
        let grid = solve_pi(&p, 64, DEFAULT_TOL).unwrap();
        for i in 0..=64 {
            for j in 0..=64 {
                assert!((grid.get(i, j) - grid.get(j, i)).abs() < 1e-14);
            }
        }
        assert_relative_eq!(grid.get(0, 0), 0.31596749798201124, max_relative = 1e-10);
    }

    #[test]
    fn normalized_and_nonnegative() {
        for p in [params(1.0, 0.9, 1.1, 0.0), params(2.0, 1.0, 3.0, 1.0)] {
            let grid = solve_pi(&p, 64, DEFAULT_TOL).unwrap();
            assert!((grid.total() - 1.0).abs() < 1e-12);
            assert!(grid.pi.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn medium_load_reference_values() {
        // independent sparse solve of the same truncated generator
        let p = params(1.0, 0.9, 1.1, 0.0);
        let grid = solve_pi(&p, 128, DEFAULT_TOL).unwrap();
        assert_relative_eq!(grid.get(0, 0), 0.32845408558653677, max_relative = 1e-10);
        assert_relative_eq!(grid.get(1, 0), 0.08325687092154871, max_relative = 1e-10);
        assert_relative_eq!(grid.get(0, 1), 0.2304753652337667, max_relative = 1e-10);
        let doubled = solve_pi(&p, 256, DEFAULT_TOL).unwrap();
        assert!((doubled.get(0, 0) - grid.get(0, 0)).abs() < 1e-12);
    }

    #[test]
    fn stationarity_and_flow_balance() {
        let p = params(1.0, 0.4, 0.8, 0.5);
        let grid = solve_pi(&p, 256, DEFAULT_TOL).unwrap();
        assert!(grid.balance_residual(&p) < 1e-10);
        assert!(grid.flow_balance_gap(&p) < 1e-10);
        assert!(grid.boundary_mass < DEFAULT_TOL);
        // Little's law sanity: mean number in system is finite and large
        assert!(grid.mean_jobs() > 5.0);
    }

    #[test]
    fn swapped_parameters_transpose_the_grid() {
        let p = params(1.0, 0.7, 1.2, 0.3);
        let a = solve_pi(&p, 64, DEFAULT_TOL).unwrap();
        let b = solve_pi(&p.swapped(), 64, DEFAULT_TOL).unwrap();
        for i in 0..=64 {
            for j in 0..=64 {
                assert!((a.get(i, j) - b.get(j, i)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn refinement_doubles_until_tolerance() {
        let p = params(1.0, 0.4, 0.8, 0.5);
        let grid = solve_pi(&p, 16, DEFAULT_TOL).unwrap();
        assert!(grid.n_trunc >= 64);
        assert!(grid.boundary_mass < DEFAULT_TOL);
    }

    #[test]
    fn rejects_unstable_and_tiny_boxes() {
        let bad = ModelParams {
            lambda: 3.0,
            mu1: 1.0,
            mu2: 1.0,
            a1: 0.5,
        };
        assert!(matches!(solve_pi(&bad, 64, DEFAULT_TOL), Err(Error::Unstable { .. })));
        assert!(solve_pi(&params(1.0, 1.0, 1.0, 0.5), 2, DEFAULT_TOL).is_err());
        let hard = params(1.0, 0.5, 0.52, 0.5);
        assert!(matches!(solve_pi(&hard, 8, 1e-300), Err(Error::TruncationFailure(_))));
    }

    #[test]
    fn generating_function_identities() {
        let p = params(1.0, 0.9, 1.1, 0.0);
        let grid = solve_pi(&p, 128, DEFAULT_TOL).unwrap();
        let zero = C64::new(0.0, 0.0);
        assert_eq!(g_at(&grid, zero, zero).re, grid.get(0, 0));
        let one = C64::new(1.0, 0.0);
        assert!((g_at(&grid, one, one) - 1.0).norm() < 1e-12);
    }

    #[test]
    fn heavy_load_g_on_grid() {
        let p = params(1.0, 0.4, 0.8, 0.5);
        let spec = GridSpec::for_model(&p, 120).unwrap();
        let grid = solve_pi(&p, 256, DEFAULT_TOL).unwrap();
        let g = eval_g(&grid, &spec, None).unwrap();
        let finer = solve_pi(&p, 512, DEFAULT_TOL).unwrap();
        let g_fine = eval_g(&finer, &spec, None).unwrap();
        assert!((g.get(3, 5) - g_fine.get(3, 5)).norm() < 1e-8);
        // independent solve of the box N = 256, summed over i, j < 220
        let want = C64::new(0.22637407284008082, 0.8003412827776046);
        assert!((g.get(3, 5) - want).norm() < 1e-8, "{}", g.get(3, 5));
    }

    #[test]
    fn grid_sum_matches_pointwise_sum() {
        let p = params(2.0, 1.0, 3.0, 0.5);
        let spec = GridSpec::for_model(&p, 16).unwrap();
        let grid = solve_pi(&p, 64, DEFAULT_TOL).unwrap();
        let g = eval_g(&grid, &spec, None).unwrap();
        let outer = Contour::new(spec.r2(), 16).unwrap();
        for (m1, m2) in [(0, 0), (3, 7), (15, 1)] {
            let direct = g_at(&grid, outer.points[m1], outer.points[m2]);
            assert!((g.get(m1, m2) - direct).norm() < 1e-10);
        }
    }

    #[test]
    fn csv_dump_lists_every_state() {
        let grid = solve_pi(&params(1.0, 1.0, 1.0, 0.5), 4, 1.0).unwrap();
        let mut buf = Vec::new();
        grid.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 25);
        assert!(text.starts_with("i,j,probability"));
    }
}
