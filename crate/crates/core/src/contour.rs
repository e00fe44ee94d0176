//! Equispaced grids on circles, vector representations of bivariate
//! functions, and the discrete Cauchy coefficient transform between them.
//!
//! A bivariate function is represented by its values at the `n²` point
//! pairs `(x_{m1}, y_{m2})` with `x_m = r·exp(2πi·m/n)`, ordered with the
//! `x` index outermost: `(x_1,y_1), …, (x_1,y_n), (x_2,y_1), …`.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rustfft::{FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;

pub const MIN_POINTS: usize = 4;

/// Largest outer radius picked automatically. The model-derived default
/// grows without bound as the arrival rate vanishes, which would underflow
/// `r1^(2n)` in the coefficient transform.
pub const MAX_DEFAULT_R2: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub r1: f64,
}

impl GridSpec {
    pub fn new(n: usize, r1: f64) -> Result<Self> {
        if n < MIN_POINTS {
            return Err(Error::InvalidGrid(format!(
                "need at least {MIN_POINTS} points per circle, got {n}"
            )));
        }
        if !(r1 > 0.0 && r1 <= 1.0) {
            return Err(Error::InvalidGrid(format!("inner radius {r1} not in (0, 1]")));
        }
        Ok(GridSpec { n, r1 })
    }

    pub fn with_r2(n: usize, r2: f64) -> Result<Self> {
        if !(r2 >= 1.0) || !r2.is_finite() {
            return Err(Error::InvalidGrid(format!("outer radius {r2} must be >= 1")));
        }
        GridSpec::new(n, 1.0 / r2)
    }

    /// Outer radius halfway between 1 and the radius of convergence of G.
    pub fn for_model(params: &ModelParams, n: usize) -> Result<Self> {
        GridSpec::with_r2(n, default_r2(params))
    }

    pub fn r2(&self) -> f64 {
        1.0 / self.r1
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

pub fn default_r2(params: &ModelParams) -> f64 {
    let r2 = (params.lambda + params.mu1 + params.mu2) / (2.0 * params.lambda);
    if r2.is_finite() {
        r2.min(MAX_DEFAULT_R2)
    } else {
        MAX_DEFAULT_R2
    }
}

#[derive(Debug, Clone)]
pub struct Contour {
    pub radius: f64,
    pub n: usize,
    pub points: Vec<C64>,
}

impl Contour {
    pub fn new(radius: f64, n: usize) -> Result<Self> {
        if n < MIN_POINTS {
            return Err(Error::InvalidGrid(format!(
                "need at least {MIN_POINTS} points per circle, got {n}"
            )));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidGrid(format!("radius {radius} must be positive")));
        }
        let points = (0..n).map(|m| point(radius, n, m)).collect();
        Ok(Contour { radius, n, points })
    }

    pub fn angle(&self, m: usize) -> f64 {
        2.0 * PI * m as f64 / self.n as f64
    }
}

fn point(radius: f64, n: usize, m: usize) -> C64 {
    // Exact quarter-turn values keep symmetric grids symmetric bit-for-bit.
    let unit = match (4 * m).is_multiple_of(n) {
        true => match (4 * m / n) % 4 {
            0 => C64::new(1.0, 0.0),
            1 => C64::new(0.0, 1.0),
            2 => C64::new(-1.0, 0.0),
            _ => C64::new(0.0, -1.0),
        },
        false => C64::from_polar(1.0, 2.0 * PI * m as f64 / n as f64),
    };
    unit * radius
}

/// The `x` and `y` circles at `r1` and the conjugate circle at `r2`.
#[derive(Debug, Clone)]
pub struct ContourGrid {
    pub cx: Contour,
    pub cy: Contour,
    pub outer: Contour,
}

pub fn build_grid(spec: &GridSpec) -> Result<ContourGrid> {
    let spec = GridSpec::new(spec.n, spec.r1)?;
    Ok(ContourGrid {
        cx: Contour::new(spec.r1, spec.n)?,
        cy: Contour::new(spec.r1, spec.n)?,
        outer: Contour::new(spec.r2(), spec.n)?,
    })
}

/// Values of a bivariate function on an `n × n` grid of one radius.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleVector {
    pub n: usize,
    pub radius: f64,
    pub values: Vec<C64>,
}

impl SampleVector {
    pub fn new(n: usize, radius: f64, values: Vec<C64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::ShapeMismatch {
                expected: n * n,
                actual: values.len(),
            });
        }
        Ok(SampleVector { n, radius, values })
    }

    pub fn get(&self, m1: usize, m2: usize) -> C64 {
        self.values[m1 * self.n + m2]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Exchanges the roles of `x` and `y`.
    pub fn transposed(&self) -> SampleVector {
        let n = self.n;
        let mut values = vec![C64::new(0.0, 0.0); n * n];
        for m1 in 0..n {
            for m2 in 0..n {
                values[m2 * n + m1] = self.values[m1 * n + m2];
            }
        }
        SampleVector {
            n,
            radius: self.radius,
            values,
        }
    }

    pub fn max_abs_diff(&self, other: &SampleVector) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Power-series coefficients `a[k][l]` of `x^k y^l`, `0 <= k, l < n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffGrid {
    pub n: usize,
    pub values: Vec<C64>,
}

impl CoeffGrid {
    pub fn zeros(n: usize) -> Self {
        CoeffGrid {
            n,
            values: vec![C64::new(0.0, 0.0); n * n],
        }
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> C64) -> Self {
        let mut values = Vec::with_capacity(n * n);
        for k in 0..n {
            for l in 0..n {
                values.push(f(k, l));
            }
        }
        CoeffGrid { n, values }
    }

    pub fn get(&self, k: usize, l: usize) -> C64 {
        self.values[k * self.n + l]
    }

    pub fn set(&mut self, k: usize, l: usize, v: C64) {
        self.values[k * self.n + l] = v;
    }
}

/// Evaluates `f` at every point pair of the grid spanned by `cx` and `cy`.
pub fn sample<F>(cx: &Contour, cy: &Contour, f: F) -> Result<SampleVector>
where
    F: Fn(C64, C64) -> C64,
{
    if cx.n != cy.n || cx.radius != cy.radius {
        return Err(Error::InvalidGrid(
            "x and y contours must share radius and point count".into(),
        ));
    }
    let n = cx.n;
    let mut values = Vec::with_capacity(n * n);
    for (m1, &x) in cx.points.iter().enumerate() {
        for (m2, &y) in cy.points.iter().enumerate() {
            let v = f(x, y);
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::Evaluation {
                    m1,
                    m2,
                    reason: format!("non-finite value {v} at ({x}, {y})"),
                });
            }
            values.push(v);
        }
    }
    Ok(SampleVector {
        n,
        radius: cx.radius,
        values,
    })
}

fn fft2(data: &mut [C64], n: usize, direction: FftDirection) {
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft(n, direction);
    // rows (l index)
    fft.process(data);
    // columns (k index)
    let mut column = vec![C64::new(0.0, 0.0); n];
    for l in 0..n {
        for k in 0..n {
            column[k] = data[k * n + l];
        }
        fft.process(&mut column);
        for k in 0..n {
            data[k * n + l] = column[k];
        }
    }
}

fn radius_powers(radius: f64, n: usize) -> Vec<f64> {
    let mut powers = Vec::with_capacity(n);
    let mut p = 1.0;
    for _ in 0..n {
        powers.push(p);
        p *= radius;
    }
    powers
}

/// Discrete Cauchy coefficients of a sampled function:
/// `a[k][l] = n⁻² Σ v(m1,m2) exp(−2πi(k·m1 + l·m2)/n) / r^(k+l)`.
pub fn coeffs(v: &SampleVector) -> CoeffGrid {
    let n = v.n;
    let mut data = v.values.clone();
    fft2(&mut data, n, FftDirection::Forward);
    let powers = radius_powers(v.radius, n);
    let norm = 1.0 / (n * n) as f64;
    for k in 0..n {
        for l in 0..n {
            data[k * n + l] *= norm / (powers[k] * powers[l]);
        }
    }
    CoeffGrid { n, values: data }
}

/// Inverse of [`coeffs`]: evaluates the polynomial `Σ a[k][l] x^k y^l` on the
/// grid of the given radius.
pub fn resample(a: &CoeffGrid, radius: f64) -> SampleVector {
    let n = a.n;
    let powers = radius_powers(radius, n);
    let mut data: Vec<C64> = a
        .values
        .iter()
        .enumerate()
        .map(|(idx, &c)| c * (powers[idx / n] * powers[idx % n]))
        .collect();
    fft2(&mut data, n, FftDirection::Inverse);
    SampleVector {
        n,
        radius,
        values: data,
    }
}

/// Bilinear interpolation in the two angles, periodic in each.
pub fn interp2(v: &SampleVector, t1: f64, t2: f64) -> C64 {
    let n = v.n;
    let step = 2.0 * PI / n as f64;
    let locate = |t: f64| {
        let u = t.rem_euclid(2.0 * PI) / step;
        let base = u.floor();
        let frac = u - base;
        let m = (base as usize) % n;
        (m, (m + 1) % n, frac)
    };
    let (i0, i1, fx) = locate(t1);
    let (j0, j1, fy) = locate(t2);
    let lerp = |a: C64, b: C64, w: f64| a * (1.0 - w) + b * w;
    let row0 = lerp(v.get(i0, j0), v.get(i0, j1), fy);
    let row1 = lerp(v.get(i1, j0), v.get(i1, j1), fy);
    lerp(row0, row1, fx)
}
