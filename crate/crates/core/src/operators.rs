//! Linear operators on sampled bivariate functions.
//!
//! Every operator is stored in the power-series coefficient basis, where it
//! is sparse: differentiation and multiplication by `x` are index shifts,
//! evaluation at a point is a row of powers, and partializations are 0/1
//! masks. Applying an operator to a [`SampleVector`] conjugates with the
//! coefficient transform, which gives exactly the dense sample-space matrix
//! `resample ∘ op ∘ coeffs`.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::contour::{coeffs, resample, CoeffGrid, GridSpec, SampleVector};
use crate::error::{Error, Result};
use crate::sparse::{self, SpMat};

const ONE: C64 = C64::new(1.0, 0.0);
const ZERO: C64 = C64::new(0.0, 0.0);

/// How multiplication by `x` (or `y`) treats the top coefficient.
///
/// `Collocation` is pointwise multiplication on the grid: `x · x^(n-1)`
/// aliases onto `r^n · x^0`. `Truncated` drops that term, which keeps every
/// equation in the truncated power-series space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[default]
    Truncated,
    Collocation,
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "truncated" => Ok(Scheme::Truncated),
            "collocation" => Ok(Scheme::Collocation),
            other => Err(Error::Unsupported(format!("unknown scheme '{other}'"))),
        }
    }
}

/// A linear operator on functions sampled on one `n × n` grid, held as a
/// sparse matrix acting on coefficient vectors.
#[derive(Debug, Clone)]
pub struct SpectralOp {
    pub n: usize,
    pub mat: SpMat,
}

impl SpectralOp {
    fn from_map(n: usize, f: impl Fn(usize, usize) -> Vec<(usize, usize, C64)>) -> Self {
        // column (k, l) holds the image of the monomial x^k y^l
        let mut entries = Vec::new();
        for k in 0..n {
            for l in 0..n {
                for (kk, ll, v) in f(k, l) {
                    if v != ZERO {
                        entries.push((kk * n + ll, k * n + l, v));
                    }
                }
            }
        }
        SpectralOp {
            n,
            mat: sparse::from_triplets(n * n, n * n, &entries),
        }
    }

    pub fn identity(n: usize) -> Self {
        SpectralOp {
            n,
            mat: sparse::identity(n * n),
        }
    }

    pub fn from_matrix(n: usize, mat: SpMat) -> Result<Self> {
        if mat.nrows() != n * n || mat.ncols() != n * n {
            return Err(Error::ShapeMismatch {
                expected: n * n,
                actual: mat.nrows(),
            });
        }
        Ok(SpectralOp { n, mat })
    }

    /// `self · other` in matrix notation: `other` is applied first.
    pub fn compose(&self, other: &SpectralOp) -> SpectralOp {
        assert_eq!(self.n, other.n);
        SpectralOp {
            n: self.n,
            mat: sparse::matmul(&self.mat, &other.mat),
        }
    }

    pub fn scale(&self, c: f64) -> SpectralOp {
        SpectralOp {
            n: self.n,
            mat: sparse::scale(&self.mat, C64::new(c, 0.0)),
        }
    }

    pub fn add(&self, other: &SpectralOp) -> SpectralOp {
        self.combine(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &SpectralOp) -> SpectralOp {
        self.combine(1.0, other, -1.0)
    }

    fn combine(&self, a: f64, other: &SpectralOp, b: f64) -> SpectralOp {
        assert_eq!(self.n, other.n);
        SpectralOp {
            n: self.n,
            mat: sparse::lincomb(&[(C64::new(a, 0.0), &self.mat), (C64::new(b, 0.0), &other.mat)]),
        }
    }

    pub fn apply_coeffs(&self, a: &CoeffGrid) -> CoeffGrid {
        CoeffGrid {
            n: self.n,
            values: sparse::matvec(&self.mat, &a.values),
        }
    }

    pub fn apply(&self, v: &SampleVector) -> Result<SampleVector> {
        if v.n != self.n {
            return Err(Error::ShapeMismatch {
                expected: self.n * self.n,
                actual: v.len(),
            });
        }
        Ok(resample(&self.apply_coeffs(&coeffs(v)), v.radius))
    }

    /// The dense `n² × n²` matrix acting on sample vectors of the given
    /// radius. Intended for small grids.
    pub fn to_dense(&self, radius: f64) -> Vec<Vec<C64>> {
        let n2 = self.n * self.n;
        let mut dense = vec![vec![ZERO; n2]; n2];
        for j in 0..n2 {
            let mut unit = vec![ZERO; n2];
            unit[j] = ONE;
            let v = SampleVector {
                n: self.n,
                radius,
                values: unit,
            };
            let col = self.apply(&v).expect("matching shape");
            for (i, value) in col.values.into_iter().enumerate() {
                dense[i][j] = value;
            }
        }
        dense
    }

    pub fn nnz(&self) -> usize {
        self.mat.compute_nnz()
    }
}

/// Multiplication by sampled values, `Λ(g)`, acting pointwise.
#[derive(Debug, Clone)]
pub struct DiagonalOp {
    pub values: SampleVector,
}

impl DiagonalOp {
    pub fn apply(&self, v: &SampleVector) -> Result<SampleVector> {
        if v.n != self.values.n || v.radius != self.values.radius {
            return Err(Error::RadiusMismatch(format!(
                "diagonal built on n={}, r={} applied to n={}, r={}",
                self.values.n, self.values.radius, v.n, v.radius
            )));
        }
        let values = v
            .values
            .iter()
            .zip(&self.values.values)
            .map(|(a, b)| a * b)
            .collect();
        Ok(SampleVector {
            n: v.n,
            radius: v.radius,
            values,
        })
    }
}

pub fn op_mult(g: &SampleVector) -> DiagonalOp {
    DiagonalOp { values: g.clone() }
}

/// `Λ(x)` in the coefficient basis.
pub fn mult_x(spec: &GridSpec, scheme: Scheme) -> SpectralOp {
    let n = spec.n;
    let wrap = wrap_weight(spec, scheme);
    SpectralOp::from_map(n, |k, l| {
        if k + 1 < n {
            vec![(k + 1, l, ONE)]
        } else {
            vec![(0, l, C64::new(wrap, 0.0))]
        }
    })
}

/// `Λ(y)` in the coefficient basis.
pub fn mult_y(spec: &GridSpec, scheme: Scheme) -> SpectralOp {
    let n = spec.n;
    let wrap = wrap_weight(spec, scheme);
    SpectralOp::from_map(n, |k, l| {
        if l + 1 < n {
            vec![(k, l + 1, ONE)]
        } else {
            vec![(k, 0, C64::new(wrap, 0.0))]
        }
    })
}

fn wrap_weight(spec: &GridSpec, scheme: Scheme) -> f64 {
    match scheme {
        Scheme::Truncated => 0.0,
        Scheme::Collocation => spec.r1.powi(spec.n as i32),
    }
}

/// `Λ(1/x)` on the grid; the constant term wraps to degree `n-1` with
/// weight `r^-n`.
pub fn div_x(spec: &GridSpec) -> SpectralOp {
    let wrap = spec.r1.powi(-(spec.n as i32));
    SpectralOp::from_map(spec.n, |k, l| {
        if k > 0 {
            vec![(k - 1, l, ONE)]
        } else {
            vec![(spec.n - 1, l, C64::new(wrap, 0.0))]
        }
    })
}

pub fn div_y(spec: &GridSpec) -> SpectralOp {
    let wrap = spec.r1.powi(-(spec.n as i32));
    SpectralOp::from_map(spec.n, |k, l| {
        if l > 0 {
            vec![(k, l - 1, ONE)]
        } else {
            vec![(k, spec.n - 1, C64::new(wrap, 0.0))]
        }
    })
}

pub fn op_dx(spec: &GridSpec) -> SpectralOp {
    SpectralOp::from_map(spec.n, |k, l| {
        if k > 0 {
            vec![(k - 1, l, C64::new(k as f64, 0.0))]
        } else {
            vec![]
        }
    })
}

pub fn op_dy(spec: &GridSpec) -> SpectralOp {
    SpectralOp::from_map(spec.n, |k, l| {
        if l > 0 {
            vec![(k, l - 1, C64::new(l as f64, 0.0))]
        } else {
            vec![]
        }
    })
}

fn check_inside(spec: &GridSpec, p: C64) -> Result<()> {
    if p.norm() >= spec.r1 || !p.re.is_finite() || !p.im.is_finite() {
        return Err(Error::PointOutsideDisk {
            point: p.to_string(),
            radius: spec.r1,
        });
    }
    Ok(())
}

/// `f ↦ f(u0, y)`, constant in `x`.
pub fn op_eval_x(spec: &GridSpec, u0: C64) -> Result<SpectralOp> {
    check_inside(spec, u0)?;
    Ok(SpectralOp::from_map(spec.n, |k, l| {
        vec![(0, l, u0.powu(k as u32))]
    }))
}

/// `f ↦ f(x, v0)`, constant in `y`.
pub fn op_eval_y(spec: &GridSpec, v0: C64) -> Result<SpectralOp> {
    check_inside(spec, v0)?;
    Ok(SpectralOp::from_map(spec.n, |k, l| {
        vec![(k, 0, v0.powu(l as u32))]
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Partial {
    Leq,
    Geq,
    Eq,
}

/// Keeps the terms `x^k y^l` with `k ≤ l`, `k ≥ l` or `k = l`.
pub fn op_partial(spec: &GridSpec, kind: Partial) -> SpectralOp {
    SpectralOp::from_map(spec.n, |k, l| {
        let keep = match kind {
            Partial::Leq => k <= l,
            Partial::Geq => k >= l,
            Partial::Eq => k == l,
        };
        if keep {
            vec![(k, l, ONE)]
        } else {
            vec![]
        }
    })
}

/// The model-independent operators used by the response-time equations.
#[derive(Debug, Clone)]
pub struct OperatorSet {
    pub spec: GridSpec,
    pub identity: SpectralOp,
    pub m10: SpectralOp,
    pub m01: SpectralOp,
    pub u0: SpectralOp,
    pub v0: SpectralOp,
    pub pleq: SpectralOp,
    pub pgeq: SpectralOp,
    pub peq: SpectralOp,
    /// `(f(x,y) − f(0,y)) / x`
    pub a: SpectralOp,
    /// `(f(x,y) − f(x,0)) / y`
    pub b: SpectralOp,
    /// `(f(x,y) − f(0,y) − x·f_x(0,y)) / x²`
    pub c: SpectralOp,
    /// `(f(x,y) − f(x,0) − y·f_y(x,0)) / y²`
    pub d: SpectralOp,
}

/// Names of the stored matrices, in cache order.
pub const OPERATOR_NAMES: [&str; 11] = ["M10", "M01", "U0", "V0", "Pleq", "Pgeq", "Peq", "A", "B", "C", "D"];

impl OperatorSet {
    pub fn build(spec: &GridSpec) -> Result<Self> {
        let spec = GridSpec::new(spec.n, spec.r1)?;
        let n = spec.n;
        let identity = SpectralOp::identity(n);
        let m10 = op_dx(&spec);
        let m01 = op_dy(&spec);
        let u0 = op_eval_x(&spec, ZERO)?;
        let v0 = op_eval_y(&spec, ZERO)?;
        let pleq = op_partial(&spec, Partial::Leq);
        let pgeq = op_partial(&spec, Partial::Geq);
        let peq = pleq.add(&pgeq).sub(&identity);

        // Λ(x) only meets functions of degree < n-1 in x inside C and D, so
        // the scheme does not matter there.
        let lx = mult_x(&spec, Scheme::Truncated);
        let ly = mult_y(&spec, Scheme::Truncated);
        let inv_x = div_x(&spec);
        let inv_y = div_y(&spec);
        let a = inv_x.compose(&identity.sub(&u0));
        let b = inv_y.compose(&identity.sub(&v0));
        let c = inv_x
            .compose(&inv_x)
            .compose(&identity.sub(&u0).sub(&lx.compose(&u0).compose(&m10)));
        let d = inv_y
            .compose(&inv_y)
            .compose(&identity.sub(&v0).sub(&ly.compose(&v0).compose(&m01)));
        Ok(OperatorSet {
            spec,
            identity,
            m10,
            m01,
            u0,
            v0,
            pleq,
            pgeq,
            peq,
            a,
            b,
            c,
            d,
        })
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn named(&self) -> [(&'static str, &SpectralOp); 11] {
        [
            ("M10", &self.m10),
            ("M01", &self.m01),
            ("U0", &self.u0),
            ("V0", &self.v0),
            ("Pleq", &self.pleq),
            ("Pgeq", &self.pgeq),
            ("Peq", &self.peq),
            ("A", &self.a),
            ("B", &self.b),
            ("C", &self.c),
            ("D", &self.d),
        ]
    }

    /// Reassembles a set from stored matrices, e.g. read back from a cache.
    pub fn from_parts(spec: GridSpec, mats: Vec<(String, SpMat)>) -> Result<Self> {
        let n = spec.n;
        let mut found: std::collections::HashMap<String, SpMat> = mats.into_iter().collect();
        let mut take = |name: &str| -> Result<SpectralOp> {
            let mat = found
                .remove(name)
                .ok_or_else(|| Error::InvalidGrid(format!("operator {name} missing")))?;
            SpectralOp::from_matrix(n, mat)
        };
        Ok(OperatorSet {
            spec,
            identity: SpectralOp::identity(n),
            m10: take("M10")?,
            m01: take("M01")?,
            u0: take("U0")?,
            v0: take("V0")?,
            pleq: take("Pleq")?,
            pgeq: take("Pgeq")?,
            peq: take("Peq")?,
            a: take("A")?,
            b: take("B")?,
            c: take("C")?,
            d: take("D")?,
        })
    }

    pub fn bitwise_eq(&self, other: &OperatorSet) -> bool {
        self.spec == other.spec
            && self
                .named()
                .iter()
                .zip(other.named().iter())
                .all(|((_, a), (_, b))| same_bits(&a.mat, &b.mat))
    }
}

fn same_bits(a: &SpMat, b: &SpMat) -> bool {
    let ta = sparse::triplets(a);
    let tb = sparse::triplets(b);
    ta.len() == tb.len()
        && ta.iter().zip(&tb).all(|(p, q)| {
            p.0 == q.0
                && p.1 == q.1
                && p.2.re.to_bits() == q.2.re.to_bits()
                && p.2.im.to_bits() == q.2.im.to_bits()
        })
}
