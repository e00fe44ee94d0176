//! Thin helpers over faer's compressed sparse column matrices.

use faer::linalg::solvers::SolveCore;
use faer::sparse::linalg::matmul::sparse_sparse_matmul;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use faer::prelude::Reborrow;
use faer::{Conj, Mat, Par};
use num_complex::Complex64 as C64;

pub type SpMat = SparseColMat<usize, C64>;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Builds a matrix from `(row, col, value)` entries; duplicates are summed.
pub fn from_triplets(nrows: usize, ncols: usize, entries: &[(usize, usize, C64)]) -> SpMat {
    let triplets: Vec<Triplet<usize, usize, C64>> = entries
        .iter()
        .map(|&(r, c, v)| Triplet::new(r, c, v))
        .collect();
    SparseColMat::try_new_from_triplets(nrows, ncols, &triplets)
        .expect("triplet indices are within bounds")
}

pub fn identity(n: usize) -> SpMat {
    diagonal(&vec![C64::new(1.0, 0.0); n])
}

pub fn diagonal(values: &[C64]) -> SpMat {
    let entries: Vec<_> = values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != ZERO)
        .map(|(i, &v)| (i, i, v))
        .collect();
    from_triplets(values.len(), values.len(), &entries)
}

pub fn zeros(nrows: usize, ncols: usize) -> SpMat {
    from_triplets(nrows, ncols, &[])
}

pub fn triplets(a: &SpMat) -> Vec<(usize, usize, C64)> {
    a.triplet_iter().map(|t| (t.row, t.col, *t.val)).collect()
}

pub fn matmul(a: &SpMat, b: &SpMat) -> SpMat {
    sparse_sparse_matmul(a.rb(), b.rb(), C64::new(1.0, 0.0), Par::Seq)
        .expect("sparse product fits in memory")
}

/// `Σ c_i · A_i` over matrices of equal shape.
pub fn lincomb(terms: &[(C64, &SpMat)]) -> SpMat {
    let (nrows, ncols) = terms
        .first()
        .map(|(_, a)| (a.nrows(), a.ncols()))
        .unwrap_or((0, 0));
    let mut entries = Vec::new();
    for (c, a) in terms {
        assert_eq!((a.nrows(), a.ncols()), (nrows, ncols), "shape mismatch");
        if *c == ZERO {
            continue;
        }
        entries.extend(a.triplet_iter().map(|t| (t.row, t.col, *c * *t.val)));
    }
    prune(&from_triplets(nrows, ncols, &entries), 0.0)
}

pub fn scale(a: &SpMat, c: C64) -> SpMat {
    lincomb(&[(c, a)])
}

/// Drops stored entries with modulus at most `tol`.
pub fn prune(a: &SpMat, tol: f64) -> SpMat {
    let entries: Vec<_> = a
        .triplet_iter()
        .filter(|t| t.val.norm() > tol)
        .map(|t| (t.row, t.col, *t.val))
        .collect();
    from_triplets(a.nrows(), a.ncols(), &entries)
}

pub fn matvec(a: &SpMat, x: &[C64]) -> Vec<C64> {
    assert_eq!(a.ncols(), x.len(), "shape mismatch");
    let mut y = vec![ZERO; a.nrows()];
    let rows = a.row_idx();
    let vals = a.val();
    for (j, &xj) in x.iter().enumerate() {
        if xj == ZERO {
            continue;
        }
        for p in a.col_range(j) {
            y[rows[p]] += vals[p] * xj;
        }
    }
    y
}

pub fn to_dense(a: &SpMat) -> Vec<Vec<C64>> {
    let mut out = vec![vec![ZERO; a.ncols()]; a.nrows()];
    for t in a.triplet_iter() {
        out[t.row][t.col] += *t.val;
    }
    out
}

/// Largest absolute column sum.
pub fn norm1(a: &SpMat) -> f64 {
    (0..a.ncols())
        .map(|j| a.val_of_col(j).iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn max_abs(a: &SpMat) -> f64 {
    a.val().iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// A one-parameter family `A + s·B` stored on the union of both patterns so
/// that one symbolic factorization serves every value of `s`.
pub struct Pencil {
    base: SpMat,
    slope: Vec<C64>,
    symbolic: SymbolicLu<usize>,
}

impl Pencil {
    pub fn new(a: &SpMat, b: &SpMat) -> Result<Self, String> {
        // Tag every entry of each operand so the union keeps both patterns
        // even where values cancel.
        let mut entries: Vec<_> = triplets(a);
        entries.extend(b.triplet_iter().map(|t| (t.row, t.col, ZERO)));
        let base = from_triplets(a.nrows(), a.ncols(), &entries);
        let mut slope_entries: Vec<_> = triplets(b);
        slope_entries.extend(a.triplet_iter().map(|t| (t.row, t.col, ZERO)));
        let slope_mat = from_triplets(a.nrows(), a.ncols(), &slope_entries);
        debug_assert_eq!(base.row_idx(), slope_mat.row_idx());
        let symbolic = SymbolicLu::try_new(base.symbolic()).map_err(|e| format!("{e:?}"))?;
        Ok(Pencil {
            slope: slope_mat.val().to_vec(),
            base,
            symbolic,
        })
    }

    pub fn at(&self, s: C64) -> SpMat {
        let mut m = self.base.clone();
        for (v, d) in m.val_mut().iter_mut().zip(&self.slope) {
            *v += s * d;
        }
        m
    }

    pub fn factor(&self, s: C64) -> Result<Factored, String> {
        let matrix = self.at(s);
        Factored::with_symbolic(matrix, self.symbolic.clone())
    }
}

/// A sparse matrix together with its LU factorization.
pub struct Factored {
    pub matrix: SpMat,
    lu: Lu<usize, C64>,
}

impl Factored {
    pub fn new(matrix: SpMat) -> Result<Self, String> {
        let symbolic = SymbolicLu::try_new(matrix.symbolic()).map_err(|e| format!("{e:?}"))?;
        Factored::with_symbolic(matrix, symbolic)
    }

    fn with_symbolic(matrix: SpMat, symbolic: SymbolicLu<usize>) -> Result<Self, String> {
        if matrix.nrows() != matrix.ncols() {
            return Err("matrix is not square".into());
        }
        let lu = Lu::try_new_with_symbolic(symbolic, matrix.rb())
            .map_err(|e| format!("LU factorization failed: {e:?}"))?;
        Ok(Factored { matrix, lu })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn solve(&self, rhs: &[C64]) -> Vec<C64> {
        self.solve_with(rhs, false)
    }

    /// Solves with the conjugate transpose.
    pub fn solve_adjoint(&self, rhs: &[C64]) -> Vec<C64> {
        self.solve_with(rhs, true)
    }

    fn solve_with(&self, rhs: &[C64], adjoint: bool) -> Vec<C64> {
        let n = self.dim();
        assert_eq!(rhs.len(), n, "shape mismatch");
        let mut x = Mat::<C64>::from_fn(n, 1, |i, _| rhs[i]);
        if adjoint {
            self.lu
                .solve_transpose_in_place_with_conj(Conj::Yes, x.as_mut());
        } else {
            self.lu.solve_in_place_with_conj(Conj::No, x.as_mut());
        }
        (0..n).map(|i| x[(i, 0)]).collect()
    }

    /// Max-norm relative residual `‖Ax − b‖∞ / (‖A‖·‖x‖∞ + ‖b‖∞)`.
    pub fn relative_residual(&self, x: &[C64], rhs: &[C64]) -> f64 {
        let ax = matvec(&self.matrix, x);
        let r = ax
            .iter()
            .zip(rhs)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        let xn = x.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let bn = rhs.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let denom = norm1(&self.matrix).max(max_abs(&self.matrix)) * xn + bn;
        if denom == 0.0 {
            r
        } else {
            r / denom
        }
    }

    /// 1-norm condition number estimate (Hager's method with Higham's
    /// complex sign vector).
    pub fn condition_estimate(&self) -> f64 {
        let n = self.dim();
        if n == 0 {
            return 0.0;
        }
        let mut x = vec![C64::new(1.0 / n as f64, 0.0); n];
        let mut estimate = 0.0;
        let mut last_j = usize::MAX;
        for _ in 0..5 {
            let y = self.solve(&x);
            let y_norm: f64 = y.iter().map(|v| v.norm()).sum();
            if !y_norm.is_finite() {
                return f64::INFINITY;
            }
            if y_norm <= estimate {
                break;
            }
            estimate = y_norm;
            let sign: Vec<C64> = y
                .iter()
                .map(|v| {
                    let a = v.norm();
                    if a == 0.0 {
                        C64::new(1.0, 0.0)
                    } else {
                        v / a
                    }
                })
                .collect();
            let z = self.solve_adjoint(&sign);
            let (j, zmax) = z
                .iter()
                .enumerate()
                .map(|(i, v)| (i, v.norm()))
                .fold((0, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
            let ztx: f64 = z.iter().zip(&x).map(|(a, b)| (a.conj() * b).re).sum();
            if zmax <= ztx || j == last_j {
                break;
            }
            last_j = j;
            x = vec![ZERO; n];
            x[j] = C64::new(1.0, 0.0);
        }
        estimate * norm1(&self.matrix)
    }
}
