//! Small dense matrices and the factorizations the bias formulas need.
//!
//! Dimensions in this problem class stay in the tens, so everything is a
//! row-major `Vec` with straightforward loops.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<T>>", into = "Vec<Vec<T>>")]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                what: "matrix data length",
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n * m);
        for r in rows {
            if r.len() != m {
                return Err(Error::Dimension {
                    what: "matrix row length",
                    expected: m,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: n,
            cols: m,
            data,
        })
    }

    /// Equicorrelated matrix with unit diagonal and `rho` elsewhere.
    pub fn equicorrelation(n: usize, rho: T) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = if i == j { T::one() } else { rho };
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// Sub-matrix picking the given row and column indices.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut s = Self::zeros(rows.len(), cols.len());
        for (a, &i) in rows.iter().enumerate() {
            for (b, &j) in cols.iter().enumerate() {
                s[(a, b)] = self[(i, j)];
            }
        }
        s
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Dimension {
                what: "matrix product inner dimension",
                expected: self.cols,
                got: other.rows,
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                for j in 0..other.cols {
                    out[(i, j)] = out[(i, j)] + a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[T]) -> Result<Vec<T>> {
        if self.cols != v.len() {
            return Err(Error::Dimension {
                what: "matrix-vector length",
                expected: self.cols,
                got: v.len(),
            });
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect(),
        }
    }

    /// `vᵀ M v` for square `M`.
    pub fn quadratic_form(&self, v: &[T]) -> Result<T> {
        Ok(dot(v, &self.matvec(v)?))
    }

    pub fn max_asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }
}

impl<T: Real> TryFrom<Vec<Vec<T>>> for Matrix<T> {
    type Error = Error;

    fn try_from(rows: Vec<Vec<T>>) -> Result<Self> {
        Matrix::from_rows(&rows)
    }
}

impl<T: Real> From<Matrix<T>> for Vec<Vec<T>> {
    fn from(m: Matrix<T>) -> Self {
        m.to_rows()
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    lower: Matrix<T>,
}

/// Pivots smaller than this fraction of the largest are treated as singular.
pub const PIVOT_RATIO: f64 = 1e-12;

impl<T: Real> Cholesky<T> {
    /// Factorizes a symmetric positive-definite matrix. `label` names the
    /// matrix in the error raised on breakdown.
    pub fn new(a: &Matrix<T>, label: &str) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Numerical(format!("{label} is not square")));
        }
        let n = a.rows();
        let mut l = Matrix::zeros(n, n);
        let scale = (0..n).fold(T::zero(), |m, i| m.max(a[(i, i)].abs()));
        let floor = lit::<T>(PIVOT_RATIO) * scale;
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d = d - l[(j, k)] * l[(j, k)];
            }
            if !(d > floor) {
                return Err(Error::Numerical(format!(
                    "{label} is singular or not positive definite (pivot {j} = {d:e})"
                )));
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s = s - l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(Cholesky { lower: l })
    }

    pub fn lower(&self) -> &Matrix<T> {
        &self.lower
    }

    pub fn solve_vec(&self, b: &[T]) -> Vec<T> {
        let l = &self.lower;
        let n = l.rows();
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] = y[i] - l[(i, k)] * y[k];
            }
            y[i] = y[i] / l[(i, i)];
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                y[i] = y[i] - l[(k, i)] * y[k];
            }
            y[i] = y[i] / l[(i, i)];
        }
        y
    }

    /// Solves `A X = B` column by column.
    pub fn solve(&self, b: &Matrix<T>) -> Matrix<T> {
        let mut out = Matrix::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            let col: Vec<T> = (0..b.rows()).map(|i| b[(i, j)]).collect();
            for (i, v) in self.solve_vec(&col).into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        out
    }
}

/// Lower factor `L` with `A = L Lᵀ` for a positive semidefinite `A`.
///
/// Pivots at or below the singularity floor zero their column, so
/// degenerate directions receive no variance. Fails only when a pivot is
/// clearly negative.
pub fn psd_factor<T: Real>(a: &Matrix<T>, label: &str) -> Result<Matrix<T>> {
    if !a.is_square() {
        return Err(Error::Numerical(format!("{label} is not square")));
    }
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    let scale = (0..n).fold(T::zero(), |m, i| m.max(a[(i, i)].abs()));
    let floor = lit::<T>(PIVOT_RATIO) * scale.max(T::min_positive_value());
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d = d - l[(j, k)] * l[(j, k)];
        }
        if d < -lit::<T>(1e-9) * scale.max(T::one()) {
            return Err(Error::Numerical(format!(
                "{label} is not positive semidefinite (pivot {j} = {d:e})"
            )));
        }
        if d <= floor {
            continue;
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s = s - l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// Solves a square system by Gaussian elimination with partial pivoting.
pub fn lu_solve<T: Real>(a: &Matrix<T>, b: &[T]) -> Result<Vec<T>> {
    let n = a.rows();
    if !a.is_square() || b.len() != n {
        return Err(Error::Dimension {
            what: "linear system size",
            expected: n,
            got: b.len(),
        });
    }
    let mut m = a.clone();
    let mut x = b.to_vec();
    let scale = m.as_slice().iter().fold(T::zero(), |s, v| s.max(v.abs()));
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[(i, col)].abs().partial_cmp(&m[(j, col)].abs()).unwrap())
            .unwrap();
        if !(m[(piv, col)].abs() > lit::<T>(PIVOT_RATIO) * scale) {
            return Err(Error::Numerical(format!("singular system at column {col}")));
        }
        if piv != col {
            for j in 0..n {
                let t = m[(col, j)];
                m[(col, j)] = m[(piv, j)];
                m[(piv, j)] = t;
            }
            x.swap(col, piv);
        }
        for i in col + 1..n {
            let f = m[(i, col)] / m[(col, col)];
            for j in col..n {
                m[(i, j)] = m[(i, j)] - f * m[(col, j)];
            }
            x[i] = x[i] - f * x[col];
        }
    }
    for i in (0..n).rev() {
        for j in i + 1..n {
            x[i] = x[i] - m[(i, j)] * x[j];
        }
        x[i] = x[i] / m[(i, i)];
    }
    Ok(x)
}

/// Householder QR least squares for tall systems stored column-major.
///
/// `columns[j]` holds column `j` of the design; returns the minimiser of
/// `‖A x − b‖₂`. Fails when a diagonal of `R` falls below
/// [`PIVOT_RATIO`] times the largest column norm.
pub fn qr_least_squares<T: Real>(mut columns: Vec<Vec<T>>, mut b: Vec<T>) -> Result<Vec<T>> {
    let k = columns.len();
    let n = b.len();
    if columns.iter().any(|c| c.len() != n) {
        return Err(Error::Numerical("ragged design columns".into()));
    }
    if n < k {
        return Err(Error::Numerical(format!("{n} rows for {k} unknowns")));
    }
    let col_scale = columns
        .iter()
        .map(|c| dot(c, c).sqrt())
        .fold(T::zero(), T::max);
    let mut r_diag = vec![T::zero(); k];
    for j in 0..k {
        let (done, rest) = columns.split_at_mut(j + 1);
        let v = &mut done[j];
        let norm = v[j..].iter().fold(T::zero(), |s, &x| s + x * x).sqrt();
        if !(norm > lit::<T>(PIVOT_RATIO) * col_scale) {
            return Err(Error::Numerical(format!(
                "design matrix is rank deficient at column {j}"
            )));
        }
        let alpha = if v[j] > T::zero() { -norm } else { norm };
        v[j] = v[j] - alpha;
        let vnorm2 = v[j..].iter().fold(T::zero(), |s, &x| s + x * x);
        let apply = |w: &mut [T]| {
            let s = v[j..].iter().zip(&w[j..]).fold(T::zero(), |s, (&a, &b)| s + a * b);
            let f = lit::<T>(2.0) * s / vnorm2;
            for (wi, &vi) in w[j..].iter_mut().zip(&v[j..]) {
                *wi = *wi - f * vi;
            }
        };
        for c in rest.iter_mut() {
            apply(c);
        }
        apply(&mut b);
        r_diag[j] = alpha;
    }
    // back substitution with R stored above the diagonal of `columns`
    let mut x = vec![T::zero(); k];
    for i in (0..k).rev() {
        let mut s = b[i];
        for j in i + 1..k {
            s = s - columns[j][i] * x[j];
        }
        x[i] = s / r_diag[i];
    }
    Ok(x)
}
