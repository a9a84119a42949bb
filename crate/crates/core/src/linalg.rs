//! Dense matrices and rank-revealing QR.
//!
//! The rollout matrix has one row per time step and one column per state
//! dimension. Column-pivoted Householder QR (Businger-Golub) orders the
//! columns by how much new variance each one contributes; the magnitudes on
//! the diagonal of `R` then decide which state dimensions are kept.

use crate::error::{FacError, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(FacError::ShapeMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(FacError::ShapeMismatch {
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(FacError::ShapeMismatch {
                expected: self.cols,
                got: other.rows,
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Copy with columns reordered so that column `k` of the result is column
    /// `perm[k]` of `self`.
    pub fn permute_columns(&self, perm: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(self.rows, perm.len());
        for i in 0..self.rows {
            for (k, &j) in perm.iter().enumerate() {
                out[(i, k)] = self[(i, j)];
            }
        }
        out
    }

    /// Subtracts each column's mean from that column.
    pub fn center_columns(&self) -> Matrix {
        let mut out = self.clone();
        if self.rows == 0 {
            return out;
        }
        for j in 0..self.cols {
            let mean = (0..self.rows).map(|i| self[(i, j)]).sum::<f64>() / self.rows as f64;
            for i in 0..self.rows {
                out[(i, j)] -= mean;
            }
        }
        out
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// `A[:, perm] = Q * R` with `Q` square orthonormal and `R` upper-trapezoidal.
#[derive(Debug, Clone)]
pub struct QrPivotResult {
    pub q: Matrix,
    pub r: Matrix,
    pub perm: Vec<usize>,
}

impl QrPivotResult {
    /// Magnitudes of the diagonal of `R`, in pivot order.
    pub fn pivot_magnitudes(&self) -> Vec<f64> {
        abs_diagonal(&self.r)
    }
}

fn abs_diagonal(r: &Matrix) -> Vec<f64> {
    (0..r.rows().min(r.cols())).map(|i| r[(i, i)].abs()).collect()
}

/// Householder vectors are kept so `Q` can be formed on demand.
struct Factorization {
    r: Matrix,
    perm: Vec<usize>,
    reflectors: Vec<(usize, Vec<f64>)>,
}

fn factorize(a: &Matrix) -> Result<Factorization> {
    if !a.is_finite() {
        return Err(FacError::NonFiniteInput);
    }
    let (m, n) = (a.rows(), a.cols());
    let mut r = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut reflectors = Vec::new();

    for k in 0..m.min(n) {
        // Remaining column norms are recomputed rather than downdated; the
        // matrices here are small and downdating loses digits.
        let mut best = k;
        let mut best_norm = -1.0;
        for j in k..n {
            let s: f64 = (k..m).map(|i| r[(i, j)] * r[(i, j)]).sum();
            if s > best_norm || (s == best_norm && perm[j] < perm[best]) {
                best = j;
                best_norm = s;
            }
        }
        if best != k {
            for i in 0..m {
                r.data.swap(i * n + k, i * n + best);
            }
            perm.swap(k, best);
        }

        let norm_x = best_norm.sqrt();
        if norm_x == 0.0 {
            continue;
        }
        let x0 = r[(k, k)];
        let alpha = if x0 >= 0.0 { -norm_x } else { norm_x };
        let mut v: Vec<f64> = (k..m).map(|i| r[(i, k)]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for j in k..n {
            let d: f64 = v.iter().enumerate().map(|(t, vt)| vt * r[(k + t, j)]).sum();
            let f = 2.0 * d / vnorm2;
            for (t, vt) in v.iter().enumerate() {
                r[(k + t, j)] -= f * vt;
            }
        }
        r[(k, k)] = alpha;
        for i in k + 1..m {
            r[(i, k)] = 0.0;
        }
        reflectors.push((k, v));
    }
    Ok(Factorization {
        r,
        perm,
        reflectors,
    })
}

/// Column-pivoted Householder QR.
pub fn qr_column_pivot(a: &Matrix) -> Result<QrPivotResult> {
    if a.rows() == 0 || a.cols() == 0 {
        return Err(FacError::ShapeMismatch {
            expected: 1,
            got: 0,
        });
    }
    let f = factorize(a)?;
    let m = a.rows();
    // Q = H_0 H_1 ... H_{k-1}; accumulate by applying reflectors in reverse to I.
    let mut q = Matrix::identity(m);
    for (k, v) in f.reflectors.iter().rev() {
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        for j in 0..m {
            let d: f64 = v.iter().enumerate().map(|(t, vt)| vt * q[(k + t, j)]).sum();
            if d == 0.0 {
                continue;
            }
            let s = 2.0 * d / vnorm2;
            for (t, vt) in v.iter().enumerate() {
                q[(k + t, j)] -= s * vt;
            }
        }
    }
    Ok(QrPivotResult {
        q,
        r: f.r,
        perm: f.perm,
    })
}

/// Significant state dimensions picked from a rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct DimensionSelection {
    /// Original state-dimension indices, in pivot order.
    pub kappa: Vec<usize>,
    /// `|diag(R)|` for each selected dimension.
    pub pivots: Vec<f64>,
}

impl DimensionSelection {
    /// Every dimension, used when the rollout carries no variance at all.
    pub fn all(p: usize) -> Self {
        Self {
            kappa: (0..p).collect(),
            pivots: vec![0.0; p],
        }
    }

    pub fn len(&self) -> usize {
        self.kappa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kappa.is_empty()
    }
}

/// Keeps the dimensions whose pivot is at least `nu` times the largest one.
///
/// Columns are mean-centered first. At most `min(rows, cols)` dimensions can
/// be returned; the top pivot is always kept.
pub fn find_important_dimensions(omega: &Matrix, nu: f64) -> Result<DimensionSelection> {
    if !(nu > 0.0 && nu < 1.0) {
        return Err(FacError::Domain(format!("nu must lie in (0, 1), got {nu}")));
    }
    if omega.rows() < 2 {
        return Err(FacError::DegenerateRollout("need at least two rollout states"));
    }
    if !omega.is_finite() {
        return Err(FacError::NonFiniteInput);
    }
    let centered = omega.center_columns();
    if centered.max_abs() == 0.0 {
        return Err(FacError::DegenerateRollout("every column is constant"));
    }
    let f = factorize(&centered)?;
    let diag = abs_diagonal(&f.r);
    let top = diag[0];
    let mut kappa = Vec::new();
    let mut pivots = Vec::new();
    for (i, &d) in diag.iter().enumerate() {
        if d >= nu * top {
            kappa.push(f.perm[i]);
            pivots.push(d);
        } else {
            break;
        }
    }
    Ok(DimensionSelection { kappa, pivots })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_has_unit_pivots() {
        let qr = qr_column_pivot(&Matrix::identity(3)).unwrap();
        for d in qr.pivot_magnitudes() {
            assert!((d - 1.0).abs() < 1e-15);
        }
        let mut p = qr.perm.clone();
        p.sort_unstable();
        assert_eq!(p, vec![0, 1, 2]);
    }

    #[test]
    fn rank_one_detected() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]]).unwrap();
        let qr = qr_column_pivot(&a).unwrap();
        assert!(qr.r[(1, 1)].abs() <= 1e-12);
        // The larger-norm column leads.
        assert_eq!(qr.perm[0], 1);
    }

    #[test]
    fn rejects_non_finite() {
        let a = Matrix::from_rows(&[[1.0, f64::NAN], [0.0, 1.0]]).unwrap();
        assert!(matches!(qr_column_pivot(&a), Err(FacError::NonFiniteInput)));
        assert!(matches!(
            find_important_dimensions(&a, 0.5),
            Err(FacError::NonFiniteInput)
        ));
    }

    #[test]
    fn wide_matrix_is_rank_bounded() {
        let a = Matrix::from_rows(&[[1.0, 0.0, 3.0, 1.0], [0.0, 2.0, 1.0, -1.0]]).unwrap();
        let qr = qr_column_pivot(&a).unwrap();
        assert_eq!(qr.r.rows(), 2);
        assert_eq!(qr.r.cols(), 4);
        let back = qr.q.matmul(&qr.r).unwrap();
        let ap = a.permute_columns(&qr.perm);
        for (x, y) in back.data().iter().zip(ap.data()) {
            assert!((x - y).abs() < 1e-12);
        }
        // Two rows centered leave rank one.
        let sel = find_important_dimensions(&a, 0.01).unwrap();
        assert!(sel.len() <= 2);
    }

    #[test]
    fn duplicate_columns_never_both_selected() {
        let rows: Vec<[f64; 3]> = (0..40)
            .map(|i| {
                let t = i as f64;
                let x = (0.37 * t).sin() * 2.0;
                [x, (1.3 * t).cos(), x]
            })
            .collect();
        let sel = find_important_dimensions(&Matrix::from_rows(&rows).unwrap(), 0.5).unwrap();
        assert!(sel.len() <= 2);
        assert!(!(sel.kappa.contains(&0) && sel.kappa.contains(&2)));
    }

    #[test]
    fn constant_rollout_is_degenerate() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]]).unwrap();
        assert!(matches!(
            find_important_dimensions(&a, 0.5),
            Err(FacError::DegenerateRollout(_))
        ));
    }

    #[test]
    fn nu_outside_unit_interval_rejected() {
        let a = Matrix::identity(3);
        assert!(find_important_dimensions(&a, 0.0).is_err());
        assert!(find_important_dimensions(&a, 1.0).is_err());
    }

    #[test]
    fn ties_break_to_lower_index() {
        let a = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let qr = qr_column_pivot(&a).unwrap();
        assert_eq!(qr.perm, vec![0, 1]);
    }
}
