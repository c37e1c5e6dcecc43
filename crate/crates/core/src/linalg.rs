//! Small dense linear-algebra helpers for velocity matrices.

use nalgebra::{DMatrix, DVector};

/// Relative tolerance for rank decisions, scaled by the largest column norm.
pub const RANK_TOL: f64 = 1e-9;

fn max_column_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Numerical rank by Gaussian elimination with complete pivoting.
pub fn rank(m: &DMatrix<f64>) -> usize {
    let scale = max_column_norm(m);
    if scale == 0.0 {
        return 0;
    }
    let tol = RANK_TOL * scale;
    let mut a = m.clone();
    let (nr, nc) = a.shape();
    let mut r = 0;
    while r < nr.min(nc) {
        let mut best = (r, r, 0.0);
        for i in r..nr {
            for j in r..nc {
                let v = a[(i, j)].abs();
                if v > best.2 {
                    best = (i, j, v);
                }
            }
        }
        if best.2 <= tol {
            break;
        }
        a.swap_rows(r, best.0);
        a.swap_columns(r, best.1);
        let piv = a[(r, r)];
        for i in (r + 1)..nr {
            let f = a[(i, r)] / piv;
            if f != 0.0 {
                for j in r..nc {
                    let v = a[(r, j)];
                    a[(i, j)] -= f * v;
                }
            }
        }
        r += 1;
    }
    r
}

/// Projects `v` onto the orthogonal complement of `basis` (orthonormal vectors),
/// with one re-orthogonalisation pass.
fn residual(basis: &[DVector<f64>], v: &DVector<f64>) -> DVector<f64> {
    let mut r = v.clone();
    for _ in 0..2 {
        for b in basis {
            let c = b.dot(&r);
            r.axpy(-c, b, 1.0);
        }
    }
    r
}

/// Indices of the first linearly independent rows of `m`, scanning top to bottom.
pub fn independent_rows(m: &DMatrix<f64>) -> Vec<usize> {
    let scale = max_column_norm(m);
    if scale == 0.0 {
        return Vec::new();
    }
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut rows = Vec::new();
    for i in 0..m.nrows() {
        let v = m.row(i).transpose();
        let r = residual(&basis, &v);
        let n = r.norm();
        if n > RANK_TOL * scale {
            basis.push(r / n);
            rows.push(i);
        }
    }
    rows
}

/// Canonical unit rows `e_j` that, appended to the rows of `m`, give a basis of R^n.
pub fn completing_unit_rows(m: &DMatrix<f64>) -> Vec<usize> {
    let n = m.ncols();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for i in independent_rows(m) {
        let r = residual(&basis, &m.row(i).transpose());
        let nr = r.norm();
        basis.push(r / nr);
    }
    let mut out = Vec::new();
    for j in 0..n {
        if basis.len() == n {
            break;
        }
        let e = DVector::from_fn(n, |i, _| if i == j { 1.0 } else { 0.0 });
        let r = residual(&basis, &e);
        let nr = r.norm();
        if nr > RANK_TOL {
            basis.push(r / nr);
            out.push(j);
        }
    }
    out
}

/// Solves a square system, `None` when numerically singular.
pub fn solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let n = a.nrows();
    if n == 0 {
        return Some(DVector::zeros(0));
    }
    if rank(a) < n {
        return None;
    }
    a.clone().full_piv_lu().solve(b)
}

/// Inverse of a square matrix, `None` when numerically singular.
pub fn inverse(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if a.nrows() == 0 {
        return Some(DMatrix::zeros(0, 0));
    }
    if rank(a) < a.nrows() {
        return None;
    }
    a.clone().full_piv_lu().try_inverse()
}

/// Least-squares solution of `a x = b` through the pseudo-inverse.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    svd.solve(b, 1e-13).unwrap_or_else(|_| DVector::zeros(a.ncols()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_of_collinear_differences() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 1.0, 2.0]);
        assert_eq!(rank(&m), 1);
        assert_eq!(independent_rows(&m), vec![0]);
    }

    #[test]
    fn rank_ignores_tiny_noise() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1e-14]);
        assert_eq!(rank(&m), 1);
    }

    #[test]
    fn completion_reaches_full_rank() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 1.0, 0.0, 1.0, -1.0]);
        let extra = completing_unit_rows(&m);
        assert_eq!(extra, vec![0]);
    }

    #[test]
    fn solve_rejects_singular() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(solve(&a, &DVector::from_vec(vec![1.0, 2.0])).is_none());
    }
}
