//! Dense complex linear-algebra helpers shared by the bound computations.
//!
//! Everything is double precision and built on `nalgebra`'s SVD and
//! Hermitian eigensolver.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Relative singular-value cutoff for pseudo-inverses.
pub const PINV_RCOND: f64 = 1e-12;

/// Relative singular-value threshold below which a matrix is treated as rank deficient.
pub const RANK_RTOL: f64 = 1e-10;

/// Condition-number ceiling for the matrices inverted by the bound computations.
pub const MAX_CONDITION: f64 = 1e12;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Full set of left singular vectors (`rows x rows`) and the singular values,
/// sorted in descending order.
///
/// Tall inputs are padded with zero columns so that the thin decomposition
/// returned by `nalgebra` is already complete.
pub fn full_left_svd(a: &CMatrix) -> (CMatrix, Vec<f64>) {
    let (rows, cols) = a.shape();
    let k = rows.min(cols);
    if rows == 0 {
        return (CMatrix::zeros(0, 0), Vec::new());
    }
    let work = if cols < rows {
        let mut padded = CMatrix::zeros(rows, rows);
        padded.columns_mut(0, cols).copy_from(a);
        padded
    } else {
        a.clone()
    };
    let svd = SVD::new(work, true, false);
    let u = svd.u.expect("left singular vectors requested");
    let sv: Vec<f64> = svd.singular_values.iter().take(k).copied().collect();
    (u.columns(0, rows).into_owned(), sv)
}

/// Orthonormal basis of the left null space of a full-column-rank tall matrix.
///
/// Returns the trailing `rows - cols` left singular vectors, phase-normalized
/// with [`fix_column_phases`]. Fails when the smallest singular value is below
/// [`RANK_RTOL`] times the largest.
pub fn left_null_space(a: &CMatrix, what: &'static str) -> Result<CMatrix> {
    let (rows, cols) = a.shape();
    if cols > rows {
        return Err(Error::ShapeMismatch(format!(
            "{what}: expected a tall matrix, got {rows}x{cols}"
        )));
    }
    let (u, sv) = full_left_svd(a);
    check_rank(&sv, what)?;
    let mut null = u.columns(cols, rows - cols).into_owned();
    fix_column_phases(&mut null);
    Ok(null)
}

fn check_rank(sv: &[f64], what: &'static str) -> Result<()> {
    if sv.is_empty() {
        return Ok(());
    }
    let largest = sv[0];
    let smallest = *sv.last().unwrap();
    if largest == 0.0 || smallest <= RANK_RTOL * largest {
        let ratio = if largest == 0.0 { 0.0 } else { smallest / largest };
        return Err(Error::RankDeficient { what, ratio });
    }
    Ok(())
}

/// Scales every column by a unit-modulus factor so that its largest-magnitude
/// entry (lowest index on ties) becomes real and positive.
pub fn fix_column_phases(u: &mut CMatrix) {
    for mut col in u.column_iter_mut() {
        let mut best = 0usize;
        let mut best_abs = -1.0f64;
        for (i, z) in col.iter().enumerate() {
            let a = z.norm();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if best_abs > 0.0 {
            let phase = col[best].conj() / best_abs;
            col.iter_mut().for_each(|z| *z *= phase);
            col[best] = c(col[best].re, 0.0);
        }
    }
}

/// Moore-Penrose pseudo-inverse with singular values below
/// `rcond * max_singular_value` treated as zero.
pub fn pinv(a: &CMatrix, rcond: f64) -> CMatrix {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return CMatrix::zeros(cols, rows);
    }
    let svd = SVD::new(a.clone(), true, true);
    let smax = svd.singular_values.max();
    let cutoff = rcond * smax;
    let u = svd.u.as_ref().unwrap();
    let v_t = svd.v_t.as_ref().unwrap();
    let mut out = CMatrix::zeros(cols, rows);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            let vk = v_t.row(k).adjoint();
            let uk = u.column(k).adjoint();
            out += (vk * uk) * c(1.0 / s, 0.0);
        }
    }
    out
}

/// Eigenvalues of the Hermitian part of `a`, ascending.
pub fn hermitian_eigenvalues(a: &CMatrix) -> Vec<f64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    let eig = SymmetricEigen::new(hermitian_part(a));
    let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    ev
}

/// Eigen-decomposition of the Hermitian part of `a` with eigenpairs sorted by
/// ascending eigenvalue.
pub fn hermitian_eigen_sorted(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = a.nrows();
    let eig = SymmetricEigen::new(hermitian_part(a));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * c(0.5, 0.0)
}

/// Condition number of a Hermitian positive-definite matrix from its
/// eigenvalues; infinite when the smallest eigenvalue is not positive.
pub fn hermitian_condition(a: &CMatrix) -> f64 {
    let ev = hermitian_eigenvalues(a);
    match (ev.first(), ev.last()) {
        (Some(&lo), Some(&hi)) if lo > 0.0 => hi / lo,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    }
}

/// Inverse of a Hermitian positive-definite matrix, rejecting condition
/// numbers above [`MAX_CONDITION`]. The result is made exactly Hermitian.
pub fn inverse_hermitian_pd(a: &CMatrix, which: &'static str) -> Result<CMatrix> {
    let condition = hermitian_condition(a);
    if !(condition < MAX_CONDITION) {
        return Err(Error::IllConditioned { which, condition });
    }
    let h = hermitian_part(a);
    let inv = match h.clone().cholesky() {
        Some(ch) => ch.inverse(),
        None => h
            .try_inverse()
            .ok_or(Error::IllConditioned { which, condition })?,
    };
    Ok(hermitian_part(&inv))
}

/// Solves `a X = b` for Hermitian positive-definite `a`, rejecting condition
/// numbers above [`MAX_CONDITION`].
pub fn solve_hermitian_pd(a: &CMatrix, b: &CMatrix, which: &'static str) -> Result<CMatrix> {
    let condition = hermitian_condition(a);
    if !(condition < MAX_CONDITION) {
        return Err(Error::IllConditioned { which, condition });
    }
    let h = hermitian_part(a);
    match h.clone().cholesky() {
        Some(ch) => Ok(ch.solve(b)),
        None => h
            .lu()
            .solve(b)
            .ok_or(Error::IllConditioned { which, condition }),
    }
}

/// Removes row `d` and column `d` (the action of `E_d (.) E_d^H`).
pub fn delete_row_col(a: &CMatrix, d: usize) -> CMatrix {
    a.clone().remove_row(d).remove_column(d)
}

/// Inverse of [`delete_row_col`]: inserts a zero row and column at index `d`.
pub fn insert_zero_row_col(a: &CMatrix, d: usize) -> CMatrix {
    a.clone()
        .insert_row(d, Complex64::new(0.0, 0.0))
        .insert_column(d, Complex64::new(0.0, 0.0))
}

/// `I_n (x) a`: `n` copies of `a` along the diagonal.
pub fn block_diag_repeat(a: &CMatrix, n: usize) -> CMatrix {
    let (r, k) = a.shape();
    let mut out = CMatrix::zeros(n * r, n * k);
    for b in 0..n {
        out.view_mut((b * r, b * k), (r, k)).copy_from(a);
    }
    out
}

/// Frobenius norm of `a - b` relative to the Frobenius norm of `b`.
pub fn relative_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    let denom = b.norm();
    let num = (a - b).norm();
    if denom == 0.0 {
        num
    } else {
        num / denom
    }
}

/// Trace as a real number (imaginary part discarded).
pub fn real_trace(a: &CMatrix) -> f64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)].re).sum()
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}
