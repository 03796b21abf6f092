//! Cramér-Rao bounds for complex parameter vectors.
//!
//! The Fisher information is the `n x n` matrix
//! `J = E[(d ln p / d theta^*)(d ln p / d theta^*)^H]`. Without constraints the
//! bound is `J^+`; with a holomorphic equality constraint `f(theta) = 0` whose
//! Jacobian `df/dtheta^T` has full row rank, it is `U (U^H J U)^+ U^H` where the
//! columns of `U` are an orthonormal basis of the Jacobian's null space.

use crate::error::{Error, Result};
use crate::linalg::{
    fix_column_phases, full_left_svd, hermitian_eigenvalues, pinv, CMatrix, PINV_RCOND, RANK_RTOL,
};

/// Complex Fisher information matrix (Hermitian, positive semidefinite).
#[derive(Debug, Clone, PartialEq)]
pub struct Fim(CMatrix);

impl Fim {
    /// Validates Hermitian symmetry (relative `1e-12`) and positive
    /// semidefiniteness (smallest eigenvalue `>= -1e-10` times the largest).
    pub fn new(j: CMatrix) -> Result<Self> {
        let (rows, cols) = j.shape();
        if rows != cols {
            return Err(Error::ShapeMismatch(format!("FIM must be square, got {rows}x{cols}")));
        }
        let scale = j.norm();
        let asym = (&j - j.adjoint()).norm();
        if asym > 1e-12 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidConfig(format!(
                "FIM is not Hermitian (relative asymmetry {:e})",
                asym / scale
            )));
        }
        let ev = hermitian_eigenvalues(&j);
        if let (Some(&lo), Some(&hi)) = (ev.first(), ev.last()) {
            if lo < -1e-10 * hi.abs().max(f64::MIN_POSITIVE) {
                return Err(Error::InvalidConfig(format!(
                    "FIM is not positive semidefinite (eigenvalues {lo:e} .. {hi:e})"
                )));
            }
        }
        Ok(Fim(j))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }
}

/// Jacobian `df/dtheta^T` (`m x n`, full row rank) of a holomorphic constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintJacobian(CMatrix);

impl ConstraintJacobian {
    pub fn new(jf: CMatrix) -> Result<Self> {
        let (m, n) = jf.shape();
        if m > n {
            return Err(Error::ShapeMismatch(format!(
                "constraint Jacobian must be wide, got {m}x{n}"
            )));
        }
        if m > 0 {
            let sv = jf.singular_values();
            let (hi, lo) = (sv.max(), sv.min());
            if !(hi > 0.0) || lo <= RANK_RTOL * hi {
                let ratio = if hi > 0.0 { lo / hi } else { 0.0 };
                return Err(Error::RankDeficient { what: "constraint Jacobian", ratio });
            }
        }
        Ok(ConstraintJacobian(jf))
    }

    /// Constraint fixing the single coordinate `d` of an `n`-vector.
    pub fn fix_coordinate(n: usize, d: usize) -> Result<Self> {
        if d >= n {
            return Err(Error::InvalidDimensions(format!("coordinate {d} outside 0..{n}")));
        }
        let mut jf = CMatrix::zeros(1, n);
        jf[(0, d)] = num_complex::Complex64::new(1.0, 0.0);
        Ok(ConstraintJacobian(jf))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }
}

/// Orthonormal basis (`n x (n-m)`) of the null space of `jf`.
///
/// The columns are the right singular vectors belonging to the zero singular
/// values, in the order of the full decomposition, each scaled so that its
/// largest-magnitude entry is real and positive.
pub fn orthonormal_nullspace(jf: &ConstraintJacobian) -> Result<CMatrix> {
    let a = jf.matrix();
    let (m, n) = a.shape();
    // Right singular vectors of `a` are the left singular vectors of `a^H`.
    let (u, sv) = full_left_svd(&a.adjoint());
    if let (Some(&hi), Some(&lo)) = (sv.first(), sv.last()) {
        if !(hi > 0.0) || lo <= RANK_RTOL * hi {
            let ratio = if hi > 0.0 { lo / hi } else { 0.0 };
            return Err(Error::RankDeficient { what: "constraint Jacobian", ratio });
        }
    }
    let mut basis = u.columns(m, n - m).into_owned();
    fix_column_phases(&mut basis);
    Ok(basis)
}

/// `J^+` with singular values below `1e-12` of the largest treated as zero.
pub fn crb_unconstrained(j: &Fim) -> CMatrix {
    let p = pinv(j.matrix(), PINV_RCOND);
    (&p + p.adjoint()) * num_complex::Complex64::new(0.5, 0.0)
}

/// `U (U^H J U)^+ U^H` for the null-space basis `U` of the constraint Jacobian.
pub fn crb_constrained(j: &Fim, jf: &ConstraintJacobian) -> Result<CMatrix> {
    let n = j.dim();
    if jf.matrix().ncols() != n {
        return Err(Error::ShapeMismatch(format!(
            "constraint Jacobian has {} columns, FIM is {n}x{n}",
            jf.matrix().ncols()
        )));
    }
    let u = orthonormal_nullspace(jf)?;
    Ok(crb_with_basis(j, &u))
}

/// Constrained bound for an explicitly supplied orthonormal basis `u`.
pub fn crb_with_basis(j: &Fim, u: &CMatrix) -> CMatrix {
    let n = j.dim();
    if u.ncols() == 0 {
        return CMatrix::zeros(n, n);
    }
    let reduced = u.adjoint() * j.matrix() * u;
    let inner = pinv(&reduced, PINV_RCOND);
    let out = u * inner * u.adjoint();
    (&out + out.adjoint()) * num_complex::Complex64::new(0.5, 0.0)
}

/// Schur-complement covariance bound `S22 - S21 S11^+ S12`.
///
/// For any valid joint covariance `[[S11, S12], [S21, S22]]` the result is
/// positive semidefinite; it vanishes when the second variable is an affine
/// function of the first.
pub fn schur_cov_bound(
    s11: &CMatrix,
    s12: &CMatrix,
    s21: &CMatrix,
    s22: &CMatrix,
) -> Result<CMatrix> {
    let (a, b) = (s11.nrows(), s22.nrows());
    if s11.ncols() != a || s22.ncols() != b || s12.shape() != (a, b) || s21.shape() != (b, a) {
        return Err(Error::ShapeMismatch(format!(
            "inconsistent covariance blocks {:?} {:?} {:?} {:?}",
            s11.shape(),
            s12.shape(),
            s21.shape(),
            s22.shape()
        )));
    }
    Ok(s22 - s21 * pinv(s11, PINV_RCOND) * s12)
}
