//! Dense symmetric linear algebra.
//!
//! Every certificate in this crate eventually reduces to a question about a
//! small dense symmetric matrix: is it negative semidefinite, how far from the
//! boundary is it, can it be factored as `FᵀF`. This module answers those
//! questions with a cyclic Jacobi eigensolver and a handful of helpers built
//! on top of it (Schur complements, PSD factorization, Lyapunov solves).
//!
//! Matrices are `nalgebra::DMatrix<f64>`; symmetric ones are wrapped in
//! [`SymMatrix`], which symmetrizes on construction.

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance used when callers do not supply one.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Sweep cap for the cyclic Jacobi iteration.
pub const MAX_JACOBI_SWEEPS: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatError {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix dimension must be at least 1")]
    Empty,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite entry in matrix")]
    NonFinite,
    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("Schur pivot block is not negative definite (max eigenvalue {max_eig:e})")]
    PivotNotNegativeDefinite { max_eig: f64 },
    #[error("matrix is indefinite beyond tolerance (min eigenvalue {min_eig:e}), cannot factor")]
    FactorizationInfeasible { min_eig: f64 },
    #[error("Lyapunov equation has no unique solution (A and -A share an eigenvalue)")]
    NoUniqueSolution,
    #[error("general eigenvalue iteration did not converge")]
    SchurFailed,
}

/// Dense real symmetric matrix. Entries satisfy `m[(i,j)] == m[(j,i)]` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Wraps `m` after replacing it by `(m + mᵀ)/2`.
    pub fn new(m: DMatrix<f64>) -> Result<Self, MatError> {
        if m.nrows() != m.ncols() {
            return Err(MatError::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(MatError::Empty);
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(MatError::NonFinite);
        }
        Ok(Self::symmetrized(m))
    }

    pub(crate) fn symmetrized(m: DMatrix<f64>) -> Self {
        let n = m.nrows();
        let mut out = m;
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (out[(i, j)] + out[(j, i)]);
                out[(i, j)] = avg;
                out[(j, i)] = avg;
            }
        }
        SymMatrix(out)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, MatError> {
        Self::new(matrix_from_rows(rows)?)
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(DMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix(DMatrix::zeros(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn frobenius(&self) -> f64 {
        self.0.norm()
    }

    pub fn scale(&self, k: f64) -> SymMatrix {
        SymMatrix(&self.0 * k)
    }

    /// Quadratic form `vᵀ M v`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        let n = self.dim();
        debug_assert_eq!(v.len(), n);
        let mut acc = 0.0;
        for i in 0..n {
            let row: f64 = v.iter().enumerate().map(|(j, vj)| self.0[(i, j)] * vj).sum();
            acc += v[i] * row;
        }
        acc
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(&self.0)
    }
}

impl std::ops::Index<(usize, usize)> for SymMatrix {
    type Output = f64;
    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, MatError> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    for r in rows {
        if r.len() != ncols {
            return Err(MatError::DimensionMismatch {
                expected: ncols,
                got: r.len(),
            });
        }
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Row-major copy; signed zeros are written as `0`.
pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)] + 0.0).collect())
        .collect()
}

/// `tol · (1 + ‖M‖_F)`: the absolute threshold that a relative tolerance
/// turns into for a particular matrix.
pub fn scaled_tol(tol: f64, m: &SymMatrix) -> f64 {
    tol * (1.0 + m.frobenius())
}

#[derive(Debug, Clone)]
pub struct SymEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `i` is the unit eigenvector for `values[i]`.
    pub vectors: DMatrix<f64>,
}

/// Cyclic Jacobi eigendecomposition.
pub fn sym_eigen(m: &SymMatrix) -> Result<SymEigen, MatError> {
    let n = m.dim();
    let mut a = m.as_matrix().clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = a.norm();
    let threshold = 1e-15 * scale;

    let mut converged = false;
    for _ in 0..MAX_JACOBI_SWEEPS {
        let off = off_diagonal_norm(&a);
        if off <= threshold || off == 0.0 {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut a, &mut v, p, q, c, s, t);
            }
        }
    }
    if !converged {
        // one last look: the final sweep may have finished the job
        if off_diagonal_norm(&a) > threshold {
            return Err(MatError::NoConvergence {
                sweeps: MAX_JACOBI_SWEEPS,
            });
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        let mut vec = v.column(src).into_owned();
        // sign convention: largest-magnitude component positive
        let mut lead = 0;
        for k in 1..n {
            if vec[k].abs() > vec[lead].abs() + 1e-14 {
                lead = k;
            }
        }
        if vec[lead] < 0.0 {
            vec.neg_mut();
        }
        vectors.set_column(col, &vec);
    }
    Ok(SymEigen { values, vectors })
}

fn off_diagonal_norm(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            acc += 2.0 * a[(i, j)] * a[(i, j)];
        }
    }
    acc.sqrt()
}

#[allow(clippy::too_many_arguments)]
fn rotate(a: &mut DMatrix<f64>, v: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64, t: f64) {
    let n = a.nrows();
    let apq = a[(p, q)];
    a[(p, p)] -= t * apq;
    a[(q, q)] += t * apq;
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        let new_kp = c * akp - s * akq;
        let new_kq = s * akp + c * akq;
        a[(k, p)] = new_kp;
        a[(p, k)] = new_kp;
        a[(k, q)] = new_kq;
        a[(q, k)] = new_kq;
    }
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Definiteness {
    #[serde(rename = "PD")]
    PositiveDefinite,
    #[serde(rename = "PSD")]
    PositiveSemidefinite,
    #[serde(rename = "ND")]
    NegativeDefinite,
    #[serde(rename = "NSD")]
    NegativeSemidefinite,
    #[serde(rename = "INDEFINITE")]
    Indefinite,
}

/// Which side of the boundary a caller cares about. A zero matrix is both
/// PSD and NSD; the sense decides which label the single verdict carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sense {
    #[default]
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefinitenessVerdict {
    pub min_eig: f64,
    pub max_eig: f64,
    pub verdict: Definiteness,
    /// Absolute threshold the eigenvalues were compared against.
    pub tol: f64,
}

impl DefinitenessVerdict {
    pub fn classify(min_eig: f64, max_eig: f64, tol: f64, sense: Sense) -> Self {
        use Definiteness::*;
        let pos = || {
            if min_eig > tol {
                Some(PositiveDefinite)
            } else if min_eig >= -tol {
                Some(PositiveSemidefinite)
            } else {
                None
            }
        };
        let neg = || {
            if max_eig < -tol {
                Some(NegativeDefinite)
            } else if max_eig <= tol {
                Some(NegativeSemidefinite)
            } else {
                None
            }
        };
        let verdict = match sense {
            Sense::Positive => pos().or_else(neg),
            Sense::Negative => neg().or_else(pos),
        }
        .unwrap_or(Indefinite);
        DefinitenessVerdict {
            min_eig,
            max_eig,
            verdict,
            tol,
        }
    }

    pub fn is_psd(&self) -> bool {
        self.min_eig >= -self.tol
    }

    pub fn is_pd(&self) -> bool {
        self.min_eig > self.tol
    }

    pub fn is_nsd(&self) -> bool {
        self.max_eig <= self.tol
    }

    pub fn is_nd(&self) -> bool {
        self.max_eig < -self.tol
    }
}

/// Definiteness with the default PSD-first labelling. `tol` is absolute.
pub fn definiteness(m: &SymMatrix, tol: f64) -> Result<DefinitenessVerdict, MatError> {
    definiteness_toward(m, tol, Sense::Positive)
}

pub fn definiteness_toward(m: &SymMatrix, tol: f64, sense: Sense) -> Result<DefinitenessVerdict, MatError> {
    let eig = sym_eigen(m)?;
    let min_eig = eig.values[0];
    let max_eig = *eig.values.last().expect("dim >= 1");
    Ok(DefinitenessVerdict::classify(min_eig, max_eig, tol, sense))
}

/// `A11 − A12·A22⁻¹·A12ᵀ` for the partition of `m` at `split`.
///
/// `A22` must be negative definite beyond `tol` (absolute); otherwise the
/// caller has to fall back to a full eigensolve of `m`.
pub fn schur_reduce(m: &SymMatrix, split: usize, tol: f64) -> Result<SymMatrix, MatError> {
    let n = m.dim();
    if split == 0 || split >= n {
        return Err(MatError::DimensionMismatch {
            expected: n - 1,
            got: split,
        });
    }
    let a = m.as_matrix();
    let a11 = a.view((0, 0), (split, split)).into_owned();
    let a12 = a.view((0, split), (split, n - split)).into_owned();
    let a22 = SymMatrix::symmetrized(a.view((split, split), (n - split, n - split)).into_owned());
    let pivot = definiteness_toward(&a22, tol, Sense::Negative)?;
    if !pivot.is_nd() {
        return Err(MatError::PivotNotNegativeDefinite { max_eig: pivot.max_eig });
    }
    let neg = -a22.into_matrix();
    let chol = neg
        .cholesky()
        .ok_or(MatError::PivotNotNegativeDefinite { max_eig: pivot.max_eig })?;
    // A22⁻¹ = −(−A22)⁻¹
    let x = chol.solve(&a12.transpose());
    Ok(SymMatrix::symmetrized(a11 + &a12 * x))
}

/// Factor a PSD matrix as `FᵀF`. `F` has one row per eigenvalue above `tol`
/// (absolute); smaller eigenvalues are clipped to zero. A zero matrix yields
/// a `0 × n` factor.
pub fn psd_factor(m: &SymMatrix, tol: f64) -> Result<DMatrix<f64>, MatError> {
    let eig = sym_eigen(m)?;
    if eig.values[0] < -tol {
        return Err(MatError::FactorizationInfeasible { min_eig: eig.values[0] });
    }
    let n = m.dim();
    let kept: Vec<usize> = (0..n).rev().filter(|&i| eig.values[i] > tol).collect();
    let mut f = DMatrix::zeros(kept.len(), n);
    for (row, &i) in kept.iter().enumerate() {
        let w = eig.values[i].sqrt();
        for j in 0..n {
            f[(row, j)] = w * eig.vectors[(j, i)];
        }
    }
    Ok(f)
}

/// Solve `AᵀP + PA = −Q` through the `n² × n²` Kronecker linearization.
pub fn lyapunov_solve(a: &DMatrix<f64>, q: &SymMatrix) -> Result<SymMatrix, MatError> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(MatError::NotSquare {
            rows: n,
            cols: a.ncols(),
        });
    }
    if q.dim() != n {
        return Err(MatError::DimensionMismatch {
            expected: n,
            got: q.dim(),
        });
    }
    let eye = DMatrix::<f64>::identity(n, n);
    let at = a.transpose();
    // column-major vec: vec(AᵀP) = (I⊗Aᵀ)vec(P), vec(PA) = (Aᵀ⊗I)vec(P)
    let k = eye.kronecker(&at) + at.kronecker(&eye);
    let rhs = DVector::from_column_slice(q.as_matrix().as_slice()) * -1.0;

    let lu = k.clone().lu();
    let u = lu.u();
    let diag_max = u.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diag_min = u.diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if diag_max == 0.0 || diag_min <= 1e-13 * diag_max {
        return Err(MatError::NoUniqueSolution);
    }
    let mut x = lu.solve(&rhs).ok_or(MatError::NoUniqueSolution)?;
    // one round of iterative refinement
    let r = &rhs - &k * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    let p = DMatrix::from_column_slice(n, n, x.as_slice());
    let p = SymMatrix::symmetrized(p);
    let resid = lyapunov_residual(a, &p, q);
    if !resid.is_finite() || resid > 1e-8 * (1.0 + q.frobenius()) * (1.0 + p.frobenius()) {
        return Err(MatError::NoUniqueSolution);
    }
    Ok(p)
}

/// `‖AᵀP + PA + Q‖_F`.
pub fn lyapunov_residual(a: &DMatrix<f64>, p: &SymMatrix, q: &SymMatrix) -> f64 {
    let pm = p.as_matrix();
    (a.transpose() * pm + pm * a + q.as_matrix()).norm()
}

/// Eigenvalues of a general square matrix via nalgebra's real Schur form.
/// Sorted by real part, then imaginary part.
pub fn general_eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex<f64>>, MatError> {
    if a.nrows() != a.ncols() {
        return Err(MatError::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    let schur = nalgebra::linalg::Schur::try_new(a.clone(), f64::EPSILON, 100_000).ok_or(MatError::SchurFailed)?;
    let mut ev: Vec<Complex<f64>> = schur.complex_eigenvalues().iter().copied().collect();
    ev.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    Ok(ev)
}

/// Reciprocal 2-norm condition number `σ_min / σ_max` (0 for the zero matrix).
pub fn reciprocal_condition(a: &DMatrix<f64>) -> f64 {
    let sv = a.clone().singular_values();
    let max = sv.iter().fold(0.0f64, |m, v| m.max(*v));
    let min = sv.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    if max == 0.0 {
        0.0
    } else {
        min / max
    }
}

/// Symmetric part `(M + Mᵀ)/2` of a square matrix.
pub fn sym_part(m: &DMatrix<f64>) -> SymMatrix {
    SymMatrix::symmetrized(m.clone())
}

/// Assemble `[[a11, a12], [a12ᵀ, a22]]`.
pub fn block_sym(a11: &DMatrix<f64>, a12: &DMatrix<f64>, a22: &DMatrix<f64>) -> SymMatrix {
    let p = a11.nrows();
    let q = a22.nrows();
    let mut m = DMatrix::zeros(p + q, p + q);
    m.view_mut((0, 0), (p, p)).copy_from(a11);
    m.view_mut((0, p), (p, q)).copy_from(a12);
    m.view_mut((p, 0), (q, p)).copy_from(&a12.transpose());
    m.view_mut((p, p), (q, q)).copy_from(a22);
    SymMatrix::symmetrized(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn eig_residual(m: &SymMatrix, e: &SymEigen) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, &lam) in e.values.iter().enumerate() {
            let v = e.vectors.column(i);
            let r = m.as_matrix() * v - v * lam;
            worst = worst.max(r.norm());
        }
        worst
    }

    #[test]
    fn eigen_of_diagonal_is_sorted_and_axis_aligned() {
        let m = SymMatrix::from_diagonal(&[3.0, 1.0]);
        let e = sym_eigen(&m).unwrap();
        assert_eq!(e.values, vec![1.0, 3.0]);
        assert_eq!(e.vectors[(1, 0)], 1.0);
        assert_eq!(e.vectors[(0, 1)], 1.0);
    }

    #[test]
    fn eigen_of_swap_matrix() {
        let m = SymMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let e = sym_eigen(&m).unwrap();
        assert_abs_diff_eq!(e.values[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.values[1], 1.0, epsilon = 1e-14);
        assert!(eig_residual(&m, &e) < 1e-12);
    }

    #[test]
    fn eigen_matches_two_by_two_closed_form() {
        let (a, b, c) = (-5.5, -3.0, -2.0);
        let m = SymMatrix::from_rows(&[vec![a, b], vec![b, c]]).unwrap();
        let closed = ((a + c) + ((a - c) * (a - c) + 4.0 * b * b).sqrt()) / 2.0;
        let e = sym_eigen(&m).unwrap();
        assert_abs_diff_eq!(e.values[1], closed, epsilon = 1e-12);
        assert_abs_diff_eq!(e.values[1], -0.2769, epsilon = 1e-4);
    }

    #[test]
    fn definiteness_labels() {
        let z = SymMatrix::zeros(2);
        let v = definiteness(&z, 1e-9).unwrap();
        assert_eq!(v.verdict, Definiteness::PositiveSemidefinite);
        assert_eq!((v.min_eig, v.max_eig), (0.0, 0.0));
        assert!(v.is_nsd());
        let vn = definiteness_toward(&z, 1e-9, Sense::Negative).unwrap();
        assert_eq!(vn.verdict, Definiteness::NegativeSemidefinite);

        let id = SymMatrix::identity(3);
        assert_eq!(definiteness(&id, 1e-9).unwrap().verdict, Definiteness::PositiveDefinite);

        let nd = SymMatrix::from_diagonal(&[-1.0, -0.125]);
        assert_eq!(definiteness(&nd, 1e-9).unwrap().verdict, Definiteness::NegativeDefinite);

        let ind = SymMatrix::from_diagonal(&[-1.0, 2.0]);
        assert_eq!(definiteness(&ind, 1e-9).unwrap().verdict, Definiteness::Indefinite);
    }

    #[test]
    fn schur_of_decoupled_block() {
        let m = SymMatrix::from_diagonal(&[-2.0, -2.0]);
        let s = schur_reduce(&m, 1, 1e-9).unwrap();
        assert_eq!(s.dim(), 1);
        assert_abs_diff_eq!(s[(0, 0)], -2.0, epsilon = 1e-15);
    }

    #[test]
    fn schur_rejects_indefinite_pivot() {
        let m = SymMatrix::from_diagonal(&[-1.0, 1.0]);
        assert!(matches!(
            schur_reduce(&m, 1, 1e-9),
            Err(MatError::PivotNotNegativeDefinite { .. })
        ));
    }

    #[test]
    fn psd_factor_of_rank_one_diagonal() {
        let m = SymMatrix::from_diagonal(&[4.0, 0.0]);
        let f = psd_factor(&m, 1e-9).unwrap();
        assert_eq!(f.nrows(), 1);
        assert_abs_diff_eq!(f[(0, 0)], 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f[(0, 1)], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn psd_factor_of_identity_reconstructs() {
        let m = SymMatrix::identity(2);
        let f = psd_factor(&m, 1e-9).unwrap();
        assert!((f.transpose() * &f - DMatrix::<f64>::identity(2, 2)).norm() < 1e-14);
    }

    #[test]
    fn psd_factor_rejects_indefinite() {
        let m = SymMatrix::from_diagonal(&[1.0, -1.0]);
        assert!(matches!(
            psd_factor(&m, 1e-9),
            Err(MatError::FactorizationInfeasible { .. })
        ));
    }

    #[test]
    fn psd_factor_of_zero_is_empty() {
        let f = psd_factor(&SymMatrix::zeros(3), 1e-9).unwrap();
        assert_eq!((f.nrows(), f.ncols()), (0, 3));
    }

    #[test]
    fn lyapunov_scalar_cases() {
        let a = -DMatrix::<f64>::identity(2, 2);
        let p = lyapunov_solve(&a, &SymMatrix::identity(2).scale(2.0)).unwrap();
        assert!((p.as_matrix() - DMatrix::<f64>::identity(2, 2)).norm() < 1e-14);

        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0]));
        let p = lyapunov_solve(&a, &SymMatrix::identity(2)).unwrap();
        assert_abs_diff_eq!(p[(0, 0)], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(p[(1, 1)], 0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(p[(0, 1)], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn lyapunov_companion_matrix_matches_linear_system_oracle() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -3.0]);
        let q = SymMatrix::identity(2);
        let p = lyapunov_solve(&a, &q).unwrap();
        assert!(lyapunov_residual(&a, &p, &q) <= 1e-10 * (1.0 + q.frobenius()));
        // Oracle: the three independent equations for p11, p12, p22 written out by hand.
        // AᵀP+PA+I=0 with A=[[0,1],[-2,-3]]:
        //   -4 p12 + 1 = 0
        //   p11 - 3 p12 - 2 p22 = 0
        //   2 p12 - 6 p22 + 1 = 0
        let p12 = 0.25;
        let p22 = (1.0 + 2.0 * p12) / 6.0;
        let p11 = 3.0 * p12 + 2.0 * p22;
        assert_abs_diff_eq!(p[(0, 0)], p11, epsilon = 1e-12);
        assert_abs_diff_eq!(p[(0, 1)], p12, epsilon = 1e-12);
        assert_abs_diff_eq!(p[(1, 1)], p22, epsilon = 1e-12);
    }

    #[test]
    fn lyapunov_singular_for_zero_matrix() {
        let a = DMatrix::<f64>::zeros(2, 2);
        assert_eq!(
            lyapunov_solve(&a, &SymMatrix::identity(2)),
            Err(MatError::NoUniqueSolution)
        );
    }

    #[test]
    fn general_eigenvalues_of_diagonal() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0]));
        let ev = general_eigenvalues(&a).unwrap();
        assert_eq!(ev[0].re, -2.0);
        assert_eq!(ev[1].re, -1.0);
    }

    #[test]
    fn rejects_non_square_and_empty() {
        assert!(matches!(
            SymMatrix::new(DMatrix::zeros(2, 3)),
            Err(MatError::NotSquare { .. })
        ));
        assert_eq!(SymMatrix::new(DMatrix::zeros(0, 0)), Err(MatError::Empty));
    }
}
