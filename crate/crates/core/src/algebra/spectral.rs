use nalgebra::{DMatrix, SymmetricEigen};

use super::operator::{gram_schmidt, Ket, Operator, C64};
use crate::error::{domain, Result};

/// Tolerance on `max|A - A†|` accepted by [`hermitian_eig`].
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Default relative tolerance of [`numerical_rank`].
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Eigenvalues in ascending order with matching orthonormal eigenvectors.
#[derive(Clone, Debug)]
pub struct HermitianEigensystem {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Ket>,
}

impl HermitianEigensystem {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues[self.dim() - 1]
    }

    /// `Σ f(λᵢ) |i⟩⟨i|`
    pub fn map(&self, f: impl Fn(f64) -> C64) -> Operator {
        let d = self.dim();
        let mut m = DMatrix::<C64>::zeros(d, d);
        for (lambda, v) in self.eigenvalues.iter().zip(&self.eigenvectors) {
            m += v * v.adjoint() * f(*lambda);
        }
        Operator::wrap(m)
    }

    pub fn reconstruct(&self) -> Operator {
        self.map(|l| C64::new(l, 0.0))
    }

    /// Eigenvectors as the columns of a unitary matrix.
    pub fn unitary(&self) -> Operator {
        Operator::wrap(DMatrix::from_columns(&self.eigenvectors))
    }
}

/// Full eigensystem of a Hermitian operator.
///
/// Eigenvalues come back ascending. Eigenvectors belonging to numerically
/// degenerate eigenvalues are re-orthonormalized in index order; no phase
/// convention is imposed.
pub fn hermitian_eig(a: &Operator) -> Result<HermitianEigensystem> {
    let herr = a.hermiticity_error();
    if herr > HERMITIAN_TOL * a.max_abs().max(1.0) {
        return Err(domain(format!(
            "hermitian_eig requires a Hermitian operator (max |A - A†| = {herr:e})"
        )));
    }
    Ok(eig_unchecked(a))
}

pub(crate) fn eig_unchecked(a: &Operator) -> HermitianEigensystem {
    let se = SymmetricEigen::new(a.hermitian_part().into_matrix());
    let mut order: Vec<usize> = (0..se.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| se.eigenvalues[i].total_cmp(&se.eigenvalues[j]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let raw: Vec<Ket> = order
        .iter()
        .map(|&i| se.eigenvectors.column(i).into_owned())
        .collect();

    let scale = eigenvalues
        .iter()
        .fold(0.0f64, |m, l| m.max(l.abs()))
        .max(1.0);
    let mut eigenvectors = Vec::with_capacity(raw.len());
    let mut start = 0;
    while start < raw.len() {
        let mut end = start + 1;
        while end < raw.len() && eigenvalues[end] - eigenvalues[end - 1] <= 1e-10 * scale {
            end += 1;
        }
        if end - start == 1 {
            eigenvectors.push(raw[start].clone());
        } else {
            let block = gram_schmidt(&raw[start..end], 1e-12);
            debug_assert_eq!(block.len(), end - start);
            eigenvectors.extend(block);
        }
        start = end;
    }
    HermitianEigensystem {
        eigenvalues,
        eigenvectors,
    }
}

/// Number of singular values above `tol` times the largest one.
pub fn numerical_rank(a: &Operator, tol: f64) -> usize {
    let sv = a.matrix().singular_values();
    let largest = sv.iter().cloned().fold(0.0f64, f64::max);
    if largest == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * largest).count()
}

/// Sum of absolute eigenvalues of a Hermitian operator.
pub fn trace_norm(a: &Operator) -> Result<f64> {
    Ok(hermitian_eig(a)?.eigenvalues.iter().map(|l| l.abs()).sum())
}

/// `‖a − b‖₁ / 2` for Hermitian `a`, `b`.
pub fn trace_distance(a: &Operator, b: &Operator) -> Result<f64> {
    a.check_same_dim(b, "trace_distance")?;
    Ok(0.5 * trace_norm(&(a - b))?)
}

/// `exp(-i s A)` for Hermitian `A`.
pub fn unitary_exp(a: &Operator, s: f64) -> Result<Operator> {
    let es = hermitian_eig(a)?;
    Ok(es.map(|l| C64::from_polar(1.0, -s * l)))
}
