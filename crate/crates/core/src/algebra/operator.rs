use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{domain, Result};

pub type C64 = Complex64;

/// Column vector on a finite-dimensional Hilbert space.
pub type Ket = DVector<C64>;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const IM: C64 = C64::new(0.0, 1.0);

/// Dense complex square matrix.
///
/// Hamiltonians, generators, jump operators, Kraus operators and unitaries
/// all use this type. The only structural invariant is squareness with
/// `dim >= 1`; Hermiticity or unitarity is checked by the operations that
/// need it.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    m: DMatrix<C64>,
}

impl Operator {
    pub fn from_matrix(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(domain(format!(
                "operator must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(domain("operator dimension must be at least 1"));
        }
        Ok(Self { m })
    }

    pub(crate) fn wrap(m: DMatrix<C64>) -> Self {
        debug_assert!(m.is_square() && m.nrows() > 0);
        Self { m }
    }

    /// Builds an operator from row-major complex entries.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let d = rows.len();
        if d == 0 {
            return Err(domain("operator dimension must be at least 1"));
        }
        if let Some(bad) = rows.iter().position(|r| r.len() != d) {
            return Err(domain(format!(
                "row {bad} has {} entries, expected {d}",
                rows[bad].len()
            )));
        }
        Ok(Self::wrap(DMatrix::from_fn(d, d, |i, j| rows[i][j])))
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let rows: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Self::wrap(DMatrix::from_fn(dim, dim, f))
    }

    pub fn identity(dim: usize) -> Self {
        Self::wrap(DMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Self::wrap(DMatrix::zeros(dim, dim))
    }

    pub fn diagonal(entries: &[C64]) -> Self {
        Self::from_fn(entries.len(), |i, j| if i == j { entries[i] } else { ZERO })
    }

    /// `|a⟩⟨b|`
    pub fn outer(a: &Ket, b: &Ket) -> Self {
        Self::wrap(a * b.adjoint())
    }

    /// `|v⟩⟨v|`
    pub fn projector(v: &Ket) -> Self {
        Self::outer(v, v)
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.m[(i, j)]
    }

    pub fn adjoint(&self) -> Self {
        Self::wrap(self.m.adjoint())
    }

    pub fn transpose(&self) -> Self {
        Self::wrap(self.m.transpose())
    }

    pub fn conjugate(&self) -> Self {
        Self::wrap(self.m.conjugate())
    }

    pub fn trace(&self) -> C64 {
        self.m.trace()
    }

    pub fn scale(&self, c: C64) -> Self {
        Self::wrap(&self.m * c)
    }

    pub fn scale_real(&self, c: f64) -> Self {
        self.scale(C64::new(c, 0.0))
    }

    /// `[A, B] = AB - BA`
    pub fn commutator(&self, other: &Operator) -> Self {
        Self::wrap(&self.m * &other.m - &other.m * &self.m)
    }

    /// `{A, B} = AB + BA`
    pub fn anticommutator(&self, other: &Operator) -> Self {
        Self::wrap(&self.m * &other.m + &other.m * &self.m)
    }

    /// `U A U†`
    pub fn conjugate_by(&self, u: &Operator) -> Self {
        Self::wrap(&u.m * &self.m * u.m.adjoint())
    }

    /// Largest entry magnitude of `A - A†`.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.m[(i, j)] - self.m[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    /// `(A + A†) / 2`
    pub fn hermitian_part(&self) -> Self {
        Self::wrap((&self.m + self.m.adjoint()) * C64::new(0.5, 0.0))
    }

    /// Deviation of `A†A` from the identity, in max-norm.
    pub fn unitarity_error(&self) -> f64 {
        let p = self.m.adjoint() * &self.m;
        let d = self.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                let target = if i == j { ONE } else { ZERO };
                worst = worst.max((p[(i, j)] - target).norm());
            }
        }
        worst
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.norm()
    }

    pub fn max_abs(&self) -> f64 {
        self.m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn apply(&self, v: &Ket) -> Ket {
        &self.m * v
    }

    /// `⟨v|A|v⟩`
    pub fn expectation(&self, v: &Ket) -> C64 {
        v.dotc(&(&self.m * v))
    }

    /// Column-stacking vectorization: entry `(i, j)` lands at `i + dim * j`.
    pub fn vectorize(&self) -> DVector<C64> {
        DVector::from_column_slice(self.m.as_slice())
    }

    /// Inverse of [`Operator::vectorize`].
    pub fn from_vectorized(v: &DVector<C64>) -> Result<Self> {
        let n = v.len();
        let d = (n as f64).sqrt().round() as usize;
        if d == 0 || d * d != n {
            return Err(domain(format!("vector of length {n} is not a vectorized square matrix")));
        }
        Ok(Self::wrap(DMatrix::from_column_slice(d, d, v.as_slice())))
    }

    pub(crate) fn check_same_dim(&self, other: &Operator, what: &str) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(domain(format!(
                "{what}: dimension mismatch ({} vs {})",
                self.dim(),
                other.dim()
            )));
        }
        Ok(())
    }
}

macro_rules! binop {
    ($tr:ident, $f:ident, $op:tt) => {
        impl $tr<&Operator> for &Operator {
            type Output = Operator;
            fn $f(self, rhs: &Operator) -> Operator {
                Operator::wrap(&self.m $op &rhs.m)
            }
        }
        impl $tr<Operator> for Operator {
            type Output = Operator;
            fn $f(self, rhs: Operator) -> Operator {
                Operator::wrap(self.m $op rhs.m)
            }
        }
        impl $tr<&Operator> for Operator {
            type Output = Operator;
            fn $f(self, rhs: &Operator) -> Operator {
                Operator::wrap(self.m $op &rhs.m)
            }
        }
    };
}

binop!(Add, add, +);
binop!(Sub, sub, -);
binop!(Mul, mul, *);

impl Neg for Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        Operator::wrap(-self.m)
    }
}

impl Mul<C64> for &Operator {
    type Output = Operator;
    fn mul(self, c: C64) -> Operator {
        self.scale(c)
    }
}

/// Kronecker product; `a` is the outer (slow) factor.
pub fn tensor_product(a: &Operator, b: &Operator) -> Operator {
    Operator::wrap(a.m.kronecker(&b.m))
}

/// Left-to-right Kronecker product of a non-empty list.
pub fn tensor_all(factors: &[Operator]) -> Result<Operator> {
    let (first, rest) = factors
        .split_first()
        .ok_or_else(|| domain("tensor_all needs at least one factor"))?;
    Ok(rest.iter().fold(first.clone(), |acc, f| tensor_product(&acc, f)))
}

pub fn kron_ket(a: &Ket, b: &Ket) -> Ket {
    a.kronecker(b)
}

/// `I ⊗ … ⊗ op ⊗ … ⊗ I` with `op` on subsystem `site`.
pub fn embed(op: &Operator, site: usize, dims: &[usize]) -> Result<Operator> {
    if site >= dims.len() {
        return Err(domain(format!(
            "subsystem index {site} out of range for {} subsystems",
            dims.len()
        )));
    }
    if dims[site] != op.dim() {
        return Err(domain(format!(
            "operator of dimension {} cannot act on subsystem {site} of dimension {}",
            op.dim(),
            dims[site]
        )));
    }
    let left: usize = dims[..site].iter().product();
    let right: usize = dims[site + 1..].iter().product();
    Ok(tensor_product(
        &tensor_product(&Operator::identity(left), op),
        &Operator::identity(right),
    ))
}

/// Hilbert–Schmidt inner product `Tr(A† B)`.
pub fn hs_inner(a: &Operator, b: &Operator) -> Result<C64> {
    a.check_same_dim(b, "hs_inner")?;
    Ok(a.m.dotc(&b.m))
}

/// Single-qubit Pauli matrices.
pub mod pauli {
    use super::*;

    pub fn identity() -> Operator {
        Operator::identity(2)
    }

    pub fn x() -> Operator {
        Operator::from_fn(2, |i, j| if i != j { ONE } else { ZERO })
    }

    pub fn y() -> Operator {
        Operator::from_rows(&[vec![ZERO, -IM], vec![IM, ZERO]]).expect("2x2")
    }

    pub fn z() -> Operator {
        Operator::diagonal(&[ONE, -ONE])
    }

    /// `a·σ` for a real 3-vector.
    pub fn dot(a: [f64; 3]) -> Operator {
        &(&x().scale_real(a[0]) + &y().scale_real(a[1])) + &z().scale_real(a[2])
    }

    /// Real Pauli coefficients `(Tr(Aσ_x), Tr(Aσ_y), Tr(Aσ_z)) / 2` and the
    /// identity weight `Tr(A)/2`.
    pub fn decompose(a: &Operator) -> Option<(C64, [C64; 3])> {
        if a.dim() != 2 {
            return None;
        }
        let half = C64::new(0.5, 0.0);
        let c = |p: Operator| (p * a.clone()).trace() * half;
        Some((a.trace() * half, [c(x()), c(y()), c(z())]))
    }
}

/// Named state vectors.
pub mod kets {
    use super::*;

    pub fn basis(dim: usize, index: usize) -> Ket {
        let mut v = Ket::zeros(dim);
        v[index] = ONE;
        v
    }

    pub fn zero() -> Ket {
        basis(2, 0)
    }

    pub fn one() -> Ket {
        basis(2, 1)
    }

    pub fn plus() -> Ket {
        Ket::from_element(2, C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0))
    }

    pub fn minus() -> Ket {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Ket::from_vec(vec![C64::new(h, 0.0), C64::new(-h, 0.0)])
    }

    pub fn plus_i() -> Ket {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Ket::from_vec(vec![C64::new(h, 0.0), C64::new(0.0, h)])
    }

    pub fn minus_i() -> Ket {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Ket::from_vec(vec![C64::new(h, 0.0), C64::new(0.0, -h)])
    }

    /// `cos θ |0⟩ + sin θ |1⟩`
    pub fn angle(theta: f64) -> Ket {
        Ket::from_vec(vec![C64::new(theta.cos(), 0.0), C64::new(theta.sin(), 0.0)])
    }

    /// Bell state `(|00⟩ + |11⟩)/√2`.
    pub fn phi_plus() -> Ket {
        let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Ket::from_vec(vec![h, ZERO, ZERO, h])
    }

    /// `(|01⟩ + |10⟩)/√2`
    pub fn psi_plus() -> Ket {
        let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Ket::from_vec(vec![ZERO, h, h, ZERO])
    }

    pub fn normalized(v: Ket) -> Result<Ket> {
        let n = v.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(domain("cannot normalize a zero or non-finite vector"));
        }
        Ok(v / C64::new(n, 0.0))
    }
}

/// Modified Gram–Schmidt; vectors whose residual norm falls below
/// `drop_tol` are discarded.
pub fn gram_schmidt(vectors: &[Ket], drop_tol: f64) -> Vec<Ket> {
    let mut out: Vec<Ket> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        for q in &out {
            let c = q.dotc(&w);
            w -= q * c;
        }
        let n = w.norm();
        if n > drop_tol {
            out.push(w / C64::new(n, 0.0));
        }
    }
    out
}
