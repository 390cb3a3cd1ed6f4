use nalgebra::DMatrix;

use super::operator::{Ket, Operator, C64, ZERO};
use super::spectral::{eig_unchecked, HermitianEigensystem};
use crate::error::{domain, Error, Result};

pub const STATE_HERMITIAN_TOL: f64 = 1e-12;
pub const STATE_TRACE_TOL: f64 = 1e-12;
pub const STATE_POSITIVITY_TOL: f64 = 1e-10;

/// Unit-trace positive semidefinite operator on a composite system.
///
/// `subsystem_dims` lists the tensor factors left to right; index 0 is the
/// outermost (slowest-varying) factor.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityState {
    op: Operator,
    dims: Vec<usize>,
}

impl DensityState {
    pub fn new(op: Operator, subsystem_dims: Vec<usize>) -> Result<Self> {
        check_dims(&subsystem_dims, op.dim())?;
        let herr = op.hermiticity_error();
        if herr > STATE_HERMITIAN_TOL {
            return Err(domain(format!("density operator is not Hermitian (error {herr:e})")));
        }
        let tr = op.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > STATE_TRACE_TOL {
            return Err(domain(format!("density operator trace is {tr}, expected 1")));
        }
        let min = eig_unchecked(&op).min();
        if min < -STATE_POSITIVITY_TOL {
            return Err(domain(format!("density operator has negative eigenvalue {min:e}")));
        }
        Ok(Self { op, dims: subsystem_dims })
    }

    /// Accepts an operator produced by a trusted construction, hermitizing it.
    pub(crate) fn trusted(op: Operator, dims: Vec<usize>) -> Self {
        debug_assert_eq!(dims.iter().product::<usize>(), op.dim());
        Self {
            op: op.hermitian_part(),
            dims,
        }
    }

    /// Validates a state coming out of an integrator with the looser
    /// tolerances that integration guarantees.
    pub(crate) fn from_integration(op: Operator, dims: Vec<usize>, context: &str) -> Result<Self> {
        let op = op.hermitian_part();
        let tr = op.trace();
        if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
            return Err(Error::NumericalInstability {
                context: format!("{context}: trace drifted to {tr}"),
                eigenvalue: f64::NAN,
            });
        }
        let min = eig_unchecked(&op).min();
        if min < -1e-8 {
            return Err(Error::NumericalInstability {
                context: context.to_string(),
                eigenvalue: min,
            });
        }
        Ok(Self { op, dims })
    }

    pub fn pure(v: &Ket, subsystem_dims: Vec<usize>) -> Result<Self> {
        check_dims(&subsystem_dims, v.len())?;
        let n = v.norm();
        if (n - 1.0).abs() > 1e-12 {
            return Err(domain(format!("state vector has norm {n}, expected 1")));
        }
        Ok(Self::trusted(Operator::projector(v), subsystem_dims))
    }

    pub fn maximally_mixed(subsystem_dims: Vec<usize>) -> Result<Self> {
        let d: usize = subsystem_dims.iter().product();
        check_dims(&subsystem_dims, d)?;
        Ok(Self {
            op: Operator::identity(d).scale_real(1.0 / d as f64),
            dims: subsystem_dims,
        })
    }

    /// Single-system state (one subsystem).
    pub fn single(op: Operator) -> Result<Self> {
        let d = op.dim();
        Self::new(op, vec![d])
    }

    pub fn op(&self) -> &Operator {
        &self.op
    }

    pub fn into_op(self) -> Operator {
        self.op
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn subsystem_dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn purity(&self) -> f64 {
        (&self.op * &self.op).trace().re
    }

    pub fn eigensystem(&self) -> HermitianEigensystem {
        eig_unchecked(&self.op)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigensystem().min()
    }

    /// `ρ_self ⊗ ρ_other`
    pub fn tensor(&self, other: &DensityState) -> DensityState {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Self {
            op: super::operator::tensor_product(&self.op, &other.op),
            dims,
        }
    }

    /// `U ρ U†` for a unitary on the full space.
    pub fn evolve_unitary(&self, u: &Operator) -> Result<DensityState> {
        self.op.check_same_dim(u, "evolve_unitary")?;
        Ok(Self::trusted(self.op.conjugate_by(u), self.dims.clone()))
    }
}

fn check_dims(dims: &[usize], total: usize) -> Result<()> {
    if dims.is_empty() || dims.contains(&0) {
        return Err(domain("subsystem dimensions must be a non-empty list of positive integers"));
    }
    let prod: usize = dims.iter().product();
    if prod != total {
        return Err(domain(format!(
            "subsystem dimensions {dims:?} multiply to {prod}, operator has dimension {total}"
        )));
    }
    Ok(())
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

fn digits(mut index: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for k in (0..dims.len()).rev() {
        out[k] = index % dims[k];
        index /= dims[k];
    }
    out
}

/// Reduced state on the subsystems in `keep`, returned in their original
/// relative order.
pub fn partial_trace(s: &DensityState, keep: &[usize]) -> Result<DensityState> {
    let op = partial_trace_op(s.op(), s.subsystem_dims(), keep)?;
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    let dims = kept.iter().map(|&k| s.subsystem_dims()[k]).collect();
    Ok(DensityState::trusted(op, dims))
}

pub(crate) fn partial_trace_op(op: &Operator, dims: &[usize], keep: &[usize]) -> Result<Operator> {
    if keep.is_empty() {
        return Err(domain("partial_trace: keep must be non-empty"));
    }
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    if kept.len() != keep.len() {
        return Err(domain("partial_trace: duplicate subsystem index"));
    }
    if let Some(&bad) = kept.iter().find(|&&k| k >= dims.len()) {
        return Err(domain(format!(
            "partial_trace: subsystem index {bad} out of range for {} subsystems",
            dims.len()
        )));
    }
    let traced: Vec<usize> = (0..dims.len()).filter(|k| !kept.contains(k)).collect();
    let st = strides(dims);
    let kd: Vec<usize> = kept.iter().map(|&k| dims[k]).collect();
    let td: Vec<usize> = traced.iter().map(|&k| dims[k]).collect();
    let out_dim: usize = kd.iter().product();
    let tr_dim: usize = td.iter().product();

    let offset = |ks: &[usize], kdig: &[usize]| -> usize {
        ks.iter().zip(kdig).map(|(&k, &d)| st[k] * d).sum()
    };
    let kept_off: Vec<usize> = (0..out_dim).map(|r| offset(&kept, &digits(r, &kd))).collect();
    let tr_off: Vec<usize> = (0..tr_dim).map(|t| offset(&traced, &digits(t, &td))).collect();

    let m = op.matrix();
    let mut out = DMatrix::<C64>::zeros(out_dim, out_dim);
    for r in 0..out_dim {
        for c in 0..out_dim {
            let mut acc = ZERO;
            for &t in &tr_off {
                acc += m[(kept_off[r] + t, kept_off[c] + t)];
            }
            out[(r, c)] = acc;
        }
    }
    Ok(Operator::wrap(out))
}

/// Transposes the indicated subsystem.
pub fn partial_transpose(s: &DensityState, subsystem: usize) -> Result<Operator> {
    partial_transpose_op(s.op(), s.subsystem_dims(), &[subsystem])
}

/// Transposes every subsystem listed in `subsystems`.
pub fn partial_transpose_op(op: &Operator, dims: &[usize], subsystems: &[usize]) -> Result<Operator> {
    if let Some(&bad) = subsystems.iter().find(|&&k| k >= dims.len()) {
        return Err(domain(format!(
            "partial_transpose: subsystem index {bad} out of range for {} subsystems",
            dims.len()
        )));
    }
    let d = op.dim();
    let st = strides(dims);
    let m = op.matrix();
    let mut out = DMatrix::<C64>::zeros(d, d);
    for r in 0..d {
        let rd = digits(r, dims);
        for c in 0..d {
            let cd = digits(c, dims);
            let (mut r2, mut c2) = (r, c);
            for &k in subsystems {
                // swap the k-th digits of row and column
                r2 = r2 - rd[k] * st[k] + cd[k] * st[k];
                c2 = c2 - cd[k] * st[k] + rd[k] * st[k];
            }
            out[(r, c)] = m[(r2, c2)];
        }
    }
    Ok(Operator::wrap(out))
}

/// Reorders tensor factors: factor `perm[k]` of the input becomes factor `k`
/// of the output.
pub fn permute_subsystems(op: &Operator, dims: &[usize], perm: &[usize]) -> Result<Operator> {
    let mut seen = perm.to_vec();
    seen.sort_unstable();
    if seen != (0..dims.len()).collect::<Vec<_>>() {
        return Err(domain(format!("{perm:?} is not a permutation of the subsystems")));
    }
    let new_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let st = strides(dims);
    let d = op.dim();
    let map: Vec<usize> = (0..d)
        .map(|i| {
            let nd = digits(i, &new_dims);
            perm.iter().zip(&nd).map(|(&p, &x)| st[p] * x).sum()
        })
        .collect();
    let m = op.matrix();
    Ok(Operator::from_fn(d, |i, j| m[(map[i], map[j])]))
}
