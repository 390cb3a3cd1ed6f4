//! Dense operator arithmetic, density states, and the spectral and tensor
//! primitives every other module builds on.

mod operator;
mod spectral;
mod state;

pub use operator::{
    embed, gram_schmidt, hs_inner, kets, kron_ket, pauli, tensor_all, tensor_product, Ket, Operator, C64,
};
pub use spectral::{
    hermitian_eig, numerical_rank, trace_distance, trace_norm, unitary_exp, HermitianEigensystem,
    DEFAULT_RANK_TOL, HERMITIAN_TOL,
};
pub use state::{
    partial_trace, partial_transpose, partial_transpose_op, permute_subsystems, DensityState,
};

pub(crate) use operator::{IM, ONE, ZERO};
pub(crate) use spectral::eig_unchecked;
pub(crate) use state::partial_trace_op;
