//! Numerical core for error-corrected sequential quantum metrology.
//!
//! The crate covers the full pipeline of a sequential estimation scheme in
//! which a probe evolves under a signal Hamiltonian `θG` plus Markovian noise
//! and is interleaved with instantaneous control on probe and ancilla:
//!
//! * [`algebra`]: dense complex operators, density states, partial trace and
//!   transpose, Hermitian eigensystems.
//! * [`lindblad`]: the Lindblad master equation, integrated by RK4 and by the
//!   exponential of the vectorized Liouvillian.
//! * [`codes`]: the Lindblad span, generator decomposition, zero-diagonal
//!   generator construction, two-qubit codespaces, Knill–Laflamme checks and
//!   recovery channels.
//! * [`protocol`]: per-round encode / evolve / recover / decode simulation
//!   with fresh or persistent ancillae.
//! * [`metrology`]: quantum Fisher information, Cramér–Rao bound and
//!   scaling-exponent fits.
//! * [`separability`]: PPT verdicts, the Vidal–Tarrach family and product
//!   checks.

pub mod algebra;
pub mod codes;
pub mod error;
pub mod lindblad;
pub mod metrology;
pub mod protocol;
pub mod sampling;
pub mod separability;

pub use algebra::{
    hermitian_eig, hs_inner, kets, numerical_rank, partial_trace, partial_transpose, pauli,
    tensor_product, trace_distance, DensityState, HermitianEigensystem, Ket, Operator, C64,
};
pub use error::{Error, Result};
pub use lindblad::{evolve, lindblad_rhs, liouvillian_matrix, EvolutionConfig, LindbladModel, Method};
