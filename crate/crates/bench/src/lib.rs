//! Fixtures shared by the criterion benches.

use qecqm_core::protocol::RoundProtocol;
use qecqm_core::{kets, pauli, DensityState, LindbladModel};

/// `G = Z`, `L = X`, the model the error-corrected runs are built around.
pub fn perp_noise_model() -> LindbladModel {
    LindbladModel::new(pauli::z(), 1.0, vec![pauli::x()]).expect("valid model")
}

/// `|+⟩` probe.
pub fn plus_probe() -> DensityState {
    DensityState::pure(&kets::plus(), vec![2]).expect("normalized ket")
}

pub fn cnot_protocol() -> RoundProtocol {
    RoundProtocol::cnot_propagation()
}
