//! Statevector variational eigensolvers (VQE and VQD) with hardware-efficient
//! and UCCSD ansätze, oscillator and Jordan–Wigner chemistry Hamiltonians, an
//! LSTM meta-initializer, and a dense exact-diagonalization reference.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the `*64`/`*32`
//! aliases below fix the precision.

pub mod ansatz;
pub mod dense;
pub mod error;
pub mod exactdiag;
pub mod hamiltonians;
pub mod meta;
pub mod optimize;
pub mod pauli;
pub mod scalar;
pub mod statevector;

pub use error::{Error, Result};
pub use scalar::{Cplx, Real};

pub type PauliSum64 = pauli::PauliSum<f64>;
pub type PauliSum32 = pauli::PauliSum<f32>;
pub type StateVector64 = statevector::StateVector<f64>;
pub type StateVector32 = statevector::StateVector<f32>;
pub type AnsatzProgram64 = ansatz::AnsatzProgram<f64>;
pub type AnsatzProgram32 = ansatz::AnsatzProgram<f32>;
pub type Matrix64 = dense::Matrix<f64>;
pub type FermionIntegrals64 = hamiltonians::FermionIntegrals<f64>;
pub type MetaLearner64 = meta::MetaLearner<f64>;
