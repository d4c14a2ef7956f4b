//! Finite-truncation toolkit for integrable Hamiltonians with prescribed
//! spectra.
//!
//! The crate builds, for any finite list of energies, a diagonal operator
//! `A = f(N_1, ..., N_n)` on a truncated Fock basis, the unitary `U` that
//! intertwines an arbitrary Hermitian `H` of the same spectrum with `A`, and
//! the commuting first integrals `T_i = U^† N_i U`. Around that core sit
//! level-spacing statistics, finite-difference Schrödinger spectra, a
//! classical action-variable flow, and a Hardy Z-function zero finder.

pub mod classical;
pub mod error;
pub mod exec;
pub mod fockspace;
pub mod intertwiner;
pub mod levelstats;
pub mod linalg;
pub mod pairing;
pub mod schrodinger;
pub mod spectra;
pub mod zeta;

pub use error::{Error, Result};
pub use exec::Exec;
pub use linalg::HermitianMatrix;
pub use pairing::MultiIndex;
pub use spectra::SpectrumSeq;
