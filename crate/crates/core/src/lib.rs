//! Interface operators on ℤ^l with matrix fibers M_N(ℂ).
//!
//! Operators are finite sums of lattice shifts with coefficient profiles
//! whose behaviour at infinity is known exactly. From that data the crate
//! extracts the bulk systems at infinity, computes essential spectra as the
//! union of bulk spectra, counts interface indices, and runs spectrally
//! filtered time evolution.

pub mod asymptotics;
pub mod dynamics;
pub mod error;
pub mod index;
pub mod lattice;
pub mod linalg;
pub mod models;
pub mod operator;
pub mod profile;
pub mod spectra;
pub mod truncation;

pub use error::{Error, Result};
pub use faer::c64;
pub use lattice::{Lattice, Shift, TruncationBox};
pub use linalg::{CsrMatrix, LinearOperator, Matrix};
pub use operator::{fold_cocompact, Crystal, Hopping, InterfaceOperator};
pub use profile::{Cap, CoefficientProfile, Envelope, ProfileKind};
