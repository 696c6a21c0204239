//! Generalized Bäcklund-Darboux transformations (GBDT) for matrix spectral
//! problems: S-node algebra, transfer functions, Darboux evolution and
//! explicit constructions for Dirac, N-wave, NLS, chiral, sine- and
//! sinh-Gordon, and radial Dirac systems.

pub mod dirac;
pub mod error;
pub mod field;
pub mod gbdt_core;
pub mod matcore;
pub mod nonlinear;
pub mod radial;
pub mod realization;
pub mod residuals;
pub mod samples;
pub mod snode;

pub use error::{Error, ErrorKind, Result};
pub use field::SolutionGrid;
pub use matcore::{c64, CMat, GridSpec, C64};
pub use realization::Realization;
pub use snode::SNode;
