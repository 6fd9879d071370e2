//! Realization theory for passive discrete-time systems whose state space is a
//! finite-dimensional Pontryagin space.
//!
//! All spaces are `C^n` with a Hermitian invertible Gram matrix `G`, and the
//! inner product is `<x, y> = y^H G x`.

pub mod colligation;
pub mod corpus;
pub mod dilation;
pub mod error;
pub mod indefinite;
pub mod io;
pub mod julia;
pub mod kernel;
pub mod linalg;
pub mod optimality;
pub mod subspaces;

pub use colligation::{Colligation, MarkovSequence, Realization, SystemClass};
pub use error::{Error, ErrorKind, Result};
pub use indefinite::{ClassKind, IndefOperator, OperatorClass, SignatureSpace};
pub use linalg::{CMat, CVec, C64};
pub use subspaces::SubspaceBasis;
