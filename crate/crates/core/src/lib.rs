//! Iterative rational Krylov model reduction for SISO LTI systems, with numerical
//! certification of IRKA fixed points for state-space-symmetric systems.

pub mod error;
pub mod error_analysis;
pub mod fixpoint;
pub mod generate;
pub mod h2;
pub mod irka;
pub mod linalg;
pub mod lti;
pub mod projection;
pub mod quadrature;
pub mod report;
mod serde_util;

pub use error::{Error, Result};
pub use lti::{eval_transfer, PoleResidueForm, StateSpaceSystem};
