//! Contextuality for sequential measurement scenarios.
//!
//! The crate models scenarios in which instruments are applied one after the
//! other (repeats allowed), the empirical behaviours they produce, finite
//! hidden variable models with preparation, response and transfer functions,
//! and quantum realizations built from Lüders instruments. The non-contextual
//! set is a polytope whose vertices are global deterministic assignments;
//! [`polytope::contextual_fraction`] measures the distance to it with a linear
//! program solved by the dense simplex in [`lp`].
//!
//! Everything here is `no_std` with `alloc`. File formats and the command line
//! live in the companion `seqctx` crate.

#![no_std]
#![warn(missing_debug_implementations)]
// `!(x <= tol)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod empirical;
pub mod error;
pub mod hvm;
pub mod lp;
pub mod polytope;
pub mod quantum;
pub mod scenario;

pub use empirical::{Distribution, EmpiricalBehaviour};
pub use error::Error;
pub use hvm::HiddenVariableModel;
pub use polytope::CfResult;
pub use quantum::QuantumRealization;
pub use scenario::{InstrumentLabel, MeasurementScenario, Sequence, SequentialScenario};

/// Default absolute tolerance used by the validators and checkers.
pub const DEFAULT_TOL: f64 = 1e-9;
