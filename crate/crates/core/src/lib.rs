//! Fair allocation of indivisible goods and chores.
//!
//! The crate bundles the pieces needed to study the trade-off between
//! envy-freeness up to one item (EF1) and utilitarian social welfare:
//!
//! * [`instance`]: valuation profiles, allocations, welfare and sampling.
//! * [`fairness`]: EF / EF1 / EFX predicates and the envy penalties used as
//!   training constraints.
//! * [`baselines`]: max-welfare, round robin, double round robin and
//!   constrained round robin allocators.
//! * [`oracle`]: exhaustive search for the max-welfare EF1 allocation.
//! * [`neural`]: the convolutional allocator, its Lagrangian loss, training
//!   and model files.
//! * [`harness`]: Monte-Carlo metrics, convergence search and experiments.
//! * [`cli`]: the `eef1` command-line front end.

pub mod baselines;
pub mod cli;
pub mod error;
pub mod fairness;
pub mod harness;
pub mod instance;
pub mod neural;
pub mod oracle;

pub use error::{Error, Result};
pub use instance::{Allocation, DistributionKind, DistributionSpec, FractionalAllocation, Instance};
