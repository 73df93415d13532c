//! Decomposition solvers for finite-state, discrete-time aggregative optimal
//! control problems.
//!
//! `N` agents with independent finite dynamics interact only through the
//! average of their contributions, priced by a convex social cost. The crate
//! provides:
//!
//! * the abstract aggregative problem ([`aggregative`]) and its relaxation
//!   constants ([`bounds`]),
//! * the control model and its reformulation as an aggregative problem
//!   ([`model`]),
//! * a per-agent dynamic-programming best response ([`dp`]),
//! * Frank-Wolfe on the convex relaxation ([`fw`]) and the stochastic
//!   Frank-Wolfe selection method ([`sfw`]),
//! * exact reference machinery: product-space enumeration ([`exact`]) and the
//!   indicator-variable mixed-integer formulation ([`micp`]),
//! * the battery-fleet charging scenario ([`battery`]).
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and
//! thread pools live in the companion `aggoc` crate.
#![no_std]

extern crate alloc;

pub mod aggregative;
pub mod battery;
pub mod bounds;
pub mod dp;
mod error;
pub mod exact;
pub mod exec;
pub mod fw;
pub mod micp;
pub mod model;
pub mod rng;
pub mod sfw;
pub mod synthetic;

pub use aggregative::{AggregateVector, AggregativeProblem, MultiplierVector, SocialCost};
pub use bounds::BoundReport;
pub use error::{Error, Result};
pub use exec::{Executor, Sequential};
pub use model::{AgentSpec, OcInstance, Trajectory, ValidationReport, Violation};
