//! Files, parallel execution and experiment orchestration around
//! [`aggoc_core`].

pub mod experiment;
pub mod format;
pub mod lp;
pub mod parallel;

pub use aggoc_core;
