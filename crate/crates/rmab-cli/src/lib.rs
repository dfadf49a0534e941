//! Library surface of the experiment CLI: cohort file IO, synthetic
//! generators, the simulate pipeline, benchmark and verification suites.
//! The `rmab` binary is a thin argument-parsing shell over these.

pub mod bench;
pub mod bundle;
pub mod cohort;
pub mod generate;
pub mod runner;
pub mod verify;
