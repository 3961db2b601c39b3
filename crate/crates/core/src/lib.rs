//! System-level simulator of exclusive, pooled and hybrid multi-operator
//! millimeter-wave spectrum access.

pub mod association;
pub mod channel;
pub mod cli;
pub mod deployment;
pub mod metrics;
pub mod output;
pub mod runner;
pub mod scenario;
pub mod seed;
