//! File formats, instance generators, Monte Carlo estimators and the
//! verification harness around `rcf-core`.

pub mod bench;
pub mod cli;
pub mod format;
pub mod generator;
pub mod montecarlo;
pub mod reproduce;
pub mod verify;
