//! Strictly stabilizing maximum-metric spanning trees under Byzantine faults.

pub mod metric;
pub mod protocol;
pub mod topology;
pub mod analysis;
pub mod faults;
pub mod runtime;
pub mod scenario_file;
pub mod scenarios;
pub mod dot;
