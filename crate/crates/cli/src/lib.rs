//! Library side of the `cdk-lab` binary: scenario runner and report output.

pub mod report;
pub mod scenario;
