//! Cycle-level simulator of a SAT accelerator built from fixed-width clause
//! units, a broadcast network-on-chip and a CDCL central controller.

pub mod batch;
pub mod central;
pub mod clause_bank;
pub mod clause_unit;
pub mod cnf;
pub mod noc;
pub mod oracle;
pub mod sim;
