//! Fast emergency paths for OSPF networks.
//!
//! The crate computes, for every router, precomputed recovery paths around
//! each adjacent link or router failure, encodes them as compact packet marks
//! and FIB extensions, and simulates single failures to measure recovery-path
//! length, FIB overhead and packet loss during routing convergence. A not-via
//! address baseline is included for comparison.
//!
//! Modules, bottom-up:
//!
//! - [`topology`]: routers, links, SRLG groups and the topology file format.
//! - [`spf`]: shortest paths, constrained shortest paths, equal-cost sets.
//! - [`fep_calc`]: emergency path selection per (source, adjacent, destination).
//! - [`fib_ext`]: packet marks, mark/interface pair tables, byte accounting.
//! - [`notvia`]: the not-via baseline.
//! - [`dataplane`]: per-router forwarding with deviation and signaling.
//! - [`sim`]: discrete-event loss simulation.
//! - [`report`]: CSV reports.

pub mod dataplane;
pub mod fep_calc;
pub mod fib_ext;
pub mod fixtures;
pub mod notvia;
pub mod report;
pub mod sim;
pub mod spf;
pub mod topology;

pub use fep_calc::{FepCalculator, FepTable, FepVector, ProtectionLevel};
pub use spf::{PathSeq, SpfResult};
pub use topology::{load_topology, FailureSpec, LinkKey, RouterId, Topology};
