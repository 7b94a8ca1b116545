//! Topology and scenario files shipped with the crate.

use crate::topology::{load_topology, Topology};

pub const T1: &str = include_str!("../fixtures/t1.topo");
pub const T2: &str = include_str!("../fixtures/t2.topo");
pub const T3: &str = include_str!("../fixtures/t3.topo");
pub const T4: &str = include_str!("../fixtures/t4.topo");
pub const T1_SRLG: &str = include_str!("../fixtures/t1_srlg.topo");
pub const K5: &str = include_str!("../fixtures/k5.topo");
pub const G2: &str = include_str!("../fixtures/g2.topo");

/// Directory holding the fixture files, for tools that need real paths.
pub const DIR: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");

pub fn t1() -> Topology {
    load_topology(T1).expect("fixture T1")
}

pub fn t2() -> Topology {
    load_topology(T2).expect("fixture T2")
}

pub fn t3() -> Topology {
    load_topology(T3).expect("fixture T3")
}

pub fn t4() -> Topology {
    load_topology(T4).expect("fixture T4")
}

pub fn t1_srlg() -> Topology {
    load_topology(T1_SRLG).expect("fixture T1 with SRLG")
}

pub fn k5() -> Topology {
    load_topology(K5).expect("fixture K5")
}

pub fn g2() -> Topology {
    load_topology(G2).expect("fixture G2")
}
