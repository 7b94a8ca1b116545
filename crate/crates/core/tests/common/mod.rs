//! Shared helpers: seeded random topologies and an exhaustive path oracle.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use fepkit::topology::{FailureSpec, LinkKey, RouterId, Topology, TopologyBuilder};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn r(x: u16) -> RouterId {
    RouterId::new(x).unwrap()
}

pub fn rs(xs: &[u16]) -> Vec<RouterId> {
    xs.iter().map(|&x| r(x)).collect()
}

#[derive(Debug, Clone, Copy)]
pub struct GenSpec {
    pub routers: usize,
    /// Undirected links beyond the spanning structure.
    pub extra_links: usize,
    /// Start from a ring instead of a random tree.
    pub ring: bool,
    pub max_cost: u32,
    pub asymmetric: bool,
    pub srlgs: usize,
}

/// Connected random topology with routers 1..=n.
pub fn random_topology(seed: u64, g: GenSpec) -> Topology {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = g.routers as u16;
    let mut b = TopologyBuilder::new();
    for i in 1..=n {
        b.router(i, None).unwrap();
    }
    let mut edges: BTreeSet<(u16, u16)> = BTreeSet::new();
    let mut order: Vec<u16> = (1..=n).collect();
    order.shuffle(&mut rng);
    if g.ring && n >= 3 {
        for i in 0..order.len() {
            let (a, c) = (order[i], order[(i + 1) % order.len()]);
            edges.insert((a.min(c), a.max(c)));
        }
    } else {
        for i in 1..order.len() {
            let p = order[rng.gen_range(0..i)];
            let c = order[i];
            edges.insert((p.min(c), p.max(c)));
        }
    }
    let max_links = (g.routers * (g.routers - 1)) / 2;
    let target = (edges.len() + g.extra_links).min(max_links);
    while edges.len() < target {
        let a = rng.gen_range(1..=n);
        let c = rng.gen_range(1..=n);
        if a != c {
            edges.insert((a.min(c), a.max(c)));
        }
    }
    for &(a, c) in &edges {
        let ab = rng.gen_range(1..=g.max_cost);
        let ba = if g.asymmetric {
            rng.gen_range(1..=g.max_cost)
        } else {
            ab
        };
        b.asym_link(a, c, ab, ba, 10_000_000_000).unwrap();
    }
    let list: Vec<(u16, u16)> = edges.iter().copied().collect();
    for id in 1..=g.srlgs as u32 {
        if list.len() < 3 {
            break;
        }
        let picks: Vec<(u16, u16)> = list.choose_multiple(&mut rng, 2).copied().collect();
        b.srlg(id, &picks).unwrap();
    }
    b.build().unwrap()
}

/// Links removed by a failure, computed from the raw link and group lists.
pub fn oracle_cut(t: &Topology, f: FailureSpec) -> BTreeSet<LinkKey> {
    let base: BTreeSet<LinkKey> = match f {
        FailureSpec::Link(k) => [k].into(),
        FailureSpec::Router(x) => t.physical_links().filter(|k| k.touches(x)).collect(),
        FailureSpec::Srlg(id) => t.srlg(id).unwrap().members.clone(),
    };
    let mut out = base.clone();
    if matches!(f, FailureSpec::Srlg(_)) {
        return out;
    }
    for g in t.srlgs() {
        if g.members.iter().any(|k| base.contains(k)) {
            out.extend(g.members.iter().copied());
        }
    }
    out
}

/// Cheapest simple path `src -> dst` by exhaustive enumeration, ties broken
/// by the lexicographically smallest router sequence.
pub fn oracle_paths(
    t: &Topology,
    src: RouterId,
    removed_links: &BTreeSet<LinkKey>,
    removed_router: Option<RouterId>,
) -> BTreeMap<RouterId, (u64, Vec<RouterId>)> {
    let mut best: BTreeMap<RouterId, (u64, Vec<RouterId>)> = BTreeMap::new();
    let mut path = vec![src];
    fn dfs(
        t: &Topology,
        path: &mut Vec<RouterId>,
        cost: u64,
        cut: &BTreeSet<LinkKey>,
        dead: Option<RouterId>,
        best: &mut BTreeMap<RouterId, (u64, Vec<RouterId>)>,
    ) {
        let u = *path.last().unwrap();
        let cand = (cost, path.clone());
        match best.get(&u) {
            Some(b) if *b <= cand => {}
            _ => {
                best.insert(u, cand);
            }
        }
        for l in t.links().filter(|l| l.from == u) {
            let v = l.to;
            if path.contains(&v) || Some(v) == dead || cut.contains(&LinkKey::new(u, v)) {
                continue;
            }
            path.push(v);
            dfs(t, path, cost + l.cost as u64, cut, dead, best);
            path.pop();
        }
    }
    if Some(src) != removed_router {
        dfs(t, &mut path, 0, removed_links, removed_router, &mut best);
    }
    best
}

/// Seeds spread from one base so suites stay independent.
pub fn seeds(base: u64, n: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    (0..n).map(|_| rng.gen()).collect()
}
