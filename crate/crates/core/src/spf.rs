//! Shortest path first.
//!
//! Ties between equal-cost paths are always broken towards the path whose
//! router sequence is lexicographically smallest, which makes every result
//! reproducible. Costs are strictly positive, so the lexicographically
//! smallest shortest paths from one source form a tree and can be built
//! in settle order.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use thiserror::Error;

use crate::topology::{Cost, FailureSpec, LinkKey, RouterId, Topology};

/// Ordered router sequence with its accumulated cost.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PathSeq {
    pub routers: Vec<RouterId>,
    pub cost: Cost,
}

impl PathSeq {
    pub fn trivial(r: RouterId) -> Self {
        PathSeq {
            routers: vec![r],
            cost: 0,
        }
    }

    /// Number of routers on the path, both endpoints included.
    pub fn hops(&self) -> usize {
        self.routers.len()
    }

    pub fn source(&self) -> RouterId {
        self.routers[0]
    }

    pub fn destination(&self) -> RouterId {
        *self.routers.last().expect("paths are never empty")
    }

    /// Directed links traversed, in order.
    pub fn links(&self) -> impl Iterator<Item = (RouterId, RouterId)> + '_ {
        self.routers.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn link_keys(&self) -> BTreeSet<LinkKey> {
        self.links().map(|(a, b)| LinkKey::new(a, b)).collect()
    }

    /// Path prefix ending at position `idx` (inclusive), with its cost.
    pub fn prefix(&self, t: &Topology, idx: usize) -> PathSeq {
        let routers = self.routers[..=idx].to_vec();
        let cost = path_cost(t, &routers).expect("prefix of a valid path");
        PathSeq { routers, cost }
    }
}

/// Sum of link costs along `routers`, or `None` when a hop is not a link.
pub fn path_cost(t: &Topology, routers: &[RouterId]) -> Option<Cost> {
    routers
        .windows(2)
        .map(|w| t.link(w[0], w[1]).map(|l| l.cost as Cost))
        .sum()
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum SpfError {
    #[error("router {0} is not part of the topology")]
    UnknownRouter(RouterId),
    #[error("router {to} is unreachable from {from}")]
    Unreachable { from: RouterId, to: RouterId },
}

/// Single-source shortest paths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpfResult {
    pub source: RouterId,
    pub dist: BTreeMap<RouterId, Cost>,
    pub primary_path: BTreeMap<RouterId, PathSeq>,
}

impl SpfResult {
    pub fn reachable(&self) -> impl Iterator<Item = RouterId> + '_ {
        self.dist.keys().copied()
    }

    pub fn is_reachable(&self, r: RouterId) -> bool {
        self.dist.contains_key(&r)
    }

    pub fn path(&self, to: RouterId) -> Result<&PathSeq, SpfError> {
        self.primary_path.get(&to).ok_or(SpfError::Unreachable {
            from: self.source,
            to,
        })
    }

    pub fn distance(&self, to: RouterId) -> Result<Cost, SpfError> {
        self.path(to).map(|p| p.cost)
    }

    /// First hop on the primary path, `None` for the source itself.
    pub fn next_hop(&self, to: RouterId) -> Option<RouterId> {
        self.primary_path
            .get(&to)
            .and_then(|p| p.routers.get(1).copied())
    }
}

/// Plain Dijkstra distances from `src`, indexed by router id.
fn distances(t: &Topology, src: RouterId) -> Vec<Option<Cost>> {
    let mut dist: Vec<Option<Cost>> = vec![None; 512];
    let mut done = vec![false; 512];
    let mut heap = BinaryHeap::new();
    dist[src.index()] = Some(0);
    heap.push(Reverse((0, src)));
    while let Some(Reverse((d, u))) = heap.pop() {
        if done[u.index()] {
            continue;
        }
        done[u.index()] = true;
        for l in t.out_links(u) {
            let nd = d + l.cost as Cost;
            let slot = &mut dist[l.to.index()];
            if slot.is_none_or(|cur| nd < cur) {
                *slot = Some(nd);
                heap.push(Reverse((nd, l.to)));
            }
        }
    }
    dist
}

/// Shortest paths from `src` over `t`.
pub fn spf(t: &Topology, src: RouterId) -> Result<SpfResult, SpfError> {
    if !t.contains(src) {
        return Err(SpfError::UnknownRouter(src));
    }
    let dist = distances(t, src);
    let mut order: Vec<(Cost, RouterId)> = t
        .routers()
        .filter_map(|r| dist[r.index()].map(|d| (d, r)))
        .collect();
    order.sort();

    let mut best: Vec<Option<Vec<RouterId>>> = vec![None; 512];
    best[src.index()] = Some(vec![src]);
    let mut primary_path = BTreeMap::new();
    let mut dists = BTreeMap::new();
    for &(d, v) in &order {
        dists.insert(v, d);
        if v != src {
            // Every predecessor on a shortest path has a strictly smaller
            // distance, hence is already settled.
            let mut chosen: Option<Vec<RouterId>> = None;
            for u in t.neighbors(v) {
                let Some(l) = t.link(u, v) else { continue };
                if dist[u.index()].map(|du| du + l.cost as Cost) != Some(d) {
                    continue;
                }
                let Some(pu) = &best[u.index()] else { continue };
                let mut cand = pu.clone();
                cand.push(v);
                if chosen.as_ref().is_none_or(|c| cand < *c) {
                    chosen = Some(cand);
                }
            }
            best[v.index()] = chosen;
        }
        let routers = best[v.index()].clone().expect("settled router has a path");
        primary_path.insert(v, PathSeq { routers, cost: d });
    }
    Ok(SpfResult {
        source: src,
        dist: dists,
        primary_path,
    })
}

/// Which branch of the constrained computation to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AvoidMode {
    /// Remove the link (sr, ar) and its SRLG siblings; used for DR = AR.
    Link,
    /// Remove AR, its links and their SRLG siblings; used for DR != AR.
    Router,
}

/// The working graph for a constrained run: `t` with the forbidden
/// components taken out.
pub fn constrained_graph(
    t: &Topology,
    sr: RouterId,
    ar: RouterId,
    mode: AvoidMode,
) -> Result<Topology, SpfError> {
    if !t.is_neighbor(sr, ar) {
        return Err(SpfError::Unreachable { from: sr, to: ar });
    }
    let f = match mode {
        AvoidMode::Link => FailureSpec::link(sr, ar),
        AvoidMode::Router => FailureSpec::Router(ar),
    };
    Ok(t.remove_component(f).expect("adjacent components exist"))
}

/// Shortest paths from `sr` that never use the adjacent component towards
/// `ar` (link or router, per `mode`) nor anything sharing its risk group.
pub fn constrained_spf(
    t: &Topology,
    sr: RouterId,
    ar: RouterId,
    mode: AvoidMode,
) -> Result<SpfResult, SpfError> {
    spf(&constrained_graph(t, sr, ar, mode)?, sr)
}

/// Equal-cost shortest paths from `src` to `dst`, in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EqualCostPaths {
    pub paths: Vec<PathSeq>,
    /// More shortest paths exist than `bound` allowed to return.
    pub truncated: bool,
}

/// Enumerates up to `bound` minimal-cost simple paths `src -> dst`.
pub fn equal_cost_paths(
    t: &Topology,
    src: RouterId,
    dst: RouterId,
    bound: usize,
) -> Result<EqualCostPaths, SpfError> {
    if !t.contains(src) {
        return Err(SpfError::UnknownRouter(src));
    }
    let dist = distances(t, src);
    let target = dist[dst.index()].ok_or(SpfError::Unreachable { from: src, to: dst })?;
    let bound = bound.max(1);

    // Routers from which `dst` is reachable inside the shortest-path DAG.
    let on_dag = |u: RouterId, v: RouterId| -> bool {
        match (dist[u.index()], t.link(u, v), dist[v.index()]) {
            (Some(du), Some(l), Some(dv)) => du + l.cost as Cost == dv,
            _ => false,
        }
    };
    let mut useful = vec![false; 512];
    useful[dst.index()] = true;
    let mut stack = vec![dst];
    while let Some(v) = stack.pop() {
        for u in t.neighbors(v) {
            if !useful[u.index()] && on_dag(u, v) {
                useful[u.index()] = true;
                stack.push(u);
            }
        }
    }

    let mut paths = Vec::new();
    let mut truncated = false;
    let mut current = vec![src];
    fn walk(
        t: &Topology,
        current: &mut Vec<RouterId>,
        dst: RouterId,
        useful: &[bool],
        on_dag: &dyn Fn(RouterId, RouterId) -> bool,
        out: &mut Vec<Vec<RouterId>>,
        bound: usize,
        truncated: &mut bool,
    ) {
        let u = *current.last().unwrap();
        if u == dst {
            if out.len() == bound {
                *truncated = true;
            } else {
                out.push(current.clone());
            }
            return;
        }
        for v in t.neighbors(u) {
            if *truncated {
                return;
            }
            if useful[v.index()] && on_dag(u, v) {
                current.push(v);
                walk(t, current, dst, useful, on_dag, out, bound, truncated);
                current.pop();
            }
        }
    }
    let mut raw = Vec::new();
    walk(
        t,
        &mut current,
        dst,
        &useful,
        &on_dag,
        &mut raw,
        bound,
        &mut truncated,
    );
    for routers in raw {
        paths.push(PathSeq {
            routers,
            cost: target,
        });
    }
    Ok(EqualCostPaths { paths, truncated })
}

/// Primary OSPF paths between every pair of routers of one topology.
///
/// Answers the distance, router-count, router-set and link-set queries used
/// by the emergency-path formulation.
#[derive(Debug, Clone)]
pub struct OspfTable {
    by_source: BTreeMap<RouterId, SpfResult>,
}

impl OspfTable {
    pub fn new(t: &Topology) -> Self {
        let by_source = t
            .routers()
            .map(|r| (r, spf(t, r).expect("router is in topology")))
            .collect();
        OspfTable { by_source }
    }

    pub fn spf(&self, src: RouterId) -> Result<&SpfResult, SpfError> {
        self.by_source.get(&src).ok_or(SpfError::UnknownRouter(src))
    }

    pub fn path(&self, x: RouterId, y: RouterId) -> Result<&PathSeq, SpfError> {
        self.spf(x)?.path(y)
    }

    pub fn dist(&self, x: RouterId, y: RouterId) -> Result<Cost, SpfError> {
        self.path(x, y).map(|p| p.cost)
    }

    pub fn num_routers(&self, x: RouterId, y: RouterId) -> Result<usize, SpfError> {
        self.path(x, y).map(|p| p.hops())
    }

    pub fn routers_on(&self, x: RouterId, y: RouterId) -> Result<BTreeSet<RouterId>, SpfError> {
        self.path(x, y).map(|p| p.routers.iter().copied().collect())
    }

    pub fn links_on(
        &self,
        x: RouterId,
        y: RouterId,
    ) -> Result<BTreeSet<(RouterId, RouterId)>, SpfError> {
        self.path(x, y).map(|p| p.links().collect())
    }

    pub fn next_hop(&self, x: RouterId, y: RouterId) -> Option<RouterId> {
        self.by_source.get(&x).and_then(|s| s.next_hop(y))
    }
}

/// Distance of the primary path x -> y.
pub fn dist_ospf(t: &Topology, x: RouterId, y: RouterId) -> Result<Cost, SpfError> {
    spf(t, x)?.distance(y)
}

/// Routers on the primary path x -> y, both endpoints counted.
pub fn num_routers_ospf(t: &Topology, x: RouterId, y: RouterId) -> Result<usize, SpfError> {
    Ok(spf(t, x)?.path(y)?.hops())
}

pub fn ospf_routers(
    t: &Topology,
    x: RouterId,
    y: RouterId,
) -> Result<BTreeSet<RouterId>, SpfError> {
    Ok(spf(t, x)?.path(y)?.routers.iter().copied().collect())
}

pub fn ospf_links(
    t: &Topology,
    x: RouterId,
    y: RouterId,
) -> Result<BTreeSet<(RouterId, RouterId)>, SpfError> {
    Ok(spf(t, x)?.path(y)?.links().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn r(x: u16) -> RouterId {
        RouterId::new(x).unwrap()
    }

    fn rs(v: &[u16]) -> Vec<RouterId> {
        v.iter().map(|&x| r(x)).collect()
    }

    #[test]
    fn t1_lexicographic_tie_break() {
        let s = spf(&fixtures::t1(), r(1)).unwrap();
        assert_eq!(s.dist[&r(3)], 2);
        assert_eq!(s.primary_path[&r(3)].routers, rs(&[1, 2, 3]));
        assert_eq!(s.primary_path[&r(1)], PathSeq::trivial(r(1)));
    }

    #[test]
    fn t2_paths() {
        let s = spf(&fixtures::t2(), r(1)).unwrap();
        assert_eq!(s.path(r(3)).unwrap().routers, rs(&[1, 2, 3]));
        assert_eq!(s.dist[&r(5)], 3);
        assert_eq!(s.path(r(5)).unwrap().routers, rs(&[1, 2, 3, 5]));
    }

    #[test]
    fn constrained_examples() {
        let t2 = fixtures::t2();
        let s = constrained_spf(&t2, r(1), r(2), AvoidMode::Router).unwrap();
        assert_eq!(s.path(r(3)).unwrap().cost, 12);
        assert_eq!(s.path(r(3)).unwrap().routers, rs(&[1, 4, 5, 3]));
        assert!(!s.is_reachable(r(2)));

        let s = constrained_spf(&t2, r(1), r(2), AvoidMode::Link).unwrap();
        assert_eq!(s.path(r(2)).unwrap().cost, 13);
        assert_eq!(s.path(r(2)).unwrap().routers, rs(&[1, 4, 5, 3, 2]));

        let s = constrained_spf(&fixtures::t3(), r(1), r(2), AvoidMode::Router).unwrap();
        assert_eq!(s.path(r(3)).unwrap().cost, 6);
        assert_eq!(s.path(r(3)).unwrap().routers, rs(&[1, 5, 3]));
    }

    #[test]
    fn constrained_requires_adjacency() {
        assert!(constrained_spf(&fixtures::t1(), r(1), r(3), AvoidMode::Link).is_err());
    }

    #[test]
    fn equal_cost_enumeration() {
        let t1 = fixtures::t1();
        let e = equal_cost_paths(&t1, r(1), r(3), 32).unwrap();
        let seqs: Vec<_> = e.paths.iter().map(|p| p.routers.clone()).collect();
        assert_eq!(seqs, vec![rs(&[1, 2, 3]), rs(&[1, 4, 3])]);
        assert!(!e.truncated);

        let e = equal_cost_paths(&t1, r(1), r(3), 1).unwrap();
        assert_eq!(e.paths.len(), 1);
        assert!(e.truncated);

        let e = equal_cost_paths(&fixtures::t2(), r(1), r(3), 32).unwrap();
        assert_eq!(e.paths.len(), 1);
        assert_eq!(e.paths[0].routers, rs(&[1, 2, 3]));

        let e = equal_cost_paths(&t1, r(4), r(4), 32).unwrap();
        assert_eq!(e.paths, vec![PathSeq::trivial(r(4))]);
    }

    #[test]
    fn ospf_queries() {
        let t2 = fixtures::t2();
        assert_eq!(dist_ospf(&t2, r(5), r(1)).unwrap(), 3);
        assert_eq!(
            spf(&t2, r(5)).unwrap().path(r(1)).unwrap().routers,
            rs(&[5, 3, 2, 1])
        );
        assert_eq!(num_routers_ospf(&t2, r(5), r(1)).unwrap(), 4);
        assert_eq!(
            ospf_routers(&t2, r(5), r(3)).unwrap(),
            BTreeSet::from([r(5), r(3)])
        );
        assert_eq!(
            ospf_links(&t2, r(5), r(3)).unwrap(),
            BTreeSet::from([(r(5), r(3))])
        );
        assert_eq!(dist_ospf(&t2, r(4), r(4)).unwrap(), 0);
        assert_eq!(num_routers_ospf(&t2, r(4), r(4)).unwrap(), 1);
    }

    #[test]
    fn unreachable_is_explicit() {
        let t = fixtures::t1()
            .remove_component(FailureSpec::Router(r(3)))
            .unwrap();
        assert_eq!(
            dist_ospf(&t, r(1), r(5)),
            Err(SpfError::Unreachable {
                from: r(1),
                to: r(5)
            })
        );
    }
}
