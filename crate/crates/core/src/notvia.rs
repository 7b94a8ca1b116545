//! Not-via baseline: next-next-hop tunnels around a failed component and the
//! FIB size they cost.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::spf::{path_cost, spf, OspfTable, PathSeq, SpfError};
use crate::topology::{FailureSpec, LinkKey, RouterId, Topology, TopologyError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NotViaError {
    #[error(transparent)]
    Spf(#[from] SpfError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("{failure} is not adjacent to {sr} on its path to {dr}")]
    NotOnPath {
        sr: RouterId,
        dr: RouterId,
        failure: FailureSpec,
    },
    #[error("next-next-hop {nnh} unreachable from {sr} without {failure}")]
    Unprotected {
        sr: RouterId,
        nnh: RouterId,
        failure: FailureSpec,
    },
}

/// A not-via address: `owner` reached without crossing `component`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct NotViaAddress {
    pub owner: RouterId,
    pub component: NotViaComponent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum NotViaComponent {
    Link(LinkKey),
    Srlg(u32),
}

/// Second router after `sr` on its primary path, or `dr` itself when the
/// two are adjacent.
pub fn next_next_hop(t: &Topology, sr: RouterId, dr: RouterId) -> Result<RouterId, SpfError> {
    let s = spf(t, sr)?;
    let p = s.path(dr)?;
    Ok(nnh_of(&p.routers))
}

fn nnh_of(path: &[RouterId]) -> RouterId {
    path.get(2).copied().unwrap_or(*path.last().unwrap())
}

/// Tunnel from `sr` to the next-next-hop avoiding `failed`, followed by the
/// primary path from there to `dr`. Revisited routers stay in the sequence.
pub fn notvia_recovery_path(
    t: &Topology,
    sr: RouterId,
    dr: RouterId,
    failed: FailureSpec,
) -> Result<PathSeq, NotViaError> {
    let primary = spf(t, sr)?.path(dr)?.clone();
    notvia_path_with(t, None, &primary, failed)
}

/// Same as [`notvia_recovery_path`] but reusing a precomputed OSPF table.
pub fn notvia_recovery_path_in(
    t: &Topology,
    ospf: &OspfTable,
    sr: RouterId,
    dr: RouterId,
    failed: FailureSpec,
) -> Result<PathSeq, NotViaError> {
    let primary = ospf.path(sr, dr)?.clone();
    notvia_path_with(t, Some(ospf), &primary, failed)
}

fn notvia_path_with(
    t: &Topology,
    ospf: Option<&OspfTable>,
    primary: &PathSeq,
    failed: FailureSpec,
) -> Result<PathSeq, NotViaError> {
    let sr = primary.source();
    let dr = primary.destination();
    let not_on_path = NotViaError::NotOnPath {
        sr,
        dr,
        failure: failed,
    };
    if primary.routers.len() < 2 {
        return Err(not_on_path);
    }
    let nh = primary.routers[1];
    let first = LinkKey::new(sr, nh);
    let cut = t.failed_links(failed)?;
    let adjacent = match failed {
        FailureSpec::Router(r) => r == nh && r != dr,
        _ => cut.contains(&first),
    };
    if !adjacent {
        return Err(not_on_path);
    }
    let nnh = nnh_of(&primary.routers);
    let degraded = t.remove_component(failed)?;
    let degraded_spf = spf(&degraded, sr)?;
    let tunnel = degraded_spf
        .path(nnh)
        .map_err(|_| NotViaError::Unprotected {
            sr,
            nnh,
            failure: failed,
        })?;

    let owned;
    let tail = match ospf {
        Some(o) => o.path(nnh, dr)?,
        None => {
            owned = spf(t, nnh)?;
            owned.path(dr)?
        }
    };
    let crosses = tail.link_keys().iter().any(|k| cut.contains(k))
        || matches!(failed, FailureSpec::Router(r) if tail.routers.contains(&r));
    let tail = if crosses {
        // Only possible when a risk group spans the tail; stay off it.
        spf(&degraded, nnh)?.path(dr)?.clone()
    } else {
        tail.clone()
    };

    let mut routers = tunnel.routers.clone();
    routers.extend_from_slice(&tail.routers[1..]);
    let cost = path_cost(t, &routers).expect("consecutive routers are adjacent");
    Ok(PathSeq { routers, cost })
}

/// Number of distinct routers on a path (revisits collapsed).
pub fn distinct_routers(p: &PathSeq) -> usize {
    p.routers.iter().collect::<BTreeSet<_>>().len()
}

/// Not-via addresses a router publishes: one per adjacent link plus one per
/// risk group touching its links.
pub fn notvia_addresses(t: &Topology, owner: RouterId) -> Vec<NotViaAddress> {
    let mut out: Vec<NotViaAddress> = t
        .neighbors(owner)
        .into_iter()
        .map(|n| NotViaAddress {
            owner,
            component: NotViaComponent::Link(LinkKey::new(owner, n)),
        })
        .collect();
    for g in t.srlgs() {
        if g.members.iter().any(|k| k.touches(owner)) {
            out.push(NotViaAddress {
                owner,
                component: NotViaComponent::Srlg(g.id),
            });
        }
    }
    out
}

/// FIB entry counts at `owner` under not-via.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NotViaCounts {
    /// Extra entries for addresses published by every other router.
    pub nfib: u64,
    /// OSPF entries, each carrying a next-next-hop.
    pub ofe: u64,
}

pub fn notvia_fib_counts(t: &Topology, owner: RouterId) -> NotViaCounts {
    let nfib = t
        .routers()
        .filter(|&r| r != owner)
        .map(|r| notvia_addresses(t, r).len() as u64)
        .sum();
    let ofe = match spf(t, owner) {
        Ok(s) => t
            .prefixes()
            .iter()
            .filter(|p| s.is_reachable(p.announced_by))
            .count() as u64,
        Err(_) => 0,
    };
    NotViaCounts { nfib, ofe }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::topology::TopologyBuilder;

    fn r(x: u16) -> RouterId {
        RouterId::new(x).unwrap()
    }

    fn rs(xs: &[u16]) -> Vec<RouterId> {
        xs.iter().map(|&x| r(x)).collect()
    }

    #[test]
    fn nnh_examples() {
        assert_eq!(next_next_hop(&fixtures::t2(), r(1), r(3)).unwrap(), r(3));
        assert_eq!(next_next_hop(&fixtures::t4(), r(1), r(6)).unwrap(), r(3));
        assert_eq!(next_next_hop(&fixtures::t2(), r(1), r(2)).unwrap(), r(2));
    }

    #[test]
    fn recovery_examples() {
        let t2 = fixtures::t2();
        let p = notvia_recovery_path(&t2, r(1), r(3), FailureSpec::Router(r(2))).unwrap();
        assert_eq!(p.routers, rs(&[1, 4, 5, 3]));

        let t4 = fixtures::t4();
        let p = notvia_recovery_path(&t4, r(1), r(6), FailureSpec::Router(r(2))).unwrap();
        assert_eq!(p.routers, rs(&[1, 4, 5, 6, 3, 6]));
        assert_eq!(p.routers.len(), 6);
        assert_eq!(distinct_routers(&p), 5);

        let p = notvia_recovery_path(&t2, r(1), r(2), FailureSpec::link(r(1), r(2))).unwrap();
        assert_eq!(p.routers, rs(&[1, 4, 5, 3, 2]));
    }

    #[test]
    fn rejects_failures_off_path() {
        let t2 = fixtures::t2();
        let e = notvia_recovery_path(&t2, r(1), r(3), FailureSpec::Router(r(4))).unwrap_err();
        assert!(matches!(e, NotViaError::NotOnPath { .. }));
        let e = notvia_recovery_path(&t2, r(1), r(2), FailureSpec::Router(r(2))).unwrap_err();
        assert!(matches!(e, NotViaError::NotOnPath { .. }));
    }

    #[test]
    fn unprotected_on_bridge() {
        let t1 = fixtures::t1();
        let e = notvia_recovery_path(&t1, r(3), r(5), FailureSpec::link(r(3), r(5))).unwrap_err();
        assert!(matches!(e, NotViaError::Unprotected { .. }));
    }

    #[test]
    fn fib_counts() {
        let mut b = TopologyBuilder::new();
        for i in 1..=4 {
            b.router(i, None).unwrap();
        }
        b.link(1, 2, 1).unwrap();
        b.link(2, 3, 1).unwrap();
        b.link(3, 4, 1).unwrap();
        b.link(4, 1, 1).unwrap();
        let ring = b.build().unwrap();
        assert_eq!(notvia_fib_counts(&ring, r(1)).nfib, 6);
        assert_eq!(notvia_fib_counts(&ring, r(1)).ofe, 4);

        let mut b = TopologyBuilder::new();
        b.router(1, None).unwrap();
        b.router(2, None).unwrap();
        b.link(1, 2, 1).unwrap();
        let pair = b.build().unwrap();
        assert_eq!(notvia_fib_counts(&pair, r(1)).nfib, 1);
        assert_eq!(notvia_fib_counts(&pair, r(2)).nfib, 1);

        assert_eq!(notvia_fib_counts(&fixtures::t1(), r(1)).nfib, 8);
    }

    #[test]
    fn srlg_counts_as_component() {
        // t3 groups 1-2 with 1-4: routers 1, 2 and 4 each publish one more address.
        let t3 = fixtures::t3();
        let base: u64 = t3
            .routers()
            .filter(|&x| x != r(3))
            .map(|x| t3.neighbors(x).len() as u64)
            .sum();
        assert_eq!(notvia_fib_counts(&t3, r(3)).nfib, base + 3);
    }
}
