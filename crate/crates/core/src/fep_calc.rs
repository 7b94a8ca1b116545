//! Fast emergency path calculation.
//!
//! For every neighbor `ar` of a source router `sr` and every destination
//! whose primary path leaves through `ar`, the calculation takes the
//! equal-cost alternative paths around the presumed failure, walks each one
//! looking for the router from which plain OSPF forwarding safely reaches
//! the destination (the RF), scores the resulting SR..RF prefixes and keeps
//! the best one as the destination's [`FepVector`].
//!
//! All OSPF distances, router sets and link sets used while locating the RF
//! are taken on the original, failure-free topology: beyond the RF packets
//! are forwarded by routers that have not reacted to the failure yet.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use crate::spf::{constrained_graph, spf};
use crate::spf::{equal_cost_paths, AvoidMode, OspfTable, PathSeq, SpfError};
use crate::topology::{Cost, LinkKey, RouterId, Topology};

/// Weight of the path cost against the router count in the Z' score.
pub const ZPRIME_COST_FACTOR: u64 = 1000;

/// Default number of equal-cost alternative paths scored per destination.
pub const DEFAULT_PATH_BOUND: usize = 32;

/// Where the RF sits, best first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ProtectionLevel {
    Ecmp,
    Lfa,
    Sig,
}

impl fmt::Display for ProtectionLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProtectionLevel::Ecmp => "ECMP",
            ProtectionLevel::Lfa => "LFA",
            ProtectionLevel::Sig => "SIG",
        })
    }
}

impl FromStr for ProtectionLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ECMP" => Ok(ProtectionLevel::Ecmp),
            "LFA" => Ok(ProtectionLevel::Lfa),
            "SIG" => Ok(ProtectionLevel::Sig),
            other => Err(format!("unknown protection level `{other}`")),
        }
    }
}

/// Start point of the SIG-level path cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DistFepOrigin {
    /// Sum of link costs from SR to RF.
    #[default]
    Source,
    /// Sum of link costs from NR to RF.
    NeighborRouter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FepConfig {
    /// Cap on alternative paths enumerated per destination.
    pub path_bound: usize,
    pub dist_fep_origin: DistFepOrigin,
}

impl Default for FepConfig {
    fn default() -> Self {
        FepConfig {
            path_bound: DEFAULT_PATH_BOUND,
            dist_fep_origin: DistFepOrigin::Source,
        }
    }
}

/// One scored SR..RF prefix of an alternative path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FepCandidate {
    pub alt_path: PathSeq,
    pub fep: PathSeq,
    pub rf: RouterId,
    pub level: ProtectionLevel,
    pub num_fep: u64,
    pub cost_fep: Cost,
    pub zprime: u64,
}

impl FepCandidate {
    /// Routers strictly between SR and RF.
    pub fn intermediary_routers(&self) -> &[RouterId] {
        let n = self.fep.routers.len();
        if n <= 2 {
            &[]
        } else {
            &self.fep.routers[1..n - 1]
        }
    }
}

/// Selected emergency path for one (sr, ar, dr).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FepVector {
    pub sr: RouterId,
    pub dr: RouterId,
    pub ar: RouterId,
    /// SR first, RF last.
    pub routers: Vec<RouterId>,
    pub level: ProtectionLevel,
    pub cost_fep: Cost,
    pub num_fep: u64,
    pub zprime: u64,
}

impl FepVector {
    pub fn nr(&self) -> RouterId {
        self.routers[1]
    }

    pub fn rf(&self) -> RouterId {
        *self.routers.last().unwrap()
    }

    fn from_candidate(sr: RouterId, dr: RouterId, ar: RouterId, c: &FepCandidate) -> Self {
        FepVector {
            sr,
            dr,
            ar,
            routers: c.fep.routers.clone(),
            level: c.level,
            cost_fep: c.cost_fep,
            num_fep: c.num_fep,
            zprime: c.zprime,
        }
    }
}

/// Why a walk along an alternative path found no RF.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    /// The OSPF path from a qualifying router towards DR crosses AR.
    RouterFilter {
        k: RouterId,
    },
    /// The OSPF path from a qualifying router towards DR uses a link that
    /// shares risk with the failure.
    SrlgFilter {
        k: RouterId,
    },
    PathExhausted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnprotectedReason {
    /// DR cannot be reached once the component is removed.
    Unreachable,
    /// Every alternative path was rejected.
    NoCandidate(RejectReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Unprotected {
    pub sr: RouterId,
    pub ar: RouterId,
    pub dr: RouterId,
    pub reason: UnprotectedReason,
}

/// All emergency paths computed by one source router.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FepTable {
    pub sr: RouterId,
    /// Keyed by (ar, dr).
    pub vectors: BTreeMap<(RouterId, RouterId), FepVector>,
    pub unprotected: Vec<Unprotected>,
}

impl FepTable {
    /// Vector protecting traffic for `dr`, whichever interface it leaves by.
    pub fn for_destination(&self, dr: RouterId) -> Option<&FepVector> {
        self.vectors.values().find(|v| v.dr == dr)
    }

    /// CSV rows `sr,ar,dr,level,fep,cost_fep,num_fep,zprime`, no header.
    pub fn csv_rows(&self) -> Vec<String> {
        self.vectors
            .values()
            .map(|v| {
                format!(
                    "{},{},{},{},{},{},{},{}",
                    v.sr,
                    v.ar,
                    v.dr,
                    v.level,
                    format_routers(&v.routers),
                    v.cost_fep,
                    v.num_fep,
                    v.zprime
                )
            })
            .collect()
    }
}

pub const FEP_CSV_HEADER: &str = "sr,ar,dr,level,fep,cost_fep,num_fep,zprime";

/// `1-4-5` style rendering of a router sequence.
pub fn format_routers(rs: &[RouterId]) -> String {
    rs.iter()
        .map(|r| r.to_string())
        .collect::<Vec<_>>()
        .join("-")
}

/// Emergency path calculation bound to one topology.
///
/// Holds the all-pairs OSPF table of the failure-free topology so that
/// repeated queries for different source routers share it.
#[derive(Debug, Clone)]
pub struct FepCalculator<'t> {
    topo: &'t Topology,
    ospf: OspfTable,
    cfg: FepConfig,
}

impl<'t> FepCalculator<'t> {
    pub fn new(topo: &'t Topology) -> Self {
        Self::with_config(topo, FepConfig::default())
    }

    pub fn with_config(topo: &'t Topology, cfg: FepConfig) -> Self {
        FepCalculator {
            topo,
            ospf: OspfTable::new(topo),
            cfg,
        }
    }

    pub fn topology(&self) -> &'t Topology {
        self.topo
    }

    pub fn ospf(&self) -> &OspfTable {
        &self.ospf
    }

    pub fn config(&self) -> &FepConfig {
        &self.cfg
    }

    /// Destinations whose primary path from `sr` leaves through `ar`.
    pub fn affected_destinations(&self, sr: RouterId, ar: RouterId) -> BTreeSet<RouterId> {
        let Ok(s) = self.ospf.spf(sr) else {
            return BTreeSet::new();
        };
        s.reachable()
            .filter(|&d| s.next_hop(d) == Some(ar))
            .collect()
    }

    /// Links the OSPF path beyond RF must not touch.
    fn risk_links(&self, sr: RouterId, dr: RouterId, ar: RouterId) -> BTreeSet<LinkKey> {
        if ar == dr {
            self.topo.srlg_of_link(sr, ar)
        } else {
            self.topo.srlg_of_router(ar)
        }
    }

    /// Walks `alt` from NR towards DR and returns the first router that can
    /// serve as RF, scored.
    ///
    /// A router qualifies when, in this order, it is NR and an equal-cost or
    /// loop-free neighbor, or a later router satisfying the loop-free
    /// inequality, and its own OSPF path to DR avoids AR (unless AR is DR)
    /// and every link at risk. Routers that do not qualify become
    /// intermediary routers of the emergency path.
    pub fn locate_rf(
        &self,
        sr: RouterId,
        dr: RouterId,
        ar: RouterId,
        alt: &PathSeq,
    ) -> Result<FepCandidate, RejectReason> {
        let o = &self.ospf;
        let d = |x: RouterId, y: RouterId| o.dist(x, y).ok();
        if alt.routers.len() < 2 || alt.source() != sr || alt.destination() != dr {
            return Err(RejectReason::PathExhausted);
        }
        let risk = self.risk_links(sr, dr, ar);
        let mut blocked: Option<RejectReason> = None;

        for (idx, &k) in alt.routers.iter().enumerate().skip(1) {
            let (Some(sk), Some(kd), Some(ks), Some(sd)) =
                (d(sr, k), d(k, dr), d(k, sr), d(sr, dr))
            else {
                continue;
            };
            let loop_free = kd < ks + sd;
            // Only NR is judged as a neighbor: a later router adjacent to SR
            // is reached over the alternative path, not a direct link.
            let level = if idx == 1 {
                let via_ar = d(sr, ar).zip(d(ar, dr)).map(|(a, b)| a + b);
                if Some(sk + kd) == via_ar {
                    Some(ProtectionLevel::Ecmp)
                } else if loop_free {
                    Some(ProtectionLevel::Lfa)
                } else {
                    None
                }
            } else if loop_free {
                Some(ProtectionLevel::Sig)
            } else {
                None
            };
            let Some(level) = level else { continue };

            let beyond = o
                .path(k, dr)
                .expect("dr reachable in the original topology");
            if ar != dr && beyond.routers.contains(&ar) {
                blocked.get_or_insert(RejectReason::RouterFilter { k });
                continue;
            }
            if beyond.link_keys().iter().any(|l| risk.contains(l)) {
                blocked.get_or_insert(RejectReason::SrlgFilter { k });
                continue;
            }

            let fep = alt.prefix(self.topo, idx);
            let (num_fep, cost_fep) = match level {
                ProtectionLevel::Ecmp => (1, kd),
                ProtectionLevel::Lfa => (beyond.hops() as u64, kd),
                ProtectionLevel::Sig => {
                    let cost = match self.cfg.dist_fep_origin {
                        DistFepOrigin::Source => fep.cost,
                        DistFepOrigin::NeighborRouter => {
                            fep.cost - self.topo.link(sr, fep.routers[1]).unwrap().cost as Cost
                        }
                    };
                    (fep.hops() as u64, cost)
                }
            };
            return Ok(FepCandidate {
                alt_path: alt.clone(),
                fep,
                rf: k,
                level,
                num_fep,
                cost_fep,
                zprime: ZPRIME_COST_FACTOR * cost_fep + num_fep,
            });
        }
        Err(blocked.unwrap_or(RejectReason::PathExhausted))
    }

    /// Alternative paths and RF candidates for one destination over an
    /// already constrained working graph.
    fn candidates_on(
        &self,
        graph: &Topology,
        sr: RouterId,
        dr: RouterId,
        ar: RouterId,
    ) -> Result<Vec<FepCandidate>, UnprotectedReason> {
        let alts = equal_cost_paths(graph, sr, dr, self.cfg.path_bound)
            .map_err(|_| UnprotectedReason::Unreachable)?;
        let mut out = Vec::new();
        let mut first_reject = None;
        for alt in &alts.paths {
            match self.locate_rf(sr, dr, ar, alt) {
                Ok(c) => out.push(c),
                Err(e) => {
                    first_reject.get_or_insert(e);
                }
            }
        }
        if out.is_empty() {
            return Err(UnprotectedReason::NoCandidate(
                first_reject.unwrap_or(RejectReason::PathExhausted),
            ));
        }
        Ok(out)
    }

    /// Emergency paths of `sr` for every adjacent interface.
    pub fn compute_all(&self, sr: RouterId) -> Result<FepTable, SpfError> {
        if !self.topo.contains(sr) {
            return Err(SpfError::UnknownRouter(sr));
        }
        let mut vectors = BTreeMap::new();
        let mut unprotected = Vec::new();
        for ar in self.topo.neighbors(sr) {
            let affected = self.affected_destinations(sr, ar);
            if affected.is_empty() {
                continue;
            }
            let link_graph = affected
                .contains(&ar)
                .then(|| constrained_graph(self.topo, sr, ar, AvoidMode::Link))
                .transpose()?;
            // One router-avoiding graph serves every DR other than AR.
            let router_graph = (affected.len() > usize::from(affected.contains(&ar)))
                .then(|| constrained_graph(self.topo, sr, ar, AvoidMode::Router))
                .transpose()?;
            for &dr in &affected {
                let graph = if dr == ar {
                    link_graph.as_ref()
                } else {
                    router_graph.as_ref()
                }
                .expect("graph built for this branch");
                let picked = self.candidates_on(graph, sr, dr, ar).and_then(|cs| {
                    select_s_fep(&cs)
                        .ok_or(UnprotectedReason::NoCandidate(RejectReason::PathExhausted))
                });
                match picked {
                    Ok(c) => {
                        vectors.insert((ar, dr), FepVector::from_candidate(sr, dr, ar, &c));
                    }
                    Err(reason) => unprotected.push(Unprotected { sr, ar, dr, reason }),
                }
            }
        }
        Ok(FepTable {
            sr,
            vectors,
            unprotected,
        })
    }

    /// Emergency paths of every router, ascending by id.
    pub fn compute_network(&self) -> BTreeMap<RouterId, FepTable> {
        self.topo
            .routers()
            .map(|sr| (sr, self.compute_all(sr).expect("router in topology")))
            .collect()
    }

    /// SR..RF emergency path followed by the OSPF path RF -> DR.
    pub fn recovery_path(&self, v: &FepVector) -> Vec<RouterId> {
        let mut out = v.routers.clone();
        let beyond = self
            .ospf
            .path(v.rf(), v.dr)
            .expect("rf reaches dr in the original topology");
        out.extend_from_slice(&beyond.routers[1..]);
        out
    }
}

/// Picks the emergency path: best level first, then the smallest Z' score,
/// then the lexicographically smallest router sequence.
pub fn select_s_fep(candidates: &[FepCandidate]) -> Option<FepCandidate> {
    candidates
        .iter()
        .min_by(|a, b| {
            a.level
                .cmp(&b.level)
                .then(a.zprime.cmp(&b.zprime))
                .then_with(|| a.fep.routers.cmp(&b.fep.routers))
        })
        .cloned()
}

/// Destinations whose primary path from `sr` leaves through `ar`.
pub fn affected_destinations(t: &Topology, sr: RouterId, ar: RouterId) -> BTreeSet<RouterId> {
    match spf(t, sr) {
        Ok(s) => s
            .reachable()
            .filter(|&d| s.next_hop(d) == Some(ar))
            .collect(),
        Err(_) => BTreeSet::new(),
    }
}

/// Emergency paths of `sr` with the default configuration.
pub fn compute_all_feps(t: &Topology, sr: RouterId) -> Result<FepTable, SpfError> {
    FepCalculator::new(t).compute_all(sr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::spf::path_cost;

    fn r(x: u16) -> RouterId {
        RouterId::new(x).unwrap()
    }

    fn rs(v: &[u16]) -> Vec<RouterId> {
        v.iter().map(|&x| r(x)).collect()
    }

    fn path(t: &Topology, v: &[u16]) -> PathSeq {
        let routers = rs(v);
        let cost = path_cost(t, &routers).unwrap();
        PathSeq { routers, cost }
    }

    fn cand(level: ProtectionLevel, cost: Cost, num: u64, fep: &[u16]) -> FepCandidate {
        let p = PathSeq {
            routers: rs(fep),
            cost,
        };
        FepCandidate {
            alt_path: p.clone(),
            fep: p,
            rf: r(*fep.last().unwrap()),
            level,
            num_fep: num,
            cost_fep: cost,
            zprime: ZPRIME_COST_FACTOR * cost + num,
        }
    }

    #[test]
    fn affected_sets() {
        let t2 = fixtures::t2();
        assert_eq!(
            affected_destinations(&t2, r(1), r(2)),
            BTreeSet::from([r(2), r(3), r(5)])
        );
        let t1 = fixtures::t1();
        assert_eq!(
            affected_destinations(&t1, r(1), r(4)),
            BTreeSet::from([r(4)])
        );
        // Router 5 has a single exit.
        assert_eq!(
            affected_destinations(&t1, r(5), r(3)),
            BTreeSet::from([r(1), r(2), r(3), r(4)])
        );
    }

    #[test]
    fn locate_ecmp_on_t1() {
        let t1 = fixtures::t1();
        let calc = FepCalculator::new(&t1);
        let c = calc
            .locate_rf(r(1), r(3), r(2), &path(&t1, &[1, 4, 3]))
            .unwrap();
        assert_eq!(c.level, ProtectionLevel::Ecmp);
        assert_eq!(c.rf, r(4));
        assert_eq!(c.fep.routers, rs(&[1, 4]));
        assert_eq!((c.num_fep, c.cost_fep, c.zprime), (1, 1, 1001));
        assert!(c.intermediary_routers().is_empty());
    }

    #[test]
    fn locate_sig_on_t2() {
        let t2 = fixtures::t2();
        let calc = FepCalculator::new(&t2);
        let c = calc
            .locate_rf(r(1), r(3), r(2), &path(&t2, &[1, 4, 5, 3]))
            .unwrap();
        assert_eq!(c.level, ProtectionLevel::Sig);
        assert_eq!(c.rf, r(5));
        assert_eq!(c.fep.routers, rs(&[1, 4, 5]));
        assert_eq!((c.num_fep, c.cost_fep, c.zprime), (3, 11, 11003));
        assert_eq!(c.intermediary_routers(), &rs(&[4])[..]);

        let c = calc
            .locate_rf(r(1), r(2), r(2), &path(&t2, &[1, 4, 5, 3, 2]))
            .unwrap();
        assert_eq!(c.level, ProtectionLevel::Sig);
        assert_eq!(c.rf, r(5));
        assert_eq!(c.fep.routers, rs(&[1, 4, 5]));
    }

    #[test]
    fn dist_fep_from_neighbor() {
        let t2 = fixtures::t2();
        let cfg = FepConfig {
            dist_fep_origin: DistFepOrigin::NeighborRouter,
            ..FepConfig::default()
        };
        let calc = FepCalculator::with_config(&t2, cfg);
        let c = calc
            .locate_rf(r(1), r(3), r(2), &path(&t2, &[1, 4, 5, 3]))
            .unwrap();
        assert_eq!((c.cost_fep, c.zprime), (10, 10003));
    }

    #[test]
    fn router_filter_skips_to_later_router() {
        // 1-2 primary towards 3, alternative via 4 whose own path to 3 uses 2.
        let t = crate::topology::load_topology(
            "routers 4\nrouter 1\nrouter 2\nrouter 3\nrouter 4\n\
             link 1 2 cost_ab 1 cost_ba 1 capacity 10\n\
             link 2 3 cost_ab 1 cost_ba 1 capacity 10\n\
             link 1 4 cost_ab 1 cost_ba 1 capacity 10\n\
             link 4 2 cost_ab 1 cost_ba 1 capacity 10\n\
             link 4 3 cost_ab 3 cost_ba 3 capacity 10\n",
        )
        .unwrap();
        let calc = FepCalculator::new(&t);
        let c = calc
            .locate_rf(r(1), r(3), r(2), &path(&t, &[1, 4, 3]))
            .unwrap();
        assert_eq!(c.rf, r(3));
        assert_eq!(c.level, ProtectionLevel::Sig);
        assert_eq!(c.fep.routers, rs(&[1, 4, 3]));
    }

    #[test]
    fn selection_rules() {
        let a = cand(ProtectionLevel::Ecmp, 2, 1, &[1, 4]);
        let b = cand(ProtectionLevel::Ecmp, 2, 1, &[1, 6]);
        assert_eq!(
            select_s_fep(&[b.clone(), a.clone()]).unwrap().fep.routers,
            rs(&[1, 4])
        );

        let ecmp = cand(ProtectionLevel::Ecmp, 3, 1, &[1, 4]);
        let sig = cand(ProtectionLevel::Sig, 1, 2, &[1, 6, 7]);
        assert_eq!(select_s_fep(&[sig, ecmp.clone()]).unwrap(), ecmp);

        let short = cand(ProtectionLevel::Sig, 11, 3, &[1, 4, 5]);
        let long = cand(ProtectionLevel::Sig, 11, 4, &[1, 2, 6, 5]);
        assert_eq!(select_s_fep(&[long, short.clone()]).unwrap(), short);

        assert!(select_s_fep(&[]).is_none());
    }

    #[test]
    fn t1_network_vectors() {
        let t1 = fixtures::t1();
        let table = compute_all_feps(&t1, r(1)).unwrap();
        let v = &table.vectors[&(r(2), r(3))];
        assert_eq!(
            (v.level, v.routers.clone()),
            (ProtectionLevel::Ecmp, rs(&[1, 4]))
        );
        let v = &table.vectors[&(r(2), r(5))];
        assert_eq!(
            (v.level, v.routers.clone()),
            (ProtectionLevel::Ecmp, rs(&[1, 4]))
        );
        // DR = AR: alternative [1,4,3,2], k=4 fails both neighbor checks,
        // k=3 is loop-free towards 2.
        let v = &table.vectors[&(r(2), r(2))];
        assert_eq!(
            (v.level, v.routers.clone()),
            (ProtectionLevel::Sig, rs(&[1, 4, 3]))
        );
        assert!(table.unprotected.is_empty());
    }

    #[test]
    fn t2_and_t3_vectors() {
        let table = compute_all_feps(&fixtures::t2(), r(1)).unwrap();
        let v = &table.vectors[&(r(2), r(3))];
        assert_eq!(
            (v.level, v.routers.clone(), v.zprime),
            (ProtectionLevel::Sig, rs(&[1, 4, 5]), 11003)
        );
        let v = &table.vectors[&(r(2), r(5))];
        assert_eq!((v.level, v.rf()), (ProtectionLevel::Sig, r(5)));
        assert_eq!(v.routers, rs(&[1, 4, 5]));

        let table = compute_all_feps(&fixtures::t3(), r(1)).unwrap();
        let v = &table.vectors[&(r(2), r(3))];
        assert_eq!(
            (v.level, v.routers.clone()),
            (ProtectionLevel::Lfa, rs(&[1, 5]))
        );
    }

    #[test]
    fn stub_router_failure_is_unprotected() {
        // In T1, losing router 3 strands router 5.
        let table = compute_all_feps(&fixtures::t1(), r(2)).unwrap();
        assert_eq!(
            table.unprotected,
            vec![Unprotected {
                sr: r(2),
                ar: r(3),
                dr: r(5),
                reason: UnprotectedReason::Unreachable
            }]
        );
    }
}
