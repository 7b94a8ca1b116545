//! FIB extension: 16-bit packet marks, mark/interface pair tables and the
//! byte accounting used to compare against not-via addressing.
//!
//! A router's pair table has two parts. Pairs it generated itself as source
//! router come first and are the only ones FIB entries reference. Pairs it
//! learned from other routers through signaling follow; they are looked up
//! by mark when an already-marked packet arrives.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::fep_calc::{FepTable, ProtectionLevel};
use crate::spf::SpfResult;
use crate::topology::{PrefixId, RouterId, Topology};

pub const SR_ID_BITS: u32 = 9;
pub const FEP_ID_BITS: u32 = 7;
pub const MAX_SR_ID: u16 = (1 << SR_ID_BITS) - 1;
pub const MAX_FEP_ID: u16 = (1 << FEP_ID_BITS) - 1;
/// Largest pair count addressable by the 8-bit Ref field.
pub const MAX_REFERENCED_PAIRS: usize = 255;

/// Bytes per mark/interface pair (16-bit mark + 8-bit interface).
pub const FNI_BYTES: u64 = 3;
/// Bytes of the Ref field added to an OSPF FIB entry.
pub const REF_BYTES: u64 = 1;
/// Bytes of a not-via FIB entry: destination, netmask and next hop.
pub const NOTVIA_ENTRY_BYTES: u64 = 12;
/// Bytes of a next-next-hop router id attached to an OSPF FIB entry.
pub const NNH_BYTES: u64 = 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FibError {
    #[error("sr id {0} does not fit in 9 bits")]
    SrIdRange(u16),
    #[error("fep id {0} does not fit in 7 bits")]
    FepIdRange(u16),
    #[error("router {0} ran out of fep ids (more than 127 signaled vectors)")]
    FepIdExhausted(RouterId),
    #[error("router {0} ran out of Ref values (more than 255 pairs)")]
    RefExhausted(RouterId),
    #[error("router {owner} is not on the signaled vector")]
    NotOnVector { owner: RouterId },
    #[error("router {owner} already maps mark {mark} to a different interface")]
    ConflictingMark { owner: RouterId, mark: FepMark },
    #[error("router {owner} has no interface towards {neighbor}")]
    NoInterface { owner: RouterId, neighbor: RouterId },
}

/// Packed mark: 9-bit SR id in the high bits, 7-bit FEP id in the low bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FepMark(u16);

impl FepMark {
    pub fn new(sr_id: u16, fep_id: u16) -> Result<Self, FibError> {
        encode_mark(sr_id, fep_id).map(FepMark)
    }

    pub fn from_bits(bits: u16) -> Self {
        FepMark(bits)
    }

    pub fn bits(self) -> u16 {
        self.0
    }

    pub fn sr_id(self) -> u16 {
        self.0 >> FEP_ID_BITS
    }

    pub fn fep_id(self) -> u16 {
        self.0 & MAX_FEP_ID
    }
}

impl fmt::Display for FepMark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{:04X}", self.0)
    }
}

pub fn encode_mark(sr_id: u16, fep_id: u16) -> Result<u16, FibError> {
    if sr_id > MAX_SR_ID {
        return Err(FibError::SrIdRange(sr_id));
    }
    if fep_id > MAX_FEP_ID {
        return Err(FibError::FepIdRange(fep_id));
    }
    Ok((sr_id << FEP_ID_BITS) | fep_id)
}

pub fn decode_mark(bits: u16) -> (u16, u16) {
    (bits >> FEP_ID_BITS, bits & MAX_FEP_ID)
}

/// SR id of a router: the low 9 bits of its loopback, or its router id when
/// no loopback is configured.
pub fn sr_id_for(t: &Topology, r: RouterId) -> u16 {
    match t.router(r).and_then(|x| x.loopback) {
        Some(lb) => (lb & MAX_SR_ID as u32) as u16,
        None => r.get(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MarkNiPair {
    pub mark: FepMark,
    pub ni: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FibEntry {
    pub prefix: PrefixId,
    pub announced_by: RouterId,
    /// Equal to the owner for locally announced prefixes.
    pub next_hop: RouterId,
    pub r#ref: Option<u8>,
}

/// A router sequence this router marks packets for, as source router.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkedVector {
    pub mark: FepMark,
    pub routers: Vec<RouterId>,
    pub level: ProtectionLevel,
    /// Destinations sharing this sequence, ascending.
    pub drs: Vec<RouterId>,
    /// Index of the pair in the table (the Ref value).
    pub pair: u8,
    pub confirmed: bool,
}

/// State a router keeps for a vector signaled by another router.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignaledVector {
    pub sr: RouterId,
    /// Destinations sharing the router sequence.
    pub drs: Vec<RouterId>,
    pub routers: Vec<RouterId>,
}

/// What a router installed when it received a signaled vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NotSrInstall {
    /// Forward packets carrying the mark on this interface.
    Pair(MarkNiPair),
    /// The router is the RF: deviation ends here.
    Terminate(FepMark),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RouterFib {
    pub owner: RouterId,
    pub entries: Vec<FibEntry>,
    sr_pairs: Vec<MarkNiPair>,
    not_sr_pairs: Vec<MarkNiPair>,
    pub sr_vectors: Vec<MarkedVector>,
    terminate: BTreeSet<FepMark>,
    signaled: BTreeMap<FepMark, SignaledVector>,
}

impl RouterFib {
    pub fn empty(owner: RouterId) -> Self {
        RouterFib {
            owner,
            entries: Vec::new(),
            sr_pairs: Vec::new(),
            not_sr_pairs: Vec::new(),
            sr_vectors: Vec::new(),
            terminate: BTreeSet::new(),
            signaled: BTreeMap::new(),
        }
    }

    /// Plain OSPF FIB: one entry per reachable announced prefix.
    pub fn from_spf(t: &Topology, spf: &SpfResult) -> Self {
        let owner = spf.source;
        let mut fib = RouterFib::empty(owner);
        let ids = prefix_ids(t);
        for (prefix, p) in t.prefixes().iter().enumerate() {
            let next_hop = if p.announced_by == owner {
                owner
            } else {
                match spf.next_hop(p.announced_by) {
                    Some(nh) => nh,
                    None => continue,
                }
            };
            fib.entries.push(FibEntry {
                prefix: ids[prefix],
                announced_by: p.announced_by,
                next_hop,
                r#ref: None,
            });
        }
        fib
    }

    /// All pairs: source-router pairs first, then learned ones.
    pub fn pairs(&self) -> Vec<MarkNiPair> {
        self.sr_pairs
            .iter()
            .chain(self.not_sr_pairs.iter())
            .copied()
            .collect()
    }

    pub fn sr_pair_count(&self) -> usize {
        self.sr_pairs.len()
    }

    pub fn pair_count(&self) -> usize {
        self.sr_pairs.len() + self.not_sr_pairs.len()
    }

    pub fn referenced_pair(&self, r#ref: u8) -> Option<MarkNiPair> {
        self.sr_pairs.get(r#ref as usize).copied()
    }

    /// Learned pair for an arriving marked packet.
    pub fn learned_pair(&self, mark: FepMark) -> Option<MarkNiPair> {
        self.not_sr_pairs.iter().find(|p| p.mark == mark).copied()
    }

    pub fn terminates(&self, mark: FepMark) -> bool {
        self.terminate.contains(&mark)
    }

    pub fn signaled(&self, mark: FepMark) -> Option<&SignaledVector> {
        self.signaled.get(&mark)
    }

    pub fn entry(&self, prefix: PrefixId) -> Option<&FibEntry> {
        self.entries
            .binary_search_by_key(&prefix, |e| e.prefix)
            .ok()
            .map(|i| &self.entries[i])
    }

    pub fn referencing_entries(&self) -> usize {
        self.entries.iter().filter(|e| e.r#ref.is_some()).count()
    }

    /// Replaces next hops after a routing change, keeping Ref values.
    pub fn reroute(&mut self, spf: &SpfResult) {
        let owner = self.owner;
        for e in &mut self.entries {
            if e.announced_by != owner {
                if let Some(nh) = spf.next_hop(e.announced_by) {
                    e.next_hop = nh;
                }
            }
        }
    }

    /// Drops Ref values pointing at pair `pair` (used when signaling for its
    /// vector was never acknowledged).
    pub fn unreference(&mut self, pair: u8) {
        for e in &mut self.entries {
            if e.r#ref == Some(pair) {
                e.r#ref = None;
            }
        }
        for v in &mut self.sr_vectors {
            if v.pair == pair {
                v.confirmed = false;
            }
        }
    }

    /// `owner,prefix,announced_by,next_hop,ref` rows, no header.
    pub fn fib_csv_rows(&self, t: &Topology) -> Vec<String> {
        let names = t.prefixes();
        self.entries
            .iter()
            .map(|e| {
                format!(
                    "{},{},{},{},{}",
                    self.owner,
                    names[e.prefix.0 as usize].name,
                    e.announced_by,
                    e.next_hop,
                    e.r#ref.map(|r| r.to_string()).unwrap_or_default()
                )
            })
            .collect()
    }

    /// `owner,index,mark,ni,origin` rows, no header.
    pub fn pair_csv_rows(&self) -> Vec<String> {
        let sr = self.sr_pairs.iter().map(|p| (p, "sr"));
        let not_sr = self.not_sr_pairs.iter().map(|p| (p, "not_sr"));
        sr.chain(not_sr)
            .enumerate()
            .map(|(i, (p, origin))| format!("{},{},{},{},{}", self.owner, i, p.mark, p.ni, origin))
            .collect()
    }
}

pub const FIB_CSV_HEADER: &str = "owner,prefix,announced_by,next_hop,ref";
pub const PAIR_CSV_HEADER: &str = "owner,index,mark,ni,origin";

fn prefix_ids(t: &Topology) -> Vec<PrefixId> {
    (0..t.prefixes().len() as u32).map(PrefixId).collect()
}

/// Generates the source-router pairs of `fib.owner` from its emergency
/// paths and wires FIB entries to them.
///
/// Vectors sharing a router sequence share one pair, and every prefix
/// announced by a covered destination references it. ECMP and LFA vectors
/// use FEP id 0; signaled vectors get ids 1, 2, ... in ascending destination
/// order.
pub fn build_sr_marks(t: &Topology, table: &FepTable, fib: &mut RouterFib) -> Result<(), FibError> {
    let owner = fib.owner;
    let sr_id = sr_id_for(t, owner);
    let mut ordered: Vec<_> = table.vectors.values().collect();
    ordered.sort_by_key(|v| (v.dr, v.ar));

    let mut by_routers: BTreeMap<Vec<RouterId>, usize> = BTreeMap::new();
    let mut vectors: Vec<MarkedVector> = Vec::new();
    let mut next_fep_id: u16 = 1;
    for v in ordered {
        if let Some(&i) = by_routers.get(&v.routers) {
            vectors[i].drs.push(v.dr);
            continue;
        }
        let fep_id = match v.level {
            ProtectionLevel::Ecmp | ProtectionLevel::Lfa => 0,
            ProtectionLevel::Sig => {
                if next_fep_id > MAX_FEP_ID {
                    return Err(FibError::FepIdExhausted(owner));
                }
                next_fep_id += 1;
                next_fep_id - 1
            }
        };
        if vectors.len() >= MAX_REFERENCED_PAIRS {
            return Err(FibError::RefExhausted(owner));
        }
        by_routers.insert(v.routers.clone(), vectors.len());
        vectors.push(MarkedVector {
            mark: FepMark::new(sr_id, fep_id)?,
            routers: v.routers.clone(),
            level: v.level,
            drs: vec![v.dr],
            pair: vectors.len() as u8,
            confirmed: true,
        });
    }

    let mut pairs = Vec::with_capacity(vectors.len());
    for mv in &vectors {
        let nr = mv.routers[1];
        let ni = t.interface_index(owner, nr).ok_or(FibError::NoInterface {
            owner,
            neighbor: nr,
        })?;
        pairs.push(MarkNiPair { mark: mv.mark, ni });
    }

    for e in &mut fib.entries {
        e.r#ref = None;
        if e.announced_by == owner {
            continue;
        }
        if let Some(v) = table.vectors.get(&(e.next_hop, e.announced_by)) {
            e.r#ref = Some(by_routers[&v.routers] as u8);
        }
    }
    fib.sr_pairs = pairs;
    fib.sr_vectors = vectors;
    Ok(())
}

/// Installs state for a vector signaled by another router.
///
/// Routers before the RF get a pair towards their successor on the vector;
/// the RF records that deviation terminates there.
pub fn install_not_sr_mark(
    t: &Topology,
    fib: &mut RouterFib,
    vector: &SignaledVector,
    mark: FepMark,
) -> Result<NotSrInstall, FibError> {
    let owner = fib.owner;
    let pos = vector
        .routers
        .iter()
        .position(|&r| r == owner)
        .filter(|&p| p > 0)
        .ok_or(FibError::NotOnVector { owner })?;
    let install = if pos + 1 == vector.routers.len() {
        if fib.learned_pair(mark).is_some() {
            return Err(FibError::ConflictingMark { owner, mark });
        }
        fib.terminate.insert(mark);
        NotSrInstall::Terminate(mark)
    } else {
        let next = vector.routers[pos + 1];
        let ni = t
            .interface_index(owner, next)
            .ok_or(FibError::NoInterface {
                owner,
                neighbor: next,
            })?;
        let pair = MarkNiPair { mark, ni };
        match fib.learned_pair(mark) {
            Some(existing) if existing != pair => {
                return Err(FibError::ConflictingMark { owner, mark })
            }
            Some(_) => {}
            None if fib.terminate.contains(&mark) => {
                return Err(FibError::ConflictingMark { owner, mark })
            }
            None => fib.not_sr_pairs.push(pair),
        }
        NotSrInstall::Pair(pair)
    };
    fib.signaled.insert(mark, vector.clone());
    Ok(install)
}

/// Extra FIB bytes of the emergency path scheme: 3 per pair plus 1 per OSPF
/// entry carrying a Ref.
pub fn fep_overhead_bytes(fib: &RouterFib) -> u64 {
    fep_bytes(fib.pair_count() as u64, fib.referencing_entries() as u64)
}

/// `3·fni + ref_entries`.
pub fn fep_bytes(fni: u64, ref_entries: u64) -> u64 {
    FNI_BYTES * fni + REF_BYTES * ref_entries
}

/// Extra FIB bytes of not-via addressing: 12 per not-via entry plus 4 per
/// OSPF entry for its next-next-hop.
pub fn notvia_overhead_bytes(nfib: u64, ofe: u64) -> u64 {
    NOTVIA_ENTRY_BYTES * nfib + NNH_BYTES * ofe
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fep_calc::compute_all_feps;
    use crate::fixtures;
    use crate::spf::spf;

    fn r(x: u16) -> RouterId {
        RouterId::new(x).unwrap()
    }

    #[test]
    fn mark_examples() {
        assert_eq!(encode_mark(0, 0).unwrap(), 0x0000);
        assert_eq!(encode_mark(511, 127).unwrap(), 0xFFFF);
        assert_eq!(encode_mark(5, 3).unwrap(), 0x0283);
        assert_eq!(encode_mark(512, 0), Err(FibError::SrIdRange(512)));
        assert_eq!(encode_mark(1, 128), Err(FibError::FepIdRange(128)));
        let m = FepMark::new(5, 3).unwrap();
        assert_eq!((m.sr_id(), m.fep_id()), (5, 3));
        assert_eq!(m.to_string(), "0x0283");
    }

    #[test]
    fn sr_id_from_loopback() {
        let t = fixtures::g2();
        // 10.0.0.6 -> low nine bits = 6
        assert_eq!(sr_id_for(&t, r(6)), 6);
        assert_eq!(sr_id_for(&fixtures::t1(), r(3)), 3);
    }

    fn fib_for(t: &Topology, owner: RouterId) -> RouterFib {
        let mut fib = RouterFib::from_spf(t, &spf(t, owner).unwrap());
        build_sr_marks(t, &compute_all_feps(t, owner).unwrap(), &mut fib).unwrap();
        fib
    }

    #[test]
    fn shared_sequence_shares_one_pair() {
        let t = fixtures::t1();
        let fib = fib_for(&t, r(1));
        // Over ar=2: dr 3 and 5 both use [1,4] (ECMP); dr 2 uses [1,4,3] (SIG).
        let v14 = fib
            .sr_vectors
            .iter()
            .find(|v| v.routers == vec![r(1), r(4)])
            .unwrap();
        assert_eq!(v14.drs, vec![r(3), r(5)]);
        assert_eq!(v14.mark.fep_id(), 0);
        let pair = fib.referenced_pair(v14.pair).unwrap();
        assert_eq!(pair.ni, t.interface_index(r(1), r(4)).unwrap());
        let refs: Vec<_> = fib
            .entries
            .iter()
            .filter(|e| e.announced_by == r(3) || e.announced_by == r(5))
            .map(|e| e.r#ref)
            .collect();
        assert_eq!(refs, vec![Some(v14.pair), Some(v14.pair)]);
        let sig = fib
            .sr_vectors
            .iter()
            .find(|v| v.level == ProtectionLevel::Sig)
            .unwrap();
        assert_eq!(sig.mark.fep_id(), 1);
    }

    #[test]
    fn prefixes_of_one_dr_share_a_ref() {
        let t = crate::topology::load_topology(&format!(
            "{}announce 3 x\nannounce 3 y\n",
            fixtures::T2
        ))
        .unwrap();
        let fib = fib_for(&t, r(1));
        let refs: BTreeSet<_> = fib
            .entries
            .iter()
            .filter(|e| e.announced_by == r(3))
            .map(|e| e.r#ref)
            .collect();
        assert_eq!(
            fib.entries
                .iter()
                .filter(|e| e.announced_by == r(3))
                .count(),
            3
        );
        assert_eq!(refs.len(), 1);
        assert!(refs.iter().all(|r| r.is_some()));
    }

    #[test]
    fn not_sr_install() {
        let t = fixtures::t2();
        let v = SignaledVector {
            sr: r(1),
            drs: vec![r(3)],
            routers: vec![r(1), r(4), r(5)],
        };
        let m = FepMark::new(1, 1).unwrap();
        let mut fib4 = RouterFib::empty(r(4));
        let got = install_not_sr_mark(&t, &mut fib4, &v, m).unwrap();
        let ni = t.interface_index(r(4), r(5)).unwrap();
        assert_eq!(got, NotSrInstall::Pair(MarkNiPair { mark: m, ni }));
        assert_eq!(fib4.referencing_entries(), 0);
        assert_eq!(fib4.learned_pair(m).unwrap().ni, ni);
        // Re-installing the same vector is harmless.
        assert!(install_not_sr_mark(&t, &mut fib4, &v, m).is_ok());
        assert_eq!(fib4.pair_count(), 1);

        let mut fib5 = RouterFib::empty(r(5));
        assert_eq!(
            install_not_sr_mark(&t, &mut fib5, &v, m).unwrap(),
            NotSrInstall::Terminate(m)
        );
        assert!(fib5.terminates(m));

        let mut fib3 = RouterFib::empty(r(3));
        assert_eq!(
            install_not_sr_mark(&t, &mut fib3, &v, m),
            Err(FibError::NotOnVector { owner: r(3) })
        );

        let other = SignaledVector {
            sr: r(1),
            drs: vec![r(3)],
            routers: vec![r(1), r(4), r(1)],
        };
        assert!(matches!(
            install_not_sr_mark(&t, &mut fib4, &other, m),
            Err(FibError::ConflictingMark { .. })
        ));
    }

    #[test]
    fn byte_accounting() {
        let mut fib = RouterFib::empty(r(1));
        assert_eq!(fep_overhead_bytes(&fib), 0);
        fib.sr_pairs = vec![
            MarkNiPair {
                mark: FepMark(0),
                ni: 0
            };
            27
        ];
        assert_eq!(fep_overhead_bytes(&fib), 81);
        assert_eq!(notvia_overhead_bytes(54, 0), 648);
        assert_eq!(notvia_overhead_bytes(54, 10), 688);
    }

    #[test]
    fn fep_id_exhaustion() {
        // A star of 130 chains: hub 1 reaches each far end through a signaled vector.
        let mut b = crate::topology::TopologyBuilder::new();
        b.router(1, None).unwrap();
        b.router(2, None).unwrap();
        b.link(1, 2, 1).unwrap();
        let mut id = 3;
        for _ in 0..130 {
            b.router(id, None).unwrap();
            b.router(id + 1, None).unwrap();
            b.link(2, id, 1).unwrap();
            b.link(1, id + 1, 1).unwrap();
            b.link(id + 1, id, 5).unwrap();
            id += 2;
        }
        let t = b.build().unwrap();
        let mut fib = RouterFib::from_spf(&t, &spf(&t, r(1)).unwrap());
        let table = compute_all_feps(&t, r(1)).unwrap();
        assert!(
            table
                .vectors
                .values()
                .filter(|v| v.level == ProtectionLevel::Sig)
                .count()
                > 127
        );
        assert_eq!(
            build_sr_marks(&t, &table, &mut fib),
            Err(FibError::FepIdExhausted(r(1)))
        );
    }
}
