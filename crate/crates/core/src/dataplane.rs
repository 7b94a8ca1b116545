//! Per-router forwarding with emergency-path deviation, the signaling that
//! installs state along signaled vectors, and a deployment helper that wires
//! every router of a topology.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::fep_calc::{FepCalculator, FepTable, ProtectionLevel};
use crate::fib_ext::{
    build_sr_marks, install_not_sr_mark, sr_id_for, FepMark, FibError, RouterFib, SignaledVector,
};
use crate::topology::{FailureSpec, LinkKey, PrefixId, RouterId, Topology, TopologyError};

/// Nanoseconds since the start of a run.
pub type Nanos = u64;

/// Queue occupancy from which deviated packets are dropped.
pub const GUARD_THRESHOLD: f64 = 0.80;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    pub flow: u32,
    pub dst_prefix: PrefixId,
    pub size_bytes: u32,
    pub mark: Option<FepMark>,
    pub deviated_flag: bool,
    /// The header field that would carry the mark is already used.
    pub field_in_use: bool,
    pub encapsulated_to: Option<RouterId>,
    pub hops: u32,
}

impl Packet {
    pub fn new(flow: u32, dst_prefix: PrefixId, size_bytes: u32) -> Self {
        Packet {
            flow,
            dst_prefix,
            size_bytes,
            mark: None,
            deviated_flag: false,
            field_in_use: false,
            encapsulated_to: None,
            hops: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DropReason {
    /// Sent onto a failed component before the failure was detected.
    DetectionWindow,
    /// A marked packet met another failure.
    SecondFailure,
    QueueGuard,
    Unreachable,
    /// Hop budget exhausted (a forwarding loop).
    HopBudget,
    /// Drop-tail on a full link queue.
    QueueOverflow,
}

impl DropReason {
    pub const ALL: [DropReason; 6] = [
        DropReason::DetectionWindow,
        DropReason::SecondFailure,
        DropReason::QueueGuard,
        DropReason::Unreachable,
        DropReason::HopBudget,
        DropReason::QueueOverflow,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DropReason::DetectionWindow => "detection-window",
            DropReason::SecondFailure => "second-failure",
            DropReason::QueueGuard => "queue-guard",
            DropReason::Unreachable => "unreachable",
            DropReason::HopBudget => "hop-budget",
            DropReason::QueueOverflow => "queue-overflow",
        }
    }
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardDecision {
    Forward { ni: u8, to: RouterId },
    Deliver,
    Drop(DropReason),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouterState {
    pub owner: RouterId,
    pub fib: RouterFib,
    /// Neighbors by interface index.
    pub neighbors: Vec<RouterId>,
    /// Link state by interface index, as this router knows it.
    pub adjacent_up: Vec<bool>,
    pub deviation_active: bool,
    pub deviation_deadline: Nanos,
    /// Fraction of queue capacity in use, by interface index.
    pub queue_occupancy: Vec<f64>,
    pub congestion_guard_enabled: bool,
    pub hop_budget: u32,
    /// Set when a deviation window closes; cleared by whoever recomputes.
    pub recompute_requested: bool,
}

impl RouterState {
    pub fn new(t: &Topology, fib: RouterFib, guard: bool) -> Self {
        let owner = fib.owner;
        let neighbors = t.neighbors(owner);
        let n = neighbors.len();
        RouterState {
            owner,
            fib,
            neighbors,
            adjacent_up: vec![true; n],
            deviation_active: false,
            deviation_deadline: 0,
            queue_occupancy: vec![0.0; n],
            congestion_guard_enabled: guard,
            hop_budget: 2 * t.router_count() as u32,
            recompute_requested: false,
        }
    }

    pub fn interface(&self, neighbor: RouterId) -> Option<u8> {
        self.neighbors
            .binary_search(&neighbor)
            .ok()
            .map(|i| i as u8)
    }

    pub fn is_up(&self, neighbor: RouterId) -> bool {
        self.interface(neighbor)
            .map(|ni| self.adjacent_up[ni as usize])
            .unwrap_or(false)
    }

    pub fn set_link(&mut self, neighbor: RouterId, up: bool) {
        if let Some(ni) = self.interface(neighbor) {
            self.adjacent_up[ni as usize] = up;
        }
    }

    pub fn deviating(&self, now: Nanos) -> bool {
        self.deviation_active && now < self.deviation_deadline
    }

    fn guarded(&self, ni: u8) -> bool {
        self.congestion_guard_enabled && self.queue_occupancy[ni as usize] >= GUARD_THRESHOLD
    }

    /// Closes the deviation window once its deadline has passed.
    pub fn tick(&mut self, now: Nanos) {
        if self.deviation_active && now >= self.deviation_deadline {
            self.deviation_active = false;
            self.recompute_requested = true;
        }
    }
}

/// Marks the interface towards `failed_neighbor` down and opens (or
/// extends) the deviation window until `now + hold`.
pub fn activate_deviation(
    state: &mut RouterState,
    failed_neighbor: RouterId,
    now: Nanos,
    hold: Nanos,
) {
    state.set_link(failed_neighbor, false);
    if hold == 0 {
        return;
    }
    let deadline = now + hold;
    if state.deviating(now) {
        state.deviation_deadline = state.deviation_deadline.max(deadline);
    } else {
        state.deviation_active = true;
        state.deviation_deadline = deadline;
    }
}

/// One forwarding step at `state.owner`.
pub fn fep_diffor_forward(
    state: &RouterState,
    mut p: Packet,
    now: Nanos,
) -> (ForwardDecision, Packet) {
    use ForwardDecision::*;
    if p.hops >= state.hop_budget {
        return (Drop(DropReason::HopBudget), p);
    }
    let owner = state.owner;
    let entry = state.fib.entry(p.dst_prefix);

    if let Some(mark) = p.mark {
        let at_dr = match p.encapsulated_to {
            Some(dr) => dr == owner,
            None => entry.is_some_and(|e| e.announced_by == owner),
        };
        if at_dr {
            p.mark = None;
            p.deviated_flag = false;
            p.encapsulated_to = None;
            return normal_forward(state, p, DropReason::Unreachable);
        }
        if let Some(pair) = state.fib.learned_pair(mark) {
            if !state.adjacent_up[pair.ni as usize] {
                return (Drop(DropReason::SecondFailure), p);
            }
            if state.guarded(pair.ni) {
                return (Drop(DropReason::QueueGuard), p);
            }
            let to = state.neighbors[pair.ni as usize];
            return (Forward { ni: pair.ni, to }, p);
        }
        // Past the RF: ordinary routing towards DR, mark kept.
        let Some(e) = entry else {
            return (Drop(DropReason::Unreachable), p);
        };
        let Some(ni) = state.interface(e.next_hop) else {
            return (Drop(DropReason::Unreachable), p);
        };
        if !state.adjacent_up[ni as usize] {
            return (Drop(DropReason::SecondFailure), p);
        }
        if state.guarded(ni) {
            return (Drop(DropReason::QueueGuard), p);
        }
        return (Forward { ni, to: e.next_hop }, p);
    }

    let Some(e) = entry else {
        return (Drop(DropReason::Unreachable), p);
    };
    if e.next_hop == owner {
        return (Deliver, p);
    }
    let ni = state.interface(e.next_hop).expect("next hop is a neighbor");
    if state.adjacent_up[ni as usize] {
        return (Forward { ni, to: e.next_hop }, p);
    }
    let pair = match (state.deviating(now), e.r#ref) {
        (true, Some(r)) => state.fib.referenced_pair(r),
        _ => None,
    };
    let Some(pair) = pair else {
        return (Drop(DropReason::Unreachable), p);
    };
    if !state.adjacent_up[pair.ni as usize] {
        return (Drop(DropReason::SecondFailure), p);
    }
    if state.guarded(pair.ni) {
        return (Drop(DropReason::QueueGuard), p);
    }
    if p.field_in_use {
        p.encapsulated_to = Some(e.announced_by);
    }
    p.mark = Some(pair.mark);
    p.deviated_flag = true;
    let to = state.neighbors[pair.ni as usize];
    (Forward { ni: pair.ni, to }, p)
}

fn normal_forward(state: &RouterState, p: Packet, down: DropReason) -> (ForwardDecision, Packet) {
    let Some(e) = state.fib.entry(p.dst_prefix) else {
        return (ForwardDecision::Drop(DropReason::Unreachable), p);
    };
    if e.next_hop == state.owner {
        return (ForwardDecision::Deliver, p);
    }
    match state.interface(e.next_hop) {
        Some(ni) if state.adjacent_up[ni as usize] => {
            (ForwardDecision::Forward { ni, to: e.next_hop }, p)
        }
        _ => (ForwardDecision::Drop(down), p),
    }
}

/// Outcome of signaling one vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignalOutcome {
    pub mark: FepMark,
    pub routers: Vec<RouterId>,
    pub drs: Vec<RouterId>,
    /// Routers that acknowledged, in the order the ack passed them (RF
    /// first, SR last).
    pub acks: Vec<RouterId>,
    pub confirmed: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SignalLog {
    pub outcomes: Vec<SignalOutcome>,
}

impl SignalLog {
    pub fn all_confirmed(&self) -> bool {
        self.outcomes.iter().all(|o| o.confirmed)
    }

    pub fn outcome(&self, routers: &[RouterId]) -> Option<&SignalOutcome> {
        self.outcomes.iter().find(|o| o.routers == routers)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DataplaneError {
    #[error(transparent)]
    Fib(#[from] FibError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("router {0} has no state")]
    MissingRouter(RouterId),
    #[error("routers {a} and {b} derive the same sr id {sr_id}")]
    DuplicateSrId {
        a: RouterId,
        b: RouterId,
        sr_id: u16,
    },
}

/// Sends every signaled vector of `sr` hop by hop along its routers and
/// back. A vector whose message or ack cannot cross a link is left
/// unconfirmed and the source stops referencing it.
pub fn fep_signal_run(
    t: &Topology,
    sr: RouterId,
    states: &mut BTreeMap<RouterId, RouterState>,
) -> Result<SignalLog, DataplaneError> {
    let vectors: Vec<_> = states
        .get(&sr)
        .ok_or(DataplaneError::MissingRouter(sr))?
        .fib
        .sr_vectors
        .iter()
        .filter(|v| v.level == ProtectionLevel::Sig)
        .cloned()
        .collect();
    let mut log = SignalLog::default();
    for v in vectors {
        let msg = SignaledVector {
            sr,
            drs: v.drs.clone(),
            routers: v.routers.clone(),
        };
        let link_up = |states: &BTreeMap<RouterId, RouterState>, a: RouterId, b: RouterId| {
            states.get(&a).is_some_and(|s| s.is_up(b))
        };
        let mut reached = 1;
        for w in v.routers.windows(2) {
            if !link_up(states, w[0], w[1]) {
                break;
            }
            let st = states
                .get_mut(&w[1])
                .ok_or(DataplaneError::MissingRouter(w[1]))?;
            install_not_sr_mark(t, &mut st.fib, &msg, v.mark)?;
            reached += 1;
        }
        let mut acks = Vec::new();
        let mut confirmed = false;
        if reached == v.routers.len() {
            let rev: Vec<_> = v.routers.iter().rev().copied().collect();
            acks.push(rev[0]);
            confirmed = true;
            for w in rev.windows(2) {
                if !link_up(states, w[0], w[1]) {
                    confirmed = false;
                    break;
                }
                acks.push(w[1]);
            }
        }
        let owner = states.get_mut(&sr).expect("checked above");
        if confirmed {
            if let Some(mv) = owner.fib.sr_vectors.iter_mut().find(|m| m.pair == v.pair) {
                mv.confirmed = true;
            }
        } else {
            log::debug!("vector {:?} of router {sr} unconfirmed", v.routers);
            owner.fib.unreference(v.pair);
        }
        log.outcomes.push(SignalOutcome {
            mark: v.mark,
            routers: v.routers,
            drs: v.drs,
            acks,
            confirmed,
        });
    }
    Ok(log)
}

/// Every router of a topology with its emergency paths computed, marks
/// built and signaling done.
#[derive(Debug, Clone)]
pub struct Deployment {
    pub topology: Topology,
    pub tables: BTreeMap<RouterId, FepTable>,
    pub states: BTreeMap<RouterId, RouterState>,
    pub signal_logs: BTreeMap<RouterId, SignalLog>,
}

impl Deployment {
    pub fn new(t: &Topology, guard: bool) -> Result<Self, DataplaneError> {
        let mut ids: BTreeMap<u16, RouterId> = BTreeMap::new();
        for r in t.routers() {
            let id = sr_id_for(t, r);
            if let Some(&a) = ids.get(&id) {
                return Err(DataplaneError::DuplicateSrId { a, b: r, sr_id: id });
            }
            ids.insert(id, r);
        }
        let calc = FepCalculator::new(t);
        let tables = calc.compute_network();
        let mut states = BTreeMap::new();
        for (&r, table) in &tables {
            let spf = calc.ospf().spf(r).expect("router in topology");
            let mut fib = RouterFib::from_spf(t, spf);
            build_sr_marks(t, table, &mut fib)?;
            states.insert(r, RouterState::new(t, fib, guard));
        }
        let mut signal_logs = BTreeMap::new();
        for r in t.routers() {
            signal_logs.insert(r, fep_signal_run(t, r, &mut states)?);
        }
        Ok(Deployment {
            topology: t.clone(),
            tables,
            states,
            signal_logs,
        })
    }

    /// Tells every router adjacent to `failure` about it and opens its
    /// deviation window.
    pub fn detect(
        &mut self,
        failure: FailureSpec,
        now: Nanos,
        hold: Nanos,
    ) -> Result<(), DataplaneError> {
        for (r, n) in failed_adjacencies(&self.topology, failure)? {
            if let Some(s) = self.states.get_mut(&r) {
                activate_deviation(s, n, now, hold);
            }
        }
        Ok(())
    }
}

/// (router, neighbor) pairs that stop working under `failure`, seen from
/// routers that survive it.
pub fn failed_adjacencies(
    t: &Topology,
    failure: FailureSpec,
) -> Result<BTreeSet<(RouterId, RouterId)>, TopologyError> {
    let cut = t.failed_links(failure)?;
    let dead = match failure {
        FailureSpec::Router(r) => Some(r),
        _ => None,
    };
    let mut out = BTreeSet::new();
    for k in cut {
        let (a, b) = k.endpoints();
        if Some(a) != dead {
            out.insert((a, b));
        }
        if Some(b) != dead {
            out.insert((b, a));
        }
    }
    Ok(out)
}

/// How a walked packet ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceOutcome {
    Delivered(RouterId),
    Dropped(RouterId, DropReason),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PacketTrace {
    pub routers: Vec<RouterId>,
    pub outcome: TraceOutcome,
    /// Mark the packet carried on leaving each router.
    pub marks: Vec<Option<FepMark>>,
    pub final_packet: Packet,
}

/// Walks one packet through the deployment with no queues involved.
/// Packets sent onto a link in `cut` are lost as undetected failures.
pub fn trace_packet(
    d: &Deployment,
    src: RouterId,
    packet: Packet,
    cut: &BTreeSet<LinkKey>,
    now: Nanos,
) -> PacketTrace {
    let mut p = packet;
    let mut at = src;
    let mut routers = vec![src];
    let mut marks = Vec::new();
    loop {
        let state = &d.states[&at];
        let (dec, next) = fep_diffor_forward(state, p, now);
        p = next;
        match dec {
            ForwardDecision::Deliver => {
                return PacketTrace {
                    routers,
                    outcome: TraceOutcome::Delivered(at),
                    marks,
                    final_packet: p,
                }
            }
            ForwardDecision::Drop(r) => {
                return PacketTrace {
                    routers,
                    outcome: TraceOutcome::Dropped(at, r),
                    marks,
                    final_packet: p,
                }
            }
            ForwardDecision::Forward { to, .. } => {
                marks.push(p.mark);
                if cut.contains(&LinkKey::new(at, to)) {
                    let outcome = TraceOutcome::Dropped(at, DropReason::DetectionWindow);
                    return PacketTrace {
                        routers,
                        outcome,
                        marks,
                        final_packet: p,
                    };
                }
                p.hops += 1;
                at = to;
                routers.push(at);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn r(x: u16) -> RouterId {
        RouterId::new(x).unwrap()
    }

    fn rs(xs: &[u16]) -> Vec<RouterId> {
        xs.iter().map(|&x| r(x)).collect()
    }

    const MS: Nanos = 1_000_000;

    fn t2_down_2() -> (Deployment, Packet) {
        let t = fixtures::t2();
        let mut d = Deployment::new(&t, true).unwrap();
        d.detect(FailureSpec::Router(r(2)), 20 * MS, 200 * MS)
            .unwrap();
        let p = Packet::new(0, t.default_prefix(r(3)).unwrap(), 256);
        (d, p)
    }

    #[test]
    fn t2_walkthrough() {
        let (d, p) = t2_down_2();
        let now = 30 * MS;
        let s1 = &d.states[&r(1)];
        let (dec, p) = fep_diffor_forward(s1, p, now);
        assert_eq!(
            dec,
            ForwardDecision::Forward {
                ni: s1.interface(r(4)).unwrap(),
                to: r(4)
            }
        );
        let mark = p.mark.unwrap();
        assert_eq!(mark.sr_id(), 1);
        assert!(p.deviated_flag);

        let s4 = &d.states[&r(4)];
        let (dec, p) = fep_diffor_forward(s4, p, now);
        assert_eq!(
            dec,
            ForwardDecision::Forward {
                ni: s4.interface(r(5)).unwrap(),
                to: r(5)
            }
        );
        assert_eq!(p.mark, Some(mark));

        let (dec, p) = fep_diffor_forward(&d.states[&r(5)], p, now);
        assert!(matches!(dec, ForwardDecision::Forward { to, .. } if to == r(3)));
        assert_eq!(p.mark, Some(mark));

        let (dec, p) = fep_diffor_forward(&d.states[&r(3)], p, now);
        assert_eq!(dec, ForwardDecision::Deliver);
        assert_eq!(p.mark, None);
        assert!(!p.deviated_flag);
    }

    #[test]
    fn trace_matches_walkthrough() {
        let (d, p) = t2_down_2();
        let cut = d.topology.failed_links(FailureSpec::Router(r(2))).unwrap();
        let tr = trace_packet(&d, r(1), p, &cut, 30 * MS);
        assert_eq!(tr.routers, rs(&[1, 4, 5, 3]));
        assert_eq!(tr.outcome, TraceOutcome::Delivered(r(3)));
        assert_eq!(tr.final_packet.mark, None);
    }

    #[test]
    fn second_failure_drops_marked() {
        let (mut d, p) = t2_down_2();
        d.states.get_mut(&r(4)).unwrap().set_link(r(5), false);
        let (_, p) = fep_diffor_forward(&d.states[&r(1)], p, 30 * MS);
        let (dec, _) = fep_diffor_forward(&d.states[&r(4)], p, 30 * MS);
        assert_eq!(dec, ForwardDecision::Drop(DropReason::SecondFailure));
    }

    #[test]
    fn queue_guard_threshold() {
        let (mut d, p) = t2_down_2();
        let s1 = d.states.get_mut(&r(1)).unwrap();
        let ni = s1.interface(r(4)).unwrap() as usize;
        s1.queue_occupancy[ni] = 0.9;
        let (dec, _) = fep_diffor_forward(s1, p.clone(), 30 * MS);
        assert_eq!(dec, ForwardDecision::Drop(DropReason::QueueGuard));
        s1.congestion_guard_enabled = false;
        let (dec, _) = fep_diffor_forward(s1, p, 30 * MS);
        assert!(matches!(dec, ForwardDecision::Forward { .. }));
    }

    #[test]
    fn deviation_window() {
        let t = fixtures::t2();
        let fib = RouterFib::empty(r(1));
        let mut s = RouterState::new(&t, fib, false);
        activate_deviation(&mut s, r(2), 20 * MS, 200 * MS);
        assert!(s.deviating(20 * MS) && s.deviating(219 * MS) && !s.deviating(220 * MS));
        activate_deviation(&mut s, r(4), 100 * MS, 200 * MS);
        assert_eq!(s.deviation_deadline, 300 * MS);
        s.tick(300 * MS);
        assert!(!s.deviation_active && s.recompute_requested);

        let mut z = RouterState::new(&t, RouterFib::empty(r(1)), false);
        activate_deviation(&mut z, r(2), 20 * MS, 0);
        assert!(!z.deviating(20 * MS));
        assert!(!z.is_up(r(2)));
    }

    #[test]
    fn zero_hold_is_plain_ospf() {
        let t = fixtures::t2();
        let mut d = Deployment::new(&t, false).unwrap();
        d.detect(FailureSpec::Router(r(2)), 20 * MS, 0).unwrap();
        let p = Packet::new(0, t.default_prefix(r(3)).unwrap(), 256);
        let (dec, _) = fep_diffor_forward(&d.states[&r(1)], p, 30 * MS);
        assert_eq!(dec, ForwardDecision::Drop(DropReason::Unreachable));
    }

    #[test]
    fn encapsulates_when_field_busy() {
        let (d, mut p) = t2_down_2();
        p.field_in_use = true;
        let cut = d.topology.failed_links(FailureSpec::Router(r(2))).unwrap();
        let (_, first) = fep_diffor_forward(&d.states[&r(1)], p.clone(), 30 * MS);
        assert_eq!(first.encapsulated_to, Some(r(3)));
        let tr = trace_packet(&d, r(1), p, &cut, 30 * MS);
        assert_eq!(tr.outcome, TraceOutcome::Delivered(r(3)));
        assert_eq!(tr.final_packet.encapsulated_to, None);
    }

    #[test]
    fn signaling_on_t2() {
        let t = fixtures::t2();
        let d = Deployment::new(&t, true).unwrap();
        let log = &d.signal_logs[&r(1)];
        let o = log.outcome(&rs(&[1, 4, 5])).unwrap();
        assert!(o.confirmed);
        assert_eq!(o.acks, rs(&[5, 4, 1]));
        assert_eq!(
            d.states[&r(4)].fib.learned_pair(o.mark).unwrap().ni,
            d.states[&r(4)].interface(r(5)).unwrap()
        );
        assert!(d.states[&r(5)].fib.terminates(o.mark));
        // ECMP/LFA sequences are never signaled.
        assert!(log.outcomes.iter().all(|o| o.routers.len() > 2));
    }

    #[test]
    fn signaling_with_link_down() {
        let t = fixtures::t2();
        let mut d = Deployment::new(&t, true).unwrap();
        // Fresh source state, then signal with 4-5 down.
        let spf = crate::spf::spf(&t, r(1)).unwrap();
        let mut fib = RouterFib::from_spf(&t, &spf);
        build_sr_marks(&t, &d.tables[&r(1)], &mut fib).unwrap();
        d.states.insert(r(1), RouterState::new(&t, fib, true));
        for (a, b) in [(4, 5), (5, 4)] {
            d.states.get_mut(&r(a)).unwrap().set_link(r(b), false);
        }
        let log = fep_signal_run(&t, r(1), &mut d.states).unwrap();
        let o = log.outcome(&rs(&[1, 4, 5])).unwrap();
        assert!(!o.confirmed);
        assert!(o.acks.is_empty());

        d.detect(FailureSpec::Router(r(2)), 20 * MS, 200 * MS)
            .unwrap();
        let p = Packet::new(0, t.default_prefix(r(3)).unwrap(), 256);
        let (dec, _) = fep_diffor_forward(&d.states[&r(1)], p, 30 * MS);
        assert_eq!(dec, ForwardDecision::Drop(DropReason::Unreachable));
    }

    #[test]
    fn hop_budget() {
        let (d, mut p) = t2_down_2();
        p.hops = d.states[&r(1)].hop_budget;
        let (dec, _) = fep_diffor_forward(&d.states[&r(1)], p, 0);
        assert_eq!(dec, ForwardDecision::Drop(DropReason::HopBudget));
    }
}
