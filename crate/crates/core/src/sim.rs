//! Discrete-event simulation of constant-bit-rate flows through a single
//! failure, its detection and the routing convergence that follows.
//!
//! Time is integer nanoseconds. Each directed link is a FIFO with a
//! drop-tail buffer; a packet's departure time is fixed when it is queued, so
//! the only events are packet arrivals, flow emissions and control changes.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataplane::{
    activate_deviation, failed_adjacencies, fep_diffor_forward, DataplaneError, Deployment,
    DropReason, ForwardDecision, Nanos, Packet, RouterState,
};
use crate::fib_ext::FepMark;
use crate::spf::OspfTable;
use crate::topology::{
    load_topology, FailureSpec, LinkKey, RouterId, Topology, TopologyError, MAX_ROUTER_ID,
};

pub const MS: Nanos = 1_000_000;
pub const DEFAULT_DETECTION: Nanos = 20 * MS;
pub const DEFAULT_CONVERGENCE: Nanos = 200 * MS;
pub const DEFAULT_SLACK: Nanos = 800 * MS;
pub const DEFAULT_PROPAGATION: Nanos = MS;
pub const DEFAULT_QUEUE_CAPACITY: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mode {
    OspfOnly,
    FepS,
}

impl Mode {
    pub const ALL: [Mode; 2] = [Mode::OspfOnly, Mode::FepS];
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::OspfOnly => "ospf",
            Mode::FepS => "feps",
        })
    }
}

impl FromStr for Mode {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self, SimError> {
        match s {
            "ospf" | "ospf_only" => Ok(Mode::OspfOnly),
            "feps" | "fep_s" => Ok(Mode::FepS),
            _ => Err(SimError::Scenario {
                line: 0,
                msg: format!("unknown mode `{s}`"),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Flow {
    pub id: u32,
    pub src: RouterId,
    pub dst: RouterId,
    pub rate_bps: u64,
    pub packet_size: u32,
    pub start: Nanos,
    pub stop: Nanos,
    /// Marking must encapsulate because the header field is taken.
    pub field_in_use: bool,
}

impl Flow {
    /// Emission time of the `k`-th packet.
    fn emit_time(&self, k: u64) -> Nanos {
        let bits = self.packet_size as u128 * 8;
        self.start + (k as u128 * bits * 1_000_000_000 / self.rate_bps as u128) as Nanos
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub detection_delay: Nanos,
    pub convergence_time: Nanos,
    /// Defaults to the convergence time.
    pub deviation_hold: Option<Nanos>,
    pub mode: Mode,
    pub congestion_guard: bool,
    pub queue_capacity: usize,
    /// Defaults to detection + convergence + 800 ms.
    pub measurement_window: Option<Nanos>,
    pub propagation_delay: Nanos,
    pub encap_overhead_bytes: u32,
    pub seed: u64,
    /// Keep trace rows in memory (the hash is always computed).
    pub keep_trace: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            detection_delay: DEFAULT_DETECTION,
            convergence_time: DEFAULT_CONVERGENCE,
            deviation_hold: None,
            mode: Mode::FepS,
            congestion_guard: true,
            queue_capacity: DEFAULT_QUEUE_CAPACITY,
            measurement_window: None,
            propagation_delay: DEFAULT_PROPAGATION,
            encap_overhead_bytes: 0,
            seed: 0,
            keep_trace: false,
        }
    }
}

impl SimConfig {
    pub fn window(&self) -> Nanos {
        self.measurement_window
            .unwrap_or(self.detection_delay + self.convergence_time + DEFAULT_SLACK)
    }

    pub fn hold(&self) -> Nanos {
        self.deviation_hold.unwrap_or(self.convergence_time)
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("scenario line {line}: {msg}")]
    Scenario { line: usize, msg: String },
    #[error("flow {flow}: {dst} unreachable from {src}")]
    Unroutable {
        flow: u32,
        src: RouterId,
        dst: RouterId,
    },
    #[error("flow {flow}: {msg}")]
    BadFlow { flow: u32, msg: String },
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Dataplane(#[from] DataplaneError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Counters {
    pub sent: u64,
    pub delivered: u64,
    pub dropped: BTreeMap<DropReason, u64>,
}

impl Counters {
    pub fn dropped_total(&self) -> u64 {
        self.dropped.values().sum()
    }

    pub fn loss_percent(&self) -> f64 {
        if self.sent == 0 {
            0.0
        } else {
            self.dropped_total() as f64 * 100.0 / self.sent as f64
        }
    }

    fn drop(&mut self, r: DropReason) {
        *self.dropped.entry(r).or_default() += 1;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowLoss {
    pub flow: u32,
    pub src: RouterId,
    pub dst: RouterId,
    /// Packets sent inside the measurement window.
    pub window: Counters,
    /// Every packet of the run.
    pub total: Counters,
}

impl FlowLoss {
    pub fn loss_percent(&self) -> f64 {
        self.window.loss_percent()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub flows: Vec<FlowLoss>,
    pub warnings: Vec<String>,
    /// Largest queue length seen on any link, in packets.
    pub max_queue: usize,
    /// Marked packets whose mark changed in flight.
    pub mark_rewrites: u64,
    /// Packets delivered still carrying a mark or deviation flag.
    pub dirty_deliveries: u64,
    pub window_start: Nanos,
    pub window: Nanos,
}

impl LossReport {
    pub fn flow(&self, src: RouterId, dst: RouterId) -> Option<&FlowLoss> {
        self.flows.iter().find(|f| f.src == src && f.dst == dst)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRow {
    pub time_ns: Nanos,
    pub event: &'static str,
    pub router: Option<RouterId>,
    pub flow: Option<u32>,
    pub reason: String,
}

impl TraceRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.time_ns,
            self.event,
            self.router.map(|r| r.to_string()).unwrap_or_default(),
            self.flow.map(|f| f.to_string()).unwrap_or_default(),
            self.reason
        )
    }
}

pub const TRACE_CSV_HEADER: &str = "time_ns,event,router,flow,reason";

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub report: LossReport,
    pub trace: Vec<TraceRow>,
    /// SHA-256 over the trace CSV rows.
    pub trace_hash: String,
}

#[derive(Debug)]
enum Kind {
    Fail,
    Detect,
    Converge(RouterId),
    DeviationEnd(RouterId),
    Emit {
        flow: usize,
        k: u64,
    },
    /// The oldest packet in flight on a link reaches its far end.
    LinkHead(usize),
}

/// A packet on the wire. Arrivals on one link are in send order, so only
/// the head of each link sits in the event heap.
struct InFlight {
    arrive: Nanos,
    seq: u64,
    pkt: Packet,
    counted: bool,
    first_mark: Option<FepMark>,
}

impl Kind {
    /// Control changes run before packets scheduled for the same instant.
    fn class(&self) -> u8 {
        match self {
            Kind::Fail | Kind::Detect | Kind::Converge(_) | Kind::DeviationEnd(_) => 0,
            Kind::Emit { .. } | Kind::LinkHead(_) => 1,
        }
    }
}

struct Event {
    time: Nanos,
    class: u8,
    seq: u64,
    kind: Kind,
}

impl PartialEq for Event {
    fn eq(&self, o: &Self) -> bool {
        self.key() == o.key()
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Event {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.key().cmp(&o.key())
    }
}
impl Event {
    fn key(&self) -> (Nanos, u8, u64) {
        (self.time, self.class, self.seq)
    }
}

struct LinkQueue {
    to: RouterId,
    key: LinkKey,
    capacity_bps: u64,
    /// Completion times of queued packets, oldest first.
    done: VecDeque<Nanos>,
    busy_until: Nanos,
    in_flight: VecDeque<InFlight>,
}

impl LinkQueue {
    fn drain(&mut self, now: Nanos) {
        while self.done.front().is_some_and(|&d| d <= now) {
            self.done.pop_front();
        }
    }

    fn tx_time(&self, bytes: u32) -> Nanos {
        let bits = bytes as u128 * 8 * 1_000_000_000;
        bits.div_ceil(self.capacity_bps as u128) as Nanos
    }
}

struct Sim<'a> {
    topo: &'a Topology,
    cfg: &'a SimConfig,
    flows: &'a [Flow],
    failure: Option<(FailureSpec, Nanos)>,
    /// Indexed by router id.
    states: Vec<Option<RouterState>>,
    /// Per router: link queue index by interface.
    ifaces: Vec<Vec<usize>>,
    links: Vec<LinkQueue>,
    heap: BinaryHeap<Reverse<Event>>,
    seq: u64,
    cut: BTreeSet<LinkKey>,
    dead_router: Option<RouterId>,
    cut_at: Nanos,
    failed_now: bool,
    degraded_ospf: Option<OspfTable>,
    window: (Nanos, Nanos),
    window_counters: Vec<Counters>,
    total_counters: Vec<Counters>,
    max_queue: usize,
    mark_rewrites: u64,
    dirty: u64,
    hasher: Sha256,
    trace: Vec<TraceRow>,
}

impl<'a> Sim<'a> {
    fn push(&mut self, time: Nanos, kind: Kind) {
        self.seq += 1;
        let ev = Event {
            time,
            class: kind.class(),
            seq: self.seq,
            kind,
        };
        self.heap.push(Reverse(ev));
    }

    fn record(&mut self, row: TraceRow) {
        let line = row.csv();
        self.hasher.update(line.as_bytes());
        self.hasher.update(b"\n");
        if self.cfg.keep_trace {
            self.trace.push(row);
        }
    }

    fn drop_packet(&mut self, now: Nanos, at: RouterId, flow: u32, counted: bool, r: DropReason) {
        self.total_counters[flow as usize].drop(r);
        if counted {
            self.window_counters[flow as usize].drop(r);
        }
        self.record(TraceRow {
            time_ns: now,
            event: "drop",
            router: Some(at),
            flow: Some(self.flows[flow as usize].id),
            reason: r.as_str().to_string(),
        });
    }

    fn run(&mut self) {
        while let Some(Reverse(ev)) = self.heap.pop() {
            let now = ev.time;
            match ev.kind {
                Kind::Fail => self.on_fail(now),
                Kind::Detect => self.on_detect(now),
                Kind::Converge(r) => self.on_converge(now, r),
                Kind::DeviationEnd(r) => {
                    if let Some(s) = self.states[r.index()].as_mut() {
                        s.tick(now);
                        if s.recompute_requested {
                            s.recompute_requested = false;
                            self.record(TraceRow {
                                time_ns: now,
                                event: "deviation_end",
                                router: Some(r),
                                flow: None,
                                reason: String::new(),
                            });
                        }
                    }
                }
                Kind::Emit { flow, k } => self.on_emit(now, flow, k),
                Kind::LinkHead(li) => {
                    let q = &mut self.links[li];
                    let f = q
                        .in_flight
                        .pop_front()
                        .expect("head event implies a packet");
                    let at = q.to;
                    if let Some(next) = q.in_flight.front() {
                        let (time, seq) = (next.arrive, next.seq);
                        self.heap.push(Reverse(Event {
                            time,
                            class: 1,
                            seq,
                            kind: Kind::LinkHead(li),
                        }));
                    }
                    self.on_arrive(now, at, Some(li), f.pkt, f.counted, f.first_mark);
                }
            }
        }
    }

    fn on_fail(&mut self, now: Nanos) {
        let (f, _) = self.failure.expect("fail event implies failure");
        self.failed_now = true;
        self.cut_at = now;
        self.record(TraceRow {
            time_ns: now,
            event: "fail",
            router: None,
            flow: None,
            reason: f.to_string(),
        });
    }

    fn on_detect(&mut self, now: Nanos) {
        let (f, _) = self.failure.expect("detect event implies failure");
        let hold = match self.cfg.mode {
            Mode::FepS => self.cfg.hold(),
            Mode::OspfOnly => 0,
        };
        let adj = failed_adjacencies(self.topo, f).expect("failure validated");
        let mut routers = BTreeSet::new();
        for (r, n) in adj {
            if let Some(s) = self.states[r.index()].as_mut() {
                activate_deviation(s, n, now, hold);
                routers.insert(r);
            }
        }
        for r in routers {
            self.record(TraceRow {
                time_ns: now,
                event: "detect",
                router: Some(r),
                flow: None,
                reason: String::new(),
            });
            if hold > 0 {
                self.push(now + hold, Kind::DeviationEnd(r));
            }
        }
    }

    fn on_converge(&mut self, now: Nanos, r: RouterId) {
        let ospf = self
            .degraded_ospf
            .as_ref()
            .expect("converge implies failure");
        if let (Some(s), Ok(res)) = (self.states[r.index()].as_mut(), ospf.spf(r)) {
            s.fib.reroute(res);
        }
        self.record(TraceRow {
            time_ns: now,
            event: "converge",
            router: Some(r),
            flow: None,
            reason: String::new(),
        });
    }

    fn on_emit(&mut self, now: Nanos, fi: usize, k: u64) {
        let flow = &self.flows[fi];
        let next = flow.emit_time(k + 1);
        let (src, dst, size, field_in_use) =
            (flow.src, flow.dst, flow.packet_size, flow.field_in_use);
        if next < flow.stop {
            self.push(next, Kind::Emit { flow: fi, k: k + 1 });
        }
        let counted = now >= self.window.0 && now < self.window.1;
        self.total_counters[fi].sent += 1;
        if counted {
            self.window_counters[fi].sent += 1;
        }
        let prefix = self
            .topo
            .default_prefix(dst)
            .expect("flow destination exists");
        let mut pkt = Packet::new(fi as u32, prefix, size);
        pkt.field_in_use = field_in_use;
        if self.dead_router == Some(src) && self.failed_now {
            self.drop_packet(now, src, fi as u32, counted, DropReason::Unreachable);
            return;
        }
        self.on_arrive(now, src, None, pkt, counted, None);
    }

    fn on_arrive(
        &mut self,
        now: Nanos,
        at: RouterId,
        link: Option<usize>,
        pkt: Packet,
        counted: bool,
        first_mark: Option<FepMark>,
    ) {
        let flow = pkt.flow;
        if let Some(li) = link {
            // Lost on the wire or in a dead router.
            let lost = self.failed_now
                && now >= self.cut_at
                && (self.cut.contains(&self.links[li].key) || self.dead_router == Some(at));
            if lost {
                let from = self.links[li].key;
                let (a, b) = from.endpoints();
                let sender = if b == at { a } else { b };
                self.drop_packet(now, sender, flow, counted, DropReason::DetectionWindow);
                return;
            }
        }

        let cap = self.cfg.queue_capacity as f64;
        let state = self.states[at.index()].as_mut().expect("router state");
        for (ni, &li) in self.ifaces[at.index()].iter().enumerate() {
            let q = &mut self.links[li];
            q.drain(now);
            state.queue_occupancy[ni] = q.done.len() as f64 / cap;
        }
        let (dec, mut pkt) = fep_diffor_forward(state, pkt, now);

        if let (Some(a), Some(b)) = (first_mark, pkt.mark) {
            if a != b {
                self.mark_rewrites += 1;
            }
        }
        let first_mark = first_mark.or(pkt.mark);
        match dec {
            ForwardDecision::Deliver => {
                if pkt.mark.is_some() || pkt.deviated_flag {
                    self.dirty += 1;
                }
                self.total_counters[flow as usize].delivered += 1;
                if counted {
                    self.window_counters[flow as usize].delivered += 1;
                }
            }
            ForwardDecision::Drop(r) => self.drop_packet(now, at, flow, counted, r),
            ForwardDecision::Forward { ni, to } => {
                let li = self.ifaces[at.index()][ni as usize];
                let overhead = if pkt.encapsulated_to.is_some() {
                    self.cfg.encap_overhead_bytes
                } else {
                    0
                };
                let q = &mut self.links[li];
                if q.done.len() >= self.cfg.queue_capacity {
                    self.drop_packet(now, at, flow, counted, DropReason::QueueOverflow);
                    return;
                }
                let start = now.max(q.busy_until);
                let done = start + q.tx_time(pkt.size_bytes + overhead);
                q.busy_until = done;
                q.done.push_back(done);
                let len = q.done.len();
                debug_assert_eq!(q.to, to);
                self.max_queue = self.max_queue.max(len);
                pkt.hops += 1;
                let arrive = done + self.cfg.propagation_delay;
                self.seq += 1;
                let seq = self.seq;
                let q = &mut self.links[li];
                if q.in_flight.is_empty() {
                    self.heap.push(Reverse(Event {
                        time: arrive,
                        class: 1,
                        seq,
                        kind: Kind::LinkHead(li),
                    }));
                }
                q.in_flight.push_back(InFlight {
                    arrive,
                    seq,
                    pkt,
                    counted,
                    first_mark,
                });
            }
        }
    }
}

/// Times at which each surviving router installs post-failure routes,
/// relative to the detection instant.
fn convergence_offsets(
    t: &Topology,
    failure: FailureSpec,
    cfg: &SimConfig,
) -> Result<BTreeMap<RouterId, Nanos>, SimError> {
    let adj: BTreeSet<RouterId> = failed_adjacencies(t, failure)?
        .into_iter()
        .map(|(r, _)| r)
        .collect();
    let dead = match failure {
        FailureSpec::Router(r) => Some(r),
        _ => None,
    };
    let conv = cfg.convergence_time;
    let mut out = BTreeMap::new();
    match cfg.mode {
        Mode::OspfOnly => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            for r in t.routers() {
                if Some(r) == dead {
                    continue;
                }
                let off = if adj.contains(&r) {
                    conv
                } else {
                    rng.gen_range(0..=conv)
                };
                out.insert(r, off);
            }
        }
        Mode::FepS => {
            // Far-first: hop distance from the routers next to the failure.
            let degraded = t.remove_component(failure)?;
            let mut dist: BTreeMap<RouterId, u32> = adj.iter().map(|&r| (r, 0)).collect();
            let mut frontier: VecDeque<RouterId> = adj.iter().copied().collect();
            while let Some(u) = frontier.pop_front() {
                let du = dist[&u];
                for v in degraded.neighbors(u) {
                    dist.entry(v).or_insert_with(|| {
                        frontier.push_back(v);
                        du + 1
                    });
                }
            }
            let dmax = dist.values().copied().max().unwrap_or(0) as u64;
            for r in t.routers() {
                if Some(r) == dead {
                    continue;
                }
                let off = match dist.get(&r) {
                    Some(0) | None => conv,
                    Some(&d) => conv * (dmax + 1 - d as u64) / (dmax + 1),
                };
                out.insert(r, off);
            }
        }
    }
    Ok(out)
}

/// Runs one scenario to completion.
pub fn run_scenario(
    t: &Topology,
    flows: &[Flow],
    failure: Option<(FailureSpec, Nanos)>,
    cfg: &SimConfig,
) -> Result<SimOutput, SimError> {
    let mut warnings = Vec::new();
    let base = spf_table(t);
    let mut load: BTreeMap<(RouterId, RouterId), u64> = BTreeMap::new();
    for f in flows {
        if f.rate_bps == 0 || f.packet_size == 0 {
            return Err(SimError::BadFlow {
                flow: f.id,
                msg: "rate and packet size must be positive".into(),
            });
        }
        if !t.contains(f.src) || !t.contains(f.dst) {
            return Err(SimError::Unroutable {
                flow: f.id,
                src: f.src,
                dst: f.dst,
            });
        }
        let path = base.path(f.src, f.dst).map_err(|_| SimError::Unroutable {
            flow: f.id,
            src: f.src,
            dst: f.dst,
        })?;
        for (a, b) in path.links() {
            *load.entry((a, b)).or_default() += f.rate_bps;
        }
    }
    for ((a, b), bps) in &load {
        let cap = t.link(*a, *b).expect("path link").capacity;
        if bps * 2 > cap {
            let w = format!("link {a}->{b} carries {bps} bps, above half its {cap} bps capacity");
            log::warn!("{w}");
            warnings.push(w);
        }
    }
    if let Some((f, _)) = failure {
        t.failed_links(f)?;
    }

    let deployment = Deployment::new(t, cfg.congestion_guard)?;
    let mut states: Vec<Option<RouterState>> = vec![None; MAX_ROUTER_ID as usize + 1];
    for (r, s) in deployment.states {
        states[r.index()] = Some(s);
    }
    let mut links = Vec::new();
    let mut ifaces = vec![Vec::new(); MAX_ROUTER_ID as usize + 1];
    for r in t.routers() {
        let mut v = Vec::new();
        for n in t.neighbors(r) {
            let l = t.link(r, n).expect("neighbor link");
            v.push(links.len());
            links.push(LinkQueue {
                to: n,
                key: LinkKey::new(r, n),
                capacity_bps: l.capacity,
                done: VecDeque::new(),
                busy_until: 0,
                in_flight: VecDeque::new(),
            });
        }
        ifaces[r.index()] = v;
    }

    let window_start = failure.map(|(_, at)| at).unwrap_or(0);
    let window = cfg.window();
    let mut sim = Sim {
        topo: t,
        cfg,
        flows,
        failure,
        states,
        ifaces,
        links,
        heap: BinaryHeap::new(),
        seq: 0,
        cut: BTreeSet::new(),
        dead_router: None,
        cut_at: Nanos::MAX,
        failed_now: false,
        degraded_ospf: None,
        window: (window_start, window_start + window),
        window_counters: vec![Counters::default(); flows.len()],
        total_counters: vec![Counters::default(); flows.len()],
        max_queue: 0,
        mark_rewrites: 0,
        dirty: 0,
        hasher: Sha256::new(),
        trace: Vec::new(),
    };

    if let Some((f, at)) = failure {
        sim.cut = t.failed_links(f)?;
        sim.dead_router = match f {
            FailureSpec::Router(r) => Some(r),
            _ => None,
        };
        let degraded = t.remove_component(f)?;
        sim.degraded_ospf = Some(spf_table(&degraded));
        sim.push(at, Kind::Fail);
        let detect_at = at + cfg.detection_delay;
        sim.push(detect_at, Kind::Detect);
        for (r, off) in convergence_offsets(t, f, cfg)? {
            sim.push(detect_at + off, Kind::Converge(r));
        }
    }
    for (i, f) in flows.iter().enumerate() {
        if f.start < f.stop {
            sim.push(f.start, Kind::Emit { flow: i, k: 0 });
        }
    }
    sim.run();

    let report = LossReport {
        flows: flows
            .iter()
            .enumerate()
            .map(|(i, f)| FlowLoss {
                flow: f.id,
                src: f.src,
                dst: f.dst,
                window: sim.window_counters[i].clone(),
                total: sim.total_counters[i].clone(),
            })
            .collect(),
        warnings,
        max_queue: sim.max_queue,
        mark_rewrites: sim.mark_rewrites,
        dirty_deliveries: sim.dirty,
        window_start,
        window,
    };
    Ok(SimOutput {
        report,
        trace: sim.trace,
        trace_hash: hex::encode(sim.hasher.finalize()),
    })
}

fn spf_table(t: &Topology) -> OspfTable {
    OspfTable::new(t)
}

/// One loss figure of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub flow: u32,
    pub src: RouterId,
    pub dst: RouterId,
    pub failure: FailureSpec,
    pub mode: Mode,
    pub loss: Counters,
}

impl SweepRow {
    pub fn loss_percent(&self) -> f64 {
        self.loss.loss_percent()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Cells that failed to run.
    pub errors: Vec<(FailureSpec, Mode, String)>,
}

/// Every failure under every mode; rows ordered by failure, mode, flow.
/// `jobs` caps the worker threads (0 lets the pool decide).
pub fn sweep(
    t: &Topology,
    flows: &[Flow],
    failures: &[(FailureSpec, Nanos)],
    modes: &[Mode],
    cfg: &SimConfig,
    jobs: usize,
) -> SweepResult {
    let cells: Vec<_> = failures
        .iter()
        .flat_map(|&f| modes.iter().map(move |&m| (f, m)))
        .collect();
    let run = |&(f, m): &((FailureSpec, Nanos), Mode)| {
        let c = SimConfig {
            mode: m,
            keep_trace: false,
            ..cfg.clone()
        };
        (f.0, m, run_scenario(t, flows, Some(f), &c))
    };
    let results: Vec<_> = match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(|| cells.par_iter().map(run).collect()),
        Err(_) => cells.iter().map(run).collect(),
    };
    let mut out = SweepResult::default();
    for (f, m, res) in results {
        match res {
            Ok(o) => out
                .rows
                .extend(o.report.flows.into_iter().map(|fl| SweepRow {
                    flow: fl.flow,
                    src: fl.src,
                    dst: fl.dst,
                    failure: f,
                    mode: m,
                    loss: fl.window,
                })),
            Err(e) => out.errors.push((f, m, e.to_string())),
        }
    }
    out
}

/// A parsed scenario file.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Topology path as written in the file.
    pub topology_ref: String,
    pub flows: Vec<Flow>,
    pub failures: Vec<(FailureSpec, Nanos)>,
    pub config: SimConfig,
}

fn ms_to_ns(line: usize, s: &str) -> Result<Nanos, SimError> {
    let v: f64 = s.parse().map_err(|_| SimError::Scenario {
        line,
        msg: format!("bad time `{s}` (milliseconds expected)"),
    })?;
    if v < 0.0 || !v.is_finite() {
        return Err(SimError::Scenario {
            line,
            msg: format!("bad time `{s}`"),
        });
    }
    Ok((v * MS as f64).round() as Nanos)
}

/// Parses scenario text. The topology is not loaded; see [`load_scenario`].
pub fn parse_scenario(text: &str) -> Result<Scenario, SimError> {
    let mut topology_ref = None;
    let mut flows = Vec::new();
    let mut failures = Vec::new();
    let mut cfg = SimConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let w: Vec<&str> = body.split_whitespace().collect();
        let err = |msg: String| SimError::Scenario { line, msg };
        let num = |s: &str| -> Result<u64, SimError> {
            s.parse().map_err(|_| err(format!("bad number `{s}`")))
        };
        let router = |s: &str| -> Result<RouterId, SimError> {
            let v: u16 = s.parse().map_err(|_| err(format!("bad router `{s}`")))?;
            RouterId::new(v).map_err(|e| err(e.to_string()))
        };
        match w[0] {
            "topology" if w.len() == 2 => topology_ref = Some(w[1].to_string()),
            "flow" => {
                let shape_ok = (w.len() == 11 || w.len() == 12)
                    && w[3] == "rate"
                    && w[5] == "size"
                    && w[7] == "start"
                    && w[9] == "stop";
                if !shape_ok {
                    return Err(err(
                        "expected `flow <src> <dst> rate <bps> size <bytes> start <ms> stop <ms>`"
                            .into(),
                    ));
                }
                let field_in_use = match w.get(11) {
                    None => false,
                    Some(&"fieldinuse") => true,
                    Some(x) => return Err(err(format!("unknown flow option `{x}`"))),
                };
                let size = num(w[6])?;
                flows.push(Flow {
                    id: flows.len() as u32,
                    src: router(w[1])?,
                    dst: router(w[2])?,
                    rate_bps: num(w[4])?,
                    packet_size: u32::try_from(size).map_err(|_| err("packet too large".into()))?,
                    start: ms_to_ns(line, w[8])?,
                    stop: ms_to_ns(line, w[10])?,
                    field_in_use,
                });
            }
            "fail" if w.len() == 5 && w[3] == "at" => {
                let spec: FailureSpec = format!("{} {}", w[1], w[2])
                    .parse()
                    .map_err(|e: TopologyError| err(e.to_string()))?;
                failures.push((spec, ms_to_ns(line, w[4])?));
            }
            "detection" if w.len() == 2 => cfg.detection_delay = ms_to_ns(line, w[1])?,
            "convergence" if w.len() == 2 => cfg.convergence_time = ms_to_ns(line, w[1])?,
            "hold" if w.len() == 2 => cfg.deviation_hold = Some(ms_to_ns(line, w[1])?),
            "window" if w.len() == 2 => cfg.measurement_window = Some(ms_to_ns(line, w[1])?),
            "propagation" if w.len() == 2 => cfg.propagation_delay = ms_to_ns(line, w[1])?,
            "queue" if w.len() == 2 => cfg.queue_capacity = num(w[1])? as usize,
            "encap_overhead" if w.len() == 2 => cfg.encap_overhead_bytes = num(w[1])? as u32,
            "seed" if w.len() == 2 => cfg.seed = num(w[1])?,
            "mode" if w.len() == 2 => {
                cfg.mode = w[1]
                    .parse()
                    .map_err(|_| err(format!("unknown mode `{}`", w[1])))?
            }
            "guard" if w.len() == 2 => {
                cfg.congestion_guard = match w[1] {
                    "on" => true,
                    "off" => false,
                    x => return Err(err(format!("guard must be on or off, got `{x}`"))),
                }
            }
            _ => return Err(err(format!("unrecognized line `{body}`"))),
        }
    }
    let topology_ref = topology_ref.ok_or(SimError::Scenario {
        line: 0,
        msg: "missing `topology` line".into(),
    })?;
    Ok(Scenario {
        topology_ref,
        flows,
        failures,
        config: cfg,
    })
}

/// Reads a scenario file and the topology it names (relative paths resolve
/// against the scenario's directory).
pub fn load_scenario(path: &Path) -> Result<(Scenario, Topology), SimError> {
    let io = |p: &Path, e| SimError::Io {
        path: p.to_path_buf(),
        source: e,
    };
    let text = std::fs::read_to_string(path).map_err(|e| io(path, e))?;
    let sc = parse_scenario(&text)?;
    let tp = path
        .parent()
        .unwrap_or(Path::new("."))
        .join(&sc.topology_ref);
    let ttext = std::fs::read_to_string(&tp).map_err(|e| io(&tp, e))?;
    let t = load_topology(&ttext)?;
    for f in &sc.flows {
        if !t.contains(f.src) || !t.contains(f.dst) {
            return Err(SimError::Unroutable {
                flow: f.id,
                src: f.src,
                dst: f.dst,
            });
        }
    }
    Ok((sc, t))
}

/// Draws `n` seeds from `seed`; used to stagger runs reproducibly.
pub fn derive_seeds(seed: u64, n: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn r(x: u16) -> RouterId {
        RouterId::new(x).unwrap()
    }

    fn flow(id: u32, s: u16, d: u16, rate: u64, stop_ms: u64) -> Flow {
        Flow {
            id,
            src: r(s),
            dst: r(d),
            rate_bps: rate,
            packet_size: 256,
            start: 0,
            stop: stop_ms * MS,
            field_in_use: false,
        }
    }

    fn conserved(rep: &LossReport) {
        for f in &rep.flows {
            assert_eq!(f.total.sent, f.total.delivered + f.total.dropped_total());
            assert_eq!(f.window.sent, f.window.delivered + f.window.dropped_total());
        }
    }

    #[test]
    fn emission_spacing() {
        let f = flow(0, 1, 2, 1_600_000_000, 10);
        assert_eq!(f.emit_time(1), 1280);
        assert_eq!(f.emit_time(1000), 1_280_000);
    }

    #[test]
    fn no_failure_no_loss() {
        let t = fixtures::t2();
        let flows = vec![
            flow(0, 1, 3, 100_000_000, 50),
            flow(1, 3, 1, 100_000_000, 50),
        ];
        let out = run_scenario(&t, &flows, None, &SimConfig::default()).unwrap();
        for f in &out.report.flows {
            assert!(f.total.sent > 0);
            assert_eq!(f.total.dropped_total(), 0);
            assert_eq!(f.loss_percent(), 0.0);
        }
        conserved(&out.report);
    }

    fn t2_run(mode: Mode, seed: u64) -> SimOutput {
        let t = fixtures::t2();
        let flows = vec![flow(0, 1, 3, 100_000_000, 400)];
        let cfg = SimConfig {
            mode,
            seed,
            measurement_window: Some(380 * MS),
            keep_trace: true,
            ..SimConfig::default()
        };
        run_scenario(&t, &flows, Some((FailureSpec::Router(r(2)), 10 * MS)), &cfg).unwrap()
    }

    #[test]
    fn feps_beats_ospf_on_t2() {
        let fe = t2_run(Mode::FepS, 0);
        let os = t2_run(Mode::OspfOnly, 0);
        conserved(&fe.report);
        conserved(&os.report);
        let lf = fe.report.flows[0].loss_percent();
        let lo = os.report.flows[0].loss_percent();
        assert!(lf < lo / 5.0, "feps {lf} ospf {lo}");
        // Only the undetected 20 ms are lost under emergency paths.
        assert!((lf - 20.0 / 380.0 * 100.0).abs() < 1.0, "{lf}");
        assert_eq!(fe.report.mark_rewrites, 0);
        assert_eq!(fe.report.dirty_deliveries, 0);
        assert!(fe.trace.iter().any(|row| row.event == "converge"));
    }

    #[test]
    fn deterministic_trace() {
        let a = t2_run(Mode::OspfOnly, 7);
        let b = t2_run(Mode::OspfOnly, 7);
        assert_eq!(a.trace_hash, b.trace_hash);
        assert_eq!(a.report, b.report);
        let c = t2_run(Mode::OspfOnly, 8);
        assert_ne!(a.trace_hash, c.trace_hash);
    }

    #[test]
    fn parse_scenario_file() {
        let text = "topology g2.topo\nflow 2 18 rate 1600000000 size 256 start 0 stop 1030\n\
                    fail link 6-8 at 10\nfail router 6 at 10.5\ndetection 20\nconvergence 200\n\
                    window 1020\nguard off\nmode ospf\nseed 3\n";
        let sc = parse_scenario(text).unwrap();
        assert_eq!(sc.topology_ref, "g2.topo");
        assert_eq!(sc.flows.len(), 1);
        assert_eq!(sc.flows[0].stop, 1030 * MS);
        assert_eq!(sc.failures[0], (FailureSpec::link(r(6), r(8)), 10 * MS));
        assert_eq!(sc.failures[1], (FailureSpec::Router(r(6)), 10_500_000));
        assert_eq!(sc.config.window(), 1020 * MS);
        assert!(!sc.config.congestion_guard);
        assert_eq!(sc.config.mode, Mode::OspfOnly);
        assert_eq!(sc.config.seed, 3);

        let e = parse_scenario("topology x\nflow 1 2 rate\n").unwrap_err();
        assert!(e.to_string().starts_with("scenario line 2"), "{e}");
        assert!(parse_scenario("flow 1 2 rate 1 size 1 start 0 stop 1\n").is_err());
    }

    #[test]
    fn load_fixture_scenario() {
        let (sc, t) = load_scenario(&Path::new(fixtures::DIR).join("g2.scenario")).unwrap();
        assert_eq!(t.router_count(), 22);
        assert_eq!(sc.flows.len(), 6);
        assert_eq!(sc.failures.len(), 3);
    }

    #[test]
    fn sweep_shape() {
        let t = fixtures::t2();
        let flows = vec![flow(0, 1, 3, 50_000_000, 60), flow(1, 3, 1, 50_000_000, 60)];
        let fails = vec![
            (FailureSpec::Router(r(2)), 5 * MS),
            (FailureSpec::link(r(1), r(2)), 5 * MS),
        ];
        let cfg = SimConfig {
            detection_delay: 5 * MS,
            convergence_time: 20 * MS,
            ..SimConfig::default()
        };
        let res = sweep(&t, &flows, &fails, &Mode::ALL, &cfg, 2);
        assert_eq!(res.rows.len(), 2 * 2 * 2);
        assert!(res.errors.is_empty());
        assert!(sweep(&t, &flows, &[], &Mode::ALL, &cfg, 1).rows.is_empty());
    }

    #[test]
    fn convergence_order_far_first() {
        let t = fixtures::g2();
        let f = FailureSpec::link(r(6), r(8));
        let offs = convergence_offsets(&t, f, &SimConfig::default()).unwrap();
        assert_eq!(offs[&r(6)], DEFAULT_CONVERGENCE);
        assert_eq!(offs[&r(8)], DEFAULT_CONVERGENCE);
        assert!(offs[&r(1)] > offs[&r(13)]);
    }
}
