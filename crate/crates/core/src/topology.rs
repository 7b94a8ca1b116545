//! Network topologies: routers, directed weighted links, SRLG groups, and the
//! line-oriented text format they are stored in.
//!
//! A physical link is always stored as two directed [`Link`]s so that each
//! direction can carry its own OSPF cost. Failures act on physical links,
//! never on a single direction.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Largest router id that fits the 9-bit SR identifier of a mark.
pub const MAX_ROUTER_ID: u16 = 511;

/// Capacity assumed by [`TopologyBuilder::link`] when none is given (10 Gbps).
pub const DEFAULT_CAPACITY: u64 = 10_000_000_000;

pub type Cost = u64;

/// Identifier of a router, bounded to 9 bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RouterId(u16);

impl RouterId {
    pub fn new(id: u16) -> Result<Self, TopologyError> {
        if id > MAX_ROUTER_ID {
            return Err(TopologyError::Invalid(format!(
                "router id exceeds 9-bit range: {id}"
            )));
        }
        Ok(RouterId(id))
    }

    pub fn get(self) -> u16 {
        self.0
    }

    pub(crate) fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for RouterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Undirected identity of a physical link; `a < b` always holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinkKey {
    a: RouterId,
    b: RouterId,
}

impl LinkKey {
    pub fn new(x: RouterId, y: RouterId) -> Self {
        if x <= y {
            LinkKey { a: x, b: y }
        } else {
            LinkKey { a: y, b: x }
        }
    }

    pub fn endpoints(self) -> (RouterId, RouterId) {
        (self.a, self.b)
    }

    pub fn touches(self, r: RouterId) -> bool {
        self.a == r || self.b == r
    }
}

impl fmt::Display for LinkKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.a, self.b)
    }
}

impl FromStr for LinkKey {
    type Err = TopologyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .split_once('-')
            .ok_or_else(|| TopologyError::Invalid(format!("malformed link identifier `{s}`")))?;
        Ok(LinkKey::new(parse_router(a)?, parse_router(b)?))
    }
}

/// One direction of a physical link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Link {
    pub from: RouterId,
    pub to: RouterId,
    pub cost: u32,
    /// Bits per second.
    pub capacity: u64,
}

impl Link {
    pub fn key(&self) -> LinkKey {
        LinkKey::new(self.from, self.to)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SrlgGroup {
    pub id: u32,
    pub members: BTreeSet<LinkKey>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Router {
    pub id: RouterId,
    pub loopback: Option<u32>,
}

/// A single failure event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FailureSpec {
    Link(LinkKey),
    Router(RouterId),
    Srlg(u32),
}

impl FailureSpec {
    pub fn link(a: RouterId, b: RouterId) -> Self {
        FailureSpec::Link(LinkKey::new(a, b))
    }
}

impl fmt::Display for FailureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailureSpec::Link(k) => write!(f, "link {k}"),
            FailureSpec::Router(r) => write!(f, "router {r}"),
            FailureSpec::Srlg(g) => write!(f, "srlg {g}"),
        }
    }
}

impl FromStr for FailureSpec {
    type Err = TopologyError;

    /// Accepts `link a-b`, `router id` or `srlg gid`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut it = s.split_whitespace();
        let kind = it.next().unwrap_or_default();
        let arg = it
            .next()
            .ok_or_else(|| TopologyError::Invalid(format!("malformed failure `{s}`")))?;
        if it.next().is_some() {
            return Err(TopologyError::Invalid(format!("malformed failure `{s}`")));
        }
        match kind {
            "link" => Ok(FailureSpec::Link(arg.parse()?)),
            "router" => Ok(FailureSpec::Router(parse_router(arg)?)),
            "srlg" => arg
                .parse()
                .map(FailureSpec::Srlg)
                .map_err(|_| TopologyError::Invalid(format!("bad srlg id `{arg}`"))),
            other => Err(TopologyError::Invalid(format!(
                "unknown failure kind `{other}`"
            ))),
        }
    }
}

/// Index of an announced destination prefix inside its topology.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PrefixId(pub u32);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prefix {
    pub name: String,
    pub announced_by: RouterId,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TopologyError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{0}")]
    Invalid(String),
    #[error("unknown component: {0}")]
    UnknownComponent(FailureSpec),
}

impl TopologyError {
    fn at_line(self, line: usize) -> Self {
        match self {
            TopologyError::Invalid(msg) => TopologyError::Parse { line, msg },
            other => other,
        }
    }
}

fn parse_router(s: &str) -> Result<RouterId, TopologyError> {
    let v: u32 = s
        .parse()
        .map_err(|_| TopologyError::Invalid(format!("bad router id `{s}`")))?;
    if v > MAX_ROUTER_ID as u32 {
        return Err(TopologyError::Invalid(format!(
            "router id exceeds 9-bit range: {v}"
        )));
    }
    Ok(RouterId(v as u16))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Tombstone {
    Router(RouterId),
    Link(LinkKey),
}

/// Directed weighted router graph with SRLG groups.
///
/// Topologies derived through [`Topology::remove_component`] remember what
/// was removed, so removing the same component again is a no-op.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    routers: BTreeMap<RouterId, Router>,
    links: BTreeMap<(RouterId, RouterId), Link>,
    srlgs: BTreeMap<u32, SrlgGroup>,
    extra_prefixes: Vec<Prefix>,
    removed: BTreeSet<Tombstone>,
}

impl Topology {
    pub fn routers(&self) -> impl Iterator<Item = RouterId> + '_ {
        self.routers.keys().copied()
    }

    pub fn router(&self, r: RouterId) -> Option<&Router> {
        self.routers.get(&r)
    }

    pub fn router_count(&self) -> usize {
        self.routers.len()
    }

    pub fn contains(&self, r: RouterId) -> bool {
        self.routers.contains_key(&r)
    }

    /// All directed links, ordered by `(from, to)`.
    pub fn links(&self) -> impl Iterator<Item = &Link> + '_ {
        self.links.values()
    }

    pub fn link(&self, from: RouterId, to: RouterId) -> Option<&Link> {
        self.links.get(&(from, to))
    }

    /// Physical links in ascending key order.
    pub fn physical_links(&self) -> impl Iterator<Item = LinkKey> + '_ {
        self.links
            .keys()
            .filter(|(f, t)| f < t)
            .map(|&(f, t)| LinkKey::new(f, t))
    }

    /// Outgoing links of `r`, ascending by neighbor id.
    pub fn out_links(&self, r: RouterId) -> impl Iterator<Item = &Link> + '_ {
        self.links
            .range((r, RouterId(0))..=(r, RouterId(u16::MAX)))
            .map(|(_, l)| l)
    }

    /// Neighbors of `r` in ascending id order.
    pub fn neighbors(&self, r: RouterId) -> Vec<RouterId> {
        self.out_links(r).map(|l| l.to).collect()
    }

    pub fn is_neighbor(&self, a: RouterId, b: RouterId) -> bool {
        self.links.contains_key(&(a, b))
    }

    /// Index of the interface of `owner` that leads to `neighbor`.
    ///
    /// Interfaces are numbered from 0 in ascending neighbor order.
    pub fn interface_index(&self, owner: RouterId, neighbor: RouterId) -> Option<u8> {
        self.out_links(owner)
            .position(|l| l.to == neighbor)
            .and_then(|i| u8::try_from(i).ok())
    }

    /// Neighbor reached through interface `ni` of `owner`.
    pub fn interface_neighbor(&self, owner: RouterId, ni: u8) -> Option<RouterId> {
        self.out_links(owner).nth(ni as usize).map(|l| l.to)
    }

    pub fn srlgs(&self) -> impl Iterator<Item = &SrlgGroup> + '_ {
        self.srlgs.values()
    }

    pub fn srlg(&self, id: u32) -> Option<&SrlgGroup> {
        self.srlgs.get(&id)
    }

    /// Every link sharing a risk group with `key`, including `key` itself.
    pub fn srlg_closure(&self, key: LinkKey) -> BTreeSet<LinkKey> {
        let mut out = BTreeSet::from([key]);
        for g in self.srlgs.values() {
            if g.members.contains(&key) {
                out.extend(g.members.iter().copied());
            }
        }
        out
    }

    /// Links sharing fate with (sr, ar): the link itself and its SRLG siblings.
    pub fn srlg_of_link(&self, sr: RouterId, ar: RouterId) -> BTreeSet<LinkKey> {
        self.srlg_closure(LinkKey::new(sr, ar))
    }

    /// Links sharing fate with router `ar`: every incident link and all of
    /// their SRLG siblings.
    pub fn srlg_of_router(&self, ar: RouterId) -> BTreeSet<LinkKey> {
        let mut out = BTreeSet::new();
        for n in self.neighbors(ar) {
            out.extend(self.srlg_closure(LinkKey::new(ar, n)));
        }
        out
    }

    /// Announced prefixes: one default prefix per router (`net<id>`), followed
    /// by any extra announcements, in a stable order.
    pub fn prefixes(&self) -> Vec<Prefix> {
        let mut out: Vec<Prefix> = self
            .routers
            .keys()
            .map(|&r| Prefix {
                name: default_prefix_name(r),
                announced_by: r,
            })
            .collect();
        out.extend(
            self.extra_prefixes
                .iter()
                .filter(|p| self.routers.contains_key(&p.announced_by))
                .cloned(),
        );
        out
    }

    /// Prefix id of the default prefix of router `r`.
    pub fn default_prefix(&self, r: RouterId) -> Option<PrefixId> {
        self.routers
            .keys()
            .position(|&x| x == r)
            .map(|i| PrefixId(i as u32))
    }

    /// Removes a failed component and everything that shares its fate.
    ///
    /// A link failure removes both directions of the link plus every member of
    /// each SRLG containing it. A router failure removes the router, its
    /// incident links and their SRLG siblings. An SRLG failure removes all of
    /// its members. `self` is left untouched.
    pub fn remove_component(&self, f: FailureSpec) -> Result<Topology, TopologyError> {
        let doomed = self.failed_links(f)?;
        let mut out = self.clone();
        for k in &doomed {
            let (a, b) = k.endpoints();
            out.links.remove(&(a, b));
            out.links.remove(&(b, a));
            out.removed.insert(Tombstone::Link(*k));
        }
        if let FailureSpec::Router(r) = f {
            out.routers.remove(&r);
            out.removed.insert(Tombstone::Router(r));
        }
        Ok(out)
    }

    /// Physical links taken down by `f`, SRLG expansion included.
    pub fn failed_links(&self, f: FailureSpec) -> Result<BTreeSet<LinkKey>, TopologyError> {
        let known_link = |k: LinkKey| {
            let (a, b) = k.endpoints();
            self.links.contains_key(&(a, b)) || self.removed.contains(&Tombstone::Link(k))
        };
        let mut doomed = BTreeSet::new();
        match f {
            FailureSpec::Link(k) => {
                if !known_link(k) {
                    return Err(TopologyError::UnknownComponent(f));
                }
                doomed.extend(self.srlg_closure(k));
            }
            FailureSpec::Router(r) => {
                if !self.routers.contains_key(&r) && !self.removed.contains(&Tombstone::Router(r)) {
                    return Err(TopologyError::UnknownComponent(f));
                }
                for n in self.neighbors(r) {
                    doomed.extend(self.srlg_closure(LinkKey::new(r, n)));
                }
            }
            FailureSpec::Srlg(g) => {
                let group = self
                    .srlgs
                    .get(&g)
                    .ok_or(TopologyError::UnknownComponent(f))?;
                doomed.extend(group.members.iter().copied());
            }
        }
        Ok(doomed)
    }

    /// Routers adjacent to the failed component (the ones that detect it).
    pub fn detecting_routers(&self, f: FailureSpec) -> Result<BTreeSet<RouterId>, TopologyError> {
        let mut out = BTreeSet::new();
        for k in self.failed_links(f)? {
            let (a, b) = k.endpoints();
            out.insert(a);
            out.insert(b);
        }
        if let FailureSpec::Router(r) = f {
            out.remove(&r);
        }
        Ok(out)
    }

    /// Every single failure this topology can suffer: each physical link,
    /// each router, each SRLG group.
    pub fn single_failures(&self) -> Vec<FailureSpec> {
        let mut out: Vec<FailureSpec> = self.physical_links().map(FailureSpec::Link).collect();
        out.extend(self.routers().map(FailureSpec::Router));
        out.extend(self.srlgs.keys().map(|&g| FailureSpec::Srlg(g)));
        out
    }

    /// Connected components over surviving links, each sorted, largest first
    /// (ties: smallest router id first).
    pub fn components(&self) -> Vec<Vec<RouterId>> {
        let mut seen = BTreeSet::new();
        let mut comps = Vec::new();
        for r in self.routers() {
            if !seen.insert(r) {
                continue;
            }
            let mut comp = vec![r];
            let mut queue = VecDeque::from([r]);
            while let Some(u) = queue.pop_front() {
                for l in self.out_links(u) {
                    if seen.insert(l.to) {
                        comp.push(l.to);
                        queue.push_back(l.to);
                    }
                }
            }
            comp.sort();
            comps.push(comp);
        }
        comps.sort_by(|x, y| y.len().cmp(&x.len()).then(x[0].cmp(&y[0])));
        comps
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() <= 1
    }

    /// Serializes into the text format accepted by [`load_topology`].
    pub fn to_text(&self) -> String {
        let mut s = format!("routers {}\n", self.routers.len());
        for r in self.routers.values() {
            match r.loopback {
                Some(lb) => s.push_str(&format!("router {} loopback {lb}\n", r.id)),
                None => s.push_str(&format!("router {}\n", r.id)),
            }
        }
        for k in self.physical_links() {
            let (a, b) = k.endpoints();
            let ab = self.links[&(a, b)];
            let ba = self.links[&(b, a)];
            s.push_str(&format!(
                "link {a} {b} cost_ab {} cost_ba {} capacity {}\n",
                ab.cost, ba.cost, ab.capacity
            ));
        }
        for g in self.srlgs.values() {
            let live: Vec<String> = g
                .members
                .iter()
                .filter(|k| {
                    let (a, b) = k.endpoints();
                    self.links.contains_key(&(a, b))
                })
                .map(|k| k.to_string())
                .collect();
            if live.len() >= 2 {
                s.push_str(&format!("srlg {} {}\n", g.id, live.join(" ")));
            }
        }
        for p in &self.extra_prefixes {
            if self.routers.contains_key(&p.announced_by) {
                s.push_str(&format!("announce {} {}\n", p.announced_by, p.name));
            }
        }
        s
    }
}

pub fn default_prefix_name(r: RouterId) -> String {
    format!("net{r}")
}

/// Programmatic construction with the same validation as the parser.
#[derive(Debug, Default)]
pub struct TopologyBuilder {
    routers: BTreeMap<RouterId, Router>,
    links: BTreeMap<(RouterId, RouterId), Link>,
    srlgs: BTreeMap<u32, SrlgGroup>,
    extra_prefixes: Vec<Prefix>,
}

impl TopologyBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn router(&mut self, id: u16, loopback: Option<u32>) -> Result<&mut Self, TopologyError> {
        let id = RouterId::new(id)?;
        if self.routers.insert(id, Router { id, loopback }).is_some() {
            return Err(TopologyError::Invalid(format!("duplicate router {id}")));
        }
        Ok(self)
    }

    /// Adds a symmetric physical link with the default capacity.
    pub fn link(&mut self, a: u16, b: u16, cost: u32) -> Result<&mut Self, TopologyError> {
        self.asym_link(a, b, cost, cost, DEFAULT_CAPACITY)
    }

    pub fn asym_link(
        &mut self,
        a: u16,
        b: u16,
        cost_ab: u32,
        cost_ba: u32,
        capacity: u64,
    ) -> Result<&mut Self, TopologyError> {
        let a = RouterId::new(a)?;
        let b = RouterId::new(b)?;
        if a == b {
            return Err(TopologyError::Invalid(format!("self loop on router {a}")));
        }
        if cost_ab < 1 || cost_ba < 1 {
            return Err(TopologyError::Invalid(format!("cost < 1 on link {a}-{b}")));
        }
        for r in [a, b] {
            if !self.routers.contains_key(&r) {
                return Err(TopologyError::Invalid(format!(
                    "dangling endpoint: router {r} is not declared"
                )));
            }
        }
        if self.links.contains_key(&(a, b)) || self.links.contains_key(&(b, a)) {
            return Err(TopologyError::Invalid(format!("duplicate link {a}-{b}")));
        }
        self.links.insert(
            (a, b),
            Link {
                from: a,
                to: b,
                cost: cost_ab,
                capacity,
            },
        );
        self.links.insert(
            (b, a),
            Link {
                from: b,
                to: a,
                cost: cost_ba,
                capacity,
            },
        );
        Ok(self)
    }

    pub fn srlg(&mut self, id: u32, members: &[(u16, u16)]) -> Result<&mut Self, TopologyError> {
        let mut set = BTreeSet::new();
        for &(a, b) in members {
            let k = LinkKey::new(RouterId::new(a)?, RouterId::new(b)?);
            let (x, y) = k.endpoints();
            if !self.links.contains_key(&(x, y)) {
                return Err(TopologyError::Invalid(format!(
                    "srlg {id} names unknown link {k}"
                )));
            }
            set.insert(k);
        }
        if set.len() < 2 {
            return Err(TopologyError::Invalid(format!(
                "srlg {id} needs at least two member links"
            )));
        }
        if self
            .srlgs
            .insert(id, SrlgGroup { id, members: set })
            .is_some()
        {
            return Err(TopologyError::Invalid(format!("duplicate srlg {id}")));
        }
        Ok(self)
    }

    pub fn announce(&mut self, router: u16, prefix: &str) -> Result<&mut Self, TopologyError> {
        let r = RouterId::new(router)?;
        if !self.routers.contains_key(&r) {
            return Err(TopologyError::Invalid(format!(
                "dangling endpoint: router {r} is not declared"
            )));
        }
        let taken = self
            .routers
            .keys()
            .any(|&x| default_prefix_name(x) == prefix)
            || self.extra_prefixes.iter().any(|p| p.name == prefix);
        if taken {
            return Err(TopologyError::Invalid(format!(
                "prefix {prefix} announced twice"
            )));
        }
        self.extra_prefixes.push(Prefix {
            name: prefix.to_string(),
            announced_by: r,
        });
        Ok(self)
    }

    pub fn build(&self) -> Result<Topology, TopologyError> {
        let t = Topology {
            routers: self.routers.clone(),
            links: self.links.clone(),
            srlgs: self.srlgs.clone(),
            extra_prefixes: self.extra_prefixes.clone(),
            removed: BTreeSet::new(),
        };
        if t.routers.is_empty() {
            return Err(TopologyError::Invalid("topology has no routers".into()));
        }
        if !t.is_connected() {
            return Err(TopologyError::Invalid(
                "topology is not strongly connected".into(),
            ));
        }
        Ok(t)
    }
}

/// Parses a topology document.
///
/// ```text
/// routers 2
/// router 1 loopback 167772161
/// router 2
/// link 1 2 cost_ab 1 cost_ba 3 capacity 10000000000
/// srlg 7 1-2 2-3
/// announce 2 customer-a
/// ```
pub fn load_topology(source: &str) -> Result<Topology, TopologyError> {
    let mut builder = TopologyBuilder::new();
    let mut declared: Option<(usize, usize)> = None;
    let mut last_line = 0;
    for (idx, raw) in source.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = raw.split('#').next().unwrap_or_default().trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let parse_err = |msg: String| TopologyError::Parse { line: line_no, msg };
        match toks[0] {
            "routers" => {
                if declared.is_some() {
                    return Err(parse_err("duplicate `routers` header".into()));
                }
                let n = toks
                    .get(1)
                    .and_then(|v| v.parse().ok())
                    .filter(|_| toks.len() == 2)
                    .ok_or_else(|| parse_err("expected `routers <count>`".into()))?;
                declared = Some((n, line_no));
            }
            "router" => {
                let id: u32 = toks
                    .get(1)
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| parse_err("expected `router <id> [loopback <addr>]`".into()))?;
                if id > MAX_ROUTER_ID as u32 {
                    return Err(parse_err(format!("router id exceeds 9-bit range: {id}")));
                }
                let loopback = match toks.len() {
                    2 => None,
                    4 if toks[2] == "loopback" => Some(
                        toks[3]
                            .parse::<u32>()
                            .map_err(|_| parse_err(format!("bad loopback `{}`", toks[3])))?,
                    ),
                    _ => return Err(parse_err("expected `router <id> [loopback <addr>]`".into())),
                };
                builder
                    .router(id as u16, loopback)
                    .map_err(|e| e.at_line(line_no))?;
            }
            "link" => {
                if toks.len() != 9
                    || toks[3] != "cost_ab"
                    || toks[5] != "cost_ba"
                    || toks[7] != "capacity"
                {
                    return Err(parse_err(
                        "expected `link <a> <b> cost_ab <c> cost_ba <c> capacity <bps>`".into(),
                    ));
                }
                let a = parse_router(toks[1]).map_err(|e| e.at_line(line_no))?;
                let b = parse_router(toks[2]).map_err(|e| e.at_line(line_no))?;
                let num = |s: &str| {
                    s.parse::<u64>()
                        .map_err(|_| parse_err(format!("bad number `{s}`")))
                };
                let c1 = num(toks[4])?;
                let c2 = num(toks[6])?;
                let cap = num(toks[8])?;
                let c1 = u32::try_from(c1).map_err(|_| parse_err("cost out of range".into()))?;
                let c2 = u32::try_from(c2).map_err(|_| parse_err("cost out of range".into()))?;
                builder
                    .asym_link(a.get(), b.get(), c1, c2, cap)
                    .map_err(|e| e.at_line(line_no))?;
            }
            "srlg" => {
                let gid: u32 = toks
                    .get(1)
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| parse_err("expected `srlg <gid> <a>-<b> ...`".into()))?;
                let mut members = Vec::new();
                for m in &toks[2..] {
                    let k: LinkKey = m.parse().map_err(|e: TopologyError| e.at_line(line_no))?;
                    let (a, b) = k.endpoints();
                    members.push((a.get(), b.get()));
                }
                builder
                    .srlg(gid, &members)
                    .map_err(|e| e.at_line(line_no))?;
            }
            "announce" => {
                if toks.len() != 3 {
                    return Err(parse_err("expected `announce <router> <prefix>`".into()));
                }
                let r = parse_router(toks[1]).map_err(|e| e.at_line(line_no))?;
                builder
                    .announce(r.get(), toks[2])
                    .map_err(|e| e.at_line(line_no))?;
            }
            other => return Err(parse_err(format!("unknown directive `{other}`"))),
        }
    }
    let (n, header_line) = declared.ok_or(TopologyError::Parse {
        line: last_line.max(1),
        msg: "missing `routers <count>` header".into(),
    })?;
    if n != builder.routers.len() {
        return Err(TopologyError::Parse {
            line: header_line,
            msg: format!(
                "header declares {n} routers, found {}",
                builder.routers.len()
            ),
        });
    }
    builder.build()
}

/// One failure that leaves part of the network stranded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtectabilityIssue {
    pub failure: FailureSpec,
    /// Surviving routers cut off from the main component.
    pub unreachable: Vec<RouterId>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProtectabilityReport {
    pub issues: Vec<ProtectabilityIssue>,
}

impl ProtectabilityReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn links(&self) -> impl Iterator<Item = &ProtectabilityIssue> {
        self.issues
            .iter()
            .filter(|i| matches!(i.failure, FailureSpec::Link(_)))
    }

    pub fn routers(&self) -> impl Iterator<Item = &ProtectabilityIssue> {
        self.issues
            .iter()
            .filter(|i| matches!(i.failure, FailureSpec::Router(_)))
    }

    pub fn srlgs(&self) -> impl Iterator<Item = &ProtectabilityIssue> {
        self.issues
            .iter()
            .filter(|i| matches!(i.failure, FailureSpec::Srlg(_)))
    }
}

/// Checks every single link, router and SRLG failure for stranded routers.
pub fn validate_protectable(t: &Topology) -> ProtectabilityReport {
    let mut issues = Vec::new();
    for f in t.single_failures() {
        let Ok(rest) = t.remove_component(f) else {
            continue;
        };
        let comps = rest.components();
        if comps.len() > 1 {
            let mut unreachable: Vec<RouterId> = comps[1..].iter().flatten().copied().collect();
            unreachable.sort();
            issues.push(ProtectabilityIssue {
                failure: f,
                unreachable,
            });
        }
    }
    ProtectabilityReport { issues }
}
