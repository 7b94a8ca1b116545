//! Evaluation reports: recovery path lengths against not-via, FIB overhead
//! per router, and loss tables from simulation sweeps. All are CSV with a
//! single header line.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::dataplane::{DataplaneError, Deployment};
use crate::fep_calc::FepCalculator;
use crate::fib_ext::{fep_overhead_bytes, notvia_overhead_bytes, FNI_BYTES, NOTVIA_ENTRY_BYTES};
use crate::notvia::{distinct_routers, notvia_fib_counts, notvia_recovery_path_in};
use crate::sim::{SweepResult, SweepRow};
use crate::topology::{FailureSpec, RouterId, Topology};

pub const PATHLEN_CSV_HEADER: &str = "sr,dr,failure,feps_len,notvia_len,notvia_distinct";
pub const PATHLEN_HIST_CSV_HEADER: &str = "routers,feps,notvia";
pub const OVERHEAD_CSV_HEADER: &str =
    "router,fni,ref_entries,fep_fixed_bytes,fep_bytes,nfib,ofe,notvia_fixed_bytes,notvia_bytes";
pub const LOSS_CSV_HEADER: &str =
    "seed,flow,src,dst,failure,mode,sent,delivered,dropped,loss_percent";

/// Lengths are router visits; `notvia_distinct` collapses revisits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathLenRow {
    pub sr: RouterId,
    pub dr: RouterId,
    pub failure: FailureSpec,
    pub feps_len: usize,
    pub notvia_len: usize,
    pub notvia_distinct: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnprotectedTriple {
    pub sr: RouterId,
    pub dr: RouterId,
    pub failure: FailureSpec,
    pub mechanism: &'static str,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PathLenReport {
    pub rows: Vec<PathLenRow>,
    pub unprotected: Vec<UnprotectedTriple>,
}

impl PathLenReport {
    /// Router count -> (FEP-S paths, not-via paths).
    pub fn histogram(&self) -> BTreeMap<usize, (usize, usize)> {
        let mut h: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
        for r in &self.rows {
            h.entry(r.feps_len).or_default().0 += 1;
            h.entry(r.notvia_len).or_default().1 += 1;
        }
        h
    }

    pub fn mean_feps(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.feps_len))
    }

    pub fn mean_notvia(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.notvia_len))
    }

    pub fn mean_notvia_distinct(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.notvia_distinct))
    }

    pub fn csv(&self) -> String {
        let mut s = format!("{PATHLEN_CSV_HEADER}\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                r.sr, r.dr, r.failure, r.feps_len, r.notvia_len, r.notvia_distinct
            );
        }
        s
    }

    pub fn histogram_csv(&self) -> String {
        let mut s = format!("{PATHLEN_HIST_CSV_HEADER}\n");
        for (n, (a, b)) in self.histogram() {
            let _ = writeln!(s, "{n},{a},{b}");
        }
        s
    }
}

fn mean(xs: impl Iterator<Item = usize>) -> f64 {
    let (sum, n) = xs.fold((0usize, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum as f64 / n as f64
    }
}

/// For every source, destination and the failure of the first component on
/// the primary path (the next router, or the link when the next router is
/// the destination), compares the full emergency recovery path with the
/// not-via one.
pub fn path_length_report(t: &Topology) -> PathLenReport {
    let calc = FepCalculator::new(t);
    let ospf = calc.ospf();
    let mut out = PathLenReport::default();
    for sr in t.routers() {
        let table = calc.compute_all(sr).expect("router in topology");
        for dr in t.routers() {
            if dr == sr {
                continue;
            }
            let Some(ar) = ospf.next_hop(sr, dr) else {
                continue;
            };
            let failure = if ar == dr {
                FailureSpec::link(sr, ar)
            } else {
                FailureSpec::Router(ar)
            };
            let feps = table.vectors.get(&(ar, dr)).map(|v| calc.recovery_path(v));
            let nv = notvia_recovery_path_in(t, ospf, sr, dr, failure).ok();
            match (feps, nv) {
                (Some(f), Some(n)) => out.rows.push(PathLenRow {
                    sr,
                    dr,
                    failure,
                    feps_len: f.len(),
                    notvia_len: n.routers.len(),
                    notvia_distinct: distinct_routers(&n),
                }),
                (f, n) => {
                    for (missing, name) in [(f.is_none(), "feps"), (n.is_none(), "notvia")] {
                        if missing {
                            out.unprotected.push(UnprotectedTriple {
                                sr,
                                dr,
                                failure,
                                mechanism: name,
                            });
                        }
                    }
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OverheadRow {
    pub router: RouterId,
    /// Mark/interface pairs, own and learned.
    pub fni: u64,
    /// OSPF entries carrying a Ref.
    pub ref_entries: u64,
    pub fep_bytes: u64,
    pub nfib: u64,
    pub ofe: u64,
    pub notvia_bytes: u64,
}

impl OverheadRow {
    /// Pair bytes alone, the part that does not scale with OSPF entries.
    pub fn fep_fixed_bytes(&self) -> u64 {
        FNI_BYTES * self.fni
    }

    pub fn notvia_fixed_bytes(&self) -> u64 {
        NOTVIA_ENTRY_BYTES * self.nfib
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OverheadReport {
    pub rows: Vec<OverheadRow>,
}

impl OverheadReport {
    pub fn max_fni(&self) -> u64 {
        self.rows.iter().map(|r| r.fni).max().unwrap_or(0)
    }

    pub fn max_nfib(&self) -> u64 {
        self.rows.iter().map(|r| r.nfib).max().unwrap_or(0)
    }

    pub fn avg_fni(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.fni as usize))
    }

    pub fn avg_nfib(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.nfib as usize))
    }

    pub fn csv(&self) -> String {
        let mut s = format!("{OVERHEAD_CSV_HEADER}\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                r.router,
                r.fni,
                r.ref_entries,
                r.fep_fixed_bytes(),
                r.fep_bytes,
                r.nfib,
                r.ofe,
                r.notvia_fixed_bytes(),
                r.notvia_bytes
            );
        }
        s
    }
}

/// Extra FIB bytes per router under both schemes, after signaling.
pub fn overhead_report(t: &Topology) -> Result<OverheadReport, DataplaneError> {
    let d = Deployment::new(t, true)?;
    Ok(overhead_of(&d))
}

pub fn overhead_of(d: &Deployment) -> OverheadReport {
    let t = &d.topology;
    let rows = d
        .states
        .iter()
        .map(|(&router, s)| {
            let nv = notvia_fib_counts(t, router);
            OverheadRow {
                router,
                fni: s.fib.pair_count() as u64,
                ref_entries: s.fib.referencing_entries() as u64,
                fep_bytes: fep_overhead_bytes(&s.fib),
                nfib: nv.nfib,
                ofe: nv.ofe,
                notvia_bytes: notvia_overhead_bytes(nv.nfib, nv.ofe),
            }
        })
        .collect();
    OverheadReport { rows }
}

/// Loss table ordered by flow, then failure as given, then mode.
pub fn loss_report(sweep: &SweepResult, seed: u64) -> String {
    let mut failure_order: Vec<FailureSpec> = Vec::new();
    for r in &sweep.rows {
        if !failure_order.contains(&r.failure) {
            failure_order.push(r.failure);
        }
    }
    let mut rows: Vec<&SweepRow> = sweep.rows.iter().collect();
    rows.sort_by_key(|r| {
        let fi = failure_order.iter().position(|f| *f == r.failure).unwrap();
        (r.flow, fi, r.mode)
    });
    let mut s = format!("{LOSS_CSV_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{:.3}",
            seed,
            r.flow,
            r.src,
            r.dst,
            r.failure,
            r.mode,
            r.loss.sent,
            r.loss.delivered,
            r.loss.dropped_total(),
            r.loss_percent()
        );
    }
    s
}
