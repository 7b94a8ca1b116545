//! Python bindings for fepkit.

use std::path::PathBuf;

use fepkit::fep_calc::{format_routers, FepCalculator};
use fepkit::fib_ext;
use fepkit::notvia::notvia_recovery_path;
use fepkit::report;
use fepkit::sim::{load_scenario, run_scenario, Mode, SimError, SweepResult, SweepRow, MS};
use fepkit::topology::{self as topo, FailureSpec, RouterId};
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn router(id: u16) -> PyResult<RouterId> {
    RouterId::new(id).map_err(value_err)
}

fn ids(rs: &[RouterId]) -> Vec<u16> {
    rs.iter().map(|r| r.get()).collect()
}

/// A network topology.
#[pyclass(frozen, module = "pyfepkit")]
struct Topology {
    inner: topo::Topology,
}

#[pymethods]
impl Topology {
    /// Parses topology text.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(Topology {
            inner: topo::load_topology(text).map_err(value_err)?,
        })
    }

    #[staticmethod]
    fn from_file(path: PathBuf) -> PyResult<Self> {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| PyOSError::new_err(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn routers(&self) -> Vec<u16> {
        self.inner.routers().map(|r| r.get()).collect()
    }

    fn neighbors(&self, r: u16) -> PyResult<Vec<u16>> {
        Ok(ids(&self.inner.neighbors(router(r)?)))
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    /// Topology after a failure such as `"link 1-2"`, `"router 3"` or `"srlg 1"`.
    fn remove(&self, failure: &str) -> PyResult<Self> {
        let f: FailureSpec = failure.parse().map_err(value_err)?;
        Ok(Topology {
            inner: self.inner.remove_component(f).map_err(value_err)?,
        })
    }

    /// Single failures that strand routers, as `(failure, [router, ...])`.
    fn validate(&self) -> Vec<(String, Vec<u16>)> {
        topo::validate_protectable(&self.inner)
            .issues
            .iter()
            .map(|i| (i.failure.to_string(), ids(&i.unreachable)))
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Topology(routers={}, links={})",
            self.inner.router_count(),
            self.inner.physical_links().count()
        )
    }
}

/// The emergency path chosen for one (sr, ar, dr).
#[pyclass(frozen, get_all, module = "pyfepkit")]
struct FepVector {
    sr: u16,
    ar: u16,
    dr: u16,
    routers: Vec<u16>,
    level: String,
    cost_fep: u64,
    num_fep: u64,
    zprime: u64,
}

#[pymethods]
impl FepVector {
    fn __repr__(&self) -> String {
        let rs: Vec<String> = self.routers.iter().map(|r| r.to_string()).collect();
        format!(
            "FepVector(sr={}, ar={}, dr={}, {} {}, zprime={})",
            self.sr,
            self.ar,
            self.dr,
            self.level,
            rs.join("-"),
            self.zprime
        )
    }
}

/// Emergency paths of one router, ordered by (ar, dr).
#[pyfunction]
fn compute_feps(t: &Topology, sr: u16) -> PyResult<Vec<FepVector>> {
    let sr = router(sr)?;
    if !t.inner.contains(sr) {
        return Err(value_err(format!("router {sr} not in topology")));
    }
    let table = FepCalculator::new(&t.inner)
        .compute_all(sr)
        .map_err(value_err)?;
    Ok(table
        .vectors
        .values()
        .map(|v| FepVector {
            sr: v.sr.get(),
            ar: v.ar.get(),
            dr: v.dr.get(),
            routers: ids(&v.routers),
            level: v.level.to_string(),
            cost_fep: v.cost_fep,
            num_fep: v.num_fep,
            zprime: v.zprime,
        })
        .collect())
}

/// Not-via recovery path from `sr` to `dr` around `failure`.
#[pyfunction]
fn notvia_path(t: &Topology, sr: u16, dr: u16, failure: &str) -> PyResult<Vec<u16>> {
    let f: FailureSpec = failure.parse().map_err(value_err)?;
    let p = notvia_recovery_path(&t.inner, router(sr)?, router(dr)?, f).map_err(value_err)?;
    Ok(ids(&p.routers))
}

#[pyfunction]
fn encode_mark(sr_id: u16, fep_id: u16) -> PyResult<u16> {
    fib_ext::encode_mark(sr_id, fep_id).map_err(value_err)
}

#[pyfunction]
fn decode_mark(bits: u16) -> (u16, u16) {
    fib_ext::decode_mark(bits)
}

/// `pathlen.csv` contents.
#[pyfunction]
fn path_length_csv(t: &Topology) -> String {
    report::path_length_report(&t.inner).csv()
}

/// `overhead.csv` contents.
#[pyfunction]
fn overhead_csv(t: &Topology) -> PyResult<String> {
    Ok(report::overhead_report(&t.inner).map_err(value_err)?.csv())
}

/// Runs every failure of a scenario file under one mode. Returns the
/// `loss.csv` text and one trace hash per failure.
#[pyfunction]
#[pyo3(signature = (scenario, mode = "feps", seed = None, window_ms = None))]
fn simulate(
    py: Python<'_>,
    scenario: PathBuf,
    mode: &str,
    seed: Option<u64>,
    window_ms: Option<f64>,
) -> PyResult<(String, Vec<String>)> {
    let mode: Mode = mode.parse().map_err(value_err)?;
    let sim_err = |e: SimError| match e {
        SimError::Io { .. } => PyOSError::new_err(e.to_string()),
        _ => value_err(e),
    };
    let (sc, t) = load_scenario(&scenario).map_err(sim_err)?;
    let mut cfg = sc.config.clone();
    cfg.mode = mode;
    cfg.keep_trace = true;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(w) = window_ms {
        if !(w > 0.0 && w.is_finite()) {
            return Err(value_err(format!("bad window {w}")));
        }
        cfg.measurement_window = Some((w * MS as f64).round() as u64);
    }
    let outcome = py.detach(|| -> Result<_, SimError> {
        let mut res = SweepResult::default();
        let mut hashes = Vec::new();
        for &(f, at) in &sc.failures {
            let out = run_scenario(&t, &sc.flows, Some((f, at)), &cfg)?;
            hashes.push(out.trace_hash);
            res.rows
                .extend(out.report.flows.into_iter().map(|fl| SweepRow {
                    flow: fl.flow,
                    src: fl.src,
                    dst: fl.dst,
                    failure: f,
                    mode,
                    loss: fl.window,
                }));
        }
        Ok((report::loss_report(&res, cfg.seed), hashes))
    });
    outcome.map_err(sim_err)
}

/// Router sequence as written in CSV output, e.g. `1-4-5`.
#[pyfunction]
fn format_path(routers: Vec<u16>) -> PyResult<String> {
    let rs = routers
        .into_iter()
        .map(router)
        .collect::<PyResult<Vec<_>>>()?;
    Ok(format_routers(&rs))
}

#[pymodule]
fn pyfepkit(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Topology>()?;
    m.add_class::<FepVector>()?;
    m.add_function(wrap_pyfunction!(compute_feps, m)?)?;
    m.add_function(wrap_pyfunction!(notvia_path, m)?)?;
    m.add_function(wrap_pyfunction!(encode_mark, m)?)?;
    m.add_function(wrap_pyfunction!(decode_mark, m)?)?;
    m.add_function(wrap_pyfunction!(path_length_csv, m)?)?;
    m.add_function(wrap_pyfunction!(overhead_csv, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(format_path, m)?)?;
    Ok(())
}
