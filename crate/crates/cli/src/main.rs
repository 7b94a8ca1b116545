use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use fepkit::dataplane::Deployment;
use fepkit::fep_calc::{format_routers, FepCalculator, FEP_CSV_HEADER};
use fepkit::fib_ext::{FIB_CSV_HEADER, PAIR_CSV_HEADER};
use fepkit::report::{loss_report, overhead_of, path_length_report};
use fepkit::sim::{
    load_scenario, run_scenario, sweep, Mode, SimConfig, SimError, SweepResult, SweepRow, MS,
    TRACE_CSV_HEADER,
};
use fepkit::topology::{load_topology, validate_protectable, RouterId, Topology};

#[derive(Parser)]
#[command(
    name = "fepkit",
    version,
    about = "Emergency path computation and failure simulation for OSPF networks"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Ospf,
    Feps,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Ospf => Mode::OspfOnly,
            ModeArg::Feps => Mode::FepS,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(clap::Args)]
struct SimOverrides {
    /// RNG seed for convergence timing (overrides the scenario)
    #[arg(long)]
    seed: Option<u64>,
    /// Measurement window in milliseconds, starting at the failure
    #[arg(long, value_name = "MS")]
    window: Option<f64>,
    /// Congestion guard at deviating routers
    #[arg(long)]
    guard: Option<Switch>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Report single failures that strand routers; exit 2 when any exist
    Validate {
        topology: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emergency path table for one router or all of them
    ComputeFeps {
        topology: PathBuf,
        #[arg(long)]
        sr: Option<u16>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// FIB dumps and mark/interface pair tables after signaling
    BuildFib {
        topology: PathBuf,
        #[arg(long)]
        fib: PathBuf,
        #[arg(long)]
        pairs: PathBuf,
    },
    /// Recovery path lengths and FIB overhead against not-via
    CompareNotvia {
        topology: PathBuf,
        #[arg(long)]
        pathlen: PathBuf,
        #[arg(long)]
        overhead: PathBuf,
        #[arg(long)]
        histogram: Option<PathBuf>,
    },
    /// Run the scenario's failures under one mode
    Simulate {
        scenario: PathBuf,
        #[arg(long, default_value = "feps")]
        mode: ModeArg,
        #[command(flatten)]
        opts: SimOverrides,
        #[arg(long)]
        loss: PathBuf,
        /// Event trace; suffixed with the failure index when there are several
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Every failure of the scenario under both modes
    Sweep {
        scenario: PathBuf,
        #[command(flatten)]
        opts: SimOverrides,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (0 uses every core)
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
}

enum Failure {
    Validation(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Runtime(m) => m,
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Io { .. } => Failure::Runtime(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

/// Files are only written once everything has been computed; if one write
/// fails the ones already written are removed.
#[derive(Default)]
struct Outputs {
    files: Vec<(PathBuf, String)>,
    stdout: String,
}

impl Outputs {
    fn file(&mut self, path: &Path, body: String) {
        self.files.push((path.to_path_buf(), body));
    }

    fn to(&mut self, path: Option<&Path>, body: String) {
        match path {
            Some(p) => self.file(p, body),
            None => self.stdout.push_str(&body),
        }
    }

    fn commit(self) -> Result<(), Failure> {
        let mut done: Vec<&Path> = Vec::new();
        for (p, body) in &self.files {
            if let Err(e) = std::fs::write(p, body) {
                for q in done {
                    let _ = std::fs::remove_file(q);
                }
                return Err(Failure::Runtime(format!("{}: {e}", p.display())));
            }
            done.push(p);
        }
        print!("{}", self.stdout);
        Ok(())
    }
}

fn read_topology(path: &Path) -> Result<Topology, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    load_topology(&text).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))
}

fn csv(header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut s = format!("{header}\n");
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    s
}

fn validate(topology: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let t = read_topology(topology)?;
    let rep = validate_protectable(&t);
    let rows = rep.issues.iter().map(|i| {
        let stranded: Vec<String> = i.unreachable.iter().map(|r| r.to_string()).collect();
        format!("{},{}", i.failure, stranded.join(" "))
    });
    let mut o = Outputs::default();
    o.to(out, csv("failure,unreachable", rows));
    o.commit()?;
    if rep.is_empty() {
        Ok(())
    } else {
        Err(Failure::Validation(format!(
            "{} single failure(s) strand routers",
            rep.issues.len()
        )))
    }
}

fn compute_feps(topology: &Path, sr: Option<u16>, out: Option<&Path>) -> Result<(), Failure> {
    let t = read_topology(topology)?;
    let sources: Vec<RouterId> = match sr {
        Some(id) => {
            let r = RouterId::new(id).map_err(|e| Failure::Validation(e.to_string()))?;
            if !t.contains(r) {
                return Err(Failure::Validation(format!("router {r} not in topology")));
            }
            vec![r]
        }
        None => t.routers().collect(),
    };
    let calc = FepCalculator::new(&t);
    let mut rows = Vec::new();
    for s in sources {
        let table = calc
            .compute_all(s)
            .map_err(|e| Failure::Runtime(e.to_string()))?;
        for u in &table.unprotected {
            eprintln!(
                "unprotected: sr {} ar {} dr {} ({:?})",
                u.sr, u.ar, u.dr, u.reason
            );
        }
        rows.extend(table.csv_rows());
    }
    let mut o = Outputs::default();
    o.to(out, csv(FEP_CSV_HEADER, rows));
    o.commit()
}

fn build_fib(topology: &Path, fib: &Path, pairs: &Path) -> Result<(), Failure> {
    let t = read_topology(topology)?;
    let d = Deployment::new(&t, true).map_err(|e| Failure::Runtime(e.to_string()))?;
    let mut unconfirmed = Vec::new();
    for (sr, log) in &d.signal_logs {
        for o in log.outcomes.iter().filter(|o| !o.confirmed) {
            unconfirmed.push(format!("{sr}:{}", format_routers(&o.routers)));
        }
    }
    if !unconfirmed.is_empty() {
        return Err(Failure::Runtime(format!(
            "signaling not acknowledged for {}",
            unconfirmed.join(", ")
        )));
    }
    let mut fib_rows = Vec::new();
    let mut pair_rows = Vec::new();
    for st in d.states.values() {
        fib_rows.extend(st.fib.fib_csv_rows(&t));
        pair_rows.extend(st.fib.pair_csv_rows());
    }
    let mut o = Outputs::default();
    o.file(fib, csv(FIB_CSV_HEADER, fib_rows));
    o.file(pairs, csv(PAIR_CSV_HEADER, pair_rows));
    o.commit()
}

fn compare_notvia(
    topology: &Path,
    pathlen: &Path,
    overhead: &Path,
    histogram: Option<&Path>,
) -> Result<(), Failure> {
    let t = read_topology(topology)?;
    let pl = path_length_report(&t);
    for u in &pl.unprotected {
        eprintln!("unprotected: sr {} dr {} {}", u.sr, u.dr, u.failure);
    }
    let d = Deployment::new(&t, true).map_err(|e| Failure::Runtime(e.to_string()))?;
    let ov = overhead_of(&d);
    let mut o = Outputs::default();
    o.file(pathlen, pl.csv());
    o.file(overhead, ov.csv());
    if let Some(h) = histogram {
        o.file(h, pl.histogram_csv());
    }
    let _ = writeln!(
        o.stdout,
        "mean routers: feps {:.3} notvia {:.3} (distinct {:.3}); max pairs {} vs nfib {}",
        pl.mean_feps(),
        pl.mean_notvia(),
        pl.mean_notvia_distinct(),
        ov.max_fni(),
        ov.max_nfib()
    );
    o.commit()
}

fn apply(cfg: &mut SimConfig, opts: &SimOverrides) {
    if let Some(s) = opts.seed {
        cfg.seed = s;
    }
    if let Some(w) = opts.window {
        cfg.measurement_window = Some((w * MS as f64).round() as u64);
    }
    if let Some(g) = opts.guard {
        cfg.congestion_guard = matches!(g, Switch::On);
    }
}

fn check_window(opts: &SimOverrides) -> Result<(), Failure> {
    match opts.window {
        Some(w) if !(w > 0.0 && w.is_finite()) => {
            Err(Failure::Validation(format!("bad window {w}")))
        }
        _ => Ok(()),
    }
}

fn trace_path(base: &Path, i: usize, n: usize) -> PathBuf {
    if n <= 1 {
        return base.to_path_buf();
    }
    let stem = base
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match base.extension() {
        Some(ext) => format!("{stem}-{i}.{}", ext.to_string_lossy()),
        None => format!("{stem}-{i}"),
    };
    base.with_file_name(name)
}

fn simulate(
    scenario: &Path,
    mode: Mode,
    opts: &SimOverrides,
    loss: &Path,
    trace: Option<&Path>,
) -> Result<(), Failure> {
    check_window(opts)?;
    let (sc, t) = load_scenario(scenario)?;
    let mut cfg = sc.config.clone();
    apply(&mut cfg, opts);
    cfg.mode = mode;
    cfg.keep_trace = trace.is_some();
    eprintln!("seed {}", cfg.seed);

    let runs: Vec<_> = if sc.failures.is_empty() {
        vec![None]
    } else {
        sc.failures.iter().copied().map(Some).collect()
    };
    let mut result = SweepResult::default();
    let mut o = Outputs::default();
    for (i, f) in runs.iter().enumerate() {
        let out = run_scenario(&t, &sc.flows, *f, &cfg)?;
        for w in &out.report.warnings {
            eprintln!("warning: {w}");
        }
        let failure = match f {
            Some((spec, _)) => *spec,
            None => {
                // Without a failure loss.csv keeps only its header.
                for fl in &out.report.flows {
                    let _ = writeln!(
                        o.stdout,
                        "flow {} sent {} delivered {}",
                        fl.flow, fl.window.sent, fl.window.delivered
                    );
                }
                continue;
            }
        };
        let _ = writeln!(o.stdout, "{failure}: trace {}", out.trace_hash);
        result
            .rows
            .extend(out.report.flows.iter().map(|fl| SweepRow {
                flow: fl.flow,
                src: fl.src,
                dst: fl.dst,
                failure,
                mode,
                loss: fl.window.clone(),
            }));
        if let Some(base) = trace {
            o.file(
                &trace_path(base, i, runs.len()),
                csv(TRACE_CSV_HEADER, out.trace.iter().map(|r| r.csv())),
            );
        }
    }
    o.file(loss, loss_report(&result, cfg.seed));
    o.commit()
}

fn run_sweep(scenario: &Path, opts: &SimOverrides, out: &Path, jobs: usize) -> Result<(), Failure> {
    check_window(opts)?;
    let (sc, t) = load_scenario(scenario)?;
    if sc.failures.is_empty() {
        return Err(Failure::Validation(format!(
            "{}: no failures to sweep",
            scenario.display()
        )));
    }
    let mut cfg = sc.config.clone();
    apply(&mut cfg, opts);
    eprintln!("seed {}", cfg.seed);
    let res = sweep(
        &t,
        &sc.flows,
        &sc.failures,
        &[Mode::OspfOnly, Mode::FepS],
        &cfg,
        jobs,
    );
    if !res.errors.is_empty() {
        let msgs: Vec<String> = res
            .errors
            .iter()
            .map(|(f, m, e)| format!("{f} {m}: {e}"))
            .collect();
        return Err(Failure::Runtime(msgs.join("; ")));
    }
    let mut o = Outputs::default();
    o.file(out, loss_report(&res, cfg.seed));
    o.commit()
}

fn run(cmd: Cmd) -> Result<(), Failure> {
    match cmd {
        Cmd::Validate { topology, out } => validate(&topology, out.as_deref()),
        Cmd::ComputeFeps { topology, sr, out } => compute_feps(&topology, sr, out.as_deref()),
        Cmd::BuildFib {
            topology,
            fib,
            pairs,
        } => build_fib(&topology, &fib, &pairs),
        Cmd::CompareNotvia {
            topology,
            pathlen,
            overhead,
            histogram,
        } => compare_notvia(&topology, &pathlen, &overhead, histogram.as_deref()),
        Cmd::Simulate {
            scenario,
            mode,
            opts,
            loss,
            trace,
        } => simulate(&scenario, mode.into(), &opts, &loss, trace.as_deref()),
        Cmd::Sweep {
            scenario,
            opts,
            out,
            jobs,
        } => run_sweep(&scenario, &opts, &out, jobs),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("fepkit: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
