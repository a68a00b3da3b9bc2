//! Implementations of the `ran` subcommands.
//!
//! Each command validates its flags and opens every output file before doing
//! any work. Machine-readable results go to files (or standard output when no
//! path is given); human-readable summaries go to standard output.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use ran::expectations::{limit_coefficient, ExactRecurrence, RecurrenceColumn, EXACT_T_CAP};
use ran::montecarlo::{run_replicates, summarize, SimulationConfig};
use ran::network::{generate_with, GenerateOptions};
use ran::oracle::{
    exact_expectations, exhaustive_coupling, recurrence_discrepancy, sampled_coupling_check,
    Continuation, CouplingReport, ORACLE_T_CAP,
};
use ran::Error;

/// Bounded-difference constant every coupled pair must respect.
pub const COUPLING_BOUND: u64 = 6;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Verification(String),
    Io(String),
    Capacity(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Verification(_) => 1,
            CliError::Io(_) => 2,
            CliError::Capacity(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Verification(m) => write!(f, "verification failed: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Capacity(m) => write!(f, "capacity error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Capacity(_) => CliError::Capacity(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn io_error(path: &Path, e: io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| io_error(path, e))
}

/// A file opened up front, or standard output.
enum Sink {
    File(PathBuf, BufWriter<File>),
    Stdout,
}

impl Sink {
    fn open(path: Option<&Path>) -> CliResult<Self> {
        match path {
            Some(p) => Ok(Sink::File(p.to_path_buf(), create(p)?)),
            None => Ok(Sink::Stdout),
        }
    }

    fn write_with(self, f: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> CliResult<()> {
        match self {
            Sink::File(path, mut w) => f(&mut w)
                .and_then(|_| w.flush())
                .map_err(|e| io_error(&path, e)),
            Sink::Stdout => {
                let stdout = io::stdout();
                let mut lock = stdout.lock();
                f(&mut lock)
                    .and_then(|_| lock.flush())
                    .map_err(|e| CliError::Io(format!("stdout: {e}")))
            }
        }
    }
}

fn write_json<T: Serialize>(value: &T, out: &mut dyn Write) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)
}

pub struct GenerateArgs {
    pub t: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub hist: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub memory_budget_mb: Option<usize>,
}

pub fn generate(args: &GenerateArgs) -> CliResult<()> {
    let mut options = GenerateOptions {
        record_edges: args.out.is_some(),
        record_trace: args.trace.is_some(),
        ..GenerateOptions::default()
    };
    if let Some(mb) = args.memory_budget_mb {
        options.memory_budget = mb.saturating_mul(1 << 20);
    }
    options.check_capacity(args.t)?;
    let edge_file = args
        .out
        .as_deref()
        .map(|p| create(p).map(|w| (p, w)))
        .transpose()?;
    let hist_file = args
        .hist
        .as_deref()
        .map(|p| create(p).map(|w| (p, w)))
        .transpose()?;
    let trace_file = args
        .trace
        .as_deref()
        .map(|p| create(p).map(|w| (p, w)))
        .transpose()?;

    let generation = generate_with(args.t, args.seed, &options)?;
    let state = &generation.state;

    if let Some((path, mut w)) = edge_file {
        state
            .write_edge_list(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| io_error(path, e))?;
    }
    if let Some((path, mut w)) = hist_file {
        state
            .degree_histogram()
            .write_csv(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| io_error(path, e))?;
    }
    if let (Some((path, mut w)), Some(trace)) = (trace_file, &generation.trace) {
        trace
            .write_text(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| io_error(path, e))?;
    }
    println!(
        "t={} V={} E={} F={} max_degree={}",
        state.t(),
        state.vertex_count(),
        state.edge_count(),
        state.face_count(),
        state.max_degree()
    );
    Ok(())
}

pub fn expect(t: usize, k_max: usize, exact: bool, out: Option<&Path>) -> CliResult<()> {
    if t < 1 {
        return Err(CliError::Usage("--t must be at least 1".into()));
    }
    if k_max < 3 {
        return Err(CliError::Usage("--kmax must be at least 3".into()));
    }
    if exact && t > EXACT_T_CAP {
        return Err(CliError::Capacity(format!(
            "--exact is limited to t <= {EXACT_T_CAP}, got t = {t}"
        )));
    }
    let sink = Sink::open(out)?;
    if exact {
        let mut column = ExactRecurrence::basis(k_max);
        while column.t() < t {
            column.advance();
        }
        sink.write_with(|w| column.write_csv(w))
    } else {
        let mut column = RecurrenceColumn::basis(k_max);
        while column.t() < t {
            column.advance();
        }
        sink.write_with(|w| column.write_csv(w))
    }
}

pub fn limits(k_max: u64) -> CliResult<()> {
    if k_max < 3 {
        return Err(CliError::Usage("--kmax must be at least 3".into()));
    }
    Sink::Stdout.write_with(|w| {
        for k in 3..=k_max {
            writeln!(w, "{k},{}", limit_coefficient(k).expect("k >= 3"))?;
        }
        Ok(())
    })
}

pub struct SimulateArgs {
    pub t: usize,
    pub replicates: u64,
    pub seed: u64,
    pub workers: usize,
    pub k_report_max: u32,
    pub out: Option<PathBuf>,
}

pub fn simulate(args: &SimulateArgs) -> CliResult<()> {
    if args.t < 1 {
        return Err(CliError::Usage("--t must be at least 1".into()));
    }
    if args.replicates < 1 {
        return Err(CliError::Usage("--replicates must be at least 1".into()));
    }
    if args.workers < 1 {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }
    let mut config =
        SimulationConfig::new(args.t, args.replicates, args.seed).with_workers(args.workers);
    config.k_report_max = args.k_report_max;
    config.validate()?;
    let sink = Sink::open(args.out.as_deref())?;
    let summaries = run_replicates(&config)?;
    let summary = summarize(&config, &summaries)?;
    sink.write_with(|w| write_json(&summary, w))
}

pub fn oracle(t: usize, out: Option<&Path>) -> CliResult<()> {
    if t < 1 {
        return Err(CliError::Usage("--t must be at least 1".into()));
    }
    if t > ORACLE_T_CAP {
        return Err(CliError::Capacity(format!(
            "oracle enumeration is capped at t = {ORACLE_T_CAP}, got t = {t}"
        )));
    }
    let sink = Sink::open(out)?;
    let exact = exact_expectations(t)?;
    let discrepancy = recurrence_discrepancy(t)?;
    sink.write_with(|w| {
        writeln!(w, "k,exact_num,exact_den,recurrence,discrepancy")?;
        for (k, d) in &discrepancy {
            let e = exact.get(*k);
            let recurrence = &e + d;
            writeln!(w, "{k},{},{},{recurrence},{d}", e.numer(), e.denom())?;
        }
        Ok(())
    })
}

#[derive(Serialize)]
struct CouplingDocument {
    #[serde(flatten)]
    report: CouplingReport,
    mode: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<&'static str>,
}

pub enum CoupleMode {
    Exhaustive,
    Sampled { samples: u64, seed: u64 },
}

pub fn couple(t: usize, mode: CoupleMode, out: Option<&Path>) -> CliResult<()> {
    if t < 1 {
        return Err(CliError::Usage("--t must be at least 1".into()));
    }
    let sink = Sink::open(out)?;
    let (report, mode_name) = match mode {
        CoupleMode::Exhaustive => (exhaustive_coupling(t, Continuation::Swapped)?, "exhaustive"),
        CoupleMode::Sampled { samples, seed } => (
            sampled_coupling_check(t, samples, seed, Continuation::Swapped)?,
            "sampled",
        ),
    };
    let document = CouplingDocument {
        report,
        mode: mode_name,
        note: report.is_empty().then_some("no samples"),
    };
    sink.write_with(|w| write_json(&document, w))?;
    if report.max_difference > COUPLING_BOUND {
        return Err(CliError::Verification(format!(
            "coupled difference {} exceeds {COUPLING_BOUND}",
            report.max_difference
        )));
    }
    Ok(())
}
