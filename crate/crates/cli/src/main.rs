use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ran_cli::acceptance::{self, Context, Scale, CRITERIA};
use ran_cli::commands::{self, CliError, CliResult, CoupleMode, GenerateArgs, SimulateArgs};

#[derive(Parser)]
#[command(
    name = "ran",
    version,
    about = "Random Apollonian network generator and checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Grow one network and print its size.
    Generate {
        #[arg(long)]
        t: usize,
        #[arg(long)]
        seed: u64,
        /// Edge list output.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Degree histogram CSV output.
        #[arg(long)]
        hist: Option<PathBuf>,
        /// Choice trace output, one face index per line.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        memory_budget_mb: Option<usize>,
    },
    /// Expected degree counts from the recurrence at step t.
    Expect {
        #[arg(long)]
        t: usize,
        #[arg(long, default_value_t = 1000)]
        kmax: usize,
        /// Use exact rational arithmetic.
        #[arg(long)]
        exact: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the limit coefficients b_k for 3 <= k <= kmax.
    Limits {
        #[arg(long)]
        kmax: u64,
    },
    /// Monte Carlo replicates summarized as JSON.
    Simulate {
        #[arg(long)]
        t: usize,
        #[arg(long)]
        replicates: u64,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long, default_value_t = ran::montecarlo::DEFAULT_K_REPORT_MAX)]
        k_report_max: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact expectations by enumerating every choice sequence.
    Oracle {
        #[arg(long)]
        t: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the bounded-difference property on coupled sequences.
    Couple(CoupleArgs),
    /// Run the acceptance criteria.
    Verify {
        /// Problem sizes divided by 10.
        #[arg(long)]
        quick: bool,
        /// Comma-separated criterion numbers.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("mode").required(true).args(["exhaustive", "samples"])))]
struct CoupleArgs {
    #[arg(long)]
    t: usize,
    #[arg(long)]
    exhaustive: bool,
    #[arg(long, requires = "seed")]
    samples: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(command: Cmd) -> CliResult<()> {
    match command {
        Cmd::Generate {
            t,
            seed,
            out,
            hist,
            trace,
            memory_budget_mb,
        } => commands::generate(&GenerateArgs {
            t,
            seed,
            out,
            hist,
            trace,
            memory_budget_mb,
        }),
        Cmd::Expect {
            t,
            kmax,
            exact,
            out,
        } => commands::expect(t, kmax, exact, out.as_deref()),
        Cmd::Limits { kmax } => commands::limits(kmax),
        Cmd::Simulate {
            t,
            replicates,
            seed,
            workers,
            k_report_max,
            out,
        } => commands::simulate(&SimulateArgs {
            t,
            replicates,
            seed,
            workers,
            k_report_max,
            out,
        }),
        Cmd::Oracle { t, out } => commands::oracle(t, out.as_deref()),
        Cmd::Couple(args) => {
            let mode = match (args.exhaustive, args.samples, args.seed) {
                (true, _, _) => CoupleMode::Exhaustive,
                (false, Some(samples), Some(seed)) => CoupleMode::Sampled { samples, seed },
                _ => return Err(CliError::Usage("--samples needs --seed".into())),
            };
            commands::couple(args.t, mode, args.out.as_deref())
        }
        Cmd::Verify { quick, only } => verify(quick, only),
    }
}

fn verify(quick: bool, only: Vec<u8>) -> CliResult<()> {
    let ids: Vec<u8> = if only.is_empty() {
        CRITERIA.iter().map(|(id, _)| *id).collect()
    } else {
        only
    };
    if let Some(bad) = ids
        .iter()
        .find(|id| !CRITERIA.iter().any(|(c, _)| c == *id))
    {
        return Err(CliError::Usage(format!("no criterion {bad}")));
    }
    let ctx = Context {
        binary: std::env::current_exe().ok(),
        workers: None,
    };
    let scale = if quick { Scale::Quick } else { Scale::Full };
    let results = acceptance::run_all(&ids, scale, &ctx, |r| println!("{r}"));
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        return Err(CliError::Verification(format!("{failed} criteria failed")));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ran: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
