use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use log::info;

use dynkclust::facility::FracLmp;
use dynkclust::harness::{compare_with_oracle, run_stream, EngineConfig, Mode, OracleReport};
use dynkclust::oracles::brute_opt_clustering;
use dynkclust::stream::{parse, Stream};
use dynkclust::{Error, Norm};

#[derive(Parser)]
#[command(name = "dynkclust", version, about = "Dynamic (k,p)-clustering over update streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Maintain a clustering through the stream and write per-update metrics.
    Run(RunArgs),
    /// Estimate the k-median value after every update.
    Value(ValueArgs),
    /// Fractional facility location on the final point set.
    Ufl(UflArgs),
    /// Exact optimum on the final point set by enumeration.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    stream: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0.5)]
    epsilon: f64,
    /// Norm exponent: a positive integer or `inf`.
    #[arg(long, default_value = "1")]
    p: Norm,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    metrics_out: PathBuf,
    /// Fail with exit code 2 on any invariant violation.
    #[arg(long)]
    strict: bool,
    /// Cap on local-search iterations per rebuild.
    #[arg(long)]
    max_iters: Option<u64>,
    /// Check the cost against the exact optimum every N updates.
    #[arg(long, value_name = "N", num_args = 0..=1, default_missing_value = "1")]
    oracle_compare: Option<usize>,
    /// Fill the elapsed_us column with wall-clock time.
    #[arg(long)]
    record_timing: bool,
}

#[derive(Args)]
struct ValueArgs {
    #[arg(long)]
    stream: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long)]
    metrics_out: PathBuf,
    #[arg(long)]
    record_timing: bool,
}

#[derive(Args)]
struct UflArgs {
    #[arg(long)]
    stream: PathBuf,
    #[arg(long)]
    lambda: f64,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    stream: PathBuf,
    /// Largest k in the table; every k from 1 up is listed.
    #[arg(long)]
    k: usize,
    #[arg(long, default_value = "1")]
    p: Norm,
}

fn load(path: &Path) -> anyhow::Result<Stream> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse(&text).with_context(|| format!("{}", path.display()))
}

fn write_metrics(stream: &Stream, config: &EngineConfig, path: &Path) -> anyhow::Result<()> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let rows = run_stream(stream, config, BufWriter::new(file))?;
    info!("processed {} updates into {}", rows.len(), path.display());
    Ok(())
}

fn print_report(report: &OracleReport) -> io::Result<()> {
    let mut out = io::stdout().lock();
    writeln!(out, "update_idx,n_live,cost,opt,ratio,lower,upper,pass")?;
    for c in &report.checkpoints {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            c.update_idx, c.n_live, c.cost, c.opt, c.ratio, c.lower, c.upper, c.pass
        )?;
    }
    Ok(())
}

fn run(args: RunArgs) -> anyhow::Result<()> {
    let stream = load(&args.stream)?;
    let mut config = EngineConfig::new(Mode::Run, args.k, args.epsilon, args.p, args.seed);
    config.strict = args.strict;
    config.max_iters = args.max_iters;
    config.record_timing = args.record_timing;
    write_metrics(&stream, &config, &args.metrics_out)?;
    if let Some(every) = args.oracle_compare {
        let report = compare_with_oracle(&stream, &config, every)?;
        print_report(&report)?;
        if !report.all_pass() {
            bail!("cost exceeded the approximation bound at some checkpoint");
        }
    }
    Ok(())
}

fn value(args: ValueArgs) -> anyhow::Result<()> {
    let stream = load(&args.stream)?;
    let mut config = EngineConfig::new(Mode::Value, args.k, args.epsilon, Norm::Finite(1), 0);
    config.record_timing = args.record_timing;
    write_metrics(&stream, &config, &args.metrics_out)
}

fn ufl(args: UflArgs) -> anyhow::Result<()> {
    let space = load(&args.stream)?.final_space()?;
    let lmp = FracLmp::new(&space)?;
    let sol = lmp.solution(&space, args.lambda)?;
    let mut out = io::stdout().lock();
    writeln!(out, "lambda,open_mass,connection_cost,total_cost")?;
    writeln!(
        out,
        "{},{},{},{}",
        sol.lambda,
        sol.open_mass,
        sol.connection_cost,
        sol.lambda * sol.open_mass + sol.connection_cost
    )?;
    writeln!(out)?;
    writeln!(out, "id,y")?;
    for (id, y) in &sol.y {
        writeln!(out, "{id},{y}")?;
    }
    Ok(())
}

fn oracle(args: OracleArgs) -> anyhow::Result<()> {
    let space = load(&args.stream)?.final_space()?;
    if args.k == 0 {
        bail!("k must be at least 1");
    }
    let mut out = io::stdout().lock();
    writeln!(out, "k,opt,centers")?;
    for k in 1..=args.k {
        let (centers, opt) = brute_opt_clustering(&space, k, args.p)?;
        let ids: Vec<String> = centers.iter().map(ToString::to_string).collect();
        writeln!(out, "{k},{opt},{}", ids.join(" "))?;
    }
    Ok(())
}

fn is_violation(err: &anyhow::Error) -> bool {
    err.chain().any(|e| {
        let mut e = e.downcast_ref::<Error>();
        while let Some(inner) = e {
            match inner {
                Error::MembershipViolation(_) => return true,
                Error::AtLine { source, .. } => e = Some(source),
                _ => e = None,
            }
        }
        false
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DYNKCLUST_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Value(args) => value(args),
        Command::Ufl(args) => ufl(args),
        Command::Oracle(args) => oracle(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if is_violation(&err) { ExitCode::from(2) } else { ExitCode::FAILURE }
        }
    }
}
