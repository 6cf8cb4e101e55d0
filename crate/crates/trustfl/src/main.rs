use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use trustfl::checks::run_checks;
use trustfl::config::{flag_overrides, parse_config, RunConfig};
use trustfl::output::{emit_comparison, emit_outputs, Formats};
use trustfl::runner::run_experiment;
use trustfl::{CliError, Result};
use trustfl_core::engine::describe;
use trustfl_core::Variant;

#[derive(Debug, Parser)]
#[command(name = "trustfl", version, about = "Trust-filtered decentralized multi-task learning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one variant and write its reports.
    Run(RunArgs),
    /// Run the trust-filtered variant and the Byzantine-free baseline and
    /// plot them together.
    Compare(RunArgs),
    /// Run the invariant and reduction checks at small scale.
    Check {
        /// Randomized cases per property.
        #[arg(long, default_value_t = 10_000)]
        cases: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML config file; defaults are used for anything it leaves out.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    realizations: Option<usize>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Comma-separated subset of csv, json, plot.
    #[arg(long, default_value = "csv,json")]
    format: Formats,
    /// trusted, old-baseline, or oracle-filter.
    #[arg(long)]
    variant: Option<String>,
    /// fixed-vector, gaussian-noise, sign-flip, dual-inflation, or two-faced.
    #[arg(long)]
    attack: Option<String>,
    /// Dotted-key override such as `algorithm.horizon=100`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads for realizations (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

impl RunArgs {
    fn load(&self) -> Result<RunConfig> {
        let mut overrides = self.overrides.clone();
        overrides.extend(flag_overrides(
            self.seed,
            self.realizations,
            self.variant.as_deref(),
            self.attack.as_deref(),
        ));
        parse_config(self.config.as_deref(), &overrides)
    }
}

fn command_line() -> String {
    std::env::args().collect::<Vec<_>>().join(" ")
}

fn run(args: RunArgs) -> Result<()> {
    let rc = args.load()?;
    trustfl::output::ensure_writable(&args.out_dir)?;
    eprintln!("running {}", describe(&rc.sim));
    let result = run_experiment(&rc.sim, args.threads)?;
    let bundle = emit_outputs(&rc, &result, &args.out_dir, args.format, &command_line())?;
    for f in bundle.files() {
        println!("{}", f.display());
    }
    Ok(())
}

fn compare(args: RunArgs) -> Result<()> {
    let proposed = args.load()?;
    if proposed.sim.variant == Variant::OldBaseline {
        return Err(CliError::Usage("compare needs a filtered variant, not old-baseline".into()));
    }
    trustfl::output::ensure_writable(&args.out_dir)?;
    let mut baseline = proposed.clone();
    baseline.sim.variant = Variant::OldBaseline;

    eprintln!("running {}", describe(&proposed.sim));
    let p = run_experiment(&proposed.sim, args.threads)?;
    eprintln!("running {}", describe(&baseline.sim));
    let b = run_experiment(&baseline.sim, args.threads)?;
    let bundles = emit_comparison((&proposed, &p), (&baseline, &b), &args.out_dir, args.format, &command_line())?;
    for bundle in &bundles {
        for f in bundle.files() {
            println!("{}", f.display());
        }
    }
    if let (Some(pt), Some(bt)) = (p.mean.timeavg_regret.last(), b.mean.timeavg_regret.last()) {
        eprintln!("final time-average regret: proposed {pt:.6}, baseline {bt:.6}");
    }
    Ok(())
}

fn check(cases: usize, seed: u64, threads: Option<usize>) -> Result<bool> {
    let outcomes = run_checks(cases, seed, threads)?;
    let mut ok = true;
    for c in &outcomes {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        ok &= c.passed;
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => run(args).map(|_| true),
        Command::Compare(args) => compare(args).map(|_| true),
        Command::Check { cases, seed, threads } => check(cases, seed, threads),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
