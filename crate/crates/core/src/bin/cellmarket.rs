use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use cellmarket::scenario::load_scenario;
use cellmarket::seller::ResponseRule;
use cellmarket::sweep::{run_sweep, AxisSpec, Command, SweepOptions};
use cellmarket::Error;

#[derive(Clone, Copy, ValueEnum)]
enum Cmd {
    Coverage,
    Tradeoff,
    ArealPower,
    Knapsack,
    Cournot,
    Simulate,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Coverage => Command::Coverage,
            Cmd::Tradeoff => Command::Tradeoff,
            Cmd::ArealPower => Command::ArealPower,
            Cmd::Knapsack => Command::Knapsack,
            Cmd::Cournot => Command::Cournot,
            Cmd::Simulate => Command::Simulate,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Rule {
    ProfitMax,
    Stationary,
}

/// Sweeps coverage, power and market quantities of base-station sharing
/// scenarios and writes the results as CSV and JSON.
///
/// Exit status: 0 on success, 1 for invalid input, 2 when a numerical
/// method failed to converge at some sweep point.
#[derive(Parser)]
#[command(name = "cellmarket", version)]
struct Cli {
    /// Quantity to sweep.
    #[arg(value_enum)]
    command: Cmd,

    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,

    /// Sweep axis as name=start:stop:steps, optionally with a trailing :log.
    #[arg(long)]
    axis: Option<String>,

    /// Directory receiving <command>.csv and <command>.json; CSV goes to
    /// stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Monte Carlo seed (defaults to the scenario's).
    #[arg(long)]
    seed: Option<u64>,

    /// Monte Carlo trials per point (defaults to the scenario's).
    #[arg(long)]
    trials: Option<u64>,

    /// Equilibrium convergence tolerance.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,

    /// Weight of the new best response in each equilibrium update.
    #[arg(long, default_value_t = 0.5)]
    damping: f64,

    /// Equilibrium iteration budget.
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,

    /// Seller best-response rule.
    #[arg(long, value_enum, default_value_t = Rule::ProfitMax)]
    rule: Rule,

    /// Worker threads (defaults to one per core); never changes the output.
    #[arg(long)]
    threads: Option<usize>,
}

fn run(cli: Cli) -> Result<bool, Error> {
    let cfg = load_scenario(&cli.scenario)?;
    let axis = cli.axis.as_deref().map(str::parse::<AxisSpec>).transpose()?;
    let opts = SweepOptions {
        seed: cli.seed,
        trials: cli.trials,
        tolerance: cli.tol,
        damping: cli.damping,
        max_iterations: cli.max_iter,
        rule: match cli.rule {
            Rule::ProfitMax => ResponseRule::ProfitMax,
            Rule::Stationary => ResponseRule::Stationary,
        },
    };
    let command = Command::from(cli.command);

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::InvalidParameter("threads must be >= 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start worker threads: {e}")))?;
    let result = pool.install(|| run_sweep(&cfg, command, axis.as_ref(), &opts))?;

    let io_err = |path: &PathBuf, e: std::io::Error| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    match &cli.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
            let csv = dir.join(format!("{command}.csv"));
            std::fs::write(&csv, result.to_csv()).map_err(|e| io_err(&csv, e))?;
            let json = dir.join(format!("{command}.json"));
            std::fs::write(&json, result.to_json()).map_err(|e| io_err(&json, e))?;
        }
        None => {
            let mut out = std::io::stdout().lock();
            match out
                .write_all(result.to_csv().as_bytes())
                .and_then(|()| out.flush())
            {
                // a closed reader such as `head` is not a failure
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    return Err(io_err(&PathBuf::from("<stdout>"), e));
                }
                _ => {}
            }
        }
    }

    let failed = result.errors.iter().flatten().count();
    if failed > 0 {
        eprintln!(
            "{failed} of {} points reported errors; see the error column",
            result.axis_values.len()
        );
    }
    Ok(result.has_nonconvergence())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_nonconvergence() { 2 } else { 1 })
        }
    }
}
