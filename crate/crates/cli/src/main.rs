use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};
use hbspline::bench::{fit_rate, parse_key_values, run_example, write_csv, Mode, RunConfig, RATE_MIN_DOFS, RATE_WINDOW};
use hbspline::verification::{run_all, run_check};
use hbspline::Error;

const EXIT_SOLVER: u8 = 2;
const EXIT_CONFIG: u8 = 3;

/// Adaptive hierarchical B-spline solver and verification runs.
#[derive(Parser)]
#[command(name = "hbs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a registered example and write its convergence record as CSV.
    Solve(SolveArgs),
    /// Run the randomized inequality checks.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// key=value settings; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    example: Option<String>,
    #[arg(long)]
    degree: Option<usize>,
    /// adaptive | uniform
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    max_dofs: Option<usize>,
    /// Stop once the global indicator reaches this value.
    #[arg(long)]
    tol: Option<f64>,
    /// Stop once the energy error reaches this value.
    #[arg(long)]
    error_tol: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Cap on the number of hierarchy levels.
    #[arg(long)]
    max_depth: Option<usize>,
    /// Level-0 elements per unit length.
    #[arg(long)]
    init_elems: Option<usize>,
    /// CSV destination; standard output if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write per-iteration indicators next to the CSV.
    #[arg(long)]
    dump_indicators: bool,
    /// Recorded for reproducibility; runs are deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
#[command(group(ArgGroup::new("which").required(true).args(["all", "check"])))]
struct VerifyArgs {
    #[arg(long)]
    all: bool,
    #[arg(long)]
    check: Option<String>,
    #[arg(long, default_value_t = 2024)]
    seed: u64,
}

fn config_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_CONFIG)
}

fn build_config(args: &SolveArgs) -> Result<RunConfig, Error> {
    let mut config = RunConfig::new("", 2, Mode::Adaptive);
    if let Some(path) = &args.config {
        config.apply(&parse_key_values(&fs::read_to_string(path)?)?)?;
    }
    if let Some(v) = &args.example {
        config.example = v.clone();
    }
    if let Some(v) = args.degree {
        config.degree = v;
    }
    if let Some(v) = &args.mode {
        config.mode = v.parse()?;
    }
    if let Some(v) = args.theta {
        config.theta = v;
    }
    if args.max_dofs.is_some() {
        config.max_dofs = args.max_dofs;
    }
    if let Some(v) = args.tol {
        config.tol = v;
    }
    if let Some(v) = args.error_tol {
        config.error_tol = v;
    }
    if let Some(v) = args.max_iterations {
        config.max_iterations = v;
    }
    if let Some(v) = args.max_depth {
        config.max_depth = v;
    }
    if args.init_elems.is_some() {
        config.init_elems = args.init_elems;
    }
    if args.dump_indicators {
        let dir = match &args.out {
            Some(out) => out.with_extension("indicators"),
            None => PathBuf::from("indicators"),
        };
        config.dump_indicators = Some(dir);
    }
    if config.example.is_empty() {
        return Err(Error::InvalidArgument("no example given".into()));
    }
    Ok(config)
}

fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::UnknownExample(_) | Error::InvalidArgument(_) | Error::Parse(_) | Error::InvalidKnots(_) | Error::Io(_)
    )
}

fn solve(args: SolveArgs) -> ExitCode {
    let config = match build_config(&args) {
        Ok(c) => c,
        Err(e) => return config_error(e),
    };
    if let Some(seed) = args.seed {
        eprintln!("seed {seed}");
    }
    let (record, code) = match run_example(&config) {
        Ok(r) => (r, ExitCode::SUCCESS),
        Err(f) => {
            eprintln!("error: {f}");
            let code = if is_config_error(&f.error) && f.partial.is_empty() {
                EXIT_CONFIG
            } else {
                EXIT_SOLVER
            };
            (f.partial, ExitCode::from(code))
        }
    };
    let written = match &args.out {
        Some(path) => fs::File::create(path).and_then(|f| write_csv(&record, std::io::BufWriter::new(f))),
        None => write_csv(&record, std::io::stdout().lock()),
    };
    if let Err(e) = written {
        return config_error(e);
    }
    if let Some(last) = record.last() {
        let err = last.energy_error.map(|e| format!("{e:e}")).unwrap_or_else(|| "-".into());
        eprintln!(
            "{} {} p={}: {} iterations, {} dofs, energy error {err}, estimator {:e}",
            config.example,
            config.mode,
            config.degree,
            record.len(),
            last.dofs,
            last.estimator
        );
        if let Ok(rate) = fit_rate(&record, RATE_WINDOW, RATE_MIN_DOFS) {
            eprintln!("fitted rate {rate:.3}");
        }
    }
    code
}

fn verify(args: VerifyArgs) -> ExitCode {
    let reports = if args.all {
        run_all(args.seed)
    } else {
        run_check(args.check.as_deref().unwrap_or_default(), args.seed).map(|r| vec![r])
    };
    match reports {
        Ok(reports) => {
            for r in &reports {
                println!("{r}");
            }
            if reports.iter().all(|r| r.pass) {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => config_error(e),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match cli.command {
        Command::Solve(args) => solve(args),
        Command::Verify(args) => verify(args),
    }
}
