use std::path::PathBuf;
use std::process::ExitCode;

use balayage::Error;
use balayage_cli::config::{Format, RunConfig};
use balayage_cli::experiments::Registry;
use balayage_cli::{execute, report, resolve};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "balayage", version, about = "Balayage experiments for classical and Riesz potentials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named in the config.
    Run(RunArgs),
    /// Validate a config without running it.
    Validate {
        config: PathBuf,
    },
    /// One-shot sweep of ν onto a ball union.
    Balayage(RunArgs),
    /// One-shot shrink-factor solve.
    Shrink(RunArgs),
    /// Approximate a convex combination of sweeps by one sweep.
    Theorem(RunArgs),
    /// Lattice approximation of the sweep onto an open set.
    GridApprox(RunArgs),
    /// Exit distributions as Jensen measures.
    Jensen(RunArgs),
    /// Path simulation against the exit chain.
    Skorokhod(RunArgs),
    /// Harnack ratio audit.
    Harnack(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    /// Worker threads for the walk engine (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
    Both,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => Format::Json,
            FormatArg::Csv => Format::Csv,
            FormatArg::Both => Format::Both,
        }
    }
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn run(args: RunArgs, expected: Option<&str>) -> ExitCode {
    let mut cfg = match RunConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    if let Some(s) = args.seed {
        cfg.mc.seed = s;
    }
    if let Some(n) = args.samples {
        cfg.mc.samples = n;
    }
    if let Some(w) = args.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w).build_global() {
            eprintln!("error: cannot set up {w} workers: {e}");
            return ExitCode::from(1);
        }
    }
    let registry = Registry::default();
    let rep = match execute(&registry, &cfg, expected) {
        Ok(r) => r,
        Err(e) => return fail(&e),
    };
    let dir = args.out_dir.or(cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from("."));
    let format = args.format.map(Format::from).unwrap_or(cfg.output.format);
    let stem = cfg.output.name.clone().unwrap_or_else(|| rep.experiment.clone());
    match report::write_report(&rep, &dir, &stem, format) {
        Ok(paths) => {
            print!("{}", report::summary(&rep));
            for p in paths {
                println!("wrote {}", p.display());
            }
        }
        Err(e) => return fail(&e),
    }
    if rep.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(3)
    }
}

fn validate(path: PathBuf) -> ExitCode {
    let registry = Registry::default();
    let diag = RunConfig::load(&path).and_then(|cfg| resolve(&registry, &cfg, None)?.validate(&cfg));
    match diag {
        Ok(lines) => {
            println!("ok");
            for l in lines {
                println!("  {l}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run(a) => run(a, None),
        Command::Validate { config } => validate(config),
        Command::Balayage(a) => run(a, Some("balayage")),
        Command::Shrink(a) => run(a, Some("shrink")),
        Command::Theorem(a) => run(a, Some("theorem")),
        Command::GridApprox(a) => run(a, Some("grid-approx")),
        Command::Jensen(a) => run(a, Some("jensen")),
        Command::Skorokhod(a) => run(a, Some("skorokhod")),
        Command::Harnack(a) => run(a, Some("harnack")),
    }
}
