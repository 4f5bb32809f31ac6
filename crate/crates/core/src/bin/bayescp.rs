use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bayescp::datagen::{SequenceKind, SequenceSpec};
use bayescp::figures::{self, Figure, FigureOptions};
use bayescp::runner::RunConfig;
use bayescp::verify::{self, Suite, VerifyOptions};
use bayescp::{Algorithm, Error, PredictorConfig};

#[derive(Parser)]
#[command(
    name = "bayescp",
    version,
    about = "Online conformal prediction with prior-regularized beliefs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run predictors over a score sequence and write per-round records.
    Run(RunArgs),
    /// Check belief engines against brute-force minimizers and coverage bounds.
    Verify(VerifyArgs),
    /// Emit the data series behind a figure.
    Figure(FigureArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Algorithm (bayesian, quantized, discounted, erm, ogd, multi_ogd); repeatable.
    #[arg(long = "algo")]
    algos: Vec<String>,
    /// Sequence kind (iid_uniform, alternating, scripted_shift) or csv:<path>.
    #[arg(long)]
    seq: Option<String>,
    /// Number of rounds.
    #[arg(long = "T")]
    horizon: Option<usize>,
    /// Extra query level on top of 0.5, 0.7, 0.9; repeatable.
    #[arg(long = "alpha")]
    alphas: Vec<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    grid_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args)]
struct VerifyArgs {
    /// theorem1, theorem6, sandwich or all.
    #[arg(default_value = "all")]
    suite: String,
    /// Instances per suite (default 200, or 50 for the sandwich).
    #[arg(long)]
    instances: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Oracle scan points over [0, R].
    #[arg(long, default_value_t = bayescp::oracle::DEFAULT_RESOLUTION)]
    resolution: usize,
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args)]
struct FigureArgs {
    /// monotonicity, switching or iid_quantiles.
    name: String,
    #[arg(long = "T")]
    horizon: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

/// Exit 2 for bad input, 1 for failures at run time.
enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_)
            | Error::InvalidLevel(_)
            | Error::InvalidDomain(_)
            | Error::InvalidPrior(_)
            | Error::TooFewLevels => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn parse_seq(s: &str) -> Result<SequenceKind, Failure> {
    if let Some(path) = s.strip_prefix("csv:") {
        return Ok(SequenceKind::Csv { path: path.into() });
    }
    match s {
        "iid_uniform" => Ok(SequenceKind::IidUniform),
        "alternating" => Ok(SequenceKind::Alternating),
        "scripted_shift" => Ok(SequenceKind::ScriptedShift { segments: vec![] }),
        _ => Err(Failure::Usage(format!("unknown sequence kind '{s}'"))),
    }
}

fn build_run_config(args: &RunArgs) -> Result<RunConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::from_json(&text)?
        }
        None => RunConfig {
            algorithms: vec![],
            sequence: SequenceSpec::iid_uniform(1000, 0, 1.0),
            levels: vec![],
            out: PathBuf::from("out"),
        },
    };
    if let Some(s) = &args.seq {
        cfg.sequence.kind = parse_seq(s)?;
    }
    if let Some(t) = args.horizon {
        cfg.sequence.length = Some(t);
    }
    if let Some(seed) = args.seed {
        cfg.sequence.seed = seed;
    }
    if !args.algos.is_empty() {
        cfg.algorithms = args
            .algos
            .iter()
            .map(|a| {
                let mut p = PredictorConfig::new(Algorithm::parse(a)?);
                p.upper = cfg.sequence.upper;
                Ok(p)
            })
            .collect::<Result<_, Error>>()?;
    }
    if cfg.algorithms.is_empty() {
        cfg.algorithms
            .push(PredictorConfig::new(Algorithm::Bayesian));
    }
    for a in &mut cfg.algorithms {
        if args.beta.is_some() && a.algorithm == Algorithm::Discounted {
            a.beta = args.beta;
        }
        if args.grid_size.is_some() {
            a.grid_size = args.grid_size;
        }
    }
    if !args.alphas.is_empty() {
        cfg.levels = args.alphas.clone();
    }
    if let Some(out) = &args.out {
        cfg.out = out.clone();
    }
    Ok(cfg)
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let cfg = build_run_config(&args)?;
    let reports = cfg.run(args.workers)?;
    let files = cfg.write_outputs(&reports)?;
    for (stem, rep) in cfg.stems().iter().zip(&reports) {
        let s = rep.summary();
        for l in &s.levels {
            println!(
                "{stem:<14} alpha={:<5} regret={:>12.4} coverage={:.4} ({:.2?})",
                l.alpha, l.regret, l.coverage, rep.wall_time
            );
        }
        if let Some(v) = s.monotonicity_violations {
            println!("{stem:<14} monotonicity violations: {v}");
        }
    }
    println!("wrote {} files to {}", files.len(), cfg.out.display());
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<(), Failure> {
    let suites = if args.suite == "all" {
        Suite::ALL.to_vec()
    } else {
        vec![Suite::parse(&args.suite)?]
    };
    if args.instances == Some(0) {
        return Err(Failure::Usage("--instances must be at least 1".into()));
    }
    let mut failed = 0;
    for suite in suites {
        let opts = VerifyOptions {
            instances: args.instances.unwrap_or(suite.default_instances()),
            seed: args.seed,
            workers: args.workers,
            resolution: args.resolution,
        };
        let report = verify::run_suite(suite, &opts)?;
        println!("{report}");
        if !report.passed() {
            failed += 1;
        }
    }
    if failed > 0 {
        return Err(Failure::Runtime(format!("{failed} suite(s) failed")));
    }
    Ok(())
}

fn cmd_figure(args: FigureArgs) -> Result<(), Failure> {
    let figure = Figure::parse(&args.name)?;
    let opts = FigureOptions {
        horizon: args.horizon,
        seed: args.seed,
        workers: args.workers,
    };
    for path in figures::render(figure, &opts, &args.out)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Figure(a) => cmd_figure(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
