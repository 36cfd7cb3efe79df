use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use spca::harness::{self, ExperimentSpec, Format, GammaGrid, InputSource, LoadOptions, Mode};
use spca::{Parallelism, PenaltyKind, SpcaError};

const GIT_DESCRIBE: &str = env!("SPCA_GIT_DESCRIBE");

/// Sparse PCA experiments by generalized power iteration.
#[derive(Parser, Debug)]
#[command(name = "spca", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve at a single gamma.
    Solve(Opts),
    /// Explained variance against cardinality over a gamma grid.
    Tradeoff(Opts),
    /// Cardinality and its upper bound over a gamma grid.
    Cardsweep(Opts),
    /// Time the solver over one or more problem sizes.
    Bench(Opts),
    /// Ordinary PCA baseline.
    Pca(Opts),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Penalty {
    L1,
    L0,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OutFormat {
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct Opts {
    /// Delimited text matrix, rows = samples, columns = variables.
    #[arg(long, conflicts_with = "gen")]
    input: Option<PathBuf>,
    /// Gaussian instance `p,n,seed`; repeat for several sizes with bench.
    #[arg(long = "gen", value_parser = parse_gen)]
    gen: Vec<(usize, usize, u64)>,
    #[arg(long, value_enum, default_value = "l1")]
    penalty: Penalty,
    /// Absolute gamma (solve).
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    /// Relative grid `lo:hi:steps` with values in [0, 1).
    #[arg(long, value_parser = parse_grid)]
    gamma_grid: Option<GammaGrid>,
    /// Number of components; more than one selects the block method.
    #[arg(long, default_value_t = 1)]
    block: usize,
    /// Comma-separated positive component weights.
    #[arg(long, value_delimiter = ',')]
    mu: Option<Vec<f64>>,
    /// Center the columns of the data.
    #[arg(long)]
    center: bool,
    /// Relative objective change that stops the iteration.
    #[arg(long, default_value_t = 1e-4)]
    eps: f64,
    #[arg(long, default_value_t = 100_000)]
    max_iter: usize,
    #[arg(long, value_enum, default_value = "json")]
    format: OutFormat,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    reps: usize,
    /// Field separator of the input file (default: auto).
    #[arg(long)]
    delimiter: Option<char>,
    /// Skip the first data line of the input file.
    #[arg(long)]
    skip_header: bool,
    /// Run without the thread pool.
    #[arg(long)]
    sequential: bool,
}

fn parse_gen(s: &str) -> Result<(usize, usize, u64), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected p,n,seed, got {s:?}"));
    }
    let p = parts[0].parse().map_err(|e| format!("p: {e}"))?;
    let n = parts[1].parse().map_err(|e| format!("n: {e}"))?;
    let seed = parts[2].parse().map_err(|e| format!("seed: {e}"))?;
    if p == 0 || n == 0 {
        return Err("p and n must be >= 1".into());
    }
    Ok((p, n, seed))
}

fn parse_grid(s: &str) -> Result<GammaGrid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected lo:hi:steps, got {s:?}"));
    }
    let lo = parts[0].parse().map_err(|e| format!("lo: {e}"))?;
    let hi = parts[1].parse().map_err(|e| format!("hi: {e}"))?;
    let steps = parts[2].parse().map_err(|e| format!("steps: {e}"))?;
    GammaGrid::linear(lo, hi, steps).map_err(|e| e.to_string())
}

fn default_bench_sizes() -> Vec<(usize, usize, u64)> {
    [1000, 2000, 4000, 8000].iter().map(|&n| (500, n, 0)).collect()
}

fn build_spec(mode: Mode, o: &Opts) -> Result<ExperimentSpec, SpcaError> {
    let inputs: Vec<InputSource> = match (&o.input, o.gen.is_empty()) {
        (Some(path), _) => vec![InputSource::File {
            path: path.clone(),
            options: LoadOptions {
                delimiter: o.delimiter,
                center_columns: false,
                skip_header: o.skip_header,
            },
        }],
        (None, false) => o
            .gen
            .iter()
            .map(|&(p, n, seed)| InputSource::Gaussian { p, n, seed })
            .collect(),
        (None, true) if mode == Mode::Bench => default_bench_sizes()
            .into_iter()
            .map(|(p, n, seed)| InputSource::Gaussian { p, n, seed })
            .collect(),
        (None, true) => {
            return Err(SpcaError::InvalidArgument("one of --input or --gen is required".into()))
        }
    };
    let mut spec = ExperimentSpec::new(mode, inputs[0].clone());
    spec.inputs = inputs;
    spec.penalty = match o.penalty {
        Penalty::L1 => PenaltyKind::L1,
        Penalty::L0 => PenaltyKind::L0,
    };
    spec.gamma = o.gamma;
    spec.grid = o.gamma_grid.clone();
    spec.block = o.block;
    spec.mu = o.mu.clone();
    spec.center = o.center;
    spec.eps = o.eps;
    spec.max_iter = o.max_iter;
    spec.reps = o.reps;
    spec.parallelism = if o.sequential {
        Parallelism::Sequential
    } else {
        Parallelism::Parallel
    };
    spec.validate()?;
    Ok(spec)
}

fn run(cli: Cli) -> Result<(), SpcaError> {
    let (mode, opts) = match &cli.command {
        Command::Solve(o) => (Mode::Solve, o),
        Command::Tradeoff(o) => (Mode::Tradeoff, o),
        Command::Cardsweep(o) => (Mode::Cardsweep, o),
        Command::Bench(o) => (Mode::Bench, o),
        Command::Pca(o) => (Mode::Pca, o),
    };
    let spec = build_spec(mode, opts)?;
    let report = harness::run(&spec, GIT_DESCRIBE)?;
    let format = match opts.format {
        OutFormat::Json => Format::Json,
        OutFormat::Csv => Format::Csv,
    };
    harness::emit_results(&report, format, opts.out.as_deref())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
