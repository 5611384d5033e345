//! `radialpf`: validate, solve and compare radial feeder files.
//!
//! Exit status: 0 success, 1 parse/usage/IO error, 2 invalid feeder,
//! 3 solver failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use radialpf::io::{self, FeederDocument, OutputFormat};
use radialpf::linsolve::{self, LinearizationPoint, Method, Mode};
use radialpf::metrics::{self, MetricsReport};
use radialpf::{solve_bfs, BfsOptions, Error, Network, Solution};

const EXIT_PARSE: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_SOLVER: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "radialpf",
    version,
    about = "Load flow for radial distribution feeders"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check that a feeder file is a valid radial network.
    Validate { input: PathBuf },
    /// Solve a feeder and print its voltages and losses.
    Solve {
        input: PathBuf,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Solve with a linear method and with the sweep, and report the error.
    Compare {
        input: PathBuf,
        /// Linear formulation measured against the sweep.
        #[arg(long, value_enum, default_value = "linear-full")]
        linear: LinearArg,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Solve with the method named in the file and report losses, V_min,
    /// unbalance and (for linear methods) the error against the sweep.
    Metrics {
        input: PathBuf,
        #[command(flatten)]
        out: OutputArgs,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    LinearSimple,
    LinearFull,
    Bfs,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::LinearSimple => Method::LinearSimple,
            MethodArg::LinearFull => Method::LinearFull,
            MethodArg::Bfs => Method::Bfs,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LinearArg {
    LinearSimple,
    LinearFull,
}

impl From<LinearArg> for Mode {
    fn from(m: LinearArg) -> Self {
        match m {
            LinearArg::LinearSimple => Mode::Simple,
            LinearArg::LinearFull => Mode::Full,
        }
    }
}

#[derive(Debug, Args)]
struct SolverArgs {
    /// Linearization point: `1.05`, `1.0-0.02j` or `1.02@-5` (degrees).
    /// Rotated onto phases b and c in three-phase feeders.
    #[arg(long, value_parser = parse_phasor, allow_hyphen_values = true)]
    v0: Option<Complex64>,
    /// Sweep stopping tolerance on max |dV| (p.u.).
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
}

#[derive(Debug, Args)]
struct OutputArgs {
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
    /// Write here instead of standard output.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => OutputFormat::Json,
            FormatArg::Csv => OutputFormat::Csv,
        }
    }
}

fn parse_phasor(s: &str) -> Result<Complex64, String> {
    let s = s.trim();
    let bad = || format!("cannot read '{s}' as a phasor (try 1.05, 1.0-0.02j or 1.02@-5)");
    if let Some((mag, deg)) = s.split_once('@') {
        let mag: f64 = mag.trim().parse().map_err(|_| bad())?;
        let deg: f64 = deg.trim().parse().map_err(|_| bad())?;
        return Ok(Complex64::from_polar(mag, deg.to_radians()));
    }
    let Some(body) = s.strip_suffix(['j', 'i']) else {
        return s
            .parse()
            .map(|re| Complex64::new(re, 0.0))
            .map_err(|_| bad());
    };
    // split before the sign of the imaginary part, skipping exponent signs
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (&body[..k], &body[k..]),
        None => ("0", body),
    };
    let im = match im {
        "" | "+" => "1",
        "-" => "-1",
        other => other,
    };
    let re: f64 = re.parse().map_err(|_| bad())?;
    let im: f64 = im.trim_start_matches('+').parse().map_err(|_| bad())?;
    Ok(Complex64::new(re, im))
}

/// A failure and the exit status it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Validation(_) => EXIT_INVALID,
            e if e.is_solver_error() => EXIT_SOLVER,
            _ => EXIT_PARSE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: EXIT_PARSE,
        message: format!("{}: {e}", path.display()),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| io_failure(path, e))
}

fn emit(text: &str, out: &OutputArgs) -> Result<(), Failure> {
    match &out.output {
        Some(path) => fs::write(path, text).map_err(|e| io_failure(path, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| io_failure(Path::new("<stdout>"), e))
        }
    }
}

fn bfs_options(doc: &FeederDocument, args: Option<&SolverArgs>) -> BfsOptions {
    let mut opts = doc.options.bfs;
    if let Some(a) = args {
        opts.tolerance = a.tolerance.unwrap_or(opts.tolerance);
        opts.max_iterations = a.max_iterations.unwrap_or(opts.max_iterations);
    }
    opts
}

fn linearization_point(
    doc: &FeederDocument,
    net: &Network,
    args: Option<&SolverArgs>,
) -> LinearizationPoint {
    match args.and_then(|a| a.v0) {
        Some(v0) => LinearizationPoint::uniform(v0, net.phase_count()),
        None => doc
            .options
            .v0
            .clone()
            .unwrap_or_else(|| LinearizationPoint::at_slack(net)),
    }
}

fn run_method(
    method: Method,
    doc: &FeederDocument,
    net: &Network,
    args: Option<&SolverArgs>,
) -> Result<Solution, Error> {
    let mode = match method {
        Method::Bfs => return solve_bfs(net, &bfs_options(doc, args)),
        Method::LinearSimple => Mode::Simple,
        Method::LinearFull => Mode::Full,
    };
    let v0 = linearization_point(doc, net, args);
    linsolve::solve_linear(&linsolve::assemble(net, &v0, mode)?)
}

fn load(input: &Path) -> Result<(FeederDocument, Network), Failure> {
    let doc = io::parse_document(&read(input)?)?;
    let net = Network::new(doc.feeder.clone())?;
    Ok((doc, net))
}

fn validate(input: &Path) -> Result<(), Failure> {
    let doc = io::parse_document_unchecked(&read(input)?)?;
    let report = radialpf::validate_radial(&doc.feeder);
    if report.ok() {
        println!("OK");
        return Ok(());
    }
    let mut text = String::new();
    for v in &report.violations {
        text.push_str(&v.to_string());
        text.push('\n');
    }
    print!("{text}");
    Err(Failure {
        code: EXIT_INVALID,
        message: format!("{} violation(s)", report.violations.len()),
    })
}

fn solve(
    input: &Path,
    method: Option<MethodArg>,
    solver: &SolverArgs,
    out: &OutputArgs,
) -> Result<(), Failure> {
    let (doc, net) = load(input)?;
    let method = method
        .map(Method::from)
        .or(doc.options.method)
        .unwrap_or(Method::LinearFull);
    let sol = run_method(method, &doc, &net, Some(solver))?;
    let report = metrics::report(&net, &sol, None)?;
    emit(&io::write_solution(&sol, &report, out.format.into()), out)
}

fn compare(
    input: &Path,
    linear: LinearArg,
    solver: &SolverArgs,
    out: &OutputArgs,
) -> Result<(), Failure> {
    let (doc, net) = load(input)?;
    let method = Mode::from(linear).method();
    let lin = run_method(method, &doc, &net, Some(solver))?;
    let reference = solve_bfs(&net, &bfs_options(&doc, Some(solver)))?;
    let cmp = metrics::compare(&net, lin, reference)?;
    emit(&io::write_comparison(&cmp, out.format.into()), out)
}

fn report(input: &Path, out: &OutputArgs) -> Result<(), Failure> {
    let (doc, net) = load(input)?;
    let method = doc.options.method.unwrap_or(Method::LinearFull);
    let sol = run_method(method, &doc, &net, None)?;
    let rep: MetricsReport = if method == Method::Bfs {
        metrics::report(&net, &sol, None)?
    } else {
        let reference = solve_bfs(&net, &bfs_options(&doc, None))?;
        metrics::report(&net, &sol, Some(&reference))?
    };
    emit(&io::write_solution(&sol, &rep, out.format.into()), out)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Validate { input } => validate(input),
        Command::Solve {
            input,
            method,
            solver,
            out,
        } => solve(input, *method, solver, out),
        Command::Compare {
            input,
            linear,
            solver,
            out,
        } => compare(input, *linear, solver, out),
        Command::Metrics { input, out } => report(input, out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_PARSE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            log::debug!("exit status {}", f.code);
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
