use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use owqc::io::{self, ErrorBody, ErrorReport, SchemeConfig, SimulationReport, SolutionReport, VerifyReport};
use owqc::matrix::to_rows;
use owqc::oracle::predicted_moments;
use owqc::search::SearchBudget;
use owqc::{
    compare_with_analytic, search_four_node, simulate_owqc, solve_auto, CaseSolution, FourNodeSettings, Layout,
    MonteCarloSettings, OwqcError, SimulationMode, Variant,
};
use serde::Serialize;

/// Relative covariance tolerance for `verify` in exact mode.
const EXACT_TOLERANCE: f64 = 1e-9;
/// Relative covariance tolerance for `verify` with Monte Carlo sampling.
const MONTE_CARLO_TOLERANCE: f64 = 1e-3;
const DEFAULT_SAMPLES: usize = 100_000;

#[derive(Parser)]
#[command(name = "owqc", version, about = "One-way computation on continuous-variable cluster states")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Options,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Solve a configuration for its transformation and error matrices.
    Analyze,
    /// Classify every graph of the single-mode study and score reachability.
    Search4,
    /// Simulate a configuration and compare with the analytic prediction.
    Verify,
    /// Simulate a configuration and print the output moments.
    Oracle,
    /// Euler factors and four-node template angles of a 2x2 matrix.
    Decompose,
}

#[derive(Args)]
struct Options {
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Sampling seed; for search4, the optimizer seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo samples; for search4, the number of random targets.
    #[arg(long, global = true)]
    samples: Option<usize>,
    #[arg(long, global = true, value_enum)]
    mode: Option<ModeArg>,
    /// Graph size for search4.
    #[arg(long, global = true, default_value_t = 4)]
    nodes: usize,
    /// Comma-separated edge weight set for search4.
    #[arg(long, global = true, default_value = "0,1", allow_hyphen_values = true)]
    weights: String,
    /// Expected computation class; checked against the partition.
    #[arg(long = "case", global = true, value_enum, default_value = "auto")]
    case: CaseArg,
    #[arg(long, global = true, value_enum)]
    variant: Option<VariantArg>,
    /// 2x2 matrix as a JSON array, e.g. "[[-1,0],[1,-1]]".
    #[arg(long, global = true, allow_hyphen_values = true)]
    matrix: Option<String>,
}

#[derive(ValueEnum, Clone, Copy)]
enum ModeArg {
    #[value(name = "monte_carlo")]
    MonteCarlo,
    #[value(name = "covariance_exact")]
    CovarianceExact,
}

#[derive(ValueEnum, Clone, Copy, PartialEq)]
enum CaseArg {
    Auto,
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    #[value(name = "3")]
    Three,
}

#[derive(ValueEnum, Clone, Copy)]
enum VariantArg {
    Upper,
    Lower,
}

/// A failure on the way out: an engine error, or one the front end raises.
#[derive(Debug)]
enum Failure {
    Engine(OwqcError),
    Other { code: &'static str, message: String },
}

impl From<OwqcError> for Failure {
    fn from(e: OwqcError) -> Self {
        Failure::Engine(e)
    }
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure::Other { code: "usage_error", message: message.into() }
    }

    fn report(&self) -> ErrorReport {
        match self {
            Failure::Engine(e) => e.into(),
            Failure::Other { code, message } => {
                ErrorReport { error: ErrorBody { code: code.to_string(), message: message.clone() } }
            }
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            Failure::Other { code: "usage_error", .. } => 2,
            _ => 1,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(&Failure::usage(e.render().to_string().trim_end())),
    };
    match run(cli.command, &cli.opts) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => fail(&f),
    }
}

fn fail(f: &Failure) -> ExitCode {
    let text = serde_json::to_string(&f.report()).unwrap_or_else(|_| "{\"error\":{\"code\":\"internal\"}}".into());
    eprintln!("{text}");
    ExitCode::from(f.exit_code())
}

fn run(command: Command, opts: &Options) -> Result<(), Failure> {
    match command {
        Command::Analyze => {
            let config = config(opts)?;
            let model = config.model()?;
            let angles = config.angles()?;
            check_case(opts.case, &config)?;
            let (solution, variant) = solve(&model, &config, &angles, opts.variant)?;
            emit(opts, &SolutionReport::new(&solution, &model, variant)?)
        }
        Command::Search4 => {
            let settings = FourNodeSettings {
                nodes: opts.nodes,
                weights: parse_weights(&opts.weights)?,
                targets: opts.samples.unwrap_or(FourNodeSettings::default().targets),
                budget: SearchBudget { seed: opts.seed.unwrap_or(0), ..SearchBudget::default() },
                ..FourNodeSettings::default()
            };
            emit(opts, &search_four_node(&settings)?)
        }
        Command::Oracle => {
            let config = config(opts)?;
            check_case(opts.case, &config)?;
            let program = config.program()?;
            let (mode, mc) = simulation(opts, &config)?;
            let stats = simulate_owqc(&program, mode, mc)?;
            emit(opts, &SimulationReport::new(&stats, program.squeezing))
        }
        Command::Verify => {
            let config = config(opts)?;
            check_case(opts.case, &config)?;
            let program = config.program()?;
            let (solution, _) = solve(&program.model, &config, &program.angles, opts.variant)?;
            let (mode, mc) = simulation(opts, &config)?;
            let stats = simulate_owqc(&program, mode, mc)?;
            let tolerance = match mode {
                SimulationMode::CovarianceExact => EXACT_TOLERANCE,
                SimulationMode::MonteCarlo => MONTE_CARLO_TOLERANCE,
            };
            let defect = compare_with_analytic(&solution, &program, &stats, tolerance, true)?;
            let (_, predicted) = predicted_moments(&solution, &program)?;
            let pass = defect.pass;
            let relative = defect.relative_defect;
            emit(
                opts,
                &VerifyReport {
                    case: solution.case_tag,
                    defect,
                    predicted_covariance: to_rows(&predicted),
                    simulation: SimulationReport::new(&stats, program.squeezing),
                    timestamp: io::timestamp(),
                },
            )?;
            if pass {
                Ok(())
            } else {
                Err(Failure::Other {
                    code: "verification_failed",
                    message: format!("relative covariance defect {relative:.3e} exceeds {tolerance:e}"),
                })
            }
        }
        Command::Decompose => {
            let text = opts.matrix.as_deref().ok_or_else(|| Failure::usage("decompose needs --matrix"))?;
            let m = io::parse_matrix(text)?;
            if m.shape() != (2, 2) {
                return Err(OwqcError::DimensionMismatch(format!(
                    "expected a 2x2 matrix, got {}x{}",
                    m.nrows(),
                    m.ncols()
                ))
                .into());
            }
            emit(opts, &io::decompose_report(&m)?)
        }
    }
}

fn config(opts: &Options) -> Result<SchemeConfig, Failure> {
    let path = opts.config.as_deref().ok_or_else(|| Failure::usage("this command needs --config"))?;
    Ok(io::load_config(path)?)
}

fn check_case(case: CaseArg, config: &SchemeConfig) -> Result<(), Failure> {
    let want = match case {
        CaseArg::Auto => return Ok(()),
        CaseArg::One => Layout::Case1,
        CaseArg::Two => Layout::Case2,
        CaseArg::Three => Layout::Case3,
    };
    let got = config.partition.layout();
    if got != want {
        return Err(OwqcError::LayoutMismatch(format!("--case asks for {want:?} but the partition is {got:?}")).into());
    }
    Ok(())
}

/// Solve, reporting which pivot variant produced the answer. Without an
/// explicit variant the upper one is tried first.
fn solve(
    model: &owqc::ClusterModel,
    config: &SchemeConfig,
    angles: &owqc::MeasurementAngles,
    variant: Option<VariantArg>,
) -> Result<(CaseSolution, Option<Variant>), Failure> {
    let p = &config.partition;
    if p.layout() == Layout::Case2 {
        return Ok((solve_auto(model, p, angles, None)?, None));
    }
    let requested = variant.map(|v| match v {
        VariantArg::Upper => Variant::Upper,
        VariantArg::Lower => Variant::Lower,
    });
    if let Some(v) = requested {
        return Ok((solve_auto(model, p, angles, Some(v))?, Some(v)));
    }
    match solve_auto(model, p, angles, Some(Variant::Upper)) {
        Ok(s) => Ok((s, Some(Variant::Upper))),
        Err(OwqcError::SingularBlock { .. } | OwqcError::SingularA12(_)) => {
            Ok((solve_auto(model, p, angles, Some(Variant::Lower))?, Some(Variant::Lower)))
        }
        Err(e) => Err(e.into()),
    }
}

fn simulation(opts: &Options, config: &SchemeConfig) -> Result<(SimulationMode, Option<MonteCarloSettings>), Failure> {
    let mode = match opts.mode {
        Some(ModeArg::MonteCarlo) => SimulationMode::MonteCarlo,
        Some(ModeArg::CovarianceExact) => SimulationMode::CovarianceExact,
        None => config.mode.unwrap_or(SimulationMode::CovarianceExact),
    };
    let settings = MonteCarloSettings {
        samples: opts.samples.or(config.samples).unwrap_or(DEFAULT_SAMPLES),
        seed: opts.seed.or(config.seed).unwrap_or(0),
        sampler: config.sampler.unwrap_or_default(),
    };
    if mode == SimulationMode::MonteCarlo && settings.samples < 2 {
        return Err(Failure::usage("monte_carlo needs at least 2 samples"));
    }
    Ok((mode, (mode == SimulationMode::MonteCarlo).then_some(settings)))
}

fn parse_weights(text: &str) -> Result<Vec<f64>, Failure> {
    text.replace('\u{2212}', "-")
        .split(',')
        .map(|w| {
            w.trim().parse::<f64>().map_err(|_| OwqcError::InvalidWeight(format!("cannot read weight {w:?}")).into())
        })
        .collect()
}

fn emit<T: Serialize>(opts: &Options, report: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(report).map_err(OwqcError::from)?;
    text.push('\n');
    match &opts.output {
        Some(path) => write(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text)
        .map_err(|e| Failure::Other { code: "io_error", message: format!("cannot write {}: {e}", path.display()) })
}
