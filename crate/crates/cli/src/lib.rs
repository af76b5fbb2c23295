//! Argument handling and subcommands for the `hyperdet` binary.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hyperdet::detmap::phi_coeffs;
use hyperdet::homotopy::{Predictor, TrackerSettings};
use hyperdet::hyperbolic::{check_hyperbolic, DEFAULT_DIRECTIONS, DEFAULT_TOL};
use hyperdet::io::{self, FormJson};
use hyperdet::linalg::C64;
use hyperdet::nuij::{fixed_endpoint, PathKind};
use hyperdet::oracle::solve_conic;
use hyperdet::parse::parse_polynomial_text;
use hyperdet::pipeline::{solve_parallel, verify, Detour, Representation, SolveOptions};
use hyperdet::ternary::TernaryForm;
use hyperdet::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_NOT_HYPERBOLIC: i32 = 2;
pub const EXIT_SOLVE_FAILED: i32 = 3;
pub const EXIT_IO: i32 = 4;
pub const EXIT_PARSE: i32 = 5;
/// Bad command line; kept apart from the codes above.
pub const EXIT_USAGE: i32 = 64;

/// Environment variable that overrides `--cache-dir`.
pub const CACHE_ENV: &str = "HYPERDET_CACHE_DIR";

/// Tags the stream that draws linear forms, so they differ from the
/// solver's own draws under the same seed.
const FORMS_STREAM: u64 = 0x004c_5f66_6f72_6d73;

#[derive(Debug, Parser)]
#[command(name = "hyperdet", version, about = "Determinantal representations of hyperbolic plane curves")]
struct Cli {
    /// error, warn, info, debug or trace
    #[arg(long, global = true)]
    log_level: Option<String>,
    /// key=value file; keys are long flag names, flags win
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute D and R with det(tI + xD + yR) = p
    Solve(SolveArgs),
    /// Check a representation against a form
    Verify(VerifyArgs),
    /// Expand det(tI + xD + yR) for a pair
    Forward(ForwardArgs),
    /// Print the universal endpoint of the path family
    Endpoint(EndpointArgs),
    /// Sampled hyperbolicity certificate
    Hyperbolic(HyperbolicArgs),
    #[command(hide = true, name = "oracle-conic")]
    OracleConic(InputArgs),
}

#[derive(Debug, Args)]
struct InputArgs {
    /// form as JSON, or as text when the file does not start with '{'
    #[arg(long, conflicts_with = "text", required_unless_present = "text")]
    input: Option<PathBuf>,
    /// form as text, e.g. "t^2 - x^2 - y^2"
    #[arg(long)]
    text: Option<String>,
}

/// Degrees up to this use the original path under `auto`; its coefficients
/// grow too fast for double precision beyond.
pub const AUTO_ORIGINAL_MAX_DEGREE: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PathChoice {
    /// original up to degree 7, randomized above
    Auto,
    Original,
    Randomized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DetourArg {
    Off,
    Auto,
    Always,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PredictorArg {
    Euler,
    Rk4,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    path: Option<PathChoice>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    detour: Option<DetourArg>,
    /// detour point as "re,im"
    #[arg(long)]
    detour_c: Option<String>,
    /// relative Newton tolerance
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    h_init: Option<f64>,
    #[arg(long, value_enum)]
    predictor: Option<PredictorArg>,
    #[arg(long)]
    perturb_eps: Option<f64>,
    #[arg(long)]
    max_retries: Option<usize>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    parallel_attempts: Option<usize>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    rep: PathBuf,
    /// largest accepted coefficient distance
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Debug, Args)]
struct ForwardArgs {
    #[arg(long)]
    pair: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EndpointArgs {
    #[arg(long)]
    degree: usize,
    #[arg(long, value_enum)]
    path: Option<PathChoice>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct HyperbolicArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    dirs: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
}

/// Where a form comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum Input {
    File(PathBuf),
    Text(String),
}

/// A fully resolved invocation: flags merged over the config file, the
/// cache variable applied and the seed fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub task: Task,
    pub log_level: log::LevelFilter,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Task {
    Solve {
        input: Input,
        output: Option<PathBuf>,
        path: PathChoice,
        options: SolveOptions,
        parallel_attempts: usize,
    },
    Verify {
        input: Input,
        rep: PathBuf,
        tol: f64,
    },
    Forward {
        pair: PathBuf,
        output: Option<PathBuf>,
    },
    Endpoint {
        degree: usize,
        path: PathChoice,
        seed: u64,
        output: Option<PathBuf>,
    },
    Hyperbolic {
        input: Input,
        dirs: usize,
        tol: f64,
    },
    OracleConic {
        input: Input,
    },
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NotHyperbolic(_) | Error::NotReal(_) | Error::LeadingCoefficientZero => EXIT_NOT_HYPERBOLIC,
        Error::SolveFailed { .. }
        | Error::TrackFailed(_)
        | Error::StartNotStrict
        | Error::SingularJacobian(_)
        | Error::BasisConditioningFailed(_) => EXIT_SOLVE_FAILED,
        Error::Io(_) => EXIT_IO,
        Error::Parse { .. } | Error::InhomogeneousInput | Error::Format(_) | Error::BadExponent(..) => EXIT_PARSE,
        _ => EXIT_FAILURE,
    }
}

fn config_error(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

/// `key=value` lines; `#` starts a comment.
fn read_config(path: &Path) -> hyperdet::Result<BTreeMap<String, String>> {
    let text = io::read_to_string(path)?;
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| config_error(format!("{}:{}: expected key=value", path.display(), n + 1)))?;
        map.insert(k.trim().replace('_', "-"), v.trim().to_string());
    }
    Ok(map)
}

struct Merge {
    file: BTreeMap<String, String>,
}

impl Merge {
    /// Flag value if given, else the config entry, parsed.
    fn pick<T: FromStr>(&mut self, flag: Option<T>, key: &str) -> hyperdet::Result<Option<T>> {
        let from_file = self.file.remove(key);
        if flag.is_some() {
            return Ok(flag);
        }
        from_file
            .map(|v| v.parse::<T>().map_err(|_| config_error(format!("config: bad value '{v}' for {key}"))))
            .transpose()
    }

    fn pick_enum<T: ValueEnum>(&mut self, flag: Option<T>, key: &str) -> hyperdet::Result<Option<T>> {
        let from_file = self.file.remove(key);
        if flag.is_some() {
            return Ok(flag);
        }
        from_file
            .map(|v| T::from_str(&v, true).map_err(|_| config_error(format!("config: bad value '{v}' for {key}"))))
            .transpose()
    }

    fn finish(self) -> hyperdet::Result<()> {
        match self.file.keys().next() {
            Some(k) => Err(config_error(format!("config: unknown or inapplicable key '{k}'"))),
            None => Ok(()),
        }
    }
}

fn input_of(a: InputArgs) -> Input {
    match (a.input, a.text) {
        (Some(p), _) => Input::File(p),
        (None, Some(t)) => Input::Text(t),
        (None, None) => unreachable!("clap requires one of --input / --text"),
    }
}

fn parse_complex(s: &str) -> hyperdet::Result<C64> {
    let bad = || config_error(format!("detour point '{s}' is not \"re,im\""));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    Ok(C64::new(a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

fn resolve(cli: Cli) -> hyperdet::Result<RunConfig> {
    let file = match &cli.config {
        Some(p) => read_config(p)?,
        None => BTreeMap::new(),
    };
    let mut m = Merge { file };
    let level: Option<String> = m.pick(cli.log_level, "log-level")?;
    let log_level = match level {
        Some(l) => log::LevelFilter::from_str(&l).map_err(|_| config_error(format!("bad log level '{l}'")))?,
        None => log::LevelFilter::Warn,
    };
    let task = match cli.command {
        Command::Solve(a) => {
            let defaults = SolveOptions::default();
            let td = TrackerSettings::default();
            let predictor = match m.pick_enum(a.predictor, "predictor")? {
                Some(PredictorArg::Euler) => Predictor::Euler,
                Some(PredictorArg::Rk4) => Predictor::Rk4,
                None => td.predictor,
            };
            let tracker = TrackerSettings {
                h_init: m.pick(a.h_init, "h-init")?.unwrap_or(td.h_init),
                newton_tol: m.pick(a.tol, "tol")?.unwrap_or(td.newton_tol),
                max_steps: m.pick(a.max_steps, "max-steps")?.unwrap_or(td.max_steps),
                predictor,
                ..td
            };
            let detour = match m.pick_enum(a.detour, "detour")? {
                Some(DetourArg::Off) => Detour::Off,
                Some(DetourArg::Always) => Detour::Always,
                Some(DetourArg::Auto) | None => Detour::Auto,
            };
            let detour_c: Option<String> = m.pick(a.detour_c, "detour-c")?;
            let flag_cache: Option<PathBuf> = m.pick(a.cache_dir, "cache-dir")?;
            let cache_dir = std::env::var_os(CACHE_ENV)
                .filter(|v| !v.is_empty())
                .map(PathBuf::from)
                .or(flag_cache);
            let options = SolveOptions {
                path_kind: PathKind::Original,
                seed: m.pick(a.seed, "seed")?.unwrap_or_else(rand::random),
                detour,
                detour_c: detour_c.as_deref().map(parse_complex).transpose()?,
                perturb_eps: m.pick(a.perturb_eps, "perturb-eps")?.unwrap_or(defaults.perturb_eps),
                max_retries: m.pick(a.max_retries, "max-retries")?.unwrap_or(defaults.max_retries),
                tracker,
                cache_dir,
            };
            options.validate()?;
            Task::Solve {
                input: input_of(a.input),
                output: m.pick(a.output, "output")?,
                path: m.pick_enum(a.path, "path")?.unwrap_or(PathChoice::Auto),
                parallel_attempts: m.pick(a.parallel_attempts, "parallel-attempts")?.unwrap_or(1).max(1),
                options,
            }
        }
        Command::Verify(a) => Task::Verify {
            input: input_of(a.input),
            rep: a.rep,
            tol: m.pick(a.tol, "tol")?.unwrap_or(1e-6),
        },
        Command::Forward(a) => Task::Forward {
            pair: a.pair,
            output: m.pick(a.output, "output")?,
        },
        Command::Endpoint(a) => Task::Endpoint {
            degree: a.degree,
            path: m.pick_enum(a.path, "path")?.unwrap_or(PathChoice::Auto),
            seed: m.pick(a.seed, "seed")?.unwrap_or(0),
            output: m.pick(a.output, "output")?,
        },
        Command::Hyperbolic(a) => Task::Hyperbolic {
            input: input_of(a.input),
            dirs: m.pick(a.dirs, "dirs")?.unwrap_or(DEFAULT_DIRECTIONS),
            tol: m.pick(a.tol, "tol")?.unwrap_or(DEFAULT_TOL),
        },
        Command::OracleConic(a) => Task::OracleConic { input: input_of(a) },
    };
    m.finish()?;
    Ok(RunConfig { task, log_level })
}

/// Parses arguments and resolves the configuration, or returns the exit
/// code after printing usage or the error.
pub fn config_from_args<I, T>(args: I) -> Result<RunConfig, i32>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return Err(code);
        }
    };
    resolve(cli).map_err(|e| {
        eprintln!("error: {e}");
        exit_code(&e)
    })
}

pub fn read_form(input: &Input) -> hyperdet::Result<TernaryForm> {
    let text = match input {
        Input::File(p) => io::read_to_string(p)?,
        Input::Text(t) => return parse_polynomial_text(t),
    };
    if text.trim_start().starts_with('{') {
        io::form_from_str(&text)
    } else {
        parse_polynomial_text(&text)
    }
}

fn path_kind(choice: PathChoice, degree: usize, seed: u64) -> hyperdet::Result<PathKind> {
    match choice {
        PathChoice::Auto if degree <= AUTO_ORIGINAL_MAX_DEGREE => Ok(PathKind::Original),
        PathChoice::Original => Ok(PathKind::Original),
        PathChoice::Auto | PathChoice::Randomized => {
            PathKind::random_randomized(degree, &mut ChaCha8Rng::seed_from_u64(seed ^ FORMS_STREAM))
        }
    }
}

fn emit(value: &Value, output: Option<&Path>) -> hyperdet::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match output {
        Some(p) => io::write_atomic(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn solve_output(rep: &Representation, options: &SolveOptions, parallel: usize) -> hyperdet::Result<Value> {
    let mut v = serde_json::to_value(rep)?;
    let mut config = serde_json::to_value(options)?;
    config["parallel_attempts"] = json!(parallel);
    v["config"] = config;
    Ok(v)
}

/// Runs the task and returns the exit code.
pub fn run(config: RunConfig) -> i32 {
    match execute(config.task) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(task: Task) -> hyperdet::Result<i32> {
    match task {
        Task::Solve {
            input,
            output,
            path,
            mut options,
            parallel_attempts,
        } => {
            let p = read_form(&input)?;
            options.path_kind = path_kind(path, p.degree(), options.seed)?;
            log::info!("solving degree {} with seed {}", p.degree(), options.seed);
            let rep = solve_parallel(&p, &options, parallel_attempts)?;
            let mut used = options.clone();
            used.seed = rep.seed;
            emit(&solve_output(&rep, &used, parallel_attempts)?, output.as_deref())?;
            Ok(EXIT_OK)
        }
        Task::Verify { input, rep, tol } => {
            let p = read_form(&input)?;
            let rep: Representation = serde_json::from_str(&io::read_to_string(&rep)?)?;
            let residual = verify(&p, &rep)?;
            let ok = residual < tol;
            emit(&json!({ "residual": residual, "ok": ok }), None)?;
            Ok(if ok { EXIT_OK } else { EXIT_FAILURE })
        }
        Task::Forward { pair, output } => {
            let z = io::pair_from_str(&io::read_to_string(&pair)?)?;
            let f = phi_coeffs(&z)?;
            emit(&serde_json::to_value(FormJson::from(&f))?, output.as_deref())?;
            Ok(EXIT_OK)
        }
        Task::Endpoint {
            degree,
            path,
            seed,
            output,
        } => {
            if degree == 0 {
                return Err(Error::InvalidOptions("degree must be positive".into()));
            }
            let kind = path_kind(path, degree, seed)?;
            let f = fixed_endpoint(degree, &kind)?;
            let mut v = serde_json::to_value(FormJson::from(&f))?;
            if let PathKind::Randomized(l) = &kind {
                v["linear_forms"] = serde_json::to_value(l)?;
            }
            emit(&v, output.as_deref())?;
            Ok(EXIT_OK)
        }
        Task::Hyperbolic { input, dirs, tol } => {
            let f = read_form(&input)?;
            let report = check_hyperbolic(&f, dirs, tol)?;
            emit(&serde_json::to_value(&report)?, None)?;
            Ok(if report.is_hyperbolic { EXIT_OK } else { EXIT_NOT_HYPERBOLIC })
        }
        Task::OracleConic { input } => {
            let f = read_form(&input)?;
            emit(&serde_json::to_value(solve_conic(&f)?)?, None)?;
            Ok(EXIT_OK)
        }
    }
}

/// Full entry point: arguments in, exit code out.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let config = match config_from_args(args) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let _ = env_logger::Builder::new()
        .filter_level(config.log_level)
        .format_timestamp(None)
        .try_init();
    run(config)
}
