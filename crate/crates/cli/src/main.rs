use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use hopcorr::checks::{run_suites, Suite};
use hopcorr::correlation::{CorrelationMatrix, SpectrumReport};
use hopcorr::meanfield::{solve, FixedPointResult, Model, SolverConfig};
use hopcorr::model::{ModelParams, PatternSet, SpinSystem};
use hopcorr::montecarlo::{run, McConfig, UpdateRule};
use hopcorr::output::{atomic_write, fmt_f64, write_heatmap_ppm, write_sweep_csv, Metadata};
use hopcorr::phases::{
    classify, label_counts, multi_start, sweep, Axis, ClassifyConfig, InitState, MultiStartConfig,
    SweepGrid,
};
use hopcorr::{rng, Error};

const EXIT_USAGE: u8 = 1;
const EXIT_NOT_CONVERGED: u8 = 2;
const EXIT_CHECK_FAILED: u8 = 3;

/// Relativistic Hopfield network with cyclically correlated patterns.
#[derive(Debug, Parser)]
#[command(name = "hopcorr", version)]
struct Cli {
    /// Directory for relative --out and --heatmap paths; created if missing.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

impl Cli {
    fn resolve_outputs(&mut self) -> Result<(), Failure> {
        let Some(dir) = self.output_dir.clone() else {
            return Ok(());
        };
        std::fs::create_dir_all(&dir)?;
        let paths = match &mut self.command {
            Command::Solve(a) => vec![&mut a.out],
            Command::Sweep(a) => vec![&mut a.out, &mut a.heatmap],
            Command::Spectrum(a) => vec![&mut a.out],
            Command::Mc(a) => vec![&mut a.out],
            Command::Check(a) => vec![&mut a.out],
            Command::Patterns(a) => vec![&mut a.out],
        };
        for path in paths.into_iter().flatten() {
            *path = dir.join(&*path);
        }
        Ok(())
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the self-consistency equations at one (P, a, T).
    Solve(SolveArgs),
    /// Phase diagram over a (T, a) grid.
    Sweep(SweepArgs),
    /// Spectrum of the correlation matrix with closed-form residuals.
    Spectrum(SpectrumArgs),
    /// Single-spin-flip Monte Carlo on random patterns.
    Mc(McArgs),
    /// Run the verification suites.
    Check(CheckArgs),
    /// Draw a random pattern set.
    Patterns(PatternArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ModelArg {
    Rel,
    Cl,
}

impl From<ModelArg> for Model {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Rel => Model::RelCorr,
            ModelArg::Cl => Model::ClCorr,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum RuleArg {
    Glauber,
    Metropolis,
}

impl From<RuleArg> for UpdateRule {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::Glauber => UpdateRule::Glauber,
            RuleArg::Metropolis => UpdateRule::Metropolis,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
struct SolverArgs {
    #[arg(long, default_value_t = 0.5)]
    damping: f64,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 100_000)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    zero_eps: f64,
    #[arg(long, default_value_t = 1e-4)]
    sym_eps: f64,
    #[arg(long, default_value_t = 1e-2)]
    minor_eps: f64,
    #[arg(long, value_enum, default_value_t = ModelArg::Rel)]
    model: ModelArg,
}

impl SolverArgs {
    fn solver(&self) -> SolverConfig {
        SolverConfig {
            damping: self.damping,
            tol: self.tol,
            max_iter: self.max_iter,
            zero_eps: self.zero_eps,
        }
    }

    fn classify(&self) -> ClassifyConfig {
        ClassifyConfig {
            zero_eps: self.zero_eps,
            sym_eps: self.sym_eps,
            minor_eps: self.minor_eps,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
struct SolveArgs {
    #[arg(long = "P")]
    #[serde(rename = "P")]
    p: usize,
    #[arg(long)]
    a: f64,
    /// Temperature; 0 selects the zero-temperature (sign) maps.
    #[arg(long = "T")]
    #[serde(rename = "T")]
    t: f64,
    /// pure | symmetric | correlated | noisy:<delta> | zero | file:<path>
    #[arg(long, default_value = "pure")]
    init: String,
    /// Solve from the default set of starts and keep the pressure maximizer.
    #[arg(long)]
    multi_start: bool,
    #[command(flatten)]
    #[serde(flatten)]
    solver: SolverArgs,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct SweepArgs {
    #[arg(long = "P")]
    #[serde(rename = "P")]
    p: usize,
    /// min:max:steps, or a single value
    #[arg(long)]
    a: String,
    /// min:max:steps, or a single value
    #[arg(long = "T")]
    #[serde(rename = "T")]
    t: String,
    /// Starting state; repeat for several. Ignored with --multi-start.
    #[arg(long)]
    init: Vec<String>,
    /// Use the default set of starts.
    #[arg(long)]
    multi_start: bool,
    #[command(flatten)]
    #[serde(flatten)]
    solver: SolverArgs,
    #[arg(long, default_value_t = 1e-9)]
    tie_tol: f64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Sweep table; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Binary PPM heatmap of max|M|.
    #[arg(long)]
    heatmap: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct SpectrumArgs {
    #[arg(long = "P")]
    #[serde(rename = "P")]
    p: usize,
    #[arg(long)]
    a: f64,
    /// Include the canonical eigenvectors (columns).
    #[arg(long)]
    eigenvectors: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct McArgs {
    #[arg(long = "P")]
    #[serde(rename = "P")]
    p: usize,
    #[arg(long)]
    a: f64,
    #[arg(long = "T")]
    #[serde(rename = "T")]
    t: f64,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    n: usize,
    #[arg(long, default_value_t = 400)]
    sweeps: usize,
    #[arg(long, default_value_t = 200)]
    burn_in: usize,
    #[arg(long, default_value_t = 1)]
    measure_every: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Seed of the pattern draw; defaults to --seed.
    #[arg(long)]
    pattern_seed: Option<u64>,
    /// Pattern file instead of a random draw.
    #[arg(long)]
    patterns: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = RuleArg::Glauber)]
    rule: RuleArg,
    /// pattern:<k> (1-based) or random
    #[arg(long, default_value = "pattern:1")]
    start: String,
    /// Trajectory CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct CheckArgs {
    /// spectrum | tc | subadd | selfavg | stationarity; repeat or comma-separate. All when absent.
    #[arg(long, value_delimiter = ',')]
    suite: Vec<String>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct PatternArgs {
    #[arg(long = "N")]
    #[serde(rename = "N")]
    n: usize,
    #[arg(long = "P")]
    #[serde(rename = "P")]
    p: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

type CmdResult = Result<u8, Failure>;

fn main() -> ExitCode {
    let mut cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(f) = configure_threads().and_then(|()| cli.resolve_outputs()) {
        eprintln!("error: {}", f.message);
        return ExitCode::from(f.code);
    }
    let result = match &cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Spectrum(args) => cmd_spectrum(args),
        Command::Mc(args) => cmd_mc(args),
        Command::Check(args) => cmd_check(args),
        Command::Patterns(args) => cmd_patterns(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var("HOPCORR_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| usage(format!("HOPCORR_THREADS={value:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| usage(e.to_string()))
}

/// Flattens the serialized arguments into `key=value` pairs.
fn metadata<T: Serialize>(command: &str, args: &T) -> Metadata {
    let mut meta = vec![("command".to_string(), command.to_string())];
    if let Ok(Value::Object(map)) = serde_json::to_value(args) {
        let mut flat = Vec::new();
        flatten("", &Value::Object(map), &mut flat);
        meta.extend(flat);
    }
    meta
}

fn flatten(prefix: &str, value: &Value, out: &mut Metadata) {
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, v, out);
            }
        }
        Value::Null => {}
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        Value::Array(items) => {
            let joined: Vec<String> = items
                .iter()
                .map(|v| match v {
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                })
                .collect();
            out.push((prefix.to_string(), joined.join(",")));
        }
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

fn meta_json(meta: &Metadata) -> Value {
    Value::Object(
        meta.iter()
            .map(|(k, v)| (k.clone(), Value::String(v.clone())))
            .collect(),
    )
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match out {
        Some(path) => atomic_write(path, bytes).map_err(Failure::from),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn json_bytes(value: &Value) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("JSON values serialize");
    bytes.push(b'\n');
    bytes
}

fn parse_init(s: &str) -> Result<InitState, Failure> {
    s.parse::<InitState>().map_err(Failure::from)
}

fn result_json(
    args: &SolveArgs,
    init_label: &str,
    r: &FixedPointResult,
    classify_cfg: &ClassifyConfig,
) -> Value {
    let mut v = json!({
        "P": args.p,
        "a": args.a,
        "T": args.t,
        "model": Model::from(args.solver.model).to_string(),
        "init_label": init_label,
        "label": classify(&r.m, classify_cfg),
    });
    if let (Value::Object(target), Ok(Value::Object(fields))) = (&mut v, serde_json::to_value(r)) {
        target.extend(fields);
    }
    v
}

fn cmd_solve(args: &SolveArgs) -> CmdResult {
    let params = ModelParams::from_temperature(args.p, args.a, args.t)?;
    let solver = args.solver.solver();
    solver.validate()?;
    let classify_cfg = args.solver.classify();
    let meta = metadata("solve", args);

    if args.multi_start {
        let cfg = MultiStartConfig {
            solver,
            classify: classify_cfg,
            model: args.solver.model.into(),
            ..MultiStartConfig::default()
        };
        let point = multi_start(&params, &cfg)?;
        let converged = point.best.converged;
        match args.format {
            Format::Json => {
                let mut v = json!({"meta": meta_json(&meta), "P": args.p,
                                   "model": cfg.model.to_string()});
                if let (Value::Object(target), Ok(Value::Object(fields))) =
                    (&mut v, serde_json::to_value(&point))
                {
                    target.extend(fields);
                }
                emit(args.out.as_deref(), &json_bytes(&v))?;
            }
            Format::Csv => {
                let mut buf = Vec::new();
                write_sweep_csv(&mut buf, args.p, std::slice::from_ref(&point), &meta)?;
                emit(args.out.as_deref(), &buf)?;
            }
        }
        return Ok(if converged { 0 } else { EXIT_NOT_CONVERGED });
    }

    let init = parse_init(&args.init)?;
    let m0 = init.magnetization(args.p)?;
    let r = solve(&params, &m0, &solver, args.solver.model.into())?;
    match args.format {
        Format::Json => {
            let mut v = result_json(args, &init.label(), &r, &classify_cfg);
            v["meta"] = meta_json(&meta);
            emit(args.out.as_deref(), &json_bytes(&v))?;
        }
        Format::Csv => {
            let mut buf = Vec::new();
            for (k, val) in &meta {
                writeln!(buf, "# {k}={val}")?;
            }
            let mut header = vec![
                "P".to_string(),
                "a".into(),
                "T".into(),
                "model".into(),
                "init_label".into(),
                "label".into(),
                "pressure".into(),
                "iterations".into(),
                "converged".into(),
                "residual".into(),
            ];
            header.extend((1..=args.p).map(|mu| format!("M_{mu}")));
            writeln!(buf, "{}", header.join(","))?;
            let mut row = vec![
                args.p.to_string(),
                fmt_f64(args.a),
                fmt_f64(args.t),
                Model::from(args.solver.model).to_string(),
                init.label(),
                classify(&r.m, &classify_cfg).to_string(),
                fmt_f64(r.pressure),
                r.iterations.to_string(),
                r.converged.to_string(),
                fmt_f64(r.residual),
            ];
            row.extend(r.m.as_slice().iter().map(|x| fmt_f64(*x)));
            writeln!(buf, "{}", row.join(","))?;
            emit(args.out.as_deref(), &buf)?;
        }
    }
    Ok(if r.converged { 0 } else { EXIT_NOT_CONVERGED })
}

fn cmd_sweep(args: &SweepArgs) -> CmdResult {
    let t_axis: Axis = args.t.parse()?;
    let a_axis: Axis = args.a.parse()?;
    let grid = SweepGrid::new(args.p, t_axis, a_axis)?;
    let inits = if args.multi_start {
        InitState::default_set()
    } else if args.init.is_empty() {
        vec![InitState::Pure]
    } else {
        args.init
            .iter()
            .map(|s| parse_init(s))
            .collect::<Result<Vec<_>, _>>()?
    };
    for init in &inits {
        init.magnetization(args.p)?;
    }
    let cfg = MultiStartConfig {
        solver: args.solver.solver(),
        classify: args.solver.classify(),
        inits,
        model: args.solver.model.into(),
        tie_tol: args.tie_tol,
    };
    cfg.validate()?;
    let meta = metadata("sweep", args);
    let points = sweep(&grid, &cfg)?;

    let table = match args.format {
        Format::Csv => {
            let mut buf = Vec::new();
            write_sweep_csv(&mut buf, args.p, &points, &meta)?;
            buf
        }
        Format::Json => json_bytes(&json!({"meta": meta_json(&meta), "points": points})),
    };
    if let Some(path) = &args.heatmap {
        let mut buf = Vec::new();
        write_heatmap_ppm(&mut buf, &grid, &points, &meta)?;
        atomic_write(path, &buf)?;
    }

    let counts: serde_json::Map<String, Value> = label_counts(&points)
        .into_iter()
        .map(|(l, c)| (l.to_string(), json!(c)))
        .collect();
    let r1 = points
        .iter()
        .filter(|p| p.sublabel == Some(hopcorr::RetrievalKind::R1))
        .count();
    let r2 = points
        .iter()
        .filter(|p| p.sublabel == Some(hopcorr::RetrievalKind::R2))
        .count();
    let failed = points.iter().filter(|p| !p.best.converged).count();
    let summary = json!({"cells": points.len(), "labels": counts, "R1": r1, "R2": r2,
                         "unconverged_cells": failed});
    match &args.out {
        Some(path) => {
            atomic_write(path, &table)?;
            println!("{}", serde_json::to_string(&summary).expect("summary serializes"));
        }
        None => {
            emit(None, &table)?;
            eprintln!("{}", serde_json::to_string(&summary).expect("summary serializes"));
        }
    }
    Ok(0)
}

fn cmd_spectrum(args: &SpectrumArgs) -> CmdResult {
    let x = CorrelationMatrix::new(args.p, args.a)?;
    let report = SpectrumReport::new(&x);
    let meta = metadata("spectrum", args);
    let mut v = serde_json::to_value(&report).expect("report serializes");
    v["meta"] = meta_json(&meta);
    v["max_formula_residual"] = json!(report.max_formula_residual());
    v["max_char_poly_residual"] = json!(report.max_char_poly_residual());
    v["positive_definite"] = json!(x.spectrum().min_eigenvalue() > hopcorr::correlation::POSITIVITY_EPS);
    if args.eigenvectors {
        let spectrum = x.spectrum();
        let u = spectrum.eigenvectors();
        let columns: Vec<Vec<f64>> = (0..u.ncols())
            .map(|c| u.column(c).iter().copied().collect())
            .collect();
        v["eigenvectors"] = json!(columns);
    }
    emit(args.out.as_deref(), &json_bytes(&v))?;
    Ok(0)
}

fn cmd_mc(args: &McArgs) -> CmdResult {
    let params = ModelParams::from_temperature(args.p, args.a, args.t)?;
    let cfg = McConfig {
        sweeps: args.sweeps,
        burn_in: args.burn_in,
        seed: args.seed,
        rule: args.rule.into(),
        measure_every: args.measure_every,
    };
    cfg.validate()?;
    let patterns = match &args.patterns {
        Some(path) => {
            let set = PatternSet::read_csv(path)?;
            if set.n() != args.n || set.p() != args.p {
                return Err(usage(format!(
                    "pattern file has N={} P={}, flags say N={} P={}",
                    set.n(),
                    set.p(),
                    args.n,
                    args.p
                )));
            }
            set
        }
        None => {
            if args.n < args.p || args.n == 0 {
                return Err(usage("N must be at least P"));
            }
            PatternSet::random(args.n, args.p, args.pattern_seed.unwrap_or(args.seed))
        }
    };
    let init = match args.start.as_str() {
        "random" => {
            let mut r = rng::stream(args.seed, u64::MAX, 0);
            SpinSystem::random(&patterns, &mut r)
        }
        s => {
            let k: usize = s
                .strip_prefix("pattern:")
                .and_then(|k| k.parse().ok())
                .filter(|&k| (1..=args.p).contains(&k))
                .ok_or_else(|| usage(format!("--start {s:?}: expected pattern:<1..P> or random")))?;
            SpinSystem::aligned(&patterns, k - 1)
        }
    };
    let traj = run(&patterns, &params, init, &cfg)?;
    let meta = metadata("mc", args);
    if let Some(path) = &args.out {
        let mut buf = Vec::new();
        for (k, v) in &meta {
            writeln!(buf, "# {k}={v}")?;
        }
        traj.write_csv(&mut buf)?;
        atomic_write(path, &buf)?;
    }
    let summary = json!({
        "meta": meta_json(&meta),
        "N": traj.n,
        "P": traj.p,
        "measurements": traj.rows.len(),
        "mean_m": traj.mean_m(),
        "mean_abs_m": traj.mean_abs_m(),
        "acceptance_rate": traj.acceptance_rate,
    });
    emit(None, &json_bytes(&summary))?;
    Ok(0)
}

fn cmd_check(args: &CheckArgs) -> CmdResult {
    let suites = if args.suite.is_empty() {
        Suite::ALL.to_vec()
    } else {
        args.suite
            .iter()
            .map(|s| s.parse::<Suite>())
            .collect::<Result<Vec<_>, _>>()?
    };
    let report = run_suites(&suites, args.seed)?;
    let mut v = serde_json::to_value(&report).expect("report serializes");
    v["meta"] = meta_json(&metadata("check", args));
    emit(args.out.as_deref(), &json_bytes(&v))?;
    for s in &report.suites {
        eprintln!("{} {}", if s.passed { "PASS" } else { "FAIL" }, s.suite);
    }
    Ok(if report.passed { 0 } else { EXIT_CHECK_FAILED })
}

fn cmd_patterns(args: &PatternArgs) -> CmdResult {
    if args.n == 0 || args.p == 0 {
        return Err(usage("N and P must be positive"));
    }
    let set = PatternSet::random(args.n, args.p, args.seed);
    let mut buf = Vec::new();
    set.write_csv(&mut buf)?;
    emit(args.out.as_deref(), &buf)?;
    Ok(0)
}
