//! `dsa`: trace generation, grid evaluation, oracle studies, policy training,
//! stream simulation and comparison reports.
//!
//! Exit status: 0 on success, 2 when an input fails validation, 3 when a
//! metric is degenerate (zero baseline mAP, absent category), 1 otherwise.

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dsa_core::metrics::normalized_ap_grid;
use dsa_core::oracle::{coverage_curve, dynamic_schedule, limit_study};
use dsa_core::policy::{
    fit_static, fit_static_per_category, train_autofocus, AutoFocusModel, AutoFocusParams, StaticPolicy,
};
use dsa_core::simulator::{compare_report, simulate_stream, Policy, StreamResult, DEFAULT_OVERHEAD_MS};
use dsa_core::trace::{drifting_scenario, generate_synthetic, load_trace, save_trace, Scenario, Split};
use dsa_core::{CategoryId, CostModel, DetectionTrace, DsaError, Scope};

#[derive(Parser)]
#[command(name = "dsa", version, about = "Category-aware detector approximation over detection traces")]
struct Cli {
    /// Throughput table: `faster-rcnn`, `rfcn`, or a CSV file with
    /// `height,proposals,fps` rows.
    #[arg(long, global = true, default_value = "faster-rcnn")]
    cost_model: String,

    /// Controller overhead charged per decision, in milliseconds.
    #[arg(long, global = true, default_value_t = DEFAULT_OVERHEAD_MS)]
    overhead_ms: f64,

    #[arg(long, global = true, default_value_t = 0.5)]
    iou_threshold: f64,

    /// Seed for synthetic generation.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Output file (gen, simulate, report) or directory (grid-eval, oracle,
    /// train). Files default to stdout, directories to `.`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a trace from a scenario file or the built-in drifting scene.
    Gen(GenArgs),
    /// Throughput table and per-category normalized AP grids as CSV.
    GridEval(TraceArgs),
    /// Static/dynamic oracle limit study and coverage curves.
    Oracle(TraceArgs),
    /// Fit the static policies and the AutoFocus model on a training trace.
    Train(TrainArgs),
    /// Replay a trace under one policy.
    Simulate(SimulateArgs),
    /// Tabulate simulation results side by side.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Scenario JSON file. Without it the drifting scene is generated.
    #[arg(long, conflicts_with_all = ["videos", "frames"])]
    scenario: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "train")]
    split: SplitArg,
    #[arg(long, default_value_t = 12)]
    videos: usize,
    #[arg(long, default_value_t = 30)]
    frames: u32,
    #[arg(long, default_value = "faster-rcnn")]
    detector: String,
    /// Minimum rescaled object height, in pixels, for a detection.
    #[arg(long)]
    theta: Option<f64>,
    /// Mean spurious detections per frame.
    #[arg(long)]
    clutter: Option<f64>,
    #[arg(long)]
    jitter: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Test,
}

#[derive(Args)]
struct TraceArgs {
    #[arg(long)]
    trace: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    trace: PathBuf,
    #[arg(long, default_value_t = 0.6)]
    confidence_threshold: f64,
    #[arg(long, default_value_t = 3)]
    window: u32,
    /// Categories the AutoFocus labels protect: `any` or one category id.
    #[arg(long, default_value = "any")]
    scope: Scope,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    trace: PathBuf,
    /// `baseline`, `static-oracle`, `dynamic-oracle`, a static policy JSON
    /// file, or an AutoFocus model file.
    #[arg(long)]
    policy: String,
    /// Name recorded in the result; defaults to the policy argument's stem.
    #[arg(long)]
    name: Option<String>,
}

#[derive(Args)]
struct ReportArgs {
    /// StreamResult JSON files.
    #[arg(required = true)]
    results: Vec<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_status(&err))
        }
    }
}

fn exit_status(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<DsaError>() {
        Some(e) if e.is_degenerate() => 3,
        Some(DsaError::Io(_)) | None => 1,
        Some(_) => 2,
    }
}

fn run(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Gen(args) => gen(cli, args),
        Command::GridEval(args) => grid_eval(cli, args),
        Command::Oracle(args) => oracle(cli, args),
        Command::Train(args) => train(cli, args),
        Command::Simulate(args) => simulate(cli, args),
        Command::Report(args) => report(cli, args),
    }
}

fn cost_model(cli: &Cli) -> Result<CostModel> {
    let model = match CostModel::builtin(&cli.cost_model) {
        Some(m) => m,
        None => {
            let path = Path::new(&cli.cost_model);
            let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("custom");
            let file = File::open(path).with_context(|| format!("opening cost model {}", path.display()))?;
            CostModel::from_csv(name, BufReader::new(file))?
        }
    };
    if !(cli.overhead_ms.is_finite() && cli.overhead_ms >= 0.0) {
        return Err(DsaError::InvalidParams(format!("overhead must be >= 0 ms, got {}", cli.overhead_ms)).into());
    }
    Ok(model.with_overhead(cli.overhead_ms))
}

fn read_trace(path: &Path) -> Result<DetectionTrace> {
    let file = File::open(path).with_context(|| format!("opening trace {}", path.display()))?;
    load_trace(BufReader::new(file)).with_context(|| format!("loading trace {}", path.display()))
}

fn output_file(cli: &Cli) -> Result<Box<dyn Write>> {
    Ok(match &cli.out {
        Some(path) => {
            Box::new(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn output_dir(cli: &Cli) -> Result<PathBuf> {
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    Ok(BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?))
}

fn gen(cli: &Cli, args: &GenArgs) -> Result<ExitCode> {
    let split = match args.split {
        SplitArg::Train => Split::Train,
        SplitArg::Test => Split::Test,
    };
    let scenario = match &args.scenario {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str::<Scenario>(&text).map_err(DsaError::from)?
        }
        None => drifting_scenario(&args.detector, split, cli.seed, args.videos, args.frames),
    };
    let mut params = scenario.emulator.unwrap_or_default();
    params.seed = cli.seed;
    if let Some(t) = args.theta {
        params.theta = t;
    }
    if let Some(c) = args.clutter {
        params.clutter_rate = c;
    }
    if let Some(j) = args.jitter {
        params.jitter = j;
    }
    let trace = generate_synthetic(&scenario, &params)?;
    let mut sink = output_file(cli)?;
    save_trace(&trace, &mut sink)?;
    sink.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn grid_eval(cli: &Cli, args: &TraceArgs) -> Result<ExitCode> {
    let cost = cost_model(cli)?;
    let trace = read_trace(&args.trace)?;
    cost.covers(&trace.grid)?;
    let dir = output_dir(cli)?;

    let mut fps = create(&dir, "fps.csv")?;
    cost.write_fps_table(&trace.grid, &mut fps)?;
    fps.flush()?;

    let mut degenerate = Vec::new();
    for category in trace.categories() {
        let report = normalized_ap_grid(&trace, category, cli.iou_threshold)?;
        let mut sink = create(&dir, &format!("ap_grid_{category}.csv"))?;
        report.write_csv(&mut sink)?;
        sink.flush()?;
        if report.is_degenerate() {
            degenerate.push(category);
        }
    }
    degenerate_status(&degenerate)
}

fn degenerate_status(categories: &[CategoryId]) -> Result<ExitCode> {
    if categories.is_empty() {
        return Ok(ExitCode::SUCCESS);
    }
    let list: Vec<String> = categories.iter().map(|c| c.to_string()).collect();
    eprintln!("degenerate baseline mAP for categories {}", list.join(", "));
    Ok(ExitCode::from(3))
}

fn oracle(cli: &Cli, args: &TraceArgs) -> Result<ExitCode> {
    let cost = cost_model(cli)?;
    let trace = read_trace(&args.trace)?;
    let report = limit_study(&trace, &cost, cli.iou_threshold)?;
    let dir = output_dir(cli)?;

    let mut sink = create(&dir, "oracle.csv")?;
    report.write_csv(&mut sink)?;
    sink.flush()?;
    let mut sink = create(&dir, "oracle_frames.csv")?;
    report.write_frames_csv(&mut sink)?;
    sink.flush()?;

    let mut curves =
        vec![(Scope::Any, coverage_curve(&trace.grid, trace.frames(), Scope::Any, &cost, cli.iou_threshold)?)];
    for category in trace.categories() {
        let scope = Scope::Category(category);
        curves.push((
            scope,
            coverage_curve(&trace.grid, trace.category_frames(category), scope, &cost, cli.iou_threshold)?,
        ));
    }
    for (scope, curve) in &curves {
        let mut sink = create(&dir, &format!("coverage_{scope}.csv"))?;
        curve.write_csv(&mut sink)?;
        sink.flush()?;
    }

    print!("{report}");
    for (scope, curve) in &curves {
        println!(
            "coverage {scope}: {} frames, {} configs for 90%, {} for all",
            curve.frames,
            curve.configs_needed(0.9).map_or("-".into(), |k| k.to_string()),
            curve.configs_needed(1.0).map_or("-".into(), |k| k.to_string()),
        );
    }
    let degenerate: Vec<CategoryId> = report.entries.iter().filter(|e| e.degenerate).map(|e| e.category).collect();
    degenerate_status(&degenerate)
}

fn train(cli: &Cli, args: &TrainArgs) -> Result<ExitCode> {
    let cost = cost_model(cli)?;
    let trace = read_trace(&args.trace)?;
    let params = AutoFocusParams {
        confidence_threshold: args.confidence_threshold,
        decision_window: args.window,
        iou_threshold: cli.iou_threshold,
        scope: args.scope,
    };
    let oblivious = fit_static(&trace, &cost, Scope::Any, cli.iou_threshold)?;
    let aware = fit_static_per_category(&trace, &cost, cli.iou_threshold)?;
    let model = train_autofocus(&trace, &cost, &params)?;

    let dir = output_dir(cli)?;
    for (name, policy) in [("category-oblivious.json", &oblivious), ("static.json", &aware)] {
        let mut sink = create(&dir, name)?;
        serde_json::to_writer_pretty(&mut sink, policy)?;
        writeln!(sink)?;
        sink.flush()?;
    }
    fs::write(dir.join("autofocus.model"), model.to_text()).context("writing autofocus.model")?;
    Ok(ExitCode::SUCCESS)
}

fn load_policy(spec: &str, trace: &DetectionTrace, cost: &CostModel, iou: f64) -> Result<Policy> {
    Ok(match spec {
        "baseline" => Policy::always_baseline(trace),
        "static-oracle" => Policy::Static(fit_static_per_category(trace, cost, iou)?),
        "dynamic-oracle" => Policy::Schedule(dynamic_schedule(trace, cost, iou)?),
        path => {
            let text = fs::read_to_string(path).with_context(|| format!("reading policy {path}"))?;
            if text.trim_start().starts_with('{') {
                Policy::Static(serde_json::from_str::<StaticPolicy>(&text).map_err(DsaError::from)?)
            } else {
                Policy::AutoFocus(AutoFocusModel::from_text(&text)?)
            }
        }
    })
}

fn simulate(cli: &Cli, args: &SimulateArgs) -> Result<ExitCode> {
    let cost = cost_model(cli)?;
    let trace = read_trace(&args.trace)?;
    let policy = load_policy(&args.policy, &trace, &cost, cli.iou_threshold)?;
    let name = args.name.clone().unwrap_or_else(|| {
        Path::new(&args.policy).file_stem().and_then(|s| s.to_str()).unwrap_or(&args.policy).to_string()
    });
    let result = simulate_stream(&trace, &policy, &cost, cli.iou_threshold)?.named(name);
    let mut sink = output_file(cli)?;
    serde_json::to_writer_pretty(&mut sink, &result)?;
    writeln!(sink)?;
    sink.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn report(cli: &Cli, args: &ReportArgs) -> Result<ExitCode> {
    let mut results = Vec::with_capacity(args.results.len());
    for path in &args.results {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let result: StreamResult = serde_json::from_str(&text)
            .map_err(DsaError::from)
            .with_context(|| format!("parsing {}", path.display()))?;
        results.push(result);
    }
    let report = compare_report(&results)?;
    let mut sink = output_file(cli)?;
    report.write_csv(&mut sink)?;
    sink.flush()?;
    if cli.out.is_some() {
        print!("{report}");
    }
    Ok(ExitCode::SUCCESS)
}
