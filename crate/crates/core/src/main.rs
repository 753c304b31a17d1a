use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use handmorph::cad::{emit_scad, verify_render, RenderOutcome};
use handmorph::config::Config;
use handmorph::llm::{HttpProvider, LlmProvider, RecordingProvider, StubProvider};
use handmorph::model::{from_canonical_json, to_canonical_json, GraspType, OphParams, Severity};
use handmorph::params::refilter;
use handmorph::pipeline::batch::{batch_eval, load_tasks, BatchMode};
use handmorph::pipeline::report::write_tables;
use handmorph::pipeline::{exit, load_template, run_id, run_task, RunError, RunOptions};
use handmorph::validator::check_grammar_document;

#[derive(Parser)]
#[command(name = "handmorph", version, about = "Generate robotic hand designs from task descriptions")]
struct Cli {
    /// TOML config; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Repeat for more log output.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the full pipeline for one task.
    Run(RunArgs),
    /// Evaluate a task file in one generation mode.
    Batch(BatchArgs),
    /// Metric tables from existing artifacts.
    Metrics {
        #[command(subcommand)]
        cmd: MetricsCmd,
    },
    /// Run the rule checks on a grammar file.
    Validate {
        #[arg(long)]
        grammar: PathBuf,
    },
    /// Emit OpenSCAD source for a parameter file.
    Emit(EmitArgs),
}

#[derive(Subcommand)]
enum MetricsCmd {
    Report {
        /// A run directory or a batch `tasks/` directory.
        #[arg(long)]
        run: PathBuf,
        /// Defaults to `<run>/report`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ProviderKind {
    Http,
    Stub,
    Replay,
}

#[derive(Args)]
struct ProviderArgs {
    #[arg(long, value_enum, default_value = "http")]
    provider: ProviderKind,
    /// Fixture directory for `stub` and `replay`.
    #[arg(long)]
    fixtures: Option<PathBuf>,
    /// With `http`, also write every reply here for later replay.
    #[arg(long)]
    record: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    task: String,
    #[arg(long)]
    variants: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Defaults to `runs/<run id>`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    provider: ProviderArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Full,
    ZeroShot,
    Random,
}

#[derive(Args)]
struct BatchArgs {
    /// JSON list of {"task", "grasp_type_label"}.
    #[arg(long)]
    tasks: PathBuf,
    #[arg(long, value_enum, default_value = "full")]
    mode: ModeArg,
    #[arg(long)]
    variants: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "batch")]
    out: PathBuf,
    #[command(flatten)]
    provider: ProviderArgs,
}

#[derive(Args)]
struct EmitArgs {
    #[arg(long)]
    params: PathBuf,
    /// Grasp type whose joint and link multipliers shape the geometry.
    #[arg(long)]
    grasp_type: Option<GraspType>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Emit even when the constraint filter rejects the parameters.
    #[arg(long)]
    force: bool,
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        Failure::new(e.exit_code(), e.to_string())
    }
}

fn load_config(path: Option<&Path>) -> Result<Config, Failure> {
    match path {
        Some(p) => Config::load(p).map_err(|e| Failure::new(exit::CONFIG, format!("config: {e}"))),
        None => Ok(Config::default()),
    }
}

fn make_provider(args: &ProviderArgs, config: &Config) -> Result<Box<dyn LlmProvider>, Failure> {
    let config_err = |e: handmorph::llm::LlmError| Failure::new(exit::CONFIG, e.to_string());
    match args.provider {
        ProviderKind::Http => {
            let live = HttpProvider::from_env(config.http.clone()).map_err(config_err)?;
            match &args.record {
                Some(dir) => Ok(Box::new(RecordingProvider::new(live, dir).map_err(config_err)?)),
                None => Ok(Box::new(live)),
            }
        }
        ProviderKind::Stub | ProviderKind::Replay => {
            let dir = args
                .fixtures
                .as_ref()
                .ok_or_else(|| Failure::new(exit::CONFIG, "--fixtures is required for stub and replay providers"))?;
            Ok(Box::new(StubProvider::from_dir(dir).map_err(config_err)?))
        }
    }
}

fn cmd_run(args: RunArgs, mut config: Config) -> Result<i32, Failure> {
    if let Some(v) = args.variants {
        config.run.variants = v;
    }
    if let Some(s) = args.seed {
        config.run.seed = s;
    }
    config.check().map_err(|e| Failure::new(exit::CONFIG, e.0))?;
    let provider = make_provider(&args.provider, &config)?;
    let out = args
        .out
        .unwrap_or_else(|| PathBuf::from("runs").join(run_id(&args.task, config.run.seed)));
    let summary = run_task(&config, &RunOptions::new(args.task, &out), provider.as_ref())?;
    println!("run {} -> {}", summary.run_id, out.display());
    println!(
        "survivors: {}/{} (MVR {:.3})",
        summary.survivors.len(),
        summary.variants,
        summary.mvr
    );
    for r in &summary.rejections {
        println!("  {} rejected at {}: {}", r.variant_id, r.stage, r.reason);
    }
    if let Some(rank) = &summary.rank {
        for e in &rank.ranked {
            println!(
                "  {}  total {:.2}  (semantic {:.1}, size {:.1})",
                e.variant_id, e.total_score, e.semantic_score, e.size_score
            );
        }
        println!("chosen: {}{}", rank.chosen, if rank.refined { " (refined)" } else { "" });
    }
    if let Some(d) = &summary.diversity {
        println!("diversity: {:.3}", d.score);
    }
    Ok(summary.exit_code())
}

fn cmd_batch(args: BatchArgs, mut config: Config) -> Result<i32, Failure> {
    if let Some(v) = args.variants {
        config.run.variants = v;
    }
    if let Some(s) = args.seed {
        config.run.seed = s;
    }
    config.check().map_err(|e| Failure::new(exit::CONFIG, e.0))?;
    let tasks = load_tasks(&args.tasks).map_err(|e| Failure::new(exit::CONFIG, e))?;
    let mode = match args.mode {
        ModeArg::Full => BatchMode::Full,
        ModeArg::ZeroShot => BatchMode::ZeroShot,
        ModeArg::Random => BatchMode::Random,
    };
    let provider = if mode.needs_provider() {
        Some(make_provider(&args.provider, &config)?)
    } else {
        None
    };
    let outcome = batch_eval(&config, &tasks, mode, &args.out, provider.as_deref())?;
    for row in &outcome.report.mvr {
        println!("{:>18}  {}/{}  MVR {:.3}", row.grasp_type, row.valid, row.total, row.mvr);
    }
    if let Some(s) = &outcome.report.diversity_stats {
        println!("diversity: {:.3} +/- {:.3} over {} tasks", s.mean, s.std, s.n);
    }
    println!("tables: {}", outcome.tables_dir.display());
    Ok(exit::SUCCESS)
}

fn cmd_report(run: PathBuf, out: Option<PathBuf>, config: Config) -> Result<i32, Failure> {
    if !run.is_dir() {
        return Err(Failure::new(exit::CONFIG, format!("{} is not a directory", run.display())));
    }
    let out = out.unwrap_or_else(|| run.join("report"));
    let summary = write_tables(&run, &out, "report", &config).map_err(|e| Failure::new(exit::IO, e.to_string()))?;
    print!("{}", to_canonical_json(&summary));
    Ok(exit::SUCCESS)
}

fn cmd_validate(path: PathBuf) -> Result<i32, Failure> {
    let text = std::fs::read_to_string(&path).map_err(|e| Failure::new(exit::CONFIG, format!("{}: {e}", path.display())))?;
    let doc: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Failure::new(exit::CONFIG, format!("{}: {e}", path.display())))?;
    let (_, graph, outcome) = check_grammar_document(&doc);
    for f in &outcome.findings {
        println!("{} [{:?}] {}", f.check_id, f.severity, f.message);
    }
    if let Some(g) = graph {
        println!("nodes: {}, edges: {}", g.nodes.len(), g.edges.len());
    }
    println!("rule score: {:.4}", outcome.rule_score);
    let critical = outcome.findings.iter().any(|f| f.severity == Severity::Critical);
    Ok(if critical { exit::RUN_FAILED } else { exit::SUCCESS })
}

fn cmd_emit(args: EmitArgs, config: Config) -> Result<i32, Failure> {
    let text = std::fs::read_to_string(&args.params)
        .map_err(|e| Failure::new(exit::CONFIG, format!("{}: {e}", args.params.display())))?;
    let params: OphParams =
        from_canonical_json(&text).map_err(|e| Failure::new(exit::CONFIG, format!("{}: {e}", args.params.display())))?;
    let filtered = refilter(&params, args.grasp_type, &config.priors, &config.ratios, &config.constraints);
    if !filtered.result.passed {
        eprintln!("constraint violations: {}", filtered.result.violations.join(", "));
        if !args.force {
            return Ok(exit::RUN_FAILED);
        }
    }
    let template = load_template(&config)?;
    let scad = emit_scad(&filtered.params, &filtered.geometry, &template)
        .map_err(|e| Failure::new(exit::RUN_FAILED, e.to_string()))?;
    match &args.out {
        Some(path) => {
            std::fs::write(path, &scad).map_err(|e| Failure::new(exit::IO, format!("{}: {e}", path.display())))?;
            match verify_render(path, &config.cad.renderer) {
                RenderOutcome::Failed { diagnostics } => {
                    eprintln!("render check failed:\n{diagnostics}");
                    return Ok(exit::RUN_FAILED);
                }
                RenderOutcome::Ok { image } => eprintln!("rendered {}", image.display()),
                RenderOutcome::Skipped => {}
            }
        }
        None => {
            std::io::stdout()
                .write_all(scad.as_bytes())
                .map_err(|e| Failure::new(exit::IO, e.to_string()))?;
        }
    }
    Ok(exit::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::CONFIG } else { exit::SUCCESS };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = load_config(cli.config.as_deref()).and_then(|config| match cli.cmd {
        Cmd::Run(args) => cmd_run(args, config),
        Cmd::Batch(args) => cmd_batch(args, config),
        Cmd::Metrics { cmd: MetricsCmd::Report { run, out } } => cmd_report(run, out, config),
        Cmd::Validate { grammar } => cmd_validate(grammar),
        Cmd::Emit(args) => cmd_emit(args, config),
    });
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code as u8)
        }
    }
}
