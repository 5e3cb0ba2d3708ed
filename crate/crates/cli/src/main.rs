use std::io::Write;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use toolgym_core::bench::run_bench;
use toolgym_core::builtin;
use toolgym_core::cache::{
    build_index, expand_workflow, load_snapshot_file, snapshot_string, CacheBuilder, MockUpstream,
};
use toolgym_core::env::Environment;
use toolgym_core::eval::cfb::{prediction_from_cfb, sample_from_cfb};
use toolgym_core::eval::{
    evaluate, execute_record, join_predictions, read_predictions, render_table, EpisodeRecord,
};
use toolgym_core::model::DatasetSample;
use toolgym_core::reward::{score_total, DEFAULT_LAMBDA};
use toolgym_core::schema::Registry;
use toolgym_core::service::{serve_stdio, serve_tcp, ServiceConfig};
use toolgym_core::synth::{
    dataset_bytes, read_dataset, sha256_hex, synthesize_dataset, ExecGenerator, FallbackGenerator,
    Generator, SynthConfig,
};
use toolgym_core::template::{load_templates_dir, WorkflowTemplate};

const LOG_ENV: &str = "TOOLGYM_LOG";

#[derive(Parser)]
#[command(name = "toolgym", version, about = "Deterministic tool-use environment: cache, synthesis, scoring, serving")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Response cache operations.
    #[command(subcommand)]
    Cache(CacheCommand),
    /// Synthesize a dataset from templates over a cache snapshot.
    Synth(SynthArgs),
    /// Reward reports for predicted transcripts.
    Score(ScoreArgs),
    /// Benchmark-style accuracy and error breakdown.
    Eval(EvalArgs),
    /// Run the session server.
    Serve(ServeArgs),
    /// Measure lookup and reward throughput on a mock cache.
    Bench(BenchArgs),
}

#[derive(Subcommand)]
enum CacheCommand {
    /// Expand every template against an upstream and write a snapshot.
    Build(CacheBuildArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum UpstreamKind {
    Mock,
}

#[derive(Args)]
struct CacheBuildArgs {
    #[arg(long, value_enum, default_value = "mock")]
    upstream: UpstreamKind,
    /// Template directory; the bundled templates when omitted.
    #[arg(long)]
    templates: Option<PathBuf>,
    /// Mock upstream profile; the bundled one when omitted.
    #[arg(long)]
    profile: Option<PathBuf>,
    #[arg(long, default_value_t = 32)]
    breadth: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    templates: Option<PathBuf>,
    #[arg(long)]
    cache: PathBuf,
    #[arg(long)]
    registry: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    per_template: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `fallback` or `exec:COMMAND`.
    #[arg(long, default_value = "fallback")]
    generator: String,
    #[arg(long)]
    out: PathBuf,
    /// Also write the synthesis report here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    predictions: PathBuf,
    /// Snapshot the predicted calls execute against; the dataset's own
    /// expected observations when omitted.
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long)]
    registry: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    lambda: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalFormat {
    Native,
    Cfb,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long, value_enum, default_value = "native")]
    format: EvalFormat,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the structured report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    /// TOML file overriding the default service settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `stdio` or a TCP address.
    #[arg(long)]
    listen: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 100_000)]
    size: usize,
    #[arg(long, default_value_t = 1_000_000)]
    lookups: usize,
    #[arg(long, default_value_t = 50_000)]
    evals: usize,
    #[arg(long, default_value_t = 4)]
    per_template: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|_| out.flush());
}

fn print(v: &Value) {
    emit(&format!("{v}\n"));
}

fn templates(dir: Option<&Path>) -> Result<Vec<WorkflowTemplate>> {
    match dir {
        Some(d) => Ok(load_templates_dir(d)?),
        None => Ok(builtin::templates()),
    }
}

fn registry(path: Option<&Path>) -> Result<Registry> {
    match path {
        Some(p) => Ok(Registry::from_json(&read(p)?)?),
        None => Ok(builtin::registry()),
    }
}

fn dataset(path: &Path) -> Result<Vec<DatasetSample>> {
    read_dataset(&read(path)?).with_context(|| format!("parsing dataset {}", path.display()))
}

fn cache_build(a: CacheBuildArgs) -> Result<()> {
    let UpstreamKind::Mock = a.upstream;
    let mock = match &a.profile {
        Some(p) => MockUpstream::from_json(&read(p)?)?,
        None => builtin::mock_upstream(),
    };
    let templates = templates(a.templates.as_deref())?;
    let mut builder = CacheBuilder::new();
    let mut chains = 0;
    for t in &templates {
        chains += expand_workflow(t, &mock, &mock, &mut builder, a.breadth, a.seed)?.chains;
    }
    let store = builder.build();
    let text = snapshot_string(&store);
    write(&a.out, text.as_bytes())?;
    print(&json!({
        "command": "cache build",
        "seed": a.seed,
        "templates": templates.len(),
        "chains": chains,
        "entries": store.len(),
        "digest": sha256_hex(text.as_bytes()),
        "out": a.out,
    }));
    Ok(())
}

fn generator(spec: &str) -> Result<Box<dyn Generator>> {
    match spec {
        "fallback" => Ok(Box::new(FallbackGenerator)),
        s => match s.strip_prefix("exec:") {
            Some(cmd) if !cmd.trim().is_empty() => Ok(Box::new(ExecGenerator { command: cmd.to_string() })),
            _ => bail!("unknown generator {spec:?}; expected fallback or exec:COMMAND"),
        },
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    let gen = generator(&a.generator)?;
    let templates = templates(a.templates.as_deref())?;
    let store = Arc::new(load_snapshot_file(&a.cache)?);
    let index = build_index(&store);
    let env = Environment::new(store.clone(), Arc::new(registry(a.registry.as_deref())?));
    let cfg = SynthConfig::new(a.per_template, a.seed);
    let (samples, report) = synthesize_dataset(&templates, &store, &index, &env, gen.as_ref(), &cfg);
    let bytes = dataset_bytes(&samples);
    write(&a.out, &bytes)?;
    let summary = json!({
        "command": "synth",
        "seed": a.seed,
        "generator": gen.id(),
        "samples": samples.len(),
        "digest": sha256_hex(&bytes),
        "out": a.out,
        "report": report,
    });
    if let Some(p) = &a.report {
        write(p, serde_json::to_string_pretty(&summary)?.as_bytes())?;
    }
    print(&summary);
    Ok(())
}

fn score(a: ScoreArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&a.lambda) {
        bail!("lambda {} is outside [0, 1]", a.lambda);
    }
    let samples = dataset(&a.dataset)?;
    let records = join_predictions(&samples, read_predictions(&read(&a.predictions)?)?)?;
    let store = match &a.cache {
        Some(p) => load_snapshot_file(p)?,
        None => builtin::fixture_cache(&samples)?,
    };
    let env = Environment::new(Arc::new(store), Arc::new(registry(a.registry.as_deref())?));
    let mut per_sample = Vec::with_capacity(records.len());
    let (mut atomic, mut orch, mut total) = (0.0, 0.0, 0.0);
    for rec in &records {
        let obs = execute_record(&env, rec);
        let report = score_total(&rec.flat_calls(), &obs, &rec.ground_truth, env.registry(), a.lambda);
        atomic += report.r_atomic;
        orch += report.r_orch;
        total += report.r_total;
        per_sample.push(json!({"id": rec.id, "report": report}));
    }
    let n = records.len().max(1) as f64;
    let doc = json!({
        "command": "score",
        "seed": a.seed,
        "lambda": a.lambda,
        "count": records.len(),
        "mean": {"r_atomic": atomic / n, "r_orch": orch / n, "r_total": total / n},
        "samples": per_sample,
    });
    if let Some(p) = &a.out {
        write(p, doc.to_string().as_bytes())?;
    }
    print(&doc);
    Ok(())
}

fn jsonl(text: &str) -> Result<Vec<Value>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("line {}", i + 1)))
        .collect()
}

fn eval(a: EvalArgs) -> Result<()> {
    let records: Vec<EpisodeRecord> = match a.format {
        EvalFormat::Native => {
            let samples = dataset(&a.dataset)?;
            join_predictions(&samples, read_predictions(&read(&a.predictions)?)?)?
        }
        EvalFormat::Cfb => {
            let samples = jsonl(&read(&a.dataset)?)?
                .iter()
                .map(sample_from_cfb)
                .collect::<Result<Vec<_>, _>>()?;
            let preds = jsonl(&read(&a.predictions)?)?
                .iter()
                .map(prediction_from_cfb)
                .collect::<Result<Vec<_>, _>>()?;
            join_predictions(&samples, preds)?
        }
    };
    let report = evaluate(&records);
    if let Some(p) = &a.out {
        let doc = json!({"command": "eval", "seed": a.seed, "report": report});
        write(p, serde_json::to_string_pretty(&doc)?.as_bytes())?;
    }
    emit(&format!("seed {}\n{}", a.seed, render_table(&report)));
    Ok(())
}

fn serve(a: ServeArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => ServiceConfig::load(p)?,
        None => ServiceConfig::default(),
    };
    if let Some(l) = a.listen {
        cfg.listen = l;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let svc = cfg.build()?;
    if cfg.listen == "stdio" {
        eprintln!("{}", json!({"command": "serve", "seed": cfg.seed, "listen": "stdio"}));
        serve_stdio(&svc)?;
        return Ok(());
    }
    let addr = cfg.listen.strip_prefix("tcp://").unwrap_or(&cfg.listen);
    let listener = TcpListener::bind(addr).with_context(|| format!("binding {addr}"))?;
    eprintln!(
        "{}",
        json!({"command": "serve", "seed": cfg.seed, "listen": listener.local_addr()?.to_string()})
    );
    serve_tcp(Arc::new(svc), listener)?;
    Ok(())
}

fn bench(a: BenchArgs) -> Result<()> {
    let store = Arc::new(builtin::mock_cache_sized(a.size, a.seed)?);
    let index = build_index(&store);
    let env = Environment::new(store.clone(), Arc::new(builtin::registry()));
    let (samples, _) = synthesize_dataset(
        &builtin::templates(),
        &store,
        &index,
        &env,
        &FallbackGenerator,
        &SynthConfig::new(a.per_template, a.seed),
    );
    let report = run_bench(&env, &samples, DEFAULT_LAMBDA, a.lookups, a.evals, a.seed);
    let mut doc = serde_json::to_value(&report)?;
    doc["command"] = json!("bench");
    print(&doc);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Cache(CacheCommand::Build(a)) => cache_build(a),
        Command::Synth(a) => synth(a),
        Command::Score(a) => score(a),
        Command::Eval(a) => eval(a),
        Command::Serve(a) => serve(a),
        Command::Bench(a) => bench(a),
    }
}

fn fail(message: String) -> ExitCode {
    eprintln!("{}", json!({"status": "error", "message": message}));
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or_default();
            return fail(first.trim_start_matches("error: ").to_string());
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(format!("{e:#}")),
    }
}
