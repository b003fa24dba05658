//! Command-line driver.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use wpnav_core::eval::{compare_regressors, evaluate, EvalConfig, EvalOutcome};
use wpnav_core::geometry::{path_distance, sum_angle_change};
use wpnav_core::model::{train_with, RegressorKind};
use wpnav_core::paths::PathSpec;
use wpnav_core::{build_dataset, generate_world, make_path, BlockWorld, Model, WaypointPath};

use crate::config::RunConfig;
use crate::error::{Classify, CliError, Result};
use crate::formats::{self, checkpoint, dataset, report, trace};
use crate::plot::path_plot;
use crate::rundir::{self, RunDir};

#[derive(Debug, Parser)]
#[command(name = "wpnav", version, about = "Visual waypoint path following: data, training and evaluation")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// Master seed; replaces every per-module seed in the config.
    #[arg(long, global = true, env = "WPNAV_SEED")]
    pub seed: Option<u64>,
    /// TOML run config; built-in defaults when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Root under which run directories are created.
    #[arg(long, global = true, env = "WPNAV_OUT", default_value = "runs")]
    pub out: PathBuf,
    /// Print nothing on success.
    #[arg(long, global = true)]
    pub quiet: bool,
    /// Print a JSON summary on stdout.
    #[arg(long, global = true)]
    pub json: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Block worlds.
    World {
        #[command(subcommand)]
        command: WorldCommand,
    },
    /// Waypoint paths.
    Path {
        #[command(subcommand)]
        command: PathCommand,
    },
    /// Envelope datasets.
    Dataset {
        #[command(subcommand)]
        command: DatasetCommand,
    },
    /// Train one regressor variant on the run's dataset.
    Train(VariantArgs),
    /// Fly a trained model on the run's path.
    Eval(EvalArgs),
    /// Evaluate every configured variant with and without random starts.
    Compare,
    /// Plot the path and the trajectories of an evaluation.
    Plot(PlotArgs),
    /// World, path, dataset, training, comparison, evaluation and plot.
    Pipeline,
}

#[derive(Debug, Subcommand)]
pub enum WorldCommand {
    /// Generate the world for the config.
    Gen,
}

#[derive(Debug, Subcommand)]
pub enum PathCommand {
    /// Build a canonical path.
    Make {
        /// straight, l, zigzag or loop; overrides the config's path with
        /// that kind's defaults unless the config already has this kind.
        kind: Option<String>,
        /// Write the path here instead of into the run directory.
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// Print length and accumulated turning of a path file.
    Stats { file: PathBuf },
}

#[derive(Debug, Subcommand)]
pub enum DatasetCommand {
    /// Fly the auxiliary envelope paths and record frames and labels.
    Build,
}

#[derive(Debug, Clone, Args)]
pub struct VariantArgs {
    /// FCNN, GRU-2, GRU-4, ...; defaults to the config's model kind.
    #[arg(long)]
    pub variant: Option<RegressorKind>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub variant: VariantArgs,
    /// Perturb the start pose (overrides the config).
    #[arg(long)]
    pub random_start: Option<bool>,
}

#[derive(Debug, Clone, Args)]
pub struct PlotArgs {
    #[command(flatten)]
    pub eval: EvalArgs,
    /// Output file; defaults to plot.svg in the run directory.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

struct Ctx {
    cfg: RunConfig,
    out: PathBuf,
    quiet: bool,
}

impl Ctx {
    fn progress(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn open(&self) -> Result<RunDir> {
        RunDir::open(&self.out, &self.cfg)
    }

    fn variant(&self, v: &VariantArgs) -> RegressorKind {
        v.variant.unwrap_or(self.cfg.model.kind)
    }
}

fn rel(dir: &RunDir, p: &Path) -> String {
    p.strip_prefix(dir.path()).unwrap_or(p).display().to_string()
}

fn load_inputs(dir: &RunDir) -> Result<(BlockWorld, WaypointPath)> {
    let world = formats::read_world(&dir.file(rundir::WORLD))?;
    let path = formats::read_path(&dir.file(rundir::PATH))?;
    Ok((world, path))
}

fn world_gen(ctx: &Ctx, dir: &RunDir) -> Result<Value> {
    let world = generate_world(ctx.cfg.world_seed, &ctx.cfg.world).validation()?;
    let file = dir.file(rundir::WORLD);
    formats::write_world(&file, &world)?;
    Ok(json!({ "world": rel(dir, &file), "blocks": world.blocks.len(), "seed": world.seed }))
}

fn path_stats_json(path: &WaypointPath) -> Value {
    json!({
        "id": path.id(),
        "waypoints": path.len(),
        "distance": path_distance(path),
        "sum_angle_change": sum_angle_change(path),
    })
}

fn path_make(ctx: &Ctx, dir: &RunDir) -> Result<Value> {
    let path = make_path(&ctx.cfg.path).validation()?;
    let file = dir.file(rundir::PATH);
    formats::write_path(&file, &path)?;
    let mut v = path_stats_json(&path);
    v["path"] = json!(rel(dir, &file));
    Ok(v)
}

fn dataset_build(ctx: &Ctx, dir: &RunDir) -> Result<Value> {
    let (world, path) = load_inputs(dir)?;
    let c = &ctx.cfg;
    ctx.progress(format!("flying {} auxiliary paths", c.envelope.auxiliary_path_count));
    let ds = build_dataset(&path, &world, &c.envelope, &c.camera, &c.sim).validation()?;
    let out = dir.file(rundir::DATASET);
    dataset::write_dataset(&out, &ds)?;
    Ok(json!({
        "dataset": rel(dir, &out),
        "samples": ds.samples.len(),
        "regenerations": ds.manifest.regenerations,
    }))
}

fn train(ctx: &Ctx, dir: &RunDir, kind: RegressorKind) -> Result<Value> {
    let ds = dataset::read_dataset(&dir.file(rundir::DATASET))?;
    let spec = ctx.cfg.model.with_kind(kind);
    let epochs = ctx.cfg.train.epochs;
    let outcome = train_with(&ds, &spec, &ctx.cfg.train, |e| {
        if e.epoch % 10 == 0 || e.epoch + 1 == epochs {
            ctx.progress(format!("{kind} epoch {:>3} lr {:.3e} loss {:.6}", e.epoch, e.learning_rate, e.loss));
        }
    })
    .validation()?;
    let slug = kind.slug();
    let ckpt = dir.checkpoint(&slug);
    checkpoint::write_checkpoint(&ckpt, &outcome.model)?;
    let mut curve = String::from("epoch,learning_rate,loss\n");
    for (e, loss) in outcome.loss_curve.iter().enumerate() {
        writeln!(curve, "{e},{},{loss}", ctx.cfg.train.learning_rate_at(e)).expect("String write");
    }
    formats::write_bytes(&dir.loss_curve(&slug), curve.as_bytes())?;
    Ok(json!({
        "variant": kind.to_string(),
        "checkpoint": rel(dir, &ckpt),
        "final_loss": outcome.loss_curve.last(),
        "extractor_digest": hex::encode(outcome.model.extractor.digest()),
    }))
}

fn load_model(dir: &RunDir, kind: RegressorKind) -> Result<Model> {
    let model = checkpoint::read_checkpoint(&dir.checkpoint(&kind.slug()))?;
    if model.kind() != kind {
        return Err(CliError::validation(anyhow::anyhow!("checkpoint holds {}, expected {kind}", model.kind())));
    }
    Ok(model)
}

fn write_eval(dir: &RunDir, slug: &str, random_start: bool, outcome: &EvalOutcome) -> Result<PathBuf> {
    let out = dir.eval_dir(slug, random_start);
    formats::write_json(&out.join("metrics.json"), &outcome.report)?;
    for (i, t) in outcome.traces.iter().enumerate() {
        trace::write_trace(&out.join(format!("trial-{i}.csv")), t)?;
    }
    Ok(out)
}

fn eval(ctx: &Ctx, dir: &RunDir, kind: RegressorKind, random_start: bool) -> Result<Value> {
    let (world, path) = load_inputs(dir)?;
    let model = load_model(dir, kind)?;
    let c = &ctx.cfg;
    let cfg = EvalConfig { random_start, ..c.eval.clone() };
    let outcome = evaluate(&model, &path, &world, &c.camera, &c.sim, &cfg).validation()?;
    let out = write_eval(dir, &kind.slug(), random_start, &outcome)?;
    let r = &outcome.report;
    Ok(json!({
        "variant": r.variant,
        "random_start": random_start,
        "mwmd": r.mean_waypoint_min_distance,
        "mctd": r.mean_cross_track_distance,
        "completed_trials": r.completed_trials,
        "diverged_trials": r.diverged_trials,
        "trials": r.trials.len(),
        "eval": rel(dir, &out),
    }))
}

fn compare(ctx: &Ctx, dir: &RunDir) -> Result<Value> {
    let (world, path) = load_inputs(dir)?;
    let c = &ctx.cfg;
    let mut models = Vec::new();
    let mut missing = Vec::new();
    for kind in &c.compare.variants {
        let file = dir.checkpoint(&kind.slug());
        if file.exists() {
            models.push(load_model(dir, *kind)?);
        } else {
            missing.push(format!("{kind} ({})", file.display()));
        }
    }
    if !missing.is_empty() {
        return Err(CliError::validation(anyhow::anyhow!("missing checkpoint for {}", missing.join(", "))));
    }
    let table = compare_regressors(&path, &world, &c.camera, &c.sim, &c.eval, &c.compare.variants, &models, c.compare.baseline)
        .validation()?;
    let csv = dir.file(rundir::REPORT_CSV);
    formats::write_bytes(&csv, report::to_csv(&table.rows).as_bytes())?;
    formats::write_json(&dir.file(rundir::REPORT_JSON), &table.reports)?;
    Ok(json!({ "report": rel(dir, &csv), "rows": table.rows }))
}

fn plot(ctx: &Ctx, dir: &RunDir, kind: RegressorKind, random_start: bool, output: Option<&Path>) -> Result<Value> {
    let path = formats::read_path(&dir.file(rundir::PATH))?;
    let eval_dir = dir.eval_dir(&kind.slug(), random_start);
    let mut traces = Vec::new();
    for i in 0..ctx.cfg.eval.trials {
        traces.push(trace::read_trace(&eval_dir.join(format!("trial-{i}.csv")))?);
    }
    let svg = path_plot(&path, &traces).validation()?;
    let file = output.map(Path::to_path_buf).unwrap_or_else(|| dir.file(rundir::PLOT));
    formats::write_bytes(&file, svg.as_bytes())?;
    Ok(json!({ "plot": rel(dir, &file), "traces": traces.len() }))
}

fn pipeline(ctx: &Ctx, dir: &RunDir) -> Result<Value> {
    let mut steps = serde_json::Map::new();
    steps.insert("world".into(), world_gen(ctx, dir)?);
    steps.insert("path".into(), path_make(ctx, dir)?);
    steps.insert("dataset".into(), dataset_build(ctx, dir)?);
    let trained = ctx
        .cfg
        .compare
        .variants
        .iter()
        .map(|k| train(ctx, dir, *k))
        .collect::<Result<Vec<_>>>()?;
    steps.insert("train".into(), Value::Array(trained));
    steps.insert("compare".into(), compare(ctx, dir)?);
    let primary = ctx.cfg.compare.variants[0];
    let random_start = ctx.cfg.eval.random_start;
    steps.insert("eval".into(), eval(ctx, dir, primary, random_start)?);
    steps.insert("plot".into(), plot(ctx, dir, primary, random_start, None)?);
    Ok(Value::Object(steps))
}

fn human(v: &Value) -> String {
    match v {
        Value::Object(map) => map
            .iter()
            .map(|(k, v)| match v {
                Value::Object(_) | Value::Array(_) => format!("{k}: {v}"),
                Value::String(s) => format!("{k}: {s}"),
                other => format!("{k}: {other}"),
            })
            .collect::<Vec<_>>()
            .join("\n"),
        other => other.to_string(),
    }
}

fn load_config(global: &Global) -> Result<RunConfig> {
    let cfg = match &global.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.resolve(global.seed)
}

fn dispatch(cli: Cli) -> Result<Value> {
    let g = &cli.global;
    let mut cfg = load_config(g)?;
    if let Command::Path { command: PathCommand::Stats { file } } = &cli.command {
        let path = formats::read_path(file)?;
        return Ok(path_stats_json(&path));
    }
    if let Command::Path { command: PathCommand::Make { kind: Some(kind), .. } } = &cli.command {
        let spec = PathSpec::by_name(kind)
            .ok_or_else(|| CliError::usage(anyhow::anyhow!("unknown path kind `{kind}` (straight, l, zigzag, loop)")))?;
        if spec.kind() != cfg.path.kind() {
            cfg.path = spec;
        }
    }
    let ctx = Ctx { cfg, out: g.out.clone(), quiet: g.quiet };
    if let Command::Path { command: PathCommand::Make { file: Some(file), .. } } = &cli.command {
        let path = make_path(&ctx.cfg.path).validation()?;
        formats::write_path(file, &path)?;
        let mut v = path_stats_json(&path);
        v["path"] = json!(file.display().to_string());
        return Ok(v);
    }
    let dir = ctx.open()?;
    let mut v = match &cli.command {
        Command::World { command: WorldCommand::Gen } => world_gen(&ctx, &dir),
        Command::Path { command: PathCommand::Make { .. } } => path_make(&ctx, &dir),
        Command::Path { command: PathCommand::Stats { .. } } => unreachable!("handled above"),
        Command::Dataset { command: DatasetCommand::Build } => dataset_build(&ctx, &dir),
        Command::Train(v) => train(&ctx, &dir, ctx.variant(v)),
        Command::Eval(a) => eval(&ctx, &dir, ctx.variant(&a.variant), a.random_start.unwrap_or(ctx.cfg.eval.random_start)),
        Command::Compare => compare(&ctx, &dir),
        Command::Plot(a) => plot(
            &ctx,
            &dir,
            ctx.variant(&a.eval.variant),
            a.eval.random_start.unwrap_or(ctx.cfg.eval.random_start),
            a.output.as_deref(),
        ),
        Command::Pipeline => pipeline(&ctx, &dir),
    }?;
    if let Value::Object(map) = &mut v {
        map.insert("run_dir".into(), json!(dir.path().display().to_string()));
    }
    Ok(v)
}

/// Runs the CLI on `args` and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let (quiet, json_mode) = (cli.global.quiet, cli.global.json);
    match dispatch(cli) {
        Ok(v) => {
            if json_mode {
                println!("{v}");
            } else if !quiet {
                println!("{}", human(&v));
            }
            0
        }
        Err(e) => {
            if json_mode {
                println!("{}", json!({ "error": { "kind": e.kind_str(), "message": e.to_string(), "exit_code": e.exit_code() } }));
            }
            eprintln!("error[{}]: {e}", e.kind_str());
            e.exit_code()
        }
    }
}
