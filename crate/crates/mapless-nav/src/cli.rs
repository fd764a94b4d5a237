//! Command-line plumbing: `train`, `eval`, and `grid` subcommands that tie
//! configuration, the training loop, evaluation, tables, and charts into
//! reproducible result directories, each carrying a manifest that suffices
//! to re-create the run.

use crate::agents::Algo;
use crate::arch::ArchId;
use crate::config::Settings;
use crate::env::{Mode, ObsMode, Scenario};
use crate::error::{Error, Result};
use crate::eval::{eval_goal, eval_waypoint, EvalJob, Task, WaypointRoute};
use crate::par;
use crate::plot::{self, Bar, Series};
use crate::report::{render_text, write_tables, write_trials_jsonl, TableRow};
use crate::train::{load_learner, reward_curve, TrainConfig, TrainSession};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

#[derive(Parser)]
#[command(
    name = "mapless-nav",
    version,
    about = "Train and evaluate lidar-only navigation policies in a simulated room"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Train one agent and record logs, checkpoints, and a reward curve.
    Train(TrainArgs),
    /// Evaluate a trained checkpoint on the goal or waypoint task.
    Eval(EvalArgs),
    /// Train and evaluate a whole algorithm × architecture grid.
    Grid(GridArgs),
}

#[derive(Args)]
pub struct TrainArgs {
    /// Flat key=value config file; explicit flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Learning algorithm: ddpg or sac.
    #[arg(long)]
    pub algo: Option<String>,
    /// Network architecture: mlp2, mlp3, mlp4, mlp5, lstm, or conv.
    #[arg(long)]
    pub arch: Option<String>,
    /// Room layout: 1, 2, or a scenario file path.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Motion mode: 2d or 3d.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Results root (default: $MAPLESS_NAV_RESULTS or ./results).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Name the run directory instead of generating an id.
    #[arg(long)]
    pub run_id: Option<String>,
    /// Continue a previous run from its last checkpoint.
    #[arg(long)]
    pub resume: bool,
    /// Disable thread-level parallelism (evaluation trials).
    #[arg(long)]
    pub sequential: bool,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub buffer: Option<usize>,
    #[arg(long)]
    pub warmup: Option<usize>,
    #[arg(long)]
    pub step_limit: Option<usize>,
    /// Checkpoint (and optionally evaluate) every N episodes; 0 disables.
    #[arg(long)]
    pub eval_every: Option<usize>,
    /// Trials per mid-training evaluation; 0 skips evaluation.
    #[arg(long)]
    pub eval_trials: Option<usize>,
    /// Stop once a mid-training evaluation reaches this success fraction.
    #[arg(long)]
    pub stop_at: Option<f64>,
}

#[derive(Args)]
pub struct EvalArgs {
    /// Checkpoint directory (or the run directory containing `checkpoint/`).
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Evaluation protocol: goal or waypoint.
    #[arg(long, default_value = "goal")]
    pub task: String,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Results root (default: $MAPLESS_NAV_RESULTS or ./results).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Name the result directory instead of generating an id.
    #[arg(long)]
    pub run_id: Option<String>,
    /// Run trials on one thread.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Args)]
pub struct GridArgs {
    /// Grid file: `algos`, `archs`, `scenarios`, `modes` lists plus any
    /// config keys applied to every cell.
    #[arg(long)]
    pub spec: PathBuf,
    /// Results root (default: $MAPLESS_NAV_RESULTS or ./results).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Name the grid directory instead of generating an id.
    #[arg(long)]
    pub run_id: Option<String>,
    /// Run everything on one thread.
    #[arg(long)]
    pub sequential: bool,
}

/// Everything needed to re-create a run, written at start (without the end
/// timestamp) and finalized on completion.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub run_id: String,
    pub kind: &'static str,
    pub seed: u64,
    pub version: &'static str,
    pub started_unix: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ended_unix: Option<u64>,
    pub config: Vec<String>,
    pub artifacts: Vec<String>,
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<()> {
    let path = dir.join("manifest.json");
    let tmp = dir.join("manifest.json.tmp");
    let mut text = serde_json::to_string_pretty(manifest).map_err(|e| Error::Json {
        context: path.display().to_string(),
        source: e,
    })?;
    text.push('\n');
    fs::write(&tmp, text).map_err(|e| Error::io(format!("writing {}", tmp.display()), e))?;
    fs::rename(&tmp, &path)
        .map_err(|e| Error::io(format!("publishing {}", path.display()), e))
}

fn fnv1a(text: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in text.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn make_run_id(prefix: &str, seed: u64, digest: &str) -> String {
    format!("{prefix}{}-s{}-{:08x}", unix_now(), seed, (fnv1a(digest) >> 32) as u32)
}

fn results_root(flag: Option<PathBuf>, settings_out: Option<&PathBuf>) -> PathBuf {
    flag.or_else(|| settings_out.cloned())
        .or_else(|| std::env::var_os("MAPLESS_NAV_RESULTS").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))
}

fn scenario_from_label(label: &str) -> Result<Scenario> {
    match label {
        "1" => Scenario::builtin(1),
        "2" => Scenario::builtin(2),
        path => Scenario::from_file(Path::new(path)),
    }
}

fn obs_mode_for_width(obs_len: usize) -> ObsMode {
    if obs_len == ObsMode::Wide.obs_len() {
        ObsMode::Wide
    } else {
        ObsMode::Standard
    }
}

fn settings_from_train_args(args: &TrainArgs) -> Result<Settings> {
    let mut s = Settings::default();
    if let Some(path) = &args.config {
        s.merge_file(path)?;
    }
    if let Some(v) = &args.algo {
        s.apply("algo", v)?;
    }
    if let Some(v) = &args.arch {
        s.apply("arch", v)?;
    }
    if let Some(v) = &args.scenario {
        s.apply("scenario", v)?;
    }
    if let Some(v) = &args.mode {
        s.apply("mode", v)?;
    }
    if let Some(v) = args.episodes {
        s.episodes = Some(v);
    }
    if let Some(v) = args.seed {
        s.seed = v;
    }
    if let Some(v) = &args.out {
        s.out = Some(v.clone());
    }
    if let Some(v) = &args.run_id {
        s.run_id = Some(v.clone());
    }
    if let Some(v) = args.lr {
        s.lr = v;
    }
    if let Some(v) = args.gamma {
        s.gamma = v;
    }
    if let Some(v) = args.tau {
        s.tau = v;
    }
    if let Some(v) = args.alpha {
        s.alpha = v;
    }
    if let Some(v) = args.batch {
        s.batch = v;
    }
    if let Some(v) = args.buffer {
        s.buffer = v;
    }
    if let Some(v) = args.warmup {
        s.warmup = v;
    }
    if let Some(v) = args.step_limit {
        s.step_limit = v;
    }
    if let Some(v) = args.eval_every {
        s.eval_every = v;
    }
    if let Some(v) = args.eval_trials {
        s.eval_trials = v;
    }
    if let Some(v) = args.stop_at {
        s.stop_at = Some(v);
    }
    Ok(s)
}

fn read_rewards(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let mut rewards = Vec::new();
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).map_err(|e| Error::Json {
            context: path.display().to_string(),
            source: e,
        })?;
        rewards.push(v["reward"].as_f64().unwrap_or(f64::NAN));
    }
    Ok(rewards)
}

/// Smoothing window scaled to the series length.
fn curve_window(n: usize) -> usize {
    (n / 25).max(1)
}

fn combo_label(algo: Algo, arch: ArchId) -> String {
    format!("{}/{}", algo.as_str(), arch.as_str())
}

fn panel_title(scenario_label: &str, mode: Mode) -> String {
    format!("room {scenario_label}, {}", mode.as_str())
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    if args.sequential {
        par::set_parallel(false);
    }
    let settings = settings_from_train_args(args)?;
    let cfg = TrainConfig::resolve(&settings)?;
    let root = results_root(args.out.clone(), settings.out.as_ref());
    let run_id = settings
        .run_id
        .clone()
        .unwrap_or_else(|| make_run_id("run-", cfg.seed, &settings.echo()));
    let run_dir = root.join(&run_id);
    if run_dir.join("episodes.jsonl").exists() && !args.resume {
        return Err(Error::config(format!(
            "{} already holds a run; pass --resume to continue it or pick another --run-id",
            run_dir.display()
        )));
    }
    ensure_dir(&run_dir)?;
    let mut manifest = RunManifest {
        run_id: run_id.clone(),
        kind: "train",
        seed: cfg.seed,
        version: env!("CARGO_PKG_VERSION"),
        started_unix: unix_now(),
        ended_unix: None,
        config: settings.echo().lines().map(str::to_string).collect(),
        artifacts: vec![
            "manifest.json".into(),
            "episodes.jsonl".into(),
            "checkpoint/".into(),
            "reward_curve.svg".into(),
            "reward_curve.csv".into(),
        ],
    };
    write_manifest(&run_dir, &manifest)?;
    let mut session = if args.resume {
        TrainSession::resume(cfg.clone(), &run_dir)?
    } else {
        TrainSession::new(cfg.clone())?
    };
    let stdout = std::io::stdout();
    let outcome = session.run(&run_dir, &mut stdout.lock())?;

    let rewards = read_rewards(&run_dir.join("episodes.jsonl"))?;
    let series = Series {
        label: combo_label(cfg.algo, cfg.arch),
        values: reward_curve(&rewards, curve_window(rewards.len()))?,
    };
    plot::write_reward_curves(
        &run_dir,
        &[(panel_title(&cfg.scenario_label, cfg.mode), vec![series])],
    )?;
    manifest.ended_unix = Some(unix_now());
    write_manifest(&run_dir, &manifest)?;
    println!(
        "trained {} episodes{} -> {}",
        outcome.episodes,
        if outcome.stopped_early { " (stopped at target success rate)" } else { "" },
        run_dir.display()
    );
    Ok(())
}

/// Accept either the checkpoint directory itself or its parent run directory.
fn locate_checkpoint(path: &Path) -> Result<PathBuf> {
    if path.join("manifest.txt").is_file() {
        return Ok(path.to_path_buf());
    }
    let nested = path.join("checkpoint");
    if nested.join("manifest.txt").is_file() {
        return Ok(nested);
    }
    Err(Error::Checkpoint {
        path: path.to_path_buf(),
        reason: "no manifest.txt here or in a checkpoint/ subdirectory".into(),
    })
}

fn distance_std(records: &[crate::eval::TrialRecord]) -> f64 {
    let vals: Vec<f64> = records.iter().filter_map(|r| r.distance_fraction).collect();
    if vals.is_empty() {
        return 0.0;
    }
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64).sqrt()
}

fn emit_row_artifacts(dir: &Path, rows: &[TableRow]) -> Result<()> {
    write_tables(rows, dir)?;
    write_trials_jsonl(rows, &dir.join("trials.jsonl"))?;
    let time_bars: Vec<Bar> = rows
        .iter()
        .map(|r| Bar {
            label: format!(
                "{} s{} {}",
                combo_label(r.algo, r.arch),
                r.scenario,
                r.mode.as_str()
            ),
            value: r.summary.mean_time_s,
            std: r.summary.std_time_s,
        })
        .collect();
    plot::write_time_bars(dir, &time_bars)?;
    let distance_bars: Vec<Bar> = rows
        .iter()
        .filter(|r| r.task == Task::Waypoint)
        .filter_map(|r| {
            r.summary.mean_distance.map(|d| Bar {
                label: format!(
                    "{} s{} {}",
                    combo_label(r.algo, r.arch),
                    r.scenario,
                    r.mode.as_str()
                ),
                value: d,
                std: distance_std(&r.summary.records),
            })
        })
        .collect();
    plot::write_distance_bars(dir, &distance_bars)
}

pub fn cmd_eval(args: &EvalArgs) -> Result<()> {
    if args.sequential {
        par::set_parallel(false);
    }
    if args.trials == 0 {
        return Err(Error::usage("--trials must be at least 1"));
    }
    let task = Task::parse(&args.task)?;
    let ckpt_dir = locate_checkpoint(&args.checkpoint)?;
    let (learner, meta) = load_learner(&ckpt_dir)?;
    let scenario = scenario_from_label(&meta.scenario_label)?;
    let job = EvalJob {
        scenario: scenario.clone(),
        mode: meta.mode,
        obs_mode: obs_mode_for_width(meta.obs_len),
        trials: args.trials,
        seed: args.seed,
        step_limit: meta.step_limit,
    };
    let summary = match task {
        Task::Goal => eval_goal(&learner, &job)?,
        Task::Waypoint => {
            let route = WaypointRoute::circuit(&scenario, meta.mode)?;
            eval_waypoint(&learner, &job, &route)?
        }
    };
    let rows = vec![TableRow {
        task,
        mode: meta.mode,
        scenario: meta.scenario_label.clone(),
        algo: meta.algo,
        arch: meta.arch,
        summary,
    }];

    let root = results_root(args.out.clone(), None);
    let run_id = args.run_id.clone().unwrap_or_else(|| {
        make_run_id("eval-", args.seed, &format!("{} {}", ckpt_dir.display(), args.task))
    });
    let dir = root.join(&run_id);
    ensure_dir(&dir)?;
    let mut manifest = RunManifest {
        run_id: run_id.clone(),
        kind: "eval",
        seed: args.seed,
        version: env!("CARGO_PKG_VERSION"),
        started_unix: unix_now(),
        ended_unix: None,
        config: vec![
            format!("checkpoint = {}", ckpt_dir.display()),
            format!("task = {}", task.as_str()),
            format!("trials = {}", args.trials),
            format!("seed = {}", args.seed),
        ],
        artifacts: vec![
            "manifest.json".into(),
            "table.csv".into(),
            "table.txt".into(),
            "trials.jsonl".into(),
            "reward_curve.svg".into(),
            "reward_curve.csv".into(),
            "time_bars.svg".into(),
            "time_bars.csv".into(),
            "distance_bars.svg".into(),
            "distance_bars.csv".into(),
        ],
    };
    write_manifest(&dir, &manifest)?;
    emit_row_artifacts(&dir, &rows)?;

    // If the checkpoint's run directory kept its episode log, carry the
    // training curve along; otherwise leave an explanatory placeholder.
    let episode_log = ckpt_dir.parent().map(|p| p.join("episodes.jsonl"));
    match episode_log.filter(|p| p.is_file()) {
        Some(path) => {
            let rewards = read_rewards(&path)?;
            let series = Series {
                label: combo_label(meta.algo, meta.arch),
                values: reward_curve(&rewards, curve_window(rewards.len()))?,
            };
            plot::write_reward_curves(
                &dir,
                &[(panel_title(&meta.scenario_label, meta.mode), vec![series])],
            )?;
        }
        None => plot::write_reward_curves(&dir, &[])?,
    }

    print!("{}", render_text(&rows)?);
    manifest.ended_unix = Some(unix_now());
    write_manifest(&dir, &manifest)?;
    println!("results -> {}", dir.display());
    Ok(())
}

/// Cross product of the grid lists plus shared cell settings.
struct GridSpec {
    algos: Vec<Algo>,
    archs: Vec<ArchId>,
    scenarios: Vec<String>,
    modes: Vec<Mode>,
    trials: usize,
    base: Settings,
    raw: String,
}

fn parse_list<T>(value: &str, parse: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(parse)
        .collect()
}

fn parse_grid_spec(path: &Path) -> Result<GridSpec> {
    let raw = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading grid spec {}", path.display()), e))?;
    let mut algos = Vec::new();
    let mut archs = Vec::new();
    let mut scenarios = Vec::new();
    let mut modes = Vec::new();
    let mut trials = 100usize;
    let mut base = Settings::default();
    for (lineno, line) in raw.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::usage(format!(
                "{}:{}: expected 'key = value', got '{line}'",
                path.display(),
                lineno + 1
            ))
        })?;
        let key = key.trim().to_ascii_lowercase().replace('-', "_");
        let value = value.trim();
        match key.as_str() {
            "algos" => algos = parse_list(value, Algo::parse)?,
            "archs" => archs = parse_list(value, ArchId::parse)?,
            "scenarios" => scenarios = parse_list(value, |v| Ok(v.to_string()))?,
            "modes" => modes = parse_list(value, Mode::parse)?,
            "trials" => {
                trials = value.parse().map_err(|_| {
                    Error::usage(format!("grid key 'trials': cannot parse '{value}'"))
                })?
            }
            _ => base.apply(&key, value)?,
        }
    }
    for (name, empty) in [
        ("algos", algos.is_empty()),
        ("archs", archs.is_empty()),
        ("scenarios", scenarios.is_empty()),
        ("modes", modes.is_empty()),
    ] {
        if empty {
            return Err(Error::usage(format!(
                "grid spec {} lists no {name}; nothing to run",
                path.display()
            )));
        }
    }
    Ok(GridSpec { algos, archs, scenarios, modes, trials, base, raw })
}

fn run_grid_cell(
    spec: &GridSpec,
    grid_dir: &Path,
    scenario: &str,
    mode: Mode,
    algo: Algo,
    arch: ArchId,
) -> Result<(Vec<TableRow>, Vec<f64>)> {
    let mut settings = spec.base.clone();
    settings.apply("scenario", scenario)?;
    settings.mode = mode;
    settings.algo = Some(algo);
    settings.arch = Some(arch);
    let cfg = TrainConfig::resolve(&settings)?;
    let cell_dir = grid_dir.join("cells").join(format!(
        "s{scenario}-{}-{}-{}",
        mode.as_str(),
        algo.as_str(),
        arch.as_str()
    ));
    ensure_dir(&cell_dir)?;
    let mut session = TrainSession::new(cfg.clone())?;
    let mut progress = std::io::sink();
    session.run(&cell_dir, &mut progress)?;

    let job = EvalJob {
        scenario: cfg.scenario.clone(),
        mode,
        obs_mode: cfg.obs_mode,
        trials: spec.trials,
        seed: cfg.seed,
        step_limit: cfg.step_limit,
    };
    let route = WaypointRoute::circuit(&cfg.scenario, mode)?;
    let goal = eval_goal(&session.learner, &job)?;
    let waypoint = eval_waypoint(&session.learner, &job, &route)?;
    let rewards = read_rewards(&cell_dir.join("episodes.jsonl"))?;
    let rows = vec![
        TableRow {
            task: Task::Goal,
            mode,
            scenario: scenario.to_string(),
            algo,
            arch,
            summary: goal,
        },
        TableRow {
            task: Task::Waypoint,
            mode,
            scenario: scenario.to_string(),
            algo,
            arch,
            summary: waypoint,
        },
    ];
    Ok((rows, rewards))
}

pub fn cmd_grid(args: &GridArgs) -> Result<()> {
    if args.sequential {
        par::set_parallel(false);
    }
    let spec = parse_grid_spec(&args.spec)?;
    let root = results_root(args.out.clone(), spec.base.out.as_ref());
    let run_id = args
        .run_id
        .clone()
        .unwrap_or_else(|| make_run_id("grid-", spec.base.seed, &spec.raw));
    let grid_dir = root.join(&run_id);
    ensure_dir(&grid_dir)?;
    let mut manifest = RunManifest {
        run_id: run_id.clone(),
        kind: "grid",
        seed: spec.base.seed,
        version: env!("CARGO_PKG_VERSION"),
        started_unix: unix_now(),
        ended_unix: None,
        config: spec.raw.lines().map(str::to_string).collect(),
        artifacts: vec![
            "manifest.json".into(),
            "cells/".into(),
            "table.csv".into(),
            "table.txt".into(),
            "trials.jsonl".into(),
            "reward_curve.svg".into(),
            "reward_curve.csv".into(),
            "time_bars.svg".into(),
            "time_bars.csv".into(),
            "distance_bars.svg".into(),
            "distance_bars.csv".into(),
        ],
    };
    write_manifest(&grid_dir, &manifest)?;

    let mut rows = Vec::new();
    let mut failures: Vec<String> = Vec::new();
    let mut panels: Vec<(String, Vec<Series>)> = Vec::new();
    for scenario in &spec.scenarios {
        for &mode in &spec.modes {
            let mut series = Vec::new();
            for &algo in &spec.algos {
                for &arch in &spec.archs {
                    let cell = format!(
                        "s{scenario}-{}-{}-{}",
                        mode.as_str(),
                        algo.as_str(),
                        arch.as_str()
                    );
                    match run_grid_cell(&spec, &grid_dir, scenario, mode, algo, arch) {
                        Ok((mut cell_rows, rewards)) => {
                            rows.append(&mut cell_rows);
                            series.push(Series {
                                label: combo_label(algo, arch),
                                values: reward_curve(&rewards, curve_window(rewards.len()))?,
                            });
                            eprintln!("grid: finished {cell}");
                        }
                        Err(e) => {
                            eprintln!("grid: cell {cell} failed: {e}");
                            failures.push(format!("{cell}: {e}"));
                        }
                    }
                }
            }
            if !series.is_empty() {
                panels.push((panel_title(scenario, mode), series));
            }
        }
    }

    if !rows.is_empty() {
        emit_row_artifacts(&grid_dir, &rows)?;
        plot::write_reward_curves(&grid_dir, &panels)?;
        let text = fs::read_to_string(grid_dir.join("table.txt"))
            .map_err(|e| Error::io("reading back table.txt", e))?;
        print!("{text}");
    }
    manifest.ended_unix = Some(unix_now());
    write_manifest(&grid_dir, &manifest)?;
    println!("results -> {}", grid_dir.display());
    if !failures.is_empty() {
        return Err(Error::failed(format!(
            "{} grid cell(s) failed:\n  {}",
            failures.len(),
            failures.join("\n  ")
        )));
    }
    Ok(())
}

/// Parse arguments, dispatch, and map errors to exit codes: 2 for usage
/// problems, 1 for everything else.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Grid(args) => cmd_grid(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "error: {e}");
            match e {
                Error::Usage(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
