//! Gates that exercise whole training runs: determinism of the shipped
//! binary, desk-scale learning to ≥90% success, and the all-architectures
//! smoke grid. Trained artifacts cache under the target tmp dir keyed by
//! their full configuration, so only the first run pays the training cost.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use mapless_nav::agents::Algo;
use mapless_nav::arch::ArchId;
use mapless_nav::env::{Mode, ObsMode, Scenario};
use mapless_nav::train::{TrainConfig, TrainSession};

/// Success threshold for the desk-scale learning gate.
const DESK_RATE: f64 = 0.9;
/// Hard per-seed episode budget for the desk-scale learning gate.
const DESK_EPISODES: usize = 1000;
/// Evaluation trials per round; the stopping evaluation is the gate.
const DESK_EVAL_TRIALS: usize = 100;
const DESK_EVAL_EVERY: usize = 25;
const DESK_WARMUP: usize = 5000;
const DESK_SEEDS: [u64; 3] = [1, 2, 3];
/// Wall budget per algorithm (twice the nominal runtime target). Once a
/// failing seed has burned this much, remaining seeds are skipped — that can
/// only shorten the evidence for an already-failing gate, never pass it.
const DESK_WALL_BUDGET_S: f64 = 4.0 * 3600.0;

const SMOKE_EPISODES: usize = 50;
const SMOKE_STEP_LIMIT: usize = 100;
const SMOKE_WARMUP: usize = 200;
const SMOKE_BATCH: usize = 32;
const SMOKE_BUFFER: usize = 2000;
const SMOKE_BUDGET_S: f64 = 30.0 * 60.0;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_mapless-nav")
}

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(name);
    fs::create_dir_all(&dir).expect("create scratch dir");
    dir
}

fn run_ok(args: &[&str]) -> String {
    let out = Command::new(bin()).args(args).output().expect("spawn binary");
    assert!(
        out.status.success(),
        "`{}` failed:\n{}{}",
        args.join(" "),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr),
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// Gate 7: a seeded single-threaded run is byte-reproducible — the episode
/// log from training and the summary table from evaluation come out
/// identical when the binary runs twice with the same arguments.
#[test]
fn c07_byte_identical_reruns() {
    let root = scratch("determinism");
    let mut tables: Vec<Vec<u8>> = Vec::new();
    let mut logs: Vec<Vec<u8>> = Vec::new();
    for run in ["a", "b"] {
        let out = root.join(run);
        // Two short runs per algorithm family would double the time for no
        // extra coverage: the stochastic learner exercises every stream the
        // deterministic one does plus reparameterization draws.
        let train_id = format!("det-train-{run}");
        run_ok(&[
            "train",
            "--algo",
            "sac",
            "--arch",
            "mlp2",
            "--scenario",
            "1",
            "--mode",
            "2d",
            "--seed",
            "11",
            "--episodes",
            "2",
            "--warmup",
            "64",
            "--batch",
            "32",
            "--step-limit",
            "60",
            "--eval-every",
            "0",
            "--eval-trials",
            "0",
            "--sequential",
            "--out",
            out.to_str().unwrap(),
            "--run-id",
            &train_id,
        ]);
        let eval_id = format!("det-eval-{run}");
        run_ok(&[
            "eval",
            "--checkpoint",
            out.join(&train_id).to_str().unwrap(),
            "--task",
            "goal",
            "--trials",
            "25",
            "--seed",
            "12",
            "--sequential",
            "--out",
            out.to_str().unwrap(),
            "--run-id",
            &eval_id,
        ]);
        logs.push(fs::read(out.join(&train_id).join("episodes.jsonl")).unwrap());
        tables.push(fs::read(out.join(&eval_id).join("table.csv")).unwrap());
    }
    assert!(!logs[0].is_empty() && !tables[0].is_empty());
    assert_eq!(logs[0], logs[1], "episode logs differ between identical runs");
    assert_eq!(tables[0], tables[1], "summary tables differ between identical runs");
    println!(
        "c07 determinism: PASS (episodes.jsonl {} bytes and table.csv {} bytes identical across reruns)",
        logs[0].len(),
        tables[0].len()
    );
}

/// Train one desk-scale seed to the stopping rule, or return its cached
/// verdict. Returns (final success rate, episodes used, fresh wall seconds).
fn desk_seed(algo: &str, arch: &str, seed: u64) -> (f64, usize, f64) {
    let dir = scratch(&format!("desk-{algo}-{arch}-s{seed}"));
    let verdict = dir.join("verdict.txt");
    if let Ok(text) = fs::read_to_string(&verdict) {
        let mut it = text.split_whitespace();
        let rate: f64 = it.next().unwrap().parse().unwrap();
        let eps: usize = it.next().unwrap().parse().unwrap();
        return (rate, eps, 0.0);
    }
    let started = Instant::now();
    let stdout = run_ok(&[
        "train",
        "--algo",
        algo,
        "--arch",
        arch,
        "--scenario",
        "1",
        "--mode",
        "2d",
        "--seed",
        &seed.to_string(),
        "--episodes",
        &DESK_EPISODES.to_string(),
        "--warmup",
        &DESK_WARMUP.to_string(),
        "--eval-every",
        &DESK_EVAL_EVERY.to_string(),
        "--eval-trials",
        &DESK_EVAL_TRIALS.to_string(),
        "--stop-at",
        &DESK_RATE.to_string(),
        "--sequential",
        "--out",
        dir.to_str().unwrap(),
        "--run-id",
        "run",
    ]);
    fs::write(dir.join("train.log"), &stdout).unwrap();
    // The last mid-training evaluation is the gate: 100 seeded trials of the
    // frozen policy. Lines look like `eval ep=150 rate=96.0% ...`.
    let (mut rate, mut eps) = (0.0f64, DESK_EPISODES);
    for line in stdout.lines() {
        if let Some(rest) = line.strip_prefix("eval ep=") {
            let mut parts = rest.split_whitespace();
            eps = parts.next().unwrap().parse().unwrap();
            let r = parts
                .next()
                .unwrap()
                .strip_prefix("rate=")
                .unwrap()
                .strip_suffix('%')
                .unwrap();
            rate = r.parse::<f64>().unwrap() / 100.0;
        }
    }
    fs::write(&verdict, format!("{rate} {eps}\n")).unwrap();
    (rate, eps, started.elapsed().as_secs_f64())
}

/// Gate 8: within 1000 episodes, the best of three seeds reaches ≥90%
/// success over 100 seeded evaluation trials — for the deterministic learner
/// on the 3-hidden-layer network and the stochastic learner on the
/// 2-hidden-layer network, both in the empty room, planar motion.
#[test]
fn c08_desk_scale_learning() {
    for (algo, arch) in [("ddpg", "mlp3"), ("sac", "mlp2")] {
        let mut fresh_secs = 0.0;
        let mut best: Option<(u64, f64, usize)> = None;
        let mut attempts = Vec::new();
        for &seed in &DESK_SEEDS {
            if fresh_secs > DESK_WALL_BUDGET_S {
                attempts.push(format!("seed {seed}: skipped, wall budget spent"));
                continue;
            }
            let (rate, eps, secs) = desk_seed(algo, arch, seed);
            fresh_secs += secs;
            attempts.push(format!("seed {seed}: {:.0}% at ep {eps}", rate * 100.0));
            if rate >= DESK_RATE {
                best = Some((seed, rate, eps));
                break;
            }
        }
        let (seed, rate, eps) = best.unwrap_or_else(|| {
            panic!(
                "{algo}+{arch} never reached {:.0}% success over {DESK_EVAL_TRIALS} trials \
                 within {DESK_EPISODES} episodes: {}",
                DESK_RATE * 100.0,
                attempts.join("; ")
            )
        });
        println!(
            "c08 desk-scale {algo}+{arch}: PASS (seed {seed} hit {:.0}% >= {:.0}% over {DESK_EVAL_TRIALS} trials at episode {eps})",
            rate * 100.0,
            DESK_RATE * 100.0
        );
    }
}

/// Gate 9: every architecture trains under both algorithms for 50 episodes
/// in the empty room without NaN, with the replay exactly tracking pushed
/// steps and one gradient update per step past the replay floor; the whole
/// grid finishes inside 30 minutes.
#[test]
fn c09_smoke_grid() {
    let started = Instant::now();
    let mut cells = 0;
    for algo in [Algo::Ddpg, Algo::Sac] {
        for arch in ArchId::all() {
            let obs_mode = if arch.obs_width() == ObsMode::Wide.obs_len() {
                ObsMode::Wide
            } else {
                ObsMode::Standard
            };
            let mut hypers = mapless_nav::agents::Hypers::default();
            hypers.batch_size = SMOKE_BATCH;
            let cfg = TrainConfig {
                algo,
                arch,
                scenario: Scenario::one(),
                scenario_label: "1".to_string(),
                mode: Mode::TwoD,
                obs_mode,
                episodes: SMOKE_EPISODES,
                seed: 7,
                hypers,
                buffer_capacity: SMOKE_BUFFER,
                warmup: SMOKE_WARMUP,
                step_limit: SMOKE_STEP_LIMIT,
                eval_every: 0,
                eval_trials: 0,
                stop_at: None,
            };
            let floor = SMOKE_WARMUP.max(SMOKE_BATCH) as u64;
            let mut session = TrainSession::new(cfg).unwrap();
            for _ in 0..SMOKE_EPISODES {
                let log = session.run_episode().unwrap_or_else(|e| {
                    panic!("{algo:?}+{arch:?}: episode failed: {e}")
                });
                assert!(
                    log.reward.is_finite(),
                    "{algo:?}+{arch:?}: episode {} reward {}",
                    log.episode,
                    log.reward
                );
                assert!(log.steps as usize <= SMOKE_STEP_LIMIT);
                let steps = session.total_steps();
                assert_eq!(
                    session.buffer_len() as u64,
                    steps.min(SMOKE_BUFFER as u64),
                    "{algo:?}+{arch:?}: replay must hold exactly the last pushes"
                );
                assert_eq!(
                    session.updates_done(),
                    steps.saturating_sub(floor - 1),
                    "{algo:?}+{arch:?}: one update per step past the replay floor"
                );
            }
            assert_eq!(session.episodes_done(), SMOKE_EPISODES);
            for (name, arena) in session.learner.arenas() {
                assert!(
                    arena.value().iter().all(|v| v.is_finite()),
                    "{algo:?}+{arch:?}: non-finite parameter in {name}"
                );
            }
            cells += 1;
        }
    }
    let secs = started.elapsed().as_secs_f64();
    assert_eq!(cells, 12);
    assert!(secs < SMOKE_BUDGET_S, "smoke grid took {secs:.0} s");
    println!(
        "c09 smoke-grid: PASS (12 cells x {SMOKE_EPISODES} episodes, all finite, invariants held, {secs:.0} s < {SMOKE_BUDGET_S:.0} s)"
    );
}
