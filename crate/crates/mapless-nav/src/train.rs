//! Episode-driven training: seeded rollouts feed a replay buffer, one
//! gradient update per environment step once warmed up, JSON-lines episode
//! logs, and atomically swapped checkpoints that resume bit-for-bit.

use crate::agents::{Algo, Hypers, Learner, ReplayBuffer, Transition};
use crate::arch::ArchId;
use crate::config::Settings;
use crate::env::{self, Mode, ObsMode, Scenario, Terminal, World};
use crate::error::{Error, Result};
use crate::eval::{eval_goal, EvalJob, EvalSummary};
use crate::nn::checkpoint::{load_params, save_params};
use crate::rng::{RunStreams, Stream};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::fmt::Write as _;
use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Fully resolved run description; every field the loop needs, no options.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub algo: Algo,
    pub arch: ArchId,
    pub scenario: Scenario,
    /// How the scenario was requested ("1", "2", or a file path); recorded in
    /// checkpoints so a resume can detect a swapped world.
    pub scenario_label: String,
    pub mode: Mode,
    pub obs_mode: ObsMode,
    pub episodes: usize,
    pub seed: u64,
    pub hypers: Hypers,
    pub buffer_capacity: usize,
    pub warmup: usize,
    pub step_limit: usize,
    pub eval_every: usize,
    pub eval_trials: usize,
    /// End early once a mid-run evaluation reaches this success fraction.
    pub stop_at: Option<f64>,
}

fn name_list<T: Copy, I: IntoIterator<Item = T>>(items: I, name: fn(T) -> &'static str) -> String {
    items.into_iter().map(name).collect::<Vec<_>>().join(", ")
}

impl TrainConfig {
    /// Validate user settings and fill scenario-dependent defaults.
    pub fn resolve(s: &Settings) -> Result<TrainConfig> {
        let algo = s.algo.ok_or_else(|| {
            Error::usage(format!(
                "missing algo (expected one of: {})",
                name_list(Algo::all(), Algo::as_str)
            ))
        })?;
        let arch = s.arch.ok_or_else(|| {
            Error::usage(format!(
                "missing arch (expected one of: {})",
                name_list(ArchId::all(), ArchId::as_str)
            ))
        })?;
        let scenario = match s.scenario.as_str() {
            "1" => Scenario::builtin(1)?,
            "2" => Scenario::builtin(2)?,
            path => Scenario::from_file(Path::new(path))?,
        };
        let episodes = s
            .episodes
            .unwrap_or(if s.scenario == "2" { 1500 } else { 1000 });
        if episodes == 0 {
            return Err(Error::config("episodes must be at least 1"));
        }
        if s.batch == 0 {
            return Err(Error::config("batch must be at least 1"));
        }
        if s.batch > s.buffer {
            return Err(Error::config(format!(
                "batch ({}) cannot exceed buffer capacity ({})",
                s.batch, s.buffer
            )));
        }
        if s.dt != env::DT {
            return Err(Error::config(format!(
                "the kinematics integrate at a fixed {} s step; dt={} is not supported",
                env::DT,
                s.dt
            )));
        }
        if s.step_limit == 0 {
            return Err(Error::config("step_limit must be at least 1"));
        }
        if !(s.lr > 0.0) {
            return Err(Error::config(format!("lr must be positive, got {}", s.lr)));
        }
        if !(0.0..=1.0).contains(&s.gamma) {
            return Err(Error::config(format!("gamma must lie in [0, 1], got {}", s.gamma)));
        }
        if !(s.tau > 0.0 && s.tau <= 1.0) {
            return Err(Error::config(format!("tau must lie in (0, 1], got {}", s.tau)));
        }
        if s.alpha < 0.0 {
            return Err(Error::config(format!("alpha must be nonnegative, got {}", s.alpha)));
        }
        if let Some(th) = s.stop_at {
            if s.eval_trials == 0 {
                return Err(Error::config(
                    "stop_at needs eval_trials > 0 to measure the success rate",
                ));
            }
            if !(th > 0.0 && th <= 1.0) {
                return Err(Error::config(format!(
                    "stop_at is a success fraction in (0, 1], got {th}"
                )));
            }
        }
        let obs_mode = if arch.obs_width() == ObsMode::Wide.obs_len() {
            ObsMode::Wide
        } else {
            ObsMode::Standard
        };
        Ok(TrainConfig {
            algo,
            arch,
            scenario,
            scenario_label: s.scenario.clone(),
            mode: s.mode,
            obs_mode,
            episodes,
            seed: s.seed,
            hypers: Hypers {
                gamma: s.gamma,
                tau: s.tau,
                lr: s.lr,
                batch_size: s.batch,
                alpha: s.alpha,
            },
            buffer_capacity: s.buffer,
            warmup: s.warmup,
            step_limit: s.step_limit,
            eval_every: s.eval_every,
            eval_trials: s.eval_trials,
            stop_at: s.stop_at,
        })
    }
}

/// One finished episode. Wall time is informational only and excluded from
/// serialization so logs stay reproducible byte for byte.
#[derive(Debug, Clone, Serialize)]
pub struct EpisodeLog {
    pub episode: usize,
    pub reward: f64,
    pub steps: u32,
    pub goals: u32,
    pub terminal: Terminal,
    #[serde(skip)]
    pub wall_ms: u64,
}

/// The one-line-per-episode progress format.
pub fn progress_line(log: &EpisodeLog) -> String {
    format!(
        "ep={} reward={} steps={} goals={} terminal={}",
        log.episode, log.reward, log.steps, log.goals, log.terminal
    )
}

/// Trailing moving average; early entries average over what exists so far.
pub fn reward_curve(rewards: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::usage("smoothing window must be at least 1"));
    }
    Ok((0..rewards.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(window);
            let span = &rewards[lo..=i];
            span.iter().sum::<f64>() / span.len() as f64
        })
        .collect())
}

/// What `run` finished with.
#[derive(Debug, Clone, Copy)]
pub struct RunOutcome {
    pub episodes: usize,
    pub stopped_early: bool,
}

pub struct TrainSession {
    pub cfg: TrainConfig,
    world: World,
    pub learner: Learner,
    buffer: ReplayBuffer,
    streams: RunStreams,
    episode: usize,
    total_steps: u64,
    updates: u64,
    logs: Vec<EpisodeLog>,
}

impl TrainSession {
    pub fn new(cfg: TrainConfig) -> Result<TrainSession> {
        let mut streams = RunStreams::derive(cfg.seed);
        let learner = Learner::new(cfg.algo, cfg.arch, cfg.hypers, &mut streams.init.rng)?;
        let mut world = World::new(cfg.scenario.clone(), cfg.mode, cfg.obs_mode);
        world.params_mut().step_limit = cfg.step_limit as u32;
        let buffer = ReplayBuffer::new(cfg.buffer_capacity, learner.obs_width());
        Ok(TrainSession {
            cfg,
            world,
            learner,
            buffer,
            streams,
            episode: 0,
            total_steps: 0,
            updates: 0,
            logs: Vec::new(),
        })
    }

    pub fn episodes_done(&self) -> usize {
        self.episode
    }

    pub fn total_steps(&self) -> u64 {
        self.total_steps
    }

    pub fn buffer_len(&self) -> usize {
        self.buffer.len()
    }

    /// Gradient updates applied so far (one per environment step once the
    /// replay holds max(warmup, batch) transitions).
    pub fn updates_done(&self) -> u64 {
        self.updates
    }

    pub fn logs(&self) -> &[EpisodeLog] {
        &self.logs
    }

    /// Roll one episode: seeded spawn, exploration (uniform until the replay
    /// holds `warmup` transitions), a push per step, and an update per step
    /// once the replay holds max(batch, warmup) transitions. Goal arrivals
    /// inside the step budget respawn the goal and continue.
    pub fn run_episode(&mut self) -> Result<EpisodeLog> {
        let started = Instant::now();
        let mut obs = self.world.reset(&mut self.streams.env.rng)?;
        self.learner.begin_episode();
        let update_floor = self.cfg.warmup.max(self.cfg.hypers.batch_size);
        let mut reward = 0.0;
        let mut goals = 0u32;
        let terminal;
        loop {
            let action = if self.buffer.len() < self.cfg.warmup {
                let r = &mut self.streams.agent.rng;
                [
                    r.gen_range(-1.0..=1.0),
                    r.gen_range(-1.0..=1.0),
                    r.gen_range(-1.0..=1.0),
                ]
            } else {
                self.learner.explore_action(&obs, &mut self.streams.agent.rng)?
            };
            let sr = self.world.step(action)?;
            reward += sr.reward;
            // A reached goal is not an absorbing state — the episode keeps
            // going with a fresh goal — so only collision/timeout truncate
            // the bootstrap. The stored successor is the pre-respawn view.
            let done = match sr.terminal {
                Terminal::Collided | Terminal::Timeout => 1.0,
                Terminal::Arrived | Terminal::None => 0.0,
            };
            self.buffer.push(&Transition {
                obs,
                action,
                reward: sr.reward,
                next_obs: sr.observation.clone(),
                done,
            });
            self.total_steps += 1;
            if self.buffer.len() >= update_floor {
                let batch = self
                    .buffer
                    .sample(self.cfg.hypers.batch_size, &mut self.streams.buffer.rng)?;
                self.learner.update(&batch, &mut self.streams.agent.rng)?;
                self.updates += 1;
            }
            match sr.terminal {
                Terminal::Collided | Terminal::Timeout => {
                    terminal = sr.terminal;
                    break;
                }
                Terminal::Arrived => {
                    goals += 1;
                    if self.world.steps_taken() >= self.cfg.step_limit as u32 {
                        terminal = Terminal::Arrived;
                        break;
                    }
                    obs = self.world.respawn_goal(&mut self.streams.env.rng)?;
                }
                Terminal::None => obs = sr.observation,
            }
        }
        self.episode += 1;
        let log = EpisodeLog {
            episode: self.episode,
            reward,
            steps: self.world.steps_taken(),
            goals,
            terminal,
            wall_ms: started.elapsed().as_millis() as u64,
        };
        self.logs.push(log.clone());
        Ok(log)
    }

    /// Success rate of the frozen policy on the training task, seeded from
    /// the held-out evaluation stream so it cannot perturb training.
    pub fn eval_round(&mut self) -> Result<EvalSummary> {
        let seed = self.streams.eval.rng.gen::<u64>();
        let job = EvalJob {
            scenario: self.cfg.scenario.clone(),
            mode: self.cfg.mode,
            obs_mode: self.cfg.obs_mode,
            trials: self.cfg.eval_trials,
            seed,
            step_limit: self.cfg.step_limit,
        };
        eval_goal(&self.learner, &job)
    }

    /// Train until the episode budget (or an early stop), appending episode
    /// JSON lines, printing a progress line per episode, and checkpointing
    /// every `eval_every` episodes plus once at the end. A numeric failure
    /// aborts without touching the last good checkpoint.
    pub fn run<W: Write>(&mut self, run_dir: &Path, progress: &mut W) -> Result<RunOutcome> {
        fs::create_dir_all(run_dir)
            .map_err(|e| Error::io(format!("creating {}", run_dir.display()), e))?;
        let log_path = run_dir.join("episodes.jsonl");
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&log_path)
            .map_err(|e| Error::io(format!("opening {}", log_path.display()), e))?;
        let mut log_out = BufWriter::new(file);
        let mut stopped_early = false;
        while self.episode < self.cfg.episodes {
            let log = self.run_episode()?;
            serde_json::to_writer(&mut log_out, &log).map_err(|e| Error::Json {
                context: log_path.display().to_string(),
                source: e,
            })?;
            log_out
                .write_all(b"\n")
                .and_then(|_| log_out.flush())
                .map_err(|e| Error::io(format!("writing {}", log_path.display()), e))?;
            writeln!(progress, "{}", progress_line(&log))
                .map_err(|e| Error::io("writing progress", e))?;
            if self.cfg.eval_every > 0 && self.episode % self.cfg.eval_every == 0 {
                if self.cfg.eval_trials > 0 {
                    let summary = self.eval_round()?;
                    writeln!(
                        progress,
                        "eval ep={} rate={:.1}% mean_time_s={:.2}",
                        self.episode,
                        summary.success_rate * 100.0,
                        summary.mean_time_s
                    )
                    .map_err(|e| Error::io("writing progress", e))?;
                    self.save_checkpoint(run_dir)?;
                    if self.cfg.stop_at.is_some_and(|th| summary.success_rate >= th) {
                        stopped_early = true;
                        break;
                    }
                } else {
                    self.save_checkpoint(run_dir)?;
                }
            }
        }
        self.save_checkpoint(run_dir)?;
        Ok(RunOutcome {
            episodes: self.episode,
            stopped_early,
        })
    }

    /// Write parameters, replay contents, and loop state under
    /// `<run>/checkpoint/`, replacing any previous checkpoint only once the
    /// new one is complete.
    pub fn save_checkpoint(&self, run_dir: &Path) -> Result<PathBuf> {
        let live = run_dir.join("checkpoint");
        let fresh = run_dir.join("checkpoint.tmp");
        let retired = run_dir.join("checkpoint.old");
        let ctx = |what: &str, p: &Path| format!("{what} {}", p.display());
        if fresh.exists() {
            fs::remove_dir_all(&fresh).map_err(|e| Error::io(ctx("clearing", &fresh), e))?;
        }
        fs::create_dir_all(&fresh).map_err(|e| Error::io(ctx("creating", &fresh), e))?;
        for (name, arena) in self.learner.arenas() {
            save_params(&fresh.join(format!("{name}.params")), arena)?;
        }
        let replay_path = fresh.join("replay.bin");
        let mut w = BufWriter::new(
            File::create(&replay_path).map_err(|e| Error::io(ctx("creating", &replay_path), e))?,
        );
        self.buffer.write_to(&mut w)?;
        w.flush()
            .map_err(|e| Error::io(ctx("writing", &replay_path), e))?;
        let manifest_path = fresh.join("manifest.txt");
        fs::write(&manifest_path, self.manifest_text())
            .map_err(|e| Error::io(ctx("writing", &manifest_path), e))?;
        if retired.exists() {
            fs::remove_dir_all(&retired).map_err(|e| Error::io(ctx("clearing", &retired), e))?;
        }
        if live.exists() {
            fs::rename(&live, &retired).map_err(|e| Error::io(ctx("retiring", &live), e))?;
        }
        fs::rename(&fresh, &live).map_err(|e| Error::io(ctx("publishing", &live), e))?;
        if retired.exists() {
            let _ = fs::remove_dir_all(&retired);
        }
        Ok(live)
    }

    fn manifest_text(&self) -> String {
        let c = &self.cfg;
        let mut t = String::from("train-state v1\n");
        let _ = writeln!(t, "algo={}", c.algo.as_str());
        let _ = writeln!(t, "arch={}", c.arch.as_str());
        let _ = writeln!(t, "mode={}", c.mode.as_str());
        let _ = writeln!(t, "scenario={}", c.scenario_label);
        let _ = writeln!(t, "obs={}", self.learner.obs_width());
        let _ = writeln!(t, "episode={}", self.episode);
        let _ = writeln!(t, "total_steps={}", self.total_steps);
        let _ = writeln!(t, "seed={}", c.seed);
        let _ = writeln!(t, "gamma={}", c.hypers.gamma);
        let _ = writeln!(t, "tau={}", c.hypers.tau);
        let _ = writeln!(t, "lr={}", c.hypers.lr);
        let _ = writeln!(t, "batch={}", c.hypers.batch_size);
        let _ = writeln!(t, "alpha={}", c.hypers.alpha);
        let _ = writeln!(t, "warmup={}", c.warmup);
        let _ = writeln!(t, "step_limit={}", c.step_limit);
        for (name, s) in [
            ("env_stream", &self.streams.env),
            ("agent_stream", &self.streams.agent),
            ("buffer_stream", &self.streams.buffer),
            ("eval_stream", &self.streams.eval),
        ] {
            let _ = writeln!(t, "{name}={} {}", s.seed(), s.word_pos());
        }
        t.push_str("end\n");
        t
    }

    /// Rebuild a session from `<run>/checkpoint/`, verifying it was produced
    /// by a compatible configuration, and continue toward `cfg.episodes`.
    pub fn resume(cfg: TrainConfig, run_dir: &Path) -> Result<TrainSession> {
        let ckpt = run_dir.join("checkpoint");
        let meta = read_checkpoint_meta(&ckpt)?;
        let mismatch = |field: &str, saved: &dyn std::fmt::Display, asked: &dyn std::fmt::Display| {
            Err(Error::config(format!(
                "checkpoint {field} is {saved} but the requested configuration says {asked}"
            )))
        };
        if meta.algo != cfg.algo {
            return mismatch("algo", &meta.algo.as_str(), &cfg.algo.as_str());
        }
        if meta.arch != cfg.arch {
            return mismatch("arch", &meta.arch.as_str(), &cfg.arch.as_str());
        }
        if meta.mode != cfg.mode {
            return mismatch("mode", &meta.mode.as_str(), &cfg.mode.as_str());
        }
        if meta.scenario_label != cfg.scenario_label {
            return mismatch("scenario", &meta.scenario_label, &cfg.scenario_label);
        }
        if meta.seed != cfg.seed {
            return mismatch("seed", &meta.seed, &cfg.seed);
        }
        if meta.warmup != cfg.warmup {
            return mismatch("warmup", &meta.warmup, &cfg.warmup);
        }
        if meta.step_limit != cfg.step_limit {
            return mismatch("step_limit", &meta.step_limit, &cfg.step_limit);
        }
        let h = (meta.hypers, cfg.hypers);
        if h.0.gamma != h.1.gamma {
            return mismatch("gamma", &h.0.gamma, &h.1.gamma);
        }
        if h.0.tau != h.1.tau {
            return mismatch("tau", &h.0.tau, &h.1.tau);
        }
        if h.0.lr != h.1.lr {
            return mismatch("lr", &h.0.lr, &h.1.lr);
        }
        if h.0.batch_size != h.1.batch_size {
            return mismatch("batch", &h.0.batch_size, &h.1.batch_size);
        }
        if h.0.alpha != h.1.alpha {
            return mismatch("alpha", &h.0.alpha, &h.1.alpha);
        }
        let mut session = TrainSession::new(cfg)?;
        if meta.obs_len != session.learner.obs_width() {
            return mismatch("obs", &meta.obs_len, &session.learner.obs_width());
        }
        for (name, arena) in session.learner.arenas_mut() {
            load_params(&ckpt.join(format!("{name}.params")), arena)?;
        }
        let replay_path = ckpt.join("replay.bin");
        let file = File::open(&replay_path)
            .map_err(|e| Error::io(format!("opening {}", replay_path.display()), e))?;
        let buffer = ReplayBuffer::read_from(&mut BufReader::new(file))?;
        if buffer.capacity() != session.cfg.buffer_capacity {
            return mismatch("buffer capacity", &buffer.capacity(), &session.cfg.buffer_capacity);
        }
        if buffer.obs_len() != session.learner.obs_width() {
            return mismatch("replay obs width", &buffer.obs_len(), &session.learner.obs_width());
        }
        session.buffer = buffer;
        session.streams.env = Stream::restore(meta.env_stream.0, meta.env_stream.1);
        session.streams.agent = Stream::restore(meta.agent_stream.0, meta.agent_stream.1);
        session.streams.buffer = Stream::restore(meta.buffer_stream.0, meta.buffer_stream.1);
        session.streams.eval = Stream::restore(meta.eval_stream.0, meta.eval_stream.1);
        session.episode = meta.episode;
        session.total_steps = meta.total_steps;
        // One update per step past the replay floor; exact because the floor
        // never moves and the capacity check above keeps the replay above it.
        let floor = session.cfg.warmup.max(session.cfg.hypers.batch_size) as u64;
        session.updates = meta.total_steps.saturating_sub(floor.saturating_sub(1));
        Ok(session)
    }
}

/// Parsed `manifest.txt`: enough to rebuild the learner and validate a
/// resume or evaluation request against what was actually trained.
#[derive(Debug, Clone)]
pub struct CheckpointMeta {
    pub algo: Algo,
    pub arch: ArchId,
    pub mode: Mode,
    pub scenario_label: String,
    pub obs_len: usize,
    pub episode: usize,
    pub total_steps: u64,
    pub seed: u64,
    pub hypers: Hypers,
    pub warmup: usize,
    pub step_limit: usize,
    pub env_stream: (u64, u128),
    pub agent_stream: (u64, u128),
    pub buffer_stream: (u64, u128),
    pub eval_stream: (u64, u128),
}

pub fn read_checkpoint_meta(ckpt_dir: &Path) -> Result<CheckpointMeta> {
    let path = ckpt_dir.join("manifest.txt");
    let broken = |reason: String| Error::Checkpoint {
        path: path.clone(),
        reason,
    };
    let text = fs::read_to_string(&path).map_err(|e| broken(e.to_string()))?;
    let mut lines = text.lines();
    if lines.next() != Some("train-state v1") {
        return Err(broken("missing train-state v1 header".into()));
    }
    let mut fields = std::collections::BTreeMap::new();
    let mut closed = false;
    for line in lines {
        if line == "end" {
            closed = true;
            break;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| broken(format!("malformed line {line:?}")))?;
        if fields.insert(key.to_string(), value.to_string()).is_some() {
            return Err(broken(format!("duplicate field {key:?}")));
        }
    }
    if !closed {
        return Err(broken("missing end marker (truncated file?)".into()));
    }
    let take = |key: &str| {
        fields
            .get(key)
            .cloned()
            .ok_or_else(|| broken(format!("missing field {key:?}")))
    };
    fn num<T: std::str::FromStr>(key: &str, value: &str, broken: &dyn Fn(String) -> Error) -> Result<T> {
        value
            .parse()
            .map_err(|_| broken(format!("field {key:?} has unreadable value {value:?}")))
    }
    let stream = |key: &str| -> Result<(u64, u128)> {
        let value = take(key)?;
        let (seed, pos) = value
            .split_once(' ')
            .ok_or_else(|| broken(format!("field {key:?} needs \"<seed> <position>\"")))?;
        Ok((num(key, seed, &broken)?, num(key, pos, &broken)?))
    };
    let meta = CheckpointMeta {
        algo: Algo::parse(&take("algo")?).map_err(|e| broken(e.to_string()))?,
        arch: ArchId::parse(&take("arch")?).map_err(|e| broken(e.to_string()))?,
        mode: Mode::parse(&take("mode")?).map_err(|e| broken(e.to_string()))?,
        scenario_label: take("scenario")?,
        obs_len: num("obs", &take("obs")?, &broken)?,
        episode: num("episode", &take("episode")?, &broken)?,
        total_steps: num("total_steps", &take("total_steps")?, &broken)?,
        seed: num("seed", &take("seed")?, &broken)?,
        hypers: Hypers {
            gamma: num("gamma", &take("gamma")?, &broken)?,
            tau: num("tau", &take("tau")?, &broken)?,
            lr: num("lr", &take("lr")?, &broken)?,
            batch_size: num("batch", &take("batch")?, &broken)?,
            alpha: num("alpha", &take("alpha")?, &broken)?,
        },
        warmup: num("warmup", &take("warmup")?, &broken)?,
        step_limit: num("step_limit", &take("step_limit")?, &broken)?,
        env_stream: stream("env_stream")?,
        agent_stream: stream("agent_stream")?,
        buffer_stream: stream("buffer_stream")?,
        eval_stream: stream("eval_stream")?,
    };
    Ok(meta)
}

/// Load a frozen policy (plus its provenance) from a checkpoint directory
/// for evaluation; the parameters are read exactly as saved.
pub fn load_learner(ckpt_dir: &Path) -> Result<(Learner, CheckpointMeta)> {
    let meta = read_checkpoint_meta(ckpt_dir)?;
    let mut throwaway = ChaCha8Rng::seed_from_u64(0);
    let mut learner = Learner::new(meta.algo, meta.arch, meta.hypers, &mut throwaway)?;
    if learner.obs_width() != meta.obs_len {
        return Err(Error::Checkpoint {
            path: ckpt_dir.join("manifest.txt"),
            reason: format!(
                "arch {} implies observation width {}, manifest says {}",
                meta.arch.as_str(),
                learner.obs_width(),
                meta.obs_len
            ),
        });
    }
    for (name, arena) in learner.arenas_mut() {
        load_params(&ckpt_dir.join(format!("{name}.params")), arena)?;
    }
    Ok((learner, meta))
}
