//! Frozen-policy evaluation: repeated seeded trials of single-goal and
//! sequential-waypoint navigation. Trials are independent (one derived RNG
//! stream each), so they may run in parallel and still aggregate to the same
//! statistics as a sequential pass.

use crate::agents::Learner;
use crate::env::{Mode, ObsMode, Scenario, Terminal, VehicleState, World, DT, PLANAR_Z};
use crate::error::{Error, Result};
use crate::par;
use crate::rng::trial_rng;
use rand::Rng;
use serde::Serialize;
use std::f64::consts::PI;
use std::fmt;

/// Read-only action source; evaluation never mutates the policy.
pub trait Policy: Sync {
    fn action(&self, obs: &[f64]) -> Result<[f64; 3]>;
}

impl Policy for Learner {
    fn action(&self, obs: &[f64]) -> Result<[f64; 3]> {
        self.policy_action(obs)
    }
}

/// Commands zero linear and vertical velocity and zero turn; the vehicle
/// never moves, so every trial runs out the clock.
pub struct HoverPolicy;

impl Policy for HoverPolicy {
    fn action(&self, _obs: &[f64]) -> Result<[f64; 3]> {
        Ok([-1.0, 0.0, 0.0])
    }
}

/// Steers straight at the goal using only the observation's goal features;
/// a sanity upper bound for obstacle-free rooms, not a planner.
pub struct BeelinePolicy {
    sectors: usize,
}

impl BeelinePolicy {
    pub fn new(obs_mode: ObsMode) -> BeelinePolicy {
        BeelinePolicy { sectors: obs_mode.sectors() }
    }
}

impl Policy for BeelinePolicy {
    fn action(&self, obs: &[f64]) -> Result<[f64; 3]> {
        let bearing = obs[self.sectors + 4] * PI;
        let elevation = obs[self.sectors + 5] * PI;
        let turn = (bearing / 0.25).clamp(-1.0, 1.0);
        // Hold position until roughly aligned, then full speed ahead.
        let forward = if bearing.abs() < 0.3 { 1.0 } else { -1.0 };
        let climb = (4.0 * elevation).clamp(-1.0, 1.0);
        Ok([forward, climb, turn])
    }
}

/// The two evaluation protocols.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Goal,
    Waypoint,
}

impl Task {
    pub fn parse(s: &str) -> Result<Task> {
        match s.to_ascii_lowercase().as_str() {
            "goal" => Ok(Task::Goal),
            "waypoint" => Ok(Task::Waypoint),
            other => Err(Error::usage(format!(
                "unknown task '{other}' (expected goal or waypoint)"
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Goal => "goal",
            Task::Waypoint => "waypoint",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One trial's outcome. `distance_fraction` only exists for the waypoint
/// task: the high-water fraction of total route length covered.
#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub success: bool,
    pub time_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distance_fraction: Option<f64>,
    pub terminal: Terminal,
}

/// Aggregate over all trials. Times and distances average over every trial,
/// successes and failures alike, with population (not sample) deviation.
#[derive(Debug, Clone)]
pub struct EvalSummary {
    pub task: Task,
    pub trials: usize,
    /// Fraction in [0, 1]; multiply by 100 for the tables.
    pub success_rate: f64,
    pub mean_time_s: f64,
    pub std_time_s: f64,
    pub mean_distance: Option<f64>,
    pub records: Vec<TrialRecord>,
}

/// Everything a trial batch needs besides the policy.
#[derive(Debug, Clone)]
pub struct EvalJob {
    pub scenario: Scenario,
    pub mode: Mode,
    pub obs_mode: ObsMode,
    pub trials: usize,
    pub seed: u64,
    /// Step budget per goal; a waypoint trial gets this once per leg.
    pub step_limit: usize,
}

/// An ordered patrol: the vehicle starts at `points[0]` and must visit
/// `points[1..]` in order. Leg lengths sum over consecutive pairs.
#[derive(Debug, Clone)]
pub struct WaypointRoute {
    pub points: Vec<[f64; 3]>,
    pub total_length: f64,
}

impl WaypointRoute {
    pub fn new(points: Vec<[f64; 3]>) -> Result<WaypointRoute> {
        if points.len() < 2 {
            return Err(Error::config("a route needs a start and at least one waypoint"));
        }
        let total_length = points.windows(2).map(|w| dist(w[0], w[1])).sum();
        Ok(WaypointRoute { points, total_length })
    }

    /// The square patrol circuit over the scenario's corner posts: start at
    /// the last corner, visit all of them in order (equal legs in the flat
    /// case). 2D stays at the planar height; 3D alternates corner heights
    /// between 1.5 and 3.5 m.
    pub fn circuit(scenario: &Scenario, mode: Mode) -> Result<WaypointRoute> {
        let corners = &scenario.waypoints;
        if corners.len() < 2 {
            return Err(Error::config(format!(
                "scenario '{}' lists {} corner posts; the circuit needs at least 2",
                scenario.name,
                corners.len()
            )));
        }
        let corner_z = |i: usize| match mode {
            Mode::TwoD => PLANAR_Z,
            Mode::ThreeD => {
                if i % 2 == 0 {
                    1.5
                } else {
                    3.5
                }
            }
        };
        let mut points = Vec::with_capacity(corners.len() + 1);
        let start = corners[corners.len() - 1];
        points.push([start[0], start[1], PLANAR_Z]);
        for (i, c) in corners.iter().enumerate() {
            points.push([c[0], c[1], corner_z(i)]);
        }
        for p in &points {
            if !scenario.is_clear(*p) {
                return Err(Error::config(format!(
                    "route point ({}, {}, {}) violates scenario '{}' clearance",
                    p[0], p[1], p[2], scenario.name
                )));
            }
        }
        WaypointRoute::new(points)
    }

    pub fn legs(&self) -> Vec<f64> {
        self.points.windows(2).map(|w| dist(w[0], w[1])).collect()
    }
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|k| (a[k] - b[k]) * (a[k] - b[k])).sum::<f64>().sqrt()
}

fn check_job(job: &EvalJob) -> Result<()> {
    if job.trials == 0 {
        return Err(Error::usage("trials must be at least 1"));
    }
    if job.step_limit == 0 {
        return Err(Error::usage("step limit must be at least 1"));
    }
    Ok(())
}

/// Single-goal protocol: fresh seeded spawn and goal, run to the first
/// terminal; success iff arrived.
pub fn eval_goal(policy: &dyn Policy, job: &EvalJob) -> Result<EvalSummary> {
    check_job(job)?;
    let records = par::map_indexed(job.trials, |t| goal_trial(policy, job, t));
    summarize(Task::Goal, records)
}

fn goal_trial(policy: &dyn Policy, job: &EvalJob, trial: usize) -> Result<TrialRecord> {
    let mut rng = trial_rng(job.seed, trial as u64);
    let mut world = World::new(job.scenario.clone(), job.mode, job.obs_mode);
    world.params_mut().step_limit = job.step_limit as u32;
    let mut obs = world.reset(&mut rng)?;
    loop {
        let sr = world.step(policy.action(&obs)?)?;
        if sr.terminal.is_terminal() {
            return Ok(TrialRecord {
                trial,
                success: sr.terminal == Terminal::Arrived,
                time_s: sr.ep as f64 * DT,
                distance_fraction: None,
                terminal: sr.terminal,
            });
        }
        obs = sr.observation;
    }
}

/// Sequential-waypoint protocol: the next route point becomes the goal on
/// each arrival; success iff the whole route completes within
/// `legs × step_limit` steps.
pub fn eval_waypoint(
    policy: &dyn Policy,
    job: &EvalJob,
    route: &WaypointRoute,
) -> Result<EvalSummary> {
    check_job(job)?;
    let records = par::map_indexed(job.trials, |t| waypoint_trial(policy, job, route, t));
    summarize(Task::Waypoint, records)
}

fn waypoint_trial(
    policy: &dyn Policy,
    job: &EvalJob,
    route: &WaypointRoute,
    trial: usize,
) -> Result<TrialRecord> {
    let mut rng = trial_rng(job.seed, trial as u64);
    let mut world = World::new(job.scenario.clone(), job.mode, job.obs_mode);
    let legs = route.legs();
    let budget = (legs.len() * job.step_limit) as u32;
    world.params_mut().step_limit = budget;
    let yaw = rng.gen_range(-PI..PI);
    world.place(VehicleState { pos: route.points[0], yaw }, route.points[1]);
    let mut obs = world.observe();

    let mut next = 1usize; // index into route.points
    let mut completed = 0.0;
    let mut best_fraction: f64 = 0.0;
    loop {
        let sr = world.step(policy.action(&obs)?)?;
        // Progress high-water mark: finished legs plus headway on the
        // current one (never negative — wandering away does not refund).
        let leg = legs[next - 1];
        let here = ((completed + (leg - sr.d_t).max(0.0)) / route.total_length).clamp(0.0, 1.0);
        best_fraction = best_fraction.max(here);
        match sr.terminal {
            Terminal::Arrived => {
                completed += leg;
                next += 1;
                if next == route.points.len() {
                    return Ok(TrialRecord {
                        trial,
                        success: true,
                        time_s: sr.ep as f64 * DT,
                        distance_fraction: Some(1.0),
                        terminal: Terminal::Arrived,
                    });
                }
                obs = world.retarget(route.points[next]);
            }
            Terminal::Collided | Terminal::Timeout => {
                return Ok(TrialRecord {
                    trial,
                    success: false,
                    time_s: sr.ep as f64 * DT,
                    distance_fraction: Some(best_fraction),
                    terminal: sr.terminal,
                });
            }
            Terminal::None => obs = sr.observation,
        }
    }
}

fn summarize(task: Task, results: Vec<Result<TrialRecord>>) -> Result<EvalSummary> {
    let records: Vec<TrialRecord> = results.into_iter().collect::<Result<_>>()?;
    let n = records.len() as f64;
    let successes = records.iter().filter(|r| r.success).count();
    let mean_time_s = records.iter().map(|r| r.time_s).sum::<f64>() / n;
    let var = records.iter().map(|r| (r.time_s - mean_time_s).powi(2)).sum::<f64>() / n;
    let mean_distance = match task {
        Task::Goal => None,
        Task::Waypoint => Some(
            records.iter().map(|r| r.distance_fraction.unwrap_or(0.0)).sum::<f64>() / n,
        ),
    };
    Ok(EvalSummary {
        task,
        trials: records.len(),
        success_rate: successes as f64 / n,
        mean_time_s,
        std_time_s: var.sqrt(),
        mean_distance,
        records,
    })
}
