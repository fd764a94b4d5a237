//! Kinematic flight arena: a point vehicle with a planar range scanner
//! navigating a box-shaped room, optionally with pillar obstacles.
//!
//! The vehicle is commanded with normalized actions in [-1, 1]^3 which map to
//! forward speed, climb rate and yaw change (see [`scale_action`]). Every
//! step recomputes the scan, the goal geometry and the terminal condition.
//! All math is pure `f64` with a fixed evaluation order, so a seeded run
//! reproduces bit-identically.

use std::fmt;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Number of beams in one scan: 270 degrees at 0.25-degree spacing, fence-post inclusive.
pub const BEAM_COUNT: usize = 1081;
/// Angular step between adjacent beams, radians (0.25 degrees).
pub const BEAM_STEP: f64 = std::f64::consts::PI / 720.0;
/// Half of the scan fan, radians (135 degrees): beam 0 points at yaw - 135 degrees.
pub const SCAN_HALF_ANGLE: f64 = 3.0 * std::f64::consts::FRAC_PI_4;
/// Ranges are clamped to this many meters.
pub const MAX_RANGE: f64 = 10.0;
/// Sector count for the standard low-dimensional observation.
pub const SECTORS_STANDARD: usize = 20;
/// Sector count for the wide observation consumed by the convolution front end.
pub const SECTORS_WIDE: usize = 270;
/// Simulation step period, seconds. Reported navigation time is steps x dt.
pub const DT: f64 = 0.1;
/// Vertical band outside of which a 3D flight counts as floor/ceiling contact.
pub const Z_CONTACT_MIN: f64 = 0.2;
pub const Z_CONTACT_MAX: f64 = 5.8;
/// Fixed altitude for planar (2D) flights, meters.
pub const PLANAR_Z: f64 = 1.5;
/// Rejection-sampling budget for spawn and goal placement.
const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

/// Planar (fixed altitude, zero climb) or full 3D flight.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    TwoD,
    ThreeD,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::TwoD => "2d",
            Mode::ThreeD => "3d",
        }
    }

    pub fn parse(s: &str) -> Result<Mode> {
        match s.to_ascii_lowercase().as_str() {
            "2d" => Ok(Mode::TwoD),
            "3d" => Ok(Mode::ThreeD),
            other => Err(Error::usage(format!("unknown mode '{other}' (expected 2d or 3d)"))),
        }
    }
}

/// Observation width: 20 range sectors (standard) or 270 (wide, for conv nets).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObsMode {
    Standard,
    Wide,
}

impl ObsMode {
    pub fn sectors(self) -> usize {
        match self {
            ObsMode::Standard => SECTORS_STANDARD,
            ObsMode::Wide => SECTORS_WIDE,
        }
    }

    /// Sectors plus three previous-action values plus three goal features.
    pub fn obs_len(self) -> usize {
        self.sectors() + 6
    }
}

/// Axis-aligned box, used for the room bounds and for obstacles.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Self {
        Aabb { min, max }
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }

    /// Euclidean distance from a point to the box surface (0 inside).
    pub fn distance(&self, p: [f64; 3]) -> f64 {
        let mut sq = 0.0;
        for k in 0..3 {
            let d = (self.min[k] - p[k]).max(0.0).max(p[k] - self.max[k]);
            sq += d * d;
        }
        sq.sqrt()
    }

    /// Does the horizontal slice at height `z` cut through this box?
    fn spans_height(&self, z: f64) -> bool {
        z >= self.min[2] && z <= self.max[2]
    }
}

/// Room description: bounds, obstacle list and placement rules.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub bounds: Aabb,
    /// Required distance from walls and obstacles for spawns and goals, meters.
    pub clearance: f64,
    pub obstacles: Vec<Aabb>,
    /// Corner posts of the patrol circuit used by the waypoint task (x, y).
    pub waypoints: Vec<[f64; 2]>,
}

impl Scenario {
    /// Empty 10 x 10 x 6 m room.
    pub fn one() -> Self {
        Scenario {
            name: "scenario-1".into(),
            bounds: Aabb::new([-5.0, -5.0, 0.0], [5.0, 5.0, 6.0]),
            clearance: 1.0,
            obstacles: Vec::new(),
            waypoints: vec![[3.0, 3.0], [-3.0, 3.0], [-3.0, -3.0], [3.0, -3.0]],
        }
    }

    /// Same room with four full-height 1 x 1 m pillars centered at (+-2.5, +-2.5).
    /// The patrol corners move out to (+-4, +-4) to keep the required clearance
    /// from the pillar corners.
    pub fn two() -> Self {
        let pillar = |cx: f64, cy: f64| {
            Aabb::new([cx - 0.5, cy - 0.5, 0.0], [cx + 0.5, cy + 0.5, 6.0])
        };
        Scenario {
            name: "scenario-2".into(),
            bounds: Aabb::new([-5.0, -5.0, 0.0], [5.0, 5.0, 6.0]),
            clearance: 1.0,
            obstacles: vec![
                pillar(2.5, 2.5),
                pillar(-2.5, 2.5),
                pillar(-2.5, -2.5),
                pillar(2.5, -2.5),
            ],
            waypoints: vec![[4.0, 4.0], [-4.0, 4.0], [-4.0, -4.0], [4.0, -4.0]],
        }
    }

    /// Select one of the built-in rooms by index.
    pub fn builtin(index: u32) -> Result<Self> {
        match index {
            1 => Ok(Scenario::one()),
            2 => Ok(Scenario::two()),
            other => Err(Error::config(format!("unknown scenario {other}; choose 1 or 2"))),
        }
    }

    /// Load a room from a key-value text file. Recognized keys:
    ///
    /// ```text
    /// bounds   = xmin xmax ymin ymax zmin zmax
    /// clearance = 1.0
    /// obstacle = xmin xmax ymin ymax zmin zmax   # repeatable
    /// waypoint = x y                             # repeatable, circuit order
    /// ```
    ///
    /// Blank lines and `#` comments are ignored.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading scenario file {}", path.display()), e))?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scenario-file".into());
        Scenario::parse(&text, &name)
    }

    /// Parse the key-value scenario format. `name` labels error messages and reports.
    pub fn parse(text: &str, name: &str) -> Result<Self> {
        let mut bounds = None;
        let mut clearance = 1.0;
        let mut obstacles = Vec::new();
        let mut waypoints = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("{name}:{}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim();
            let nums: Vec<f64> = value
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>().map_err(|_| {
                        Error::config(format!("{name}:{}: bad number `{tok}`", lineno + 1))
                    })
                })
                .collect::<Result<_>>()?;
            match key {
                "bounds" => bounds = Some(parse_box(&nums, name, lineno)?),
                "clearance" => {
                    if nums.len() != 1 || nums[0] <= 0.0 {
                        return Err(Error::config(format!(
                            "{name}:{}: clearance wants one positive number",
                            lineno + 1
                        )));
                    }
                    clearance = nums[0];
                }
                "obstacle" => obstacles.push(parse_box(&nums, name, lineno)?),
                "waypoint" => {
                    if nums.len() != 2 {
                        return Err(Error::config(format!(
                            "{name}:{}: waypoint wants `x y`",
                            lineno + 1
                        )));
                    }
                    waypoints.push([nums[0], nums[1]]);
                }
                other => {
                    return Err(Error::config(format!(
                        "{name}:{}: unknown key `{other}`",
                        lineno + 1
                    )))
                }
            }
        }
        let bounds = bounds
            .ok_or_else(|| Error::config(format!("{name}: missing required `bounds` entry")))?;
        Ok(Scenario {
            name: name.to_string(),
            bounds,
            clearance,
            obstacles,
            waypoints,
        })
    }

    /// Full diagonal of the room, used to normalize goal distance.
    pub fn diagonal(&self) -> f64 {
        let d: f64 = (0..3)
            .map(|k| {
                let e = self.bounds.max[k] - self.bounds.min[k];
                e * e
            })
            .sum();
        d.sqrt()
    }

    /// Is this point at least `clearance` away from every wall and obstacle?
    pub fn is_clear(&self, p: [f64; 3]) -> bool {
        for k in 0..2 {
            if p[k] - self.bounds.min[k] < self.clearance
                || self.bounds.max[k] - p[k] < self.clearance
            {
                return false;
            }
        }
        self.obstacles
            .iter()
            .all(|ob| !ob.spans_height(p[2]) || ob.distance(p) >= self.clearance)
    }

    /// Is this point in contact with a wall, an obstacle, or (3D) floor/ceiling?
    fn in_contact(&self, p: [f64; 3], mode: Mode) -> bool {
        for k in 0..2 {
            if p[k] <= self.bounds.min[k] || p[k] >= self.bounds.max[k] {
                return true;
            }
        }
        if mode == Mode::ThreeD && (p[2] < Z_CONTACT_MIN || p[2] > Z_CONTACT_MAX) {
            return true;
        }
        self.obstacles
            .iter()
            .any(|ob| ob.spans_height(p[2]) && ob.contains(p))
    }
}

fn parse_box(nums: &[f64], name: &str, lineno: usize) -> Result<Aabb> {
    if nums.len() != 6 {
        return Err(Error::config(format!(
            "{name}:{}: box wants `xmin xmax ymin ymax zmin zmax`",
            lineno + 1
        )));
    }
    let min = [nums[0], nums[2], nums[4]];
    let max = [nums[1], nums[3], nums[5]];
    if (0..3).any(|k| min[k] >= max[k]) {
        return Err(Error::config(format!(
            "{name}:{}: box has empty extent",
            lineno + 1
        )));
    }
    Ok(Aabb::new(min, max))
}

/// Terminal condition of a step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Terminal {
    None,
    Arrived,
    Collided,
    Timeout,
}

impl Terminal {
    pub fn is_terminal(self) -> bool {
        self != Terminal::None
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Terminal::None => "none",
            Terminal::Arrived => "arrived",
            Terminal::Collided => "collided",
            Terminal::Timeout => "timeout",
        }
    }
}

impl fmt::Display for Terminal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Payoff constants and the episode step limit.
#[derive(Clone, Copy, Debug)]
pub struct RewardParams {
    pub r_arrive: f64,
    pub r_collide: f64,
    /// Arrival radius around the goal, meters.
    pub c_d: f64,
    /// Minimum tolerated range reading, meters.
    pub c_o: f64,
    pub step_limit: u32,
}

impl Default for RewardParams {
    fn default() -> Self {
        RewardParams {
            r_arrive: 100.0,
            r_collide: -10.0,
            c_d: 0.5,
            c_o: 0.5,
            step_limit: 500,
        }
    }
}

/// Sparse payoff: +100 on arrival, -10 on collision or running out the clock,
/// 0 otherwise. Arrival is checked first, so touching the goal while brushing
/// an obstacle still counts as success.
pub fn reward(d_t: f64, min_x: f64, ep: u32, params: &RewardParams) -> (f64, Terminal) {
    if d_t < params.c_d {
        (params.r_arrive, Terminal::Arrived)
    } else if min_x < params.c_o {
        (params.r_collide, Terminal::Collided)
    } else if ep >= params.step_limit {
        (params.r_collide, Terminal::Timeout)
    } else {
        (0.0, Terminal::None)
    }
}

/// Vehicle pose: position in meters and heading in radians.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VehicleState {
    pub pos: [f64; 3],
    pub yaw: f64,
}

/// Everything one step produces.
#[derive(Clone, Debug)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub terminal: Terminal,
    /// Distance to the goal after the move, meters.
    pub d_t: f64,
    /// Smallest range reading after the move, meters.
    pub min_x: f64,
    /// Step count within the episode after this step.
    pub ep: u32,
}

/// Physical command produced from a normalized action.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Command {
    /// Forward speed, m/s, in [0, 0.25].
    pub v: f64,
    /// Climb rate, m/s, in [-0.25, 0.25]; forced to 0 in planar mode.
    pub vz: f64,
    /// Yaw change applied this step, radians, in [-0.25, 0.25].
    pub dyaw: f64,
}

/// Map a normalized action in [-1, 1]^3 to a physical command: speed
/// 0.125 * (a0 + 1), climb 0.25 * a1 (zeroed in planar mode), yaw change
/// 0.25 * a2. Components are clamped to [-1, 1] first.
pub fn scale_action(action: [f64; 3], mode: Mode) -> Command {
    let c = |x: f64| x.clamp(-1.0, 1.0);
    Command {
        v: 0.125 * (c(action[0]) + 1.0),
        vz: match mode {
            Mode::TwoD => 0.0,
            Mode::ThreeD => 0.25 * c(action[1]),
        },
        dyaw: 0.25 * c(action[2]),
    }
}

/// Wrap an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut a = a % std::f64::consts::TAU;
    if a <= -std::f64::consts::PI {
        a += std::f64::consts::TAU;
    } else if a > std::f64::consts::PI {
        a -= std::f64::consts::TAU;
    }
    a
}

/// Cast all beams from a pose. Beam `i` points at world angle
/// `yaw - 135deg + i * 0.25deg`; the returned range is the nearest wall or
/// obstacle intersection in the horizontal plane at the vehicle's height,
/// clamped to [`MAX_RANGE`].
pub fn lidar_scan(pos: [f64; 3], yaw: f64, scenario: &Scenario) -> Vec<f64> {
    let mut out = Vec::with_capacity(BEAM_COUNT);
    for i in 0..BEAM_COUNT {
        let angle = yaw - SCAN_HALF_ANGLE + i as f64 * BEAM_STEP;
        out.push(cast_ray(pos, angle, scenario));
    }
    out
}

/// Distance from `pos` along `angle` to the nearest surface, clamped to max range.
fn cast_ray(pos: [f64; 3], angle: f64, scenario: &Scenario) -> f64 {
    let dir = [angle.cos(), angle.sin()];
    let mut best = ray_box_exit(pos, dir, &scenario.bounds).unwrap_or(MAX_RANGE);
    for ob in &scenario.obstacles {
        if !ob.spans_height(pos[2]) {
            continue;
        }
        if let Some(t) = ray_box_enter(pos, dir, ob) {
            if t < best {
                best = t;
            }
        }
    }
    best.min(MAX_RANGE)
}

/// Distance at which a ray starting inside `b` exits it (horizontal slab test).
fn ray_box_exit(pos: [f64; 3], dir: [f64; 2], b: &Aabb) -> Option<f64> {
    let mut t_exit = f64::INFINITY;
    for k in 0..2 {
        if dir[k] != 0.0 {
            let t0 = (b.min[k] - pos[k]) / dir[k];
            let t1 = (b.max[k] - pos[k]) / dir[k];
            t_exit = t_exit.min(t0.max(t1));
        } else if pos[k] < b.min[k] || pos[k] > b.max[k] {
            return None;
        }
    }
    (t_exit >= 0.0).then_some(t_exit)
}

/// Distance at which a ray starting outside `b` first enters it, if it does.
fn ray_box_enter(pos: [f64; 3], dir: [f64; 2], b: &Aabb) -> Option<f64> {
    let mut t_enter = f64::NEG_INFINITY;
    let mut t_exit = f64::INFINITY;
    for k in 0..2 {
        if dir[k] != 0.0 {
            let t0 = (b.min[k] - pos[k]) / dir[k];
            let t1 = (b.max[k] - pos[k]) / dir[k];
            t_enter = t_enter.max(t0.min(t1));
            t_exit = t_exit.min(t0.max(t1));
        } else if pos[k] < b.min[k] || pos[k] > b.max[k] {
            return None;
        }
    }
    (t_enter <= t_exit && t_exit >= 0.0).then_some(t_enter.max(0.0))
}

/// Collapse a full scan to per-sector minima and normalize by max range.
/// The beam count is not an exact multiple of the sector count; the one
/// leftover beam joins the last sector.
pub fn downsample_lidar(scan: &[f64], sectors: usize) -> Vec<f64> {
    let per = scan.len() / sectors;
    let mut out = vec![f64::INFINITY; sectors];
    for (i, &r) in scan.iter().enumerate() {
        let s = (i / per).min(sectors - 1);
        if r < out[s] {
            out[s] = r;
        }
    }
    for v in &mut out {
        *v /= MAX_RANGE;
    }
    out
}

/// One line of a trajectory dump.
#[derive(Serialize)]
pub struct TrajStep<'a> {
    pub step: u32,
    pub pos: [f64; 3],
    pub yaw: f64,
    pub action: &'a [f64; 3],
    pub reward: f64,
    pub terminal: Terminal,
}

/// Append-only JSON-lines trajectory writer, one step per line.
pub struct TrajectoryWriter<W: std::io::Write> {
    out: W,
}

impl<W: std::io::Write> TrajectoryWriter<W> {
    pub fn new(out: W) -> Self {
        TrajectoryWriter { out }
    }

    pub fn record(&mut self, step: &TrajStep<'_>) -> Result<()> {
        let line = serde_json::to_string(step)
            .map_err(|e| Error::Json { context: "trajectory step".into(), source: e })?;
        writeln!(self.out, "{line}").map_err(|e| Error::io("writing trajectory", e))
    }
}

/// The simulated arena: room, vehicle, goal and episode bookkeeping.
///
/// The world owns no RNG; `reset` and `respawn_goal` draw from a caller stream
/// so checkpointing and replays stay in the caller's hands. A world instance
/// is single-threaded; run independent instances for parallel evaluation.
#[derive(Clone, Debug)]
pub struct World {
    scenario: Scenario,
    mode: Mode,
    obs_mode: ObsMode,
    params: RewardParams,
    state: VehicleState,
    goal: [f64; 3],
    prev_action: [f64; 3],
    ep: u32,
    diagonal: f64,
}

impl World {
    pub fn new(scenario: Scenario, mode: Mode, obs_mode: ObsMode) -> Self {
        let diagonal = scenario.diagonal();
        World {
            scenario,
            mode,
            obs_mode,
            params: RewardParams::default(),
            state: VehicleState { pos: [0.0, 0.0, PLANAR_Z], yaw: 0.0 },
            goal: [0.0, 0.0, PLANAR_Z],
            prev_action: [0.0; 3],
            ep: 0,
            diagonal,
        }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn obs_len(&self) -> usize {
        self.obs_mode.obs_len()
    }

    pub fn params(&self) -> &RewardParams {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut RewardParams {
        &mut self.params
    }

    pub fn state(&self) -> VehicleState {
        self.state
    }

    pub fn goal(&self) -> [f64; 3] {
        self.goal
    }

    pub fn steps_taken(&self) -> u32 {
        self.ep
    }

    /// Place the vehicle at a clear random pose, draw a fresh goal, zero the
    /// step counter and the remembered action, and return the first observation.
    ///
    /// Draw order per attempt is x, y, (z in 3D); the pose draw ends with yaw.
    /// That order is part of the reproducibility contract.
    pub fn reset(&mut self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        let pos = self.sample_clear_point(rng, None)?;
        let yaw = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        self.state = VehicleState { pos, yaw };
        self.goal = self.sample_clear_point(rng, Some(pos))?;
        self.prev_action = [0.0; 3];
        self.ep = 0;
        Ok(self.observe())
    }

    /// Draw a new goal away from the current vehicle position; the episode
    /// continues. Returns the observation against the new goal, which is the
    /// state the agent acts from next.
    pub fn respawn_goal(&mut self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        self.goal = self.sample_clear_point(rng, Some(self.state.pos))?;
        Ok(self.observe())
    }

    /// Force a pose and goal; test and replay hook.
    pub fn place(&mut self, state: VehicleState, goal: [f64; 3]) {
        self.state = state;
        self.goal = goal;
        self.ep = 0;
        self.prev_action = [0.0; 3];
    }

    /// Swap the goal mid-run without touching pose or step count; the
    /// sequential-goal task presents its next target this way. Returns the
    /// observation against the new goal.
    pub fn retarget(&mut self, goal: [f64; 3]) -> Vec<f64> {
        self.goal = goal;
        self.observe()
    }

    fn sample_clear_point(
        &self,
        rng: &mut ChaCha8Rng,
        away_from: Option<[f64; 3]>,
    ) -> Result<[f64; 3]> {
        let b = &self.scenario.bounds;
        let c = self.scenario.clearance;
        if b.min[0] + c >= b.max[0] - c || b.min[1] + c >= b.max[1] - c {
            return Err(Error::config(format!(
                "{}: clearance {c} leaves no room to place anything",
                self.scenario.name
            )));
        }
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            let x = rng.gen_range(b.min[0] + c..b.max[0] - c);
            let y = rng.gen_range(b.min[1] + c..b.max[1] - c);
            let z = match self.mode {
                Mode::TwoD => PLANAR_Z,
                Mode::ThreeD => rng.gen_range(1.0..5.0),
            };
            let p = [x, y, z];
            if !self.scenario.is_clear(p) {
                continue;
            }
            if let Some(q) = away_from {
                let d: f64 = (0..3).map(|k| (p[k] - q[k]) * (p[k] - q[k])).sum();
                if d.sqrt() < 1.0 {
                    continue;
                }
            }
            return Ok(p);
        }
        Err(Error::config(format!(
            "no clear placement found in {} after {} attempts; room too crowded for clearance {}",
            self.scenario.name, MAX_PLACEMENT_ATTEMPTS, c
        )))
    }

    /// Advance one step under a normalized action. Yaw updates first, then the
    /// position moves along the new heading. Attempted wall or obstacle
    /// penetration clamps the position and terminates the episode as a
    /// collision; arrival still wins if the goal is reached simultaneously.
    pub fn step(&mut self, action: [f64; 3]) -> Result<StepResult> {
        if action.iter().any(|a| !a.is_finite()) {
            return Err(Error::numeric(format!("non-finite action {action:?}")));
        }
        let cmd = scale_action(action, self.mode);
        let yaw = wrap_angle(self.state.yaw + cmd.dyaw);
        let mut pos = self.state.pos;
        pos[0] += cmd.v * yaw.cos() * DT;
        pos[1] += cmd.v * yaw.sin() * DT;
        pos[2] += cmd.vz * DT;

        let mut contact = self.scenario.in_contact(pos, self.mode);
        let b = self.scenario.bounds;
        for k in 0..3 {
            pos[k] = pos[k].clamp(b.min[k], b.max[k]);
        }
        for ob in &self.scenario.obstacles {
            if ob.spans_height(pos[2]) && ob.contains(pos) {
                pos = push_out(pos, ob);
                contact = true;
            }
        }

        self.state = VehicleState { pos, yaw };
        self.prev_action = action;
        self.ep += 1;

        let scan = lidar_scan(pos, yaw, &self.scenario);
        let min_x = scan.iter().copied().fold(f64::INFINITY, f64::min);
        let d_t = self.goal_distance();
        let (mut r, mut terminal) = reward(d_t, min_x, self.ep, &self.params);
        if contact && terminal != Terminal::Arrived {
            r = self.params.r_collide;
            terminal = Terminal::Collided;
        }
        Ok(StepResult {
            observation: self.observe_scan(&scan),
            reward: r,
            terminal,
            d_t,
            min_x,
            ep: self.ep,
        })
    }

    fn goal_distance(&self) -> f64 {
        let p = self.state.pos;
        let g = self.goal;
        let d: f64 = (0..3).map(|k| (g[k] - p[k]) * (g[k] - p[k])).sum();
        d.sqrt()
    }

    /// Current observation: per-sector scan minima (normalized by max range),
    /// the previous normalized action, then goal distance over the room
    /// diagonal, bearing to goal over pi, and elevation to goal over pi.
    pub fn observe(&self) -> Vec<f64> {
        let scan = lidar_scan(self.state.pos, self.state.yaw, &self.scenario);
        self.observe_scan(&scan)
    }

    fn observe_scan(&self, scan: &[f64]) -> Vec<f64> {
        let mut obs = downsample_lidar(scan, self.obs_mode.sectors());
        obs.extend_from_slice(&self.prev_action);
        let p = self.state.pos;
        let g = self.goal;
        let dx = g[0] - p[0];
        let dy = g[1] - p[1];
        let dz = g[2] - p[2];
        let horiz = (dx * dx + dy * dy).sqrt();
        let d = (horiz * horiz + dz * dz).sqrt();
        let bearing = wrap_angle(dy.atan2(dx) - self.state.yaw);
        let elevation = dz.atan2(horiz);
        obs.push(d / self.diagonal);
        obs.push(bearing / std::f64::consts::PI);
        obs.push(elevation / std::f64::consts::PI);
        obs
    }
}

/// Move a point that ended up inside a box to its nearest face.
fn push_out(p: [f64; 3], ob: &Aabb) -> [f64; 3] {
    let mut best_shift = f64::INFINITY;
    let mut shifted = p;
    for k in 0..3 {
        let to_min = p[k] - ob.min[k];
        let to_max = ob.max[k] - p[k];
        let (shift, target) = if to_min <= to_max {
            (to_min, ob.min[k])
        } else {
            (to_max, ob.max[k])
        };
        if shift < best_shift {
            best_shift = shift;
            shifted = p;
            shifted[k] = target;
        }
    }
    shifted
}
