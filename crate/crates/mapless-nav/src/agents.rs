//! Off-policy learners and their shared machinery: a bounded experience ring,
//! the exploration noise process, and two gradient-based updaters — a
//! deterministic-policy learner with a single critic, and an
//! entropy-regularized learner with twin critics and a squashed-Gaussian
//! policy. Update math is decomposed into public target/loss/gradient pieces
//! so tests can probe each piece against finite differences.

use crate::arch::{build_actor, build_critic, col_slice, hconcat, Actor, ActorTape, ArchId,
                  ACTION_DIM};
use crate::error::{Error, Result};
use crate::nn::checkpoint::{read_f64s, write_f64s};
use crate::nn::mat::Mat;
use crate::nn::network::{Network, Tape};
use crate::nn::params::{soft_update, ParamArena};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;
use std::fmt;
use std::io::{BufRead, Write};

pub use crate::env::{scale_action, Command};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Raw log-std head outputs are clamped into this band before exponentiation
/// so the policy's noise scale can neither collapse nor explode.
pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

/// Padding inside the tanh-correction logarithm; part of the defined
/// log-density, not just a numerical guard, so tests must account for it.
pub const SQUASH_EPS: f64 = 1e-6;

/// One environment interaction. `done` is the bootstrap cut as a multiplier:
/// 1.0 when the episode ended here (no value beyond this state), else 0.0.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: [f64; ACTION_DIM],
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub done: f64,
}

/// A sampled minibatch in matrix form, one row per transition.
#[derive(Debug, Clone)]
pub struct Batch {
    pub obs: Mat,
    pub actions: Mat,
    pub rewards: Vec<f64>,
    pub next_obs: Mat,
    pub dones: Vec<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn from_transitions(transitions: &[Transition]) -> Batch {
        let n = transitions.len();
        let obs_len = transitions.first().map_or(0, |t| t.obs.len());
        let mut obs = Mat::zeros(n, obs_len);
        let mut actions = Mat::zeros(n, ACTION_DIM);
        let mut next_obs = Mat::zeros(n, obs_len);
        let mut rewards = Vec::with_capacity(n);
        let mut dones = Vec::with_capacity(n);
        for (i, t) in transitions.iter().enumerate() {
            assert_eq!(t.obs.len(), obs_len, "ragged observation lengths in batch");
            assert_eq!(t.next_obs.len(), obs_len);
            obs.row_mut(i).copy_from_slice(&t.obs);
            actions.row_mut(i).copy_from_slice(&t.action);
            next_obs.row_mut(i).copy_from_slice(&t.next_obs);
            rewards.push(t.reward);
            dones.push(t.done);
        }
        Batch { obs, actions, rewards, next_obs, dones }
    }
}

const RING_MAGIC: &str = "replay-ring v1";

/// Bounded FIFO of transitions with uniform sampling. Storage is
/// struct-of-arrays over flat `Vec<f64>`s: slots fill in order until capacity,
/// then the write head wraps and overwrites the oldest slot.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    obs_len: usize,
    obs: Vec<f64>,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    next_obs: Vec<f64>,
    dones: Vec<f64>,
    len: usize,
    head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, obs_len: usize) -> ReplayBuffer {
        assert!(capacity > 0, "replay capacity must be positive");
        assert!(obs_len > 0, "observation length must be positive");
        ReplayBuffer {
            capacity,
            obs_len,
            obs: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            next_obs: Vec::new(),
            dones: Vec::new(),
            len: 0,
            head: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn obs_len(&self) -> usize {
        self.obs_len
    }

    /// Physical slot of the `i`-th oldest stored transition. While filling,
    /// slots and ages coincide; once full, the write head points at the
    /// oldest slot.
    fn slot(&self, i: usize) -> usize {
        debug_assert!(i < self.len);
        if self.len < self.capacity {
            i
        } else {
            (self.head + i) % self.capacity
        }
    }

    pub fn push(&mut self, t: &Transition) {
        assert_eq!(t.obs.len(), self.obs_len, "observation length mismatch");
        assert_eq!(t.next_obs.len(), self.obs_len);
        if self.len < self.capacity {
            self.obs.extend_from_slice(&t.obs);
            self.actions.extend_from_slice(&t.action);
            self.rewards.push(t.reward);
            self.next_obs.extend_from_slice(&t.next_obs);
            self.dones.push(t.done);
            self.len += 1;
        } else {
            let s = self.head;
            self.obs[s * self.obs_len..(s + 1) * self.obs_len].copy_from_slice(&t.obs);
            self.actions[s * ACTION_DIM..(s + 1) * ACTION_DIM].copy_from_slice(&t.action);
            self.rewards[s] = t.reward;
            self.next_obs[s * self.obs_len..(s + 1) * self.obs_len].copy_from_slice(&t.next_obs);
            self.dones[s] = t.done;
        }
        self.head = (self.head + 1) % self.capacity;
    }

    /// Copy out the `i`-th oldest transition (0 = oldest still stored).
    pub fn transition(&self, i: usize) -> Transition {
        assert!(i < self.len, "transition index {i} out of range (len {})", self.len);
        let s = self.slot(i);
        let mut action = [0.0; ACTION_DIM];
        action.copy_from_slice(&self.actions[s * ACTION_DIM..(s + 1) * ACTION_DIM]);
        Transition {
            obs: self.obs[s * self.obs_len..(s + 1) * self.obs_len].to_vec(),
            action,
            reward: self.rewards[s],
            next_obs: self.next_obs[s * self.obs_len..(s + 1) * self.obs_len].to_vec(),
            done: self.dones[s],
        }
    }

    /// Uniform draw (with replacement) of logical indices; exposed separately
    /// so statistical tests can examine the index distribution directly.
    pub fn sample_indices(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
        if n == 0 {
            return Err(Error::usage("sample size must be at least 1"));
        }
        if self.len < n {
            return Err(Error::usage(format!(
                "replay holds {} transitions, cannot fill a batch of {n}",
                self.len
            )));
        }
        Ok((0..n).map(|_| rng.gen_range(0..self.len)).collect())
    }

    pub fn gather(&self, indices: &[usize]) -> Batch {
        let n = indices.len();
        let mut obs = Mat::zeros(n, self.obs_len);
        let mut actions = Mat::zeros(n, ACTION_DIM);
        let mut next_obs = Mat::zeros(n, self.obs_len);
        let mut rewards = Vec::with_capacity(n);
        let mut dones = Vec::with_capacity(n);
        for (row, &i) in indices.iter().enumerate() {
            let s = self.slot(i);
            obs.row_mut(row)
                .copy_from_slice(&self.obs[s * self.obs_len..(s + 1) * self.obs_len]);
            actions
                .row_mut(row)
                .copy_from_slice(&self.actions[s * ACTION_DIM..(s + 1) * ACTION_DIM]);
            next_obs
                .row_mut(row)
                .copy_from_slice(&self.next_obs[s * self.obs_len..(s + 1) * self.obs_len]);
            rewards.push(self.rewards[s]);
            dones.push(self.dones[s]);
        }
        Batch { obs, actions, rewards, next_obs, dones }
    }

    pub fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<Batch> {
        let indices = self.sample_indices(n, rng)?;
        Ok(self.gather(&indices))
    }

    /// Serialize in logical (oldest-first) order so a reloaded ring replays
    /// identically regardless of where the head happened to sit.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let io = |e: std::io::Error| Error::io("writing replay ring", e);
        writeln!(w, "{RING_MAGIC}").map_err(io)?;
        writeln!(w, "capacity={} obs={} len={}", self.capacity, self.obs_len, self.len)
            .map_err(io)?;
        for i in 0..self.len {
            let s = self.slot(i);
            write_f64s(w, &self.obs[s * self.obs_len..(s + 1) * self.obs_len]).map_err(io)?;
            write_f64s(w, &self.actions[s * ACTION_DIM..(s + 1) * ACTION_DIM]).map_err(io)?;
            write_f64s(w, &[self.rewards[s]]).map_err(io)?;
            write_f64s(w, &self.next_obs[s * self.obs_len..(s + 1) * self.obs_len]).map_err(io)?;
            write_f64s(w, &[self.dones[s]]).map_err(io)?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: &mut R) -> Result<ReplayBuffer> {
        let io = |e: std::io::Error| Error::io("reading replay ring", e);
        let bad = |msg: &str| Error::config(format!("replay ring file: {msg}"));
        let mut line = String::new();
        r.read_line(&mut line).map_err(io)?;
        if line.trim_end() != RING_MAGIC {
            return Err(bad("bad magic line"));
        }
        line.clear();
        r.read_line(&mut line).map_err(io)?;
        let mut capacity = None;
        let mut obs_len = None;
        let mut len = None;
        for field in line.split_whitespace() {
            if let Some(v) = field.strip_prefix("capacity=") {
                capacity = v.parse::<usize>().ok();
            } else if let Some(v) = field.strip_prefix("obs=") {
                obs_len = v.parse::<usize>().ok();
            } else if let Some(v) = field.strip_prefix("len=") {
                len = v.parse::<usize>().ok();
            }
        }
        let (capacity, obs_len, len) = match (capacity, obs_len, len) {
            (Some(c), Some(o), Some(l)) if c > 0 && o > 0 && l <= c => (c, o, l),
            _ => return Err(bad("malformed or inconsistent header")),
        };
        let mut buf = ReplayBuffer::new(capacity, obs_len);
        for _ in 0..len {
            let obs = read_f64s(r, obs_len).map_err(io)?;
            let a = read_f64s(r, ACTION_DIM).map_err(io)?;
            let reward = read_f64s(r, 1).map_err(io)?[0];
            let next_obs = read_f64s(r, obs_len).map_err(io)?;
            let done = read_f64s(r, 1).map_err(io)?[0];
            let mut action = [0.0; ACTION_DIM];
            action.copy_from_slice(&a);
            buf.push(&Transition { obs, action, reward, next_obs, done });
        }
        let mut extra = [0u8; 1];
        if r.read(&mut extra).map_err(io)? != 0 {
            return Err(bad("trailing bytes after declared transitions"));
        }
        Ok(buf)
    }
}

/// Ornstein–Uhlenbeck process for temporally correlated exploration noise:
/// `x += theta*(mu - x)*dt + sigma*sqrt(dt)*N(0,1)`, one channel per action
/// component, with a fixed component draw order.
#[derive(Debug, Clone)]
pub struct OuNoise {
    pub theta: f64,
    pub sigma: f64,
    pub mu: f64,
    pub dt: f64,
    x: [f64; ACTION_DIM],
}

impl OuNoise {
    pub fn new(theta: f64, sigma: f64, mu: f64, dt: f64) -> OuNoise {
        OuNoise { theta, sigma, mu, dt, x: [mu; ACTION_DIM] }
    }

    /// The exploration schedule used by the deterministic learner.
    pub fn standard() -> OuNoise {
        OuNoise::new(0.15, 0.2, 0.0, 1.0)
    }

    /// Pull the state back to the mean; done at every episode start so noise
    /// never carries across episode boundaries.
    pub fn reset(&mut self) {
        self.x = [self.mu; ACTION_DIM];
    }

    pub fn state(&self) -> [f64; ACTION_DIM] {
        self.x
    }

    pub fn set_state(&mut self, x: [f64; ACTION_DIM]) {
        self.x = x;
    }

    pub fn step(&mut self, rng: &mut ChaCha8Rng) -> [f64; ACTION_DIM] {
        let root_dt = self.dt.sqrt();
        for c in self.x.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *c += self.theta * (self.mu - *c) * self.dt + self.sigma * root_dt * z;
        }
        self.x
    }
}

/// Log-density of a squashed-Gaussian action at pre-tanh point `pre_tanh`,
/// summed over components: the diagonal Gaussian log-density minus the
/// log-magnitude of the tanh Jacobian, with [`SQUASH_EPS`] padding inside the
/// correction logarithm.
pub fn squashed_log_prob(mean: &[f64], log_std: &[f64], pre_tanh: &[f64]) -> f64 {
    let ln_2pi = (2.0 * PI).ln();
    let mut lp = 0.0;
    for j in 0..mean.len() {
        let z = (pre_tanh[j] - mean[j]) / log_std[j].exp();
        let t = pre_tanh[j].tanh();
        lp += -0.5 * z * z - log_std[j] - 0.5 * ln_2pi - (1.0 - t * t + SQUASH_EPS).ln();
    }
    lp
}

/// Draw a rows×cols matrix of standard-normal values in row-major order. The
/// draw order is part of the reproducibility contract.
pub fn standard_normal_mat(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Mat {
    let mut m = Mat::zeros(rows, cols);
    for v in m.data_mut() {
        *v = rng.sample(StandardNormal);
    }
    m
}

/// Everything derived from one reparameterized draw: `u = mean +
/// exp(clamp(raw))·xi`, `a = tanh(u)`, and the per-row log-density.
struct SquashOut {
    actions: Mat,
    #[cfg_attr(not(test), allow(dead_code))]
    pre_tanh: Mat,
    log_std: Mat,
    log_prob: Vec<f64>,
}

fn squash_gaussian(mean: &Mat, raw_log_std: &Mat, xi: &Mat) -> SquashOut {
    let (b, k) = (mean.rows(), mean.cols());
    let mut log_std = Mat::zeros(b, k);
    let mut pre_tanh = Mat::zeros(b, k);
    let mut actions = Mat::zeros(b, k);
    for i in 0..b {
        for j in 0..k {
            let lc = raw_log_std.row(i)[j].clamp(LOG_STD_MIN, LOG_STD_MAX);
            let u = mean.row(i)[j] + lc.exp() * xi.row(i)[j];
            log_std.row_mut(i)[j] = lc;
            pre_tanh.row_mut(i)[j] = u;
            actions.row_mut(i)[j] = u.tanh();
        }
    }
    let log_prob = (0..b)
        .map(|i| squashed_log_prob(mean.row(i), log_std.row(i), pre_tanh.row(i)))
        .collect();
    SquashOut { actions, pre_tanh, log_std, log_prob }
}

/// Learning-rate and smoothing knobs shared by both learners. `alpha` (the
/// entropy weight) only matters to the stochastic learner.
#[derive(Debug, Clone, Copy)]
pub struct Hypers {
    pub gamma: f64,
    pub tau: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub alpha: f64,
}

impl Default for Hypers {
    fn default() -> Hypers {
        Hypers { gamma: 0.99, tau: 0.005, lr: 1e-3, batch_size: 256, alpha: 0.2 }
    }
}

/// Scalar diagnostics from one gradient update.
#[derive(Debug, Clone, Copy)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_loss: f64,
    /// Mean negative log-density of the actor's fresh draws; only the
    /// stochastic learner produces one.
    pub entropy: Option<f64>,
}

fn finite_or_err(value: f64, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::numeric(format!("{what} is non-finite ({value})")))
    }
}

/// Deterministic-policy learner: one critic regressed on bootstrapped targets
/// from slow-moving copies, and an actor ascending the critic's value of its
/// own actions. Exploration adds Ornstein–Uhlenbeck noise.
#[derive(Debug, Clone)]
pub struct Ddpg {
    pub actor: Actor,
    pub critic: Network,
    pub target_actor: Actor,
    pub target_critic: Network,
    pub noise: OuNoise,
    pub hypers: Hypers,
}

impl Ddpg {
    /// Build order is fixed (actor, then critic) so a seeded run is
    /// reproducible.
    pub fn new(arch: ArchId, hypers: Hypers, rng: &mut ChaCha8Rng) -> Result<Ddpg> {
        let actor = build_actor(arch, arch.obs_width(), false, rng)?;
        let critic = build_critic(arch.obs_width(), rng);
        Ddpg::from_parts(actor, critic, hypers)
    }

    /// Targets start as exact copies of the live networks.
    pub fn from_parts(actor: Actor, critic: Network, hypers: Hypers) -> Result<Ddpg> {
        if actor.is_stochastic() {
            return Err(Error::usage(
                "the deterministic-policy learner needs a single-head actor",
            ));
        }
        let target_actor = actor.clone();
        let target_critic = critic.clone();
        Ok(Ddpg {
            actor,
            critic,
            target_actor,
            target_critic,
            noise: OuNoise::standard(),
            hypers,
        })
    }

    pub fn obs_width(&self) -> usize {
        self.actor.obs_width()
    }

    pub fn begin_episode(&mut self) {
        self.noise.reset();
    }

    /// Greedy action; used for evaluation and as the base of exploration.
    pub fn policy_action(&self, obs: &[f64]) -> Result<[f64; ACTION_DIM]> {
        let x = Mat::from_vec(1, obs.len(), obs.to_vec());
        let a = self.actor.det_infer(&x)?;
        let row = a.row(0);
        Ok([row[0], row[1], row[2]])
    }

    /// Greedy action plus one noise step, clamped back into the action cube.
    pub fn explore_action(
        &mut self,
        obs: &[f64],
        rng: &mut ChaCha8Rng,
    ) -> Result<[f64; ACTION_DIM]> {
        let mut a = self.policy_action(obs)?;
        let n = self.noise.step(rng);
        for j in 0..ACTION_DIM {
            a[j] = (a[j] + n[j]).clamp(-1.0, 1.0);
        }
        Ok(a)
    }

    /// Bootstrapped regression targets `r + gamma*(1-done)*Q'(s', pi'(s'))`,
    /// entirely from the slow-moving copies.
    pub fn compute_targets(&self, batch: &Batch) -> Result<Vec<f64>> {
        let next_actions = self.target_actor.det_infer(&batch.next_obs)?;
        let x = hconcat(&batch.next_obs, &next_actions);
        let q_next = self.target_critic.infer(&x)?;
        let h = &self.hypers;
        Ok((0..batch.len())
            .map(|i| batch.rewards[i] + h.gamma * (1.0 - batch.dones[i]) * q_next.row(i)[0])
            .collect())
    }

    /// Mean squared error of the critic against `targets`.
    pub fn critic_loss(&self, batch: &Batch, targets: &[f64]) -> Result<f64> {
        let x = hconcat(&batch.obs, &batch.actions);
        let q = self.critic.infer(&x)?;
        let n = batch.len() as f64;
        Ok(q.data().iter().zip(targets).map(|(qi, yi)| (qi - yi) * (qi - yi)).sum::<f64>() / n)
    }

    /// Compute fresh critic gradients (replacing any previous ones) and
    /// return the loss value.
    pub fn accumulate_critic_grads(&mut self, batch: &Batch, targets: &[f64]) -> Result<f64> {
        self.critic.params.zero_grad();
        let x = hconcat(&batch.obs, &batch.actions);
        let mut tape = Tape::new();
        let q = self.critic.forward(&x, &mut tape)?;
        let n = batch.len() as f64;
        let mut dq = Mat::zeros(batch.len(), 1);
        let mut loss = 0.0;
        for i in 0..batch.len() {
            let e = q.row(i)[0] - targets[i];
            loss += e * e / n;
            dq.row_mut(i)[0] = 2.0 * e / n;
        }
        self.critic.backward(&tape, &dq);
        Ok(loss)
    }

    /// Negated mean critic value of the actor's own actions (we descend this
    /// to ascend the value).
    pub fn actor_loss(&self, batch: &Batch) -> Result<f64> {
        let actions = self.actor.det_infer(&batch.obs)?;
        let x = hconcat(&batch.obs, &actions);
        let q = self.critic.infer(&x)?;
        Ok(-q.data().iter().sum::<f64>() / batch.len() as f64)
    }

    /// Compute fresh actor gradients (replacing any previous ones) and return
    /// the loss. The critic acts as a fixed lens: only its input gradient
    /// flows back, its parameter gradients stay untouched.
    pub fn accumulate_actor_grads(&mut self, batch: &Batch) -> Result<f64> {
        self.actor.params.zero_grad();
        let mut actor_tape = ActorTape::new();
        let actions = self.actor.det_forward(&batch.obs, &mut actor_tape)?;
        let x = hconcat(&batch.obs, &actions);
        let mut critic_tape = Tape::new();
        let q = self.critic.forward(&x, &mut critic_tape)?;
        let n = batch.len() as f64;
        let loss = -q.data().iter().sum::<f64>() / n;
        let dq = Mat::from_vec(batch.len(), 1, vec![-1.0 / n; batch.len()]);
        let dx = self.critic.backward_input(&critic_tape, &dq);
        let da = col_slice(&dx, self.obs_width(), self.obs_width() + ACTION_DIM);
        self.actor.det_backward(&actor_tape, &da);
        Ok(loss)
    }

    /// One full update: critic regression step, then actor ascent step
    /// against the just-updated critic, then target smoothing.
    pub fn update(&mut self, batch: &Batch) -> Result<UpdateStats> {
        if batch.is_empty() {
            return Err(Error::usage("update requires a non-empty batch"));
        }
        let h = self.hypers;
        let targets = self.compute_targets(batch)?;
        let critic_loss =
            finite_or_err(self.accumulate_critic_grads(batch, &targets)?, "critic loss")?;
        self.critic.params.adam_step(h.lr, ADAM_BETA1, ADAM_BETA2, ADAM_EPS)?;
        let actor_loss = finite_or_err(self.accumulate_actor_grads(batch)?, "actor loss")?;
        self.actor.params.adam_step(h.lr, ADAM_BETA1, ADAM_BETA2, ADAM_EPS)?;
        soft_update(&mut self.target_critic.params, &self.critic.params, h.tau)?;
        soft_update(&mut self.target_actor.params, &self.actor.params, h.tau)?;
        Ok(UpdateStats { critic_loss, actor_loss, entropy: None })
    }
}

/// Entropy-regularized learner: twin critics regressed on the minimum of two
/// slow-moving copies (minus an entropy bonus), and a squashed-Gaussian actor
/// trained by the reparameterization trick.
#[derive(Debug, Clone)]
pub struct Sac {
    pub actor: Actor,
    pub q1: Network,
    pub q2: Network,
    pub target_q1: Network,
    pub target_q2: Network,
    pub hypers: Hypers,
}

impl Sac {
    /// Build order is fixed (actor, first critic, second critic) so a seeded
    /// run is reproducible.
    pub fn new(arch: ArchId, hypers: Hypers, rng: &mut ChaCha8Rng) -> Result<Sac> {
        let actor = build_actor(arch, arch.obs_width(), true, rng)?;
        let q1 = build_critic(arch.obs_width(), rng);
        let q2 = build_critic(arch.obs_width(), rng);
        Sac::from_parts(actor, q1, q2, hypers)
    }

    /// Targets start as exact copies of the live critics.
    pub fn from_parts(actor: Actor, q1: Network, q2: Network, hypers: Hypers) -> Result<Sac> {
        if !actor.is_stochastic() {
            return Err(Error::usage(
                "the entropy-regularized learner needs a mean/log-std actor head",
            ));
        }
        let target_q1 = q1.clone();
        let target_q2 = q2.clone();
        Ok(Sac { actor, q1, q2, target_q1, target_q2, hypers })
    }

    pub fn obs_width(&self) -> usize {
        self.actor.obs_width()
    }

    /// Evaluation action: tanh of the policy mean, no sampling.
    pub fn policy_action(&self, obs: &[f64]) -> Result<[f64; ACTION_DIM]> {
        let x = Mat::from_vec(1, obs.len(), obs.to_vec());
        let a = self.actor.det_infer(&x)?;
        let row = a.row(0);
        Ok([row[0], row[1], row[2]])
    }

    /// Exploration action: one reparameterized draw through the squash.
    pub fn sample_action(&self, obs: &[f64], rng: &mut ChaCha8Rng) -> Result<[f64; ACTION_DIM]> {
        let x = Mat::from_vec(1, obs.len(), obs.to_vec());
        let (mean, raw) = self.actor.gauss_infer(&x)?;
        let xi = standard_normal_mat(1, ACTION_DIM, rng);
        let out = squash_gaussian(&mean, &raw, &xi);
        let row = out.actions.row(0);
        Ok([row[0], row[1], row[2]])
    }

    /// Squashed draws and their log-densities for a whole observation batch,
    /// with the noise supplied explicitly so callers control determinism.
    pub fn sample_with_noise(&self, obs: &Mat, xi: &Mat) -> Result<(Mat, Vec<f64>)> {
        let (mean, raw) = self.actor.gauss_infer(obs)?;
        let out = squash_gaussian(&mean, &raw, xi);
        Ok((out.actions, out.log_prob))
    }

    /// Bootstrapped regression targets
    /// `r + gamma*(1-done)*(min(Q1', Q2')(s', a') - alpha*log pi(a'|s'))`
    /// with `a'` drawn fresh from the current policy via `xi`.
    pub fn compute_targets(&self, batch: &Batch, xi: &Mat) -> Result<Vec<f64>> {
        let (next_actions, log_prob) = self.sample_with_noise(&batch.next_obs, xi)?;
        let x = hconcat(&batch.next_obs, &next_actions);
        let t1 = self.target_q1.infer(&x)?;
        let t2 = self.target_q2.infer(&x)?;
        let h = &self.hypers;
        Ok((0..batch.len())
            .map(|i| {
                let q = t1.row(i)[0].min(t2.row(i)[0]);
                batch.rewards[i]
                    + h.gamma * (1.0 - batch.dones[i]) * (q - h.alpha * log_prob[i])
            })
            .collect())
    }

    /// Sum of both critics' mean squared errors against `targets`.
    pub fn critic_loss(&self, batch: &Batch, targets: &[f64]) -> Result<f64> {
        let x = hconcat(&batch.obs, &batch.actions);
        let n = batch.len() as f64;
        let mut loss = 0.0;
        for net in [&self.q1, &self.q2] {
            let q = net.infer(&x)?;
            loss +=
                q.data().iter().zip(targets).map(|(qi, yi)| (qi - yi) * (qi - yi)).sum::<f64>()
                    / n;
        }
        Ok(loss)
    }

    /// Compute fresh gradients for both critics (replacing any previous ones)
    /// and return the combined loss.
    pub fn accumulate_critic_grads(&mut self, batch: &Batch, targets: &[f64]) -> Result<f64> {
        let x = hconcat(&batch.obs, &batch.actions);
        let n = batch.len() as f64;
        let mut loss = 0.0;
        for net in [&mut self.q1, &mut self.q2] {
            net.params.zero_grad();
            let mut tape = Tape::new();
            let q = net.forward(&x, &mut tape)?;
            let mut dq = Mat::zeros(batch.len(), 1);
            for i in 0..batch.len() {
                let e = q.row(i)[0] - targets[i];
                loss += e * e / n;
                dq.row_mut(i)[0] = 2.0 * e / n;
            }
            net.backward(&tape, &dq);
        }
        Ok(loss)
    }

    /// Actor objective `mean(alpha*log pi(a|s) - min(Q1,Q2)(s,a))` on fresh
    /// reparameterized draws; returns `(loss, entropy)`.
    pub fn actor_loss(&self, batch: &Batch, xi: &Mat) -> Result<(f64, f64)> {
        let (mean, raw) = self.actor.gauss_infer(&batch.obs)?;
        let out = squash_gaussian(&mean, &raw, xi);
        let x = hconcat(&batch.obs, &out.actions);
        let q1 = self.q1.infer(&x)?;
        let q2 = self.q2.infer(&x)?;
        let n = batch.len() as f64;
        let mut loss = 0.0;
        for i in 0..batch.len() {
            let qmin = q1.row(i)[0].min(q2.row(i)[0]);
            loss += (self.hypers.alpha * out.log_prob[i] - qmin) / n;
        }
        let entropy = -out.log_prob.iter().sum::<f64>() / n;
        Ok((loss, entropy))
    }

    /// Compute fresh actor gradients (replacing any previous ones) for the
    /// objective in [`Sac::actor_loss`], chaining by hand through the squash:
    /// `a = tanh(u)`, `u = mean + exp(clamp(raw))·xi`. The critics act as
    /// fixed lenses (input gradients only), routed per row through whichever
    /// critic attains the minimum (ties go to the first).
    pub fn accumulate_actor_grads(&mut self, batch: &Batch, xi: &Mat) -> Result<(f64, f64)> {
        self.actor.params.zero_grad();
        let mut tape = ActorTape::new();
        let (mean, raw) = self.actor.gauss_forward(&batch.obs, &mut tape)?;
        let out = squash_gaussian(&mean, &raw, xi);
        let x = hconcat(&batch.obs, &out.actions);
        let mut tape1 = Tape::new();
        let mut tape2 = Tape::new();
        let q1 = self.q1.forward(&x, &mut tape1)?;
        let q2 = self.q2.forward(&x, &mut tape2)?;

        let b = batch.len();
        let n = b as f64;
        let mut dy1 = Mat::zeros(b, 1);
        let mut dy2 = Mat::zeros(b, 1);
        let mut loss = 0.0;
        for i in 0..b {
            let (v1, v2) = (q1.row(i)[0], q2.row(i)[0]);
            loss += (self.hypers.alpha * out.log_prob[i] - v1.min(v2)) / n;
            if v1 <= v2 {
                dy1.row_mut(i)[0] = -1.0 / n;
            } else {
                dy2.row_mut(i)[0] = -1.0 / n;
            }
        }
        let dx1 = self.q1.backward_input(&tape1, &dy1);
        let dx2 = self.q2.backward_input(&tape2, &dy2);

        let w = self.obs_width();
        let a_n = self.hypers.alpha / n;
        let mut dmean = Mat::zeros(b, ACTION_DIM);
        let mut draw = Mat::zeros(b, ACTION_DIM);
        for i in 0..b {
            for j in 0..ACTION_DIM {
                // dL/da from the -min(Q1,Q2) term (only one critic is live).
                let g_q = dx1.row(i)[w + j] + dx2.row(i)[w + j];
                let t = out.actions.row(i)[j];
                let sech2 = 1.0 - t * t;
                // Only the tanh-correction term of the log-density depends on
                // u; the Gaussian term sees z = xi, a constant under theta.
                let dlogp_du = 2.0 * t * sech2 / (sech2 + SQUASH_EPS);
                let du = a_n * dlogp_du + g_q * sech2;
                let sx = out.log_std.row(i)[j].exp() * xi.row(i)[j]; // du/dlog_std
                let raw_v = raw.row(i)[j];
                let gate =
                    if (LOG_STD_MIN..=LOG_STD_MAX).contains(&raw_v) { 1.0 } else { 0.0 };
                dmean.row_mut(i)[j] = du;
                // The explicit -log_std term contributes -alpha/n on top of
                // the u-route; the clamp gate kills both outside the band.
                draw.row_mut(i)[j] = gate * (du * sx - a_n);
            }
        }
        let entropy = -out.log_prob.iter().sum::<f64>() / n;
        let Sac { actor, .. } = self;
        actor.gauss_backward(&tape, &dmean, &draw);
        Ok((loss, entropy))
    }

    /// One full update. Noise draw order is fixed: target-side draws first,
    /// then actor-side draws, each batch-rows × action-dims in row-major
    /// order.
    pub fn update(&mut self, batch: &Batch, rng: &mut ChaCha8Rng) -> Result<UpdateStats> {
        if batch.is_empty() {
            return Err(Error::usage("update requires a non-empty batch"));
        }
        let h = self.hypers;
        let xi_next = standard_normal_mat(batch.len(), ACTION_DIM, rng);
        let xi = standard_normal_mat(batch.len(), ACTION_DIM, rng);
        let targets = self.compute_targets(batch, &xi_next)?;
        let critic_loss =
            finite_or_err(self.accumulate_critic_grads(batch, &targets)?, "critic loss")?;
        self.q1.params.adam_step(h.lr, ADAM_BETA1, ADAM_BETA2, ADAM_EPS)?;
        self.q2.params.adam_step(h.lr, ADAM_BETA1, ADAM_BETA2, ADAM_EPS)?;
        let (actor_loss, entropy) = self.accumulate_actor_grads(batch, &xi)?;
        finite_or_err(actor_loss, "actor loss")?;
        self.actor.params.adam_step(h.lr, ADAM_BETA1, ADAM_BETA2, ADAM_EPS)?;
        soft_update(&mut self.target_q1.params, &self.q1.params, h.tau)?;
        soft_update(&mut self.target_q2.params, &self.q2.params, h.tau)?;
        Ok(UpdateStats { critic_loss, actor_loss, entropy: Some(entropy) })
    }
}

/// The two learning algorithms a run can use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algo {
    Ddpg,
    Sac,
}

impl Algo {
    pub fn all() -> [Algo; 2] {
        [Algo::Ddpg, Algo::Sac]
    }

    pub fn parse(s: &str) -> Result<Algo> {
        match s.to_ascii_lowercase().as_str() {
            "ddpg" => Ok(Algo::Ddpg),
            "sac" => Ok(Algo::Sac),
            other => Err(Error::usage(format!(
                "unknown algorithm '{other}' (expected ddpg or sac)"
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Algo::Ddpg => "ddpg",
            Algo::Sac => "sac",
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Algorithm-agnostic facade over the two learners; the training and
/// evaluation loops only speak this interface.
#[derive(Debug, Clone)]
pub enum Learner {
    Ddpg(Ddpg),
    Sac(Sac),
}

impl Learner {
    pub fn new(algo: Algo, arch: ArchId, hypers: Hypers, rng: &mut ChaCha8Rng) -> Result<Learner> {
        Ok(match algo {
            Algo::Ddpg => Learner::Ddpg(Ddpg::new(arch, hypers, rng)?),
            Algo::Sac => Learner::Sac(Sac::new(arch, hypers, rng)?),
        })
    }

    pub fn algo(&self) -> Algo {
        match self {
            Learner::Ddpg(_) => Algo::Ddpg,
            Learner::Sac(_) => Algo::Sac,
        }
    }

    pub fn obs_width(&self) -> usize {
        match self {
            Learner::Ddpg(a) => a.obs_width(),
            Learner::Sac(a) => a.obs_width(),
        }
    }

    pub fn hypers(&self) -> Hypers {
        match self {
            Learner::Ddpg(a) => a.hypers,
            Learner::Sac(a) => a.hypers,
        }
    }

    /// Reset per-episode exploration state (the correlated-noise channel).
    pub fn begin_episode(&mut self) {
        if let Learner::Ddpg(a) = self {
            a.begin_episode();
        }
    }

    /// Greedy evaluation action; never consumes randomness.
    pub fn policy_action(&self, obs: &[f64]) -> Result<[f64; ACTION_DIM]> {
        match self {
            Learner::Ddpg(a) => a.policy_action(obs),
            Learner::Sac(a) => a.policy_action(obs),
        }
    }

    /// Exploration action (noisy or sampled, per algorithm).
    pub fn explore_action(
        &mut self,
        obs: &[f64],
        rng: &mut ChaCha8Rng,
    ) -> Result<[f64; ACTION_DIM]> {
        match self {
            Learner::Ddpg(a) => a.explore_action(obs, rng),
            Learner::Sac(a) => a.sample_action(obs, rng),
        }
    }

    /// One gradient update. The deterministic learner never touches `rng`;
    /// the stochastic one draws its reparameterization noise from it.
    pub fn update(&mut self, batch: &Batch, rng: &mut ChaCha8Rng) -> Result<UpdateStats> {
        match self {
            Learner::Ddpg(a) => a.update(batch),
            Learner::Sac(a) => a.update(batch, rng),
        }
    }

    /// Named parameter arenas in a fixed order; the checkpoint layout.
    pub fn arenas(&self) -> Vec<(&'static str, &ParamArena)> {
        match self {
            Learner::Ddpg(a) => vec![
                ("actor", &a.actor.params),
                ("critic", &a.critic.params),
                ("target_actor", &a.target_actor.params),
                ("target_critic", &a.target_critic.params),
            ],
            Learner::Sac(a) => vec![
                ("actor", &a.actor.params),
                ("q1", &a.q1.params),
                ("q2", &a.q2.params),
                ("target_q1", &a.target_q1.params),
                ("target_q2", &a.target_q2.params),
            ],
        }
    }

    pub fn arenas_mut(&mut self) -> Vec<(&'static str, &mut ParamArena)> {
        match self {
            Learner::Ddpg(a) => vec![
                ("actor", &mut a.actor.params),
                ("critic", &mut a.critic.params),
                ("target_actor", &mut a.target_actor.params),
                ("target_critic", &mut a.target_critic.params),
            ],
            Learner::Sac(a) => vec![
                ("actor", &mut a.actor.params),
                ("q1", &mut a.q1.params),
                ("q2", &mut a.q2.params),
                ("target_q1", &mut a.target_q1.params),
                ("target_q2", &mut a.target_q2.params),
            ],
        }
    }
}
