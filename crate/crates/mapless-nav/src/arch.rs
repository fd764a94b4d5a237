//! Builders for the policy and value networks.
//!
//! Six actor bodies are supported: two- to five-layer perceptrons, an LSTM
//! variant and a 1-D convolution variant that reads the wide 270-sector scan.
//! The value network (critic) is fixed at three 512-unit hidden layers over
//! the observation concatenated with the action.
//!
//! Actors are built either deterministic (dense + tanh output, used by the
//! deterministic-policy learner) or stochastic (two parallel dense heads
//! producing a mean and a log-std per action component).

use std::fmt;

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::layer::{Conv1d, Dense, Layer, LayerCache, LayerKind, LstmCell};
use crate::nn::{Mat, Network, ParamArena};

/// Action components produced by every policy: forward, climb, yaw change.
pub const ACTION_DIM: usize = 3;
/// Hidden width shared by all dense hidden layers.
pub const HIDDEN: usize = 512;
/// Hidden state width of the LSTM body.
pub const LSTM_HIDDEN: usize = 256;
/// Observation tail that bypasses the convolution body: previous action (3)
/// plus goal features (3).
pub const NON_LIDAR_INPUTS: usize = 6;

/// The six network bodies compared by the study.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArchId {
    Mlp2,
    Mlp3,
    Mlp4,
    Mlp5,
    Lstm,
    Conv,
}

impl ArchId {
    pub fn all() -> [ArchId; 6] {
        [ArchId::Mlp2, ArchId::Mlp3, ArchId::Mlp4, ArchId::Mlp5, ArchId::Lstm, ArchId::Conv]
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mlp2" => Ok(ArchId::Mlp2),
            "mlp3" => Ok(ArchId::Mlp3),
            "mlp4" => Ok(ArchId::Mlp4),
            "mlp5" => Ok(ArchId::Mlp5),
            "lstm" => Ok(ArchId::Lstm),
            "conv" => Ok(ArchId::Conv),
            other => Err(Error::config(format!(
                "unknown architecture `{other}`; choose mlp2, mlp3, mlp4, mlp5, lstm or conv"
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ArchId::Mlp2 => "mlp2",
            ArchId::Mlp3 => "mlp3",
            ArchId::Mlp4 => "mlp4",
            ArchId::Mlp5 => "mlp5",
            ArchId::Lstm => "lstm",
            ArchId::Conv => "conv",
        }
    }

    /// Observation width this body expects: 276 for the convolution variant
    /// (270 scan sectors plus the 6-value tail), 26 for everything else.
    pub fn obs_width(self) -> usize {
        match self {
            ArchId::Conv => 276,
            _ => 26,
        }
    }
}

impl fmt::Display for ArchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Feature extractor part of an actor.
#[derive(Clone, Debug)]
enum Core {
    /// Plain layer chain (perceptrons and the LSTM variant).
    Chain(Vec<Layer>),
    /// Convolution body over the scan columns; the non-scan tail bypasses it
    /// and joins before the dense stage.
    Split {
        conv: Vec<Layer>,
        dense: Vec<Layer>,
        lidar_width: usize,
        flat_width: usize,
    },
}

/// Output stage of an actor.
#[derive(Clone, Debug)]
enum Head {
    /// Dense + tanh: a bounded deterministic action.
    Det(Vec<Layer>),
    /// Two parallel dense heads: mean and (unclamped) log-std per component.
    Gauss { mean: Vec<Layer>, log_std: Vec<Layer> },
}

/// Saved forward activations for one actor pass; owned by the caller so a
/// backward pass without a matching forward cannot be expressed.
#[derive(Default)]
pub struct ActorTape {
    conv: Vec<LayerCache>,
    core: Vec<LayerCache>,
    head: Vec<LayerCache>,
    head2: Vec<LayerCache>,
}

impl ActorTape {
    pub fn new() -> Self {
        ActorTape::default()
    }

    fn clear(&mut self) {
        self.conv.clear();
        self.core.clear();
        self.head.clear();
        self.head2.clear();
    }
}

/// A policy network: shared feature core plus a deterministic or stochastic
/// output stage, with all parameters in one arena so optimizer state, soft
/// target blending and checkpoints treat the actor as a unit.
#[derive(Clone, Debug)]
pub struct Actor {
    pub params: ParamArena,
    core: Core,
    head: Head,
    obs_width: usize,
}

impl Actor {
    pub fn obs_width(&self) -> usize {
        self.obs_width
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn is_stochastic(&self) -> bool {
        matches!(self.head, Head::Gauss { .. })
    }

    /// Layer kinds in forward order (core, then output stage), for structural
    /// assertions and reports.
    pub fn layer_kinds(&self) -> Vec<LayerKind> {
        let mut kinds = Vec::new();
        match &self.core {
            Core::Chain(layers) => kinds.extend(layers.iter().map(Layer::kind)),
            Core::Split { conv, dense, .. } => {
                kinds.extend(conv.iter().map(Layer::kind));
                kinds.extend(dense.iter().map(Layer::kind));
            }
        }
        match &self.head {
            Head::Det(layers) => kinds.extend(layers.iter().map(Layer::kind)),
            Head::Gauss { mean, log_std } => {
                kinds.extend(mean.iter().map(Layer::kind));
                kinds.extend(log_std.iter().map(Layer::kind));
            }
        }
        kinds
    }

    fn check_obs(&self, x: &Mat) -> Result<()> {
        if x.cols() != self.obs_width {
            return Err(Error::Shape { layer: 0, expected: self.obs_width, got: x.cols() });
        }
        Ok(())
    }

    fn core_forward(&self, pv: &[f64], x: &Mat, mut tape: Option<&mut ActorTape>) -> Mat {
        match &self.core {
            Core::Chain(layers) => {
                stack_forward(pv, layers, x, tape.as_mut().map(|t| &mut t.core))
            }
            Core::Split { conv, dense, lidar_width, .. } => {
                let scan = col_slice(x, 0, *lidar_width);
                let tail = col_slice(x, *lidar_width, x.cols());
                let flat =
                    stack_forward(pv, conv, &scan, tape.as_mut().map(|t| &mut t.conv));
                let joined = hconcat(&flat, &tail);
                stack_forward(pv, dense, &joined, tape.as_mut().map(|t| &mut t.core))
            }
        }
    }

    fn core_backward(core: &Core, pv: &[f64], grads: &mut [f64], tape: &ActorTape, dfeat: &Mat) {
        match core {
            Core::Chain(layers) => {
                let _ = stack_backward(pv, grads, layers, &tape.core, dfeat);
            }
            Core::Split { conv, dense, flat_width, .. } => {
                let djoined = stack_backward(pv, grads, dense, &tape.core, dfeat);
                let dflat = col_slice(&djoined, 0, *flat_width);
                // the bypass tail has no parameters upstream; its gradient ends here
                let _ = stack_backward(pv, grads, conv, &tape.conv, &dflat);
            }
        }
    }

    /// Bounded action under explicit parameter values: tanh of the output
    /// stage (the mean head when stochastic). Pure; used for evaluation and
    /// for finite-difference probing.
    pub fn det_infer_with(&self, pv: &[f64], obs: &Mat) -> Result<Mat> {
        self.check_obs(obs)?;
        let feat = self.core_forward(pv, obs, None);
        let out = match &self.head {
            Head::Det(layers) => stack_forward(pv, layers, &feat, None),
            Head::Gauss { mean, .. } => {
                let mut m = stack_forward(pv, mean, &feat, None);
                for v in m.data_mut() {
                    *v = v.tanh();
                }
                m
            }
        };
        debug_assert!(out.cols() == ACTION_DIM);
        if !out.is_finite() {
            return Err(Error::numeric("actor produced a non-finite action"));
        }
        Ok(out)
    }

    pub fn det_infer(&self, obs: &Mat) -> Result<Mat> {
        self.det_infer_with(self.params.value(), obs)
    }

    /// Bounded action with activations recorded for a deterministic-policy
    /// gradient step. Only valid for deterministic output stages.
    pub fn det_forward(&self, obs: &Mat, tape: &mut ActorTape) -> Result<Mat> {
        self.check_obs(obs)?;
        tape.clear();
        let pv = self.params.value();
        let feat = self.core_forward(pv, obs, Some(tape));
        match &self.head {
            Head::Det(layers) => Ok(stack_forward(pv, layers, &feat, Some(&mut tape.head))),
            Head::Gauss { .. } => Err(Error::usage(
                "deterministic training pass on a stochastic actor; use gauss_forward",
            )),
        }
    }

    /// Accumulate parameter gradients for a recorded deterministic pass given
    /// the loss gradient at the action output.
    pub fn det_backward(&mut self, tape: &ActorTape, dy: &Mat) {
        let Actor { params, core, head, .. } = self;
        let (pv, grads) = params.value_and_grad_mut();
        let dfeat = match head {
            Head::Det(layers) => stack_backward(pv, grads, layers, &tape.head, dy),
            Head::Gauss { .. } => unreachable!("det_forward rejects stochastic heads"),
        };
        Actor::core_backward(core, pv, grads, tape, &dfeat);
    }

    /// Mean and raw (unclamped) log-std under explicit parameter values.
    pub fn gauss_infer_with(&self, pv: &[f64], obs: &Mat) -> Result<(Mat, Mat)> {
        self.check_obs(obs)?;
        let feat = self.core_forward(pv, obs, None);
        match &self.head {
            Head::Gauss { mean, log_std } => Ok((
                stack_forward(pv, mean, &feat, None),
                stack_forward(pv, log_std, &feat, None),
            )),
            Head::Det(_) => Err(Error::usage(
                "stochastic pass on a deterministic actor; use det_infer",
            )),
        }
    }

    pub fn gauss_infer(&self, obs: &Mat) -> Result<(Mat, Mat)> {
        self.gauss_infer_with(self.params.value(), obs)
    }

    /// Mean and raw log-std with activations recorded for a policy update.
    pub fn gauss_forward(&self, obs: &Mat, tape: &mut ActorTape) -> Result<(Mat, Mat)> {
        self.check_obs(obs)?;
        tape.clear();
        let pv = self.params.value();
        let feat = self.core_forward(pv, obs, Some(tape));
        match &self.head {
            Head::Gauss { mean, log_std } => Ok((
                stack_forward(pv, mean, &feat, Some(&mut tape.head)),
                stack_forward(pv, log_std, &feat, Some(&mut tape.head2)),
            )),
            Head::Det(_) => Err(Error::usage(
                "stochastic pass on a deterministic actor; use det_forward",
            )),
        }
    }

    /// Accumulate parameter gradients for a recorded stochastic pass given the
    /// loss gradients at the mean and log-std outputs.
    pub fn gauss_backward(&mut self, tape: &ActorTape, dmean: &Mat, dlogstd: &Mat) {
        let Actor { params, core, head, .. } = self;
        let (pv, grads) = params.value_and_grad_mut();
        let (mean, log_std) = match head {
            Head::Gauss { mean, log_std } => (mean, log_std),
            Head::Det(_) => unreachable!("gauss_forward rejects deterministic heads"),
        };
        let mut dfeat = stack_backward(pv, grads, mean, &tape.head, dmean);
        let d2 = stack_backward(pv, grads, log_std, &tape.head2, dlogstd);
        for (a, b) in dfeat.data_mut().iter_mut().zip(d2.data()) {
            *a += b;
        }
        Actor::core_backward(core, pv, grads, tape, &dfeat);
    }
}

/// Run a layer chain forward, optionally recording activations.
fn stack_forward(
    pv: &[f64],
    layers: &[Layer],
    x: &Mat,
    mut tape: Option<&mut Vec<LayerCache>>,
) -> Mat {
    let mut h = x.clone();
    for layer in layers {
        h = layer.forward(pv, &h, tape.as_deref_mut());
    }
    h
}

/// Walk a recorded chain backward, accumulating parameter gradients and
/// returning the gradient at the chain input.
fn stack_backward(
    pv: &[f64],
    grads: &mut [f64],
    layers: &[Layer],
    caches: &[LayerCache],
    dy: &Mat,
) -> Mat {
    debug_assert_eq!(layers.len(), caches.len(), "tape does not match the stack");
    let mut d = dy.clone();
    for (layer, cache) in layers.iter().zip(caches).rev() {
        d = layer.backward(pv, grads, cache, &d);
    }
    d
}

/// Copy a column range into a new matrix.
pub(crate) fn col_slice(m: &Mat, lo: usize, hi: usize) -> Mat {
    let mut out = Mat::zeros(m.rows(), hi - lo);
    for i in 0..m.rows() {
        out.row_mut(i).copy_from_slice(&m.row(i)[lo..hi]);
    }
    out
}

/// Concatenate two matrices side by side.
pub(crate) fn hconcat(a: &Mat, b: &Mat) -> Mat {
    debug_assert_eq!(a.rows(), b.rows());
    let mut out = Mat::zeros(a.rows(), a.cols() + b.cols());
    for i in 0..a.rows() {
        out.row_mut(i)[..a.cols()].copy_from_slice(a.row(i));
        out.row_mut(i)[a.cols()..].copy_from_slice(b.row(i));
    }
    out
}

fn head_for(
    arena: &mut ParamArena,
    feat_width: usize,
    stochastic: bool,
    rng: &mut ChaCha8Rng,
) -> Head {
    if stochastic {
        let mean = Dense::new(arena, "mean", feat_width, ACTION_DIM, rng);
        let log_std = Dense::new(arena, "logstd", feat_width, ACTION_DIM, rng);
        Head::Gauss {
            mean: vec![Layer::Dense(mean)],
            log_std: vec![Layer::Dense(log_std)],
        }
    } else {
        let out = Dense::new(arena, "out", feat_width, ACTION_DIM, rng);
        Head::Det(vec![Layer::Dense(out), Layer::Tanh])
    }
}

/// Perceptron actor with explicit hidden widths; the standard builders call
/// this with `[512; k]`, and unit probes can shrink it to single units.
pub fn build_mlp_actor(
    obs_width: usize,
    hidden: &[usize],
    stochastic: bool,
    rng: &mut ChaCha8Rng,
) -> Actor {
    let mut arena = ParamArena::new();
    let mut layers = Vec::new();
    let mut width = obs_width;
    for (i, &h) in hidden.iter().enumerate() {
        layers.push(Layer::Dense(Dense::new(&mut arena, &format!("fc{i}"), width, h, rng)));
        layers.push(Layer::Relu);
        width = h;
    }
    let head = head_for(&mut arena, width, stochastic, rng);
    Actor { params: arena, core: Core::Chain(layers), head, obs_width }
}

/// Build one of the six study bodies. `obs_width` must match the body: 276
/// for the convolution variant, 26 otherwise.
pub fn build_actor(
    id: ArchId,
    obs_width: usize,
    stochastic: bool,
    rng: &mut ChaCha8Rng,
) -> Result<Actor> {
    if obs_width != id.obs_width() {
        return Err(Error::config(format!(
            "architecture {id} expects a {}-value observation, got {obs_width}",
            id.obs_width()
        )));
    }
    match id {
        ArchId::Mlp2 => Ok(build_mlp_actor(obs_width, &[HIDDEN; 2], stochastic, rng)),
        ArchId::Mlp3 => Ok(build_mlp_actor(obs_width, &[HIDDEN; 3], stochastic, rng)),
        ArchId::Mlp4 => Ok(build_mlp_actor(obs_width, &[HIDDEN; 4], stochastic, rng)),
        ArchId::Mlp5 => Ok(build_mlp_actor(obs_width, &[HIDDEN; 5], stochastic, rng)),
        ArchId::Lstm => {
            let mut arena = ParamArena::new();
            let cell = LstmCell::new(&mut arena, "lstm", obs_width, LSTM_HIDDEN, rng);
            let fc = Dense::new(&mut arena, "fc0", LSTM_HIDDEN, HIDDEN, rng);
            let layers = vec![Layer::Lstm(cell), Layer::Dense(fc), Layer::Relu];
            let head = head_for(&mut arena, HIDDEN, stochastic, rng);
            Ok(Actor { params: arena, core: Core::Chain(layers), head, obs_width })
        }
        ArchId::Conv => {
            let lidar_width = obs_width - NON_LIDAR_INPUTS;
            let mut arena = ParamArena::new();
            let c0 = Conv1d::new(&mut arena, "conv0", 1, lidar_width, 32, 5, 2, rng)?;
            let c1 = Conv1d::new(&mut arena, "conv1", 32, c0.l_out(), 32, 3, 2, rng)?;
            let flat_width = 32 * c1.l_out();
            let conv = vec![Layer::Conv1d(c0), Layer::Relu, Layer::Conv1d(c1), Layer::Relu];
            let fc = Dense::new(
                &mut arena,
                "fc0",
                flat_width + NON_LIDAR_INPUTS,
                HIDDEN,
                rng,
            );
            let dense = vec![Layer::Dense(fc), Layer::Relu];
            let head = head_for(&mut arena, HIDDEN, stochastic, rng);
            Ok(Actor {
                params: arena,
                core: Core::Split { conv, dense, lidar_width, flat_width },
                head,
                obs_width,
            })
        }
    }
}

/// Value network with explicit hidden widths over `[observation, action]`;
/// the scalar output is linear because Q-values are unbounded.
pub fn build_critic_custom(obs_width: usize, hidden: &[usize], rng: &mut ChaCha8Rng) -> Network {
    let in_dim = obs_width + ACTION_DIM;
    let mut arena = ParamArena::new();
    let mut layers = Vec::new();
    let mut width = in_dim;
    for (i, &h) in hidden.iter().enumerate() {
        layers.push(Layer::Dense(Dense::new(&mut arena, &format!("fc{i}"), width, h, rng)));
        layers.push(Layer::Relu);
        width = h;
    }
    layers.push(Layer::Dense(Dense::new(&mut arena, "out", width, 1, rng)));
    Network::from_layers(arena, layers, in_dim).expect("critic stack widths are consistent")
}

/// The fixed study critic: three 512-unit hidden layers.
pub fn build_critic(obs_width: usize, rng: &mut ChaCha8Rng) -> Network {
    build_critic_custom(obs_width, &[HIDDEN; 3], rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{fd_vs_analytic, randomize_params, sample_coords, FD_EPS};
    use rand::{Rng, SeedableRng};

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_obs(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
        Mat::from_vec(rows, cols, (0..rows * cols).map(|_| r.gen_range(-1.0..1.0)).collect())
    }

    #[test]
    fn two_layer_perceptron_parameter_count() {
        let a = build_actor(ArchId::Mlp2, 26, false, &mut rng(1)).unwrap();
        // 26*512+512 dense-in, 512*512+512 hidden, 512*3+3 output
        assert_eq!(a.param_count(), 26 * 512 + 512 + 512 * 512 + 512 + 512 * 3 + 3);
        assert_eq!(a.param_count(), 278_019);
    }

    #[test]
    fn critic_parameter_count() {
        let c = build_critic(26, &mut rng(2));
        // (29*512+512) + 2*(512*512+512) + (512*1+1)
        assert_eq!(c.param_count(), 29 * 512 + 512 + 2 * (512 * 512 + 512) + 512 + 1);
        assert_eq!(c.param_count(), 541_185);
    }

    #[test]
    fn zero_observation_maps_to_zero_action_for_every_body() {
        // fresh biases are zero, so a zero input propagates to tanh(0) = 0
        for id in ArchId::all() {
            let a = build_actor(id, id.obs_width(), false, &mut rng(3)).unwrap();
            let out = a.det_infer(&Mat::zeros(2, id.obs_width())).unwrap();
            assert_eq!(out.data(), &[0.0; 6], "architecture {id}");
        }
    }

    #[test]
    fn actions_stay_strictly_bounded() {
        let mut r = rng(4);
        for id in ArchId::all() {
            let mut a = build_actor(id, id.obs_width(), false, &mut r).unwrap();
            randomize_params(&mut a.params, &mut r, 0.5);
            let obs = random_obs(&mut r, 3, id.obs_width());
            let out = a.det_infer(&obs).unwrap();
            // tanh saturates to exactly 1.0 in f64 once the head input passes ~19
            assert!(out.data().iter().all(|v| v.abs() <= 1.0), "architecture {id}");
        }
    }

    #[test]
    fn hidden_activations_are_relu_and_output_is_tanh() {
        for id in ArchId::all() {
            let a = build_actor(id, id.obs_width(), false, &mut rng(5)).unwrap();
            let kinds = a.layer_kinds();
            assert_eq!(*kinds.last().unwrap(), LayerKind::Tanh, "architecture {id}");
            for k in &kinds[..kinds.len() - 1] {
                assert_ne!(*k, LayerKind::Tanh, "{id} has a tanh before the output");
            }
            assert!(kinds.contains(&LayerKind::Relu), "{id} lost its relu stages");
        }
    }

    #[test]
    fn observation_width_is_enforced() {
        assert!(build_actor(ArchId::Conv, 26, false, &mut rng(6)).is_err());
        assert!(build_actor(ArchId::Mlp2, 276, false, &mut rng(6)).is_err());
        let a = build_actor(ArchId::Mlp2, 26, false, &mut rng(6)).unwrap();
        assert!(a.det_infer(&Mat::zeros(1, 27)).is_err());
    }

    #[test]
    fn builds_are_deterministic_in_the_seed() {
        for id in [ArchId::Mlp2, ArchId::Lstm, ArchId::Conv] {
            let a = build_actor(id, id.obs_width(), true, &mut rng(7)).unwrap();
            let b = build_actor(id, id.obs_width(), true, &mut rng(7)).unwrap();
            assert_eq!(a.params.value(), b.params.value(), "architecture {id}");
        }
    }

    #[test]
    fn stochastic_heads_share_the_trunk_and_disagree_at_the_top() {
        let mut r = rng(8);
        let mut a = build_actor(ArchId::Mlp2, 26, true, &mut r).unwrap();
        randomize_params(&mut a.params, &mut r, 0.4);
        let obs = random_obs(&mut r, 2, 26);
        let (mean, log_std) = a.gauss_infer(&obs).unwrap();
        assert_eq!(mean.rows(), 2);
        assert_eq!(mean.cols(), ACTION_DIM);
        assert_eq!(log_std.cols(), ACTION_DIM);
        assert_ne!(mean.data(), log_std.data());
        // deterministic evaluation squashes the mean head
        let det = a.det_infer(&obs).unwrap();
        for (d, m) in det.data().iter().zip(mean.data()) {
            assert!((d - m.tanh()).abs() < 1e-15);
        }
    }

    /// Finite-difference probe of the full composite actor: loss is the inner
    /// product of the output with a fixed upstream matrix.
    fn check_actor_grads(id: ArchId, stochastic: bool, seed: u64) {
        let mut r = rng(seed);
        let mut actor = build_actor(id, id.obs_width(), stochastic, &mut r).unwrap();
        randomize_params(&mut actor.params, &mut r, 0.3);
        let obs = random_obs(&mut r, 2, id.obs_width());
        let u = random_obs(&mut r, 2, ACTION_DIM);
        let u2 = random_obs(&mut r, 2, ACTION_DIM);

        actor.params.zero_grad();
        let mut tape = ActorTape::new();
        if stochastic {
            let _ = actor.gauss_forward(&obs, &mut tape).unwrap();
            actor.gauss_backward(&tape, &u, &u2);
        } else {
            let _ = actor.det_forward(&obs, &mut tape).unwrap();
            actor.det_backward(&tape, &u);
        }
        let analytic = actor.params.grad().to_vec();
        actor.params.zero_grad();

        let shadow = actor.clone();
        let coords = sample_coords(actor.params.len(), 48, &mut r);
        let report = fd_vs_analytic(&mut actor.params, &coords, &analytic, FD_EPS, |arena| {
            if stochastic {
                let (m, ls) = shadow.gauss_infer_with(arena.value(), &obs).unwrap();
                let s1: f64 = m.data().iter().zip(u.data()).map(|(a, b)| a * b).sum();
                let s2: f64 = ls.data().iter().zip(u2.data()).map(|(a, b)| a * b).sum();
                s1 + s2
            } else {
                let out = shadow.det_infer_with(arena.value(), &obs).unwrap();
                out.data().iter().zip(u.data()).map(|(a, b)| a * b).sum()
            }
        });
        assert!(
            report.max_rel_err < 1e-4,
            "{id} stochastic={stochastic}: rel err {} at {}",
            report.max_rel_err,
            report.worst_coord
        );
    }

    #[test]
    fn composite_gradients_match_finite_differences() {
        check_actor_grads(ArchId::Conv, false, 100);
        check_actor_grads(ArchId::Conv, true, 101);
        check_actor_grads(ArchId::Lstm, false, 102);
        check_actor_grads(ArchId::Mlp2, true, 103);
    }
}
