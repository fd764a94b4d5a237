//! Acceptance battery. Each test verifies one gate and prints a single
//! PASS line with the pinned tolerance; the harness adds its own ok/FAILED
//! line per gate. Gates that train policies drive the release binary and
//! cache finished artifacts under the target tmp dir, so only the first run
//! pays the training cost.

use std::time::Instant;

use mapless_nav::agents::{
    squashed_log_prob, Batch, Ddpg, Hypers, OuNoise, ReplayBuffer, Sac, Transition,
};
use mapless_nav::arch::{build_critic_custom, build_mlp_actor, ACTION_DIM};
use mapless_nav::env::{
    lidar_scan, reward, RewardParams, Scenario, Terminal, BEAM_COUNT, BEAM_STEP, MAX_RANGE,
    PLANAR_Z, SCAN_HALF_ANGLE,
};
use mapless_nav::nn::gradcheck::{check_network, fd_vs_analytic, randomize_params};
use mapless_nav::nn::layer::{Conv1d, Dense, Layer, LstmCell};
use mapless_nav::nn::params::ParamArena;
use mapless_nav::nn::{Mat, Network};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GRAD_REL_TOL: f64 = 1e-4;
const GRAD_INSTANCES: usize = 10;
const LIDAR_TOL: f64 = 1e-9;
const LIDAR_POSES: usize = 1000;
const OU_STEPS: usize = 1_000_000;
const OU_MEAN_TOL: f64 = 0.01;
const OU_VAR_REL_TOL: f64 = 0.05;
const LOGPROB_TOL: f64 = 1e-6;
const LOGPROB_TRIPLES: usize = 100;
const CHI2_MIN_P: f64 = 0.01;
const CHI2_DRAWS: usize = 1_000_000;

fn rmat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    Mat::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

fn random_batch(rng: &mut ChaCha8Rng, n: usize, obs_len: usize) -> Batch {
    let transitions: Vec<Transition> = (0..n)
        .map(|_| Transition {
            obs: (0..obs_len).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            action: [
                rng.gen_range(-0.9..0.9),
                rng.gen_range(-0.9..0.9),
                rng.gen_range(-0.9..0.9),
            ],
            reward: rng.gen_range(-1.0..1.0),
            next_obs: (0..obs_len).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            done: if rng.gen_bool(0.2) { 1.0 } else { 0.0 },
        })
        .collect();
    Batch::from_transitions(&transitions)
}

/// Gate 1: analytic gradients match central finite differences for every
/// layer kind and for the full learner losses on single-hidden-unit networks.
#[test]
fn c01_gradients_match_finite_differences() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(201);
    let mut worst: f64 = 0.0;

    // Dense, relu, tanh: a dense layer alone and dense layers under each
    // nonlinearity.
    for _ in 0..GRAD_INSTANCES {
        let mut arena = ParamArena::new();
        let d = Dense::new(&mut arena, "d", 6, 4, &mut rng);
        randomize_params(&mut arena, &mut rng, 0.6);
        for wrap in [None, Some(Layer::Relu), Some(Layer::Tanh)] {
            let mut layers = vec![Layer::Dense(d.clone())];
            layers.extend(wrap);
            let mut net = Network::from_layers(arena.clone(), layers, 6).unwrap();
            let x = rmat(&mut rng, 3, 6);
            let u = rmat(&mut rng, 3, 4);
            let rep = check_network(&mut net, &x, &u, usize::MAX, &mut rng);
            worst = worst.max(rep.max_rel_err);
        }
    }

    // Conv1d stack.
    for _ in 0..GRAD_INSTANCES {
        let mut arena = ParamArena::new();
        let c0 = Conv1d::new(&mut arena, "c0", 1, 12, 3, 5, 2, &mut rng).unwrap();
        let flat = 3 * c0.l_out();
        let d = Dense::new(&mut arena, "out", flat, 2, &mut rng);
        let mut net = Network::from_layers(
            arena,
            vec![
                Layer::Conv1d(c0),
                Layer::Relu,
                Layer::Flatten { width: flat },
                Layer::Dense(d),
            ],
            12,
        )
        .unwrap();
        randomize_params(&mut net.params, &mut rng, 0.6);
        let x = rmat(&mut rng, 2, 12);
        let u = rmat(&mut rng, 2, 2);
        let rep = check_network(&mut net, &x, &u, usize::MAX, &mut rng);
        worst = worst.max(rep.max_rel_err);
    }

    // Lstm stack.
    for _ in 0..GRAD_INSTANCES {
        let mut arena = ParamArena::new();
        let cell = LstmCell::new(&mut arena, "l", 5, 4, &mut rng);
        let d = Dense::new(&mut arena, "out", 4, 2, &mut rng);
        let mut net =
            Network::from_layers(arena, vec![Layer::Lstm(cell), Layer::Dense(d)], 5).unwrap();
        randomize_params(&mut net.params, &mut rng, 0.6);
        let x = rmat(&mut rng, 3, 5);
        let u = rmat(&mut rng, 3, 2);
        let rep = check_network(&mut net, &x, &u, usize::MAX, &mut rng);
        worst = worst.max(rep.max_rel_err);
    }

    // Full deterministic-learner losses on 1-hidden-unit networks. The probe
    // clone re-evaluates the public loss functions, so the finite-difference
    // side shares no code with the backward passes under test.
    let obs_len = 5;
    for _ in 0..GRAD_INSTANCES {
        let actor = build_mlp_actor(obs_len, &[1], false, &mut rng);
        let critic = build_critic_custom(obs_len, &[1], &mut rng);
        let mut agent = Ddpg::from_parts(actor, critic, Hypers::default()).unwrap();
        randomize_params(&mut agent.actor.params, &mut rng, 0.6);
        randomize_params(&mut agent.critic.params, &mut rng, 0.6);
        let batch = random_batch(&mut rng, 4, obs_len);
        let targets: Vec<f64> = (0..batch.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();

        agent.accumulate_critic_grads(&batch, &targets).unwrap();
        let analytic = agent.critic.params.grad().to_vec();
        let coords: Vec<usize> = (0..analytic.len()).collect();
        let probe = agent.clone();
        let rep = fd_vs_analytic(&mut agent.critic.params, &coords, &analytic, 1e-5, |arena| {
            let mut p = probe.clone();
            p.critic.params.value_mut().copy_from_slice(arena.value());
            p.critic_loss(&batch, &targets).unwrap()
        });
        worst = worst.max(rep.max_rel_err);

        agent.accumulate_actor_grads(&batch).unwrap();
        let analytic = agent.actor.params.grad().to_vec();
        let coords: Vec<usize> = (0..analytic.len()).collect();
        let probe = agent.clone();
        let rep = fd_vs_analytic(&mut agent.actor.params, &coords, &analytic, 1e-5, |arena| {
            let mut p = probe.clone();
            p.actor.params.value_mut().copy_from_slice(arena.value());
            p.actor_loss(&batch).unwrap()
        });
        worst = worst.max(rep.max_rel_err);
    }

    // Full entropy-regularized-learner losses on 1-hidden-unit networks with
    // frozen reparameterization noise.
    for _ in 0..GRAD_INSTANCES {
        let actor = build_mlp_actor(obs_len, &[1], true, &mut rng);
        let q1 = build_critic_custom(obs_len, &[1], &mut rng);
        let q2 = build_critic_custom(obs_len, &[1], &mut rng);
        let mut agent = Sac::from_parts(actor, q1, q2, Hypers::default()).unwrap();
        randomize_params(&mut agent.actor.params, &mut rng, 0.6);
        randomize_params(&mut agent.q1.params, &mut rng, 0.6);
        randomize_params(&mut agent.q2.params, &mut rng, 0.6);
        let batch = random_batch(&mut rng, 4, obs_len);
        let targets: Vec<f64> = (0..batch.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let xi = rmat(&mut rng, batch.len(), ACTION_DIM);

        agent.accumulate_critic_grads(&batch, &targets).unwrap();
        let probe = agent.clone();
        for pick in 0..2 {
            let arena =
                if pick == 0 { &mut agent.q1.params } else { &mut agent.q2.params };
            let analytic = arena.grad().to_vec();
            let coords: Vec<usize> = (0..analytic.len()).collect();
            let rep = fd_vs_analytic(arena, &coords, &analytic, 1e-5, |a| {
                let mut p = probe.clone();
                let dst =
                    if pick == 0 { &mut p.q1.params } else { &mut p.q2.params };
                dst.value_mut().copy_from_slice(a.value());
                p.critic_loss(&batch, &targets).unwrap()
            });
            worst = worst.max(rep.max_rel_err);
        }

        agent.accumulate_actor_grads(&batch, &xi).unwrap();
        let analytic = agent.actor.params.grad().to_vec();
        let coords: Vec<usize> = (0..analytic.len()).collect();
        let probe = agent.clone();
        let rep = fd_vs_analytic(&mut agent.actor.params, &coords, &analytic, 1e-5, |arena| {
            let mut p = probe.clone();
            p.actor.params.value_mut().copy_from_slice(arena.value());
            p.actor_loss(&batch, &xi).unwrap().0
        });
        worst = worst.max(rep.max_rel_err);
    }

    let secs = started.elapsed().as_secs_f64();
    assert!(worst < GRAD_REL_TOL, "worst relative error {worst}");
    assert!(secs < 60.0, "gradient battery took {secs:.1} s");
    println!("c01 gradient-check: PASS (max rel err {worst:.2e} < {GRAD_REL_TOL:.0e}, {secs:.1} s)");
}

/// Gate 2: every beam of the ray-cast scanner matches a closed-form
/// ray-rectangle intersection in the empty square room.
#[test]
fn c02_lidar_matches_closed_form() {
    let started = Instant::now();
    let room = Scenario::one();
    assert!(room.obstacles.is_empty(), "the first room must be empty");
    let half_x = room.bounds.max[0];
    let half_y = room.bounds.max[1];
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst: f64 = 0.0;
    for _ in 0..LIDAR_POSES {
        let pos = [rng.gen_range(-4.9..4.9), rng.gen_range(-4.9..4.9), PLANAR_Z];
        let yaw = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        let scan = lidar_scan(pos, yaw, &room);
        assert_eq!(scan.len(), BEAM_COUNT);
        for (i, &got) in scan.iter().enumerate() {
            let angle = yaw - SCAN_HALF_ANGLE + i as f64 * BEAM_STEP;
            // Closed form: nearest non-negative hit among the four wall lines
            // x = +/-half_x, y = +/-half_y.
            let (s, c) = angle.sin_cos();
            let mut want = f64::INFINITY;
            for (p, d, bound) in [
                (pos[0], c, half_x),
                (pos[0], c, -half_x),
                (pos[1], s, half_y),
                (pos[1], s, -half_y),
            ] {
                if d != 0.0 {
                    let t = (bound - p) / d;
                    if t >= 0.0 && t < want {
                        want = t;
                    }
                }
            }
            want = want.min(MAX_RANGE);
            let err = (got - want).abs();
            if err > worst {
                worst = err;
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    assert!(worst < LIDAR_TOL, "worst beam error {worst:e}");
    assert!(secs < 10.0, "lidar battery took {secs:.1} s");
    println!(
        "c02 lidar-oracle: PASS ({LIDAR_POSES} poses x {BEAM_COUNT} beams, max err {worst:.1e} < {LIDAR_TOL:.0e}, {secs:.1} s)"
    );
}

/// Gate 3: the four payoff cases return exactly the pinned values.
#[test]
fn c03_reward_table_exact() {
    let p = RewardParams::default();
    assert_eq!(p.c_d, 0.5);
    assert_eq!(p.c_o, 0.5);
    assert_eq!(reward(0.49, 2.0, 7, &p), (100.0, Terminal::Arrived));
    assert_eq!(reward(2.0, 0.49, 7, &p), (-10.0, Terminal::Collided));
    assert_eq!(reward(2.0, 2.0, 500, &p), (-10.0, Terminal::Timeout));
    assert_eq!(reward(2.0, 2.0, 499, &p), (0.0, Terminal::None));
    println!("c03 reward-table: PASS (+100 arrived, -10 collided, -10 timeout@500, 0 none)");
}

/// Gate 4: the exploration noise has the first-order autoregressive
/// stationary distribution its parameters imply.
#[test]
fn c04_ou_noise_statistics() {
    let started = Instant::now();
    let mut noise = OuNoise::standard();
    assert_eq!((noise.theta, noise.sigma, noise.mu, noise.dt), (0.15, 0.2, 0.0, 1.0));
    let mut rng = ChaCha8Rng::seed_from_u64(204);
    // Discard a burn-in so the sample comes from the stationary regime.
    for _ in 0..1000 {
        noise.step(&mut rng);
    }
    let mut sum = [0.0f64; 3];
    let mut sumsq = [0.0f64; 3];
    for _ in 0..OU_STEPS {
        let x = noise.step(&mut rng);
        for (j, v) in x.iter().enumerate() {
            sum[j] += v;
            sumsq[j] += v * v;
        }
    }
    let n = OU_STEPS as f64;
    // x' = (1 - theta dt) x + sigma sqrt(dt) z  =>  var = sigma^2 dt / (1 - (1 - theta dt)^2).
    let phi = 1.0 - noise.theta * noise.dt;
    let var_want = noise.sigma * noise.sigma * noise.dt / (1.0 - phi * phi);
    let mut worst_mean: f64 = 0.0;
    let mut worst_var_rel: f64 = 0.0;
    for j in 0..3 {
        let mean = sum[j] / n;
        let var = sumsq[j] / n - mean * mean;
        worst_mean = worst_mean.max(mean.abs());
        worst_var_rel = worst_var_rel.max((var - var_want).abs() / var_want);
    }
    let secs = started.elapsed().as_secs_f64();
    assert!(worst_mean < OU_MEAN_TOL, "mean drift {worst_mean}");
    assert!(worst_var_rel < OU_VAR_REL_TOL, "variance off by {worst_var_rel:.3}");
    assert!(secs < 5.0, "noise battery took {secs:.1} s");
    println!(
        "c04 ou-statistics: PASS (1e6 steps, |mean| {worst_mean:.4} < {OU_MEAN_TOL}, var within {:.1}% of {var_want:.4}, {secs:.1} s)",
        worst_var_rel * 100.0
    );
}

/// Gate 5: the squashed-Gaussian log-density matches a change-of-variables
/// oracle whose tanh Jacobian is measured numerically.
#[test]
fn c05_squashed_log_prob_matches_numeric_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(205);
    let mut worst: f64 = 0.0;
    for _ in 0..LOGPROB_TRIPLES {
        let mean: f64 = rng.gen_range(-2.0..2.0);
        let log_std: f64 = rng.gen_range(-2.0..0.5);
        let xi: f64 = rng.gen_range(-3.0..3.0);
        let u = mean + log_std.exp() * xi;
        let got = squashed_log_prob(&[mean], &[log_std], &[u]);

        // Oracle: Gaussian density of u minus the log of the numerically
        // measured |d tanh/du|, with the implementation's documented epsilon
        // pad inside the logarithm.
        let h = 1e-5;
        let jac = ((u + h).tanh() - (u - h).tanh()) / (2.0 * h);
        let z = (u - mean) / log_std.exp();
        let want = -0.5 * z * z
            - log_std
            - 0.5 * (2.0 * std::f64::consts::PI).ln()
            - (jac + mapless_nav::agents::SQUASH_EPS).ln();
        worst = worst.max((got - want).abs());
    }
    assert!(worst < LOGPROB_TOL, "worst log-density error {worst:e}");
    println!(
        "c05 squashed-log-prob: PASS ({LOGPROB_TRIPLES} triples, max err {worst:.1e} < {LOGPROB_TOL:.0e})"
    );
}

/// Gate 6: ring eviction is exactly first-in-first-out and index sampling is
/// uniform by a chi-squared test.
#[test]
fn c06_replay_fifo_and_uniformity() {
    // FIFO: logical order after wraparound is exactly the last `cap` pushes,
    // oldest first.
    let cap = 8;
    let mut buf = ReplayBuffer::new(cap, 1);
    for i in 0..11 {
        buf.push(&Transition {
            obs: vec![i as f64],
            action: [0.0; 3],
            reward: i as f64,
            next_obs: vec![i as f64],
            done: 0.0,
        });
    }
    assert_eq!(buf.len(), cap);
    let all: Vec<usize> = (0..cap).collect();
    let batch = buf.gather(&all);
    let want: Vec<f64> = (3..11).map(|i| i as f64).collect();
    assert_eq!(batch.rewards, want, "eviction must drop exactly the oldest pushes");

    // Uniformity: 1e6 index draws over 100 live elements.
    let n_items = 100;
    let mut buf = ReplayBuffer::new(n_items, 1);
    for i in 0..n_items {
        buf.push(&Transition {
            obs: vec![i as f64],
            action: [0.0; 3],
            reward: 0.0,
            next_obs: vec![i as f64],
            done: 0.0,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(206);
    let mut counts = vec![0u64; n_items];
    let per_call = 100;
    for _ in 0..CHI2_DRAWS / per_call {
        for idx in buf.sample_indices(per_call, &mut rng).unwrap() {
            counts[idx] += 1;
        }
    }
    let expected = CHI2_DRAWS as f64 / n_items as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let dist = statrs::distribution::ChiSquared::new((n_items - 1) as f64).unwrap();
    let p = 1.0 - statrs::distribution::ContinuousCDF::cdf(&dist, chi2);
    assert!(p > CHI2_MIN_P, "chi-squared {chi2:.1} gives p = {p:.4}");
    println!(
        "c06 replay-buffer: PASS (FIFO exact; chi2 {chi2:.1} over {} cells, p = {p:.3} > {CHI2_MIN_P})",
        n_items - 1
    );
}

mod learning_gates;

/// Gate 10: an agent that commands zero velocity never succeeds and times
/// out at exactly the step limit in every trial. (A literal all-zero action
/// vector still drifts forward 0.125 m/s under the action scaling, so "does
/// not act" means the zero-velocity command.)
#[test]
fn c10_timeout_arithmetic() {
    use mapless_nav::env::{Mode, ObsMode, DT};
    use mapless_nav::eval::{eval_goal, EvalJob, HoverPolicy};
    let job = EvalJob {
        scenario: Scenario::one(),
        mode: Mode::TwoD,
        obs_mode: ObsMode::Standard,
        trials: 100,
        seed: 210,
        step_limit: 500,
    };
    let summary = eval_goal(&HoverPolicy, &job).unwrap();
    assert_eq!(summary.success_rate, 0.0);
    let want = 500.0 * DT;
    for rec in &summary.records {
        assert_eq!(rec.time_s, want, "trial {} ended at {} s", rec.trial, rec.time_s);
        assert_eq!(rec.terminal, Terminal::Timeout);
    }
    println!(
        "c10 timeout-arithmetic: PASS (100 trials, 0% success, each exactly {want} s)"
    );
}
