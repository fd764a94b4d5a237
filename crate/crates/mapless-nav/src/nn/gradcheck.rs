//! Central finite-difference verification of analytic gradients.
//!
//! The checker perturbs individual parameter coordinates of an arena and
//! re-evaluates a caller-supplied scalar loss, so it is independent of the
//! backward-pass code it verifies; any loss expressible as a closure over
//! the arena (plain networks, full agent updates with frozen noise) can be
//! checked the same way.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::nn::mat::Mat;
use crate::nn::network::{Network, Tape};
use crate::nn::params::ParamArena;

/// Default perturbation for central differences.
pub const FD_EPS: f64 = 1e-5;

/// Worst observed deviation between analytic and finite-difference gradients.
#[derive(Debug, Clone)]
pub struct GradReport {
    pub max_rel_err: f64,
    pub worst_coord: usize,
    pub checked: usize,
}

/// |a−f| relative to the larger magnitude, floored so that finite-difference
/// noise on near-zero gradients is compared on an absolute scale.
fn rel_err(analytic: f64, fd: f64) -> f64 {
    (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-2)
}

/// Overwrite every parameter (weights and biases) with uniform noise.
/// Gradient-check instances need this: freshly built networks have all-zero
/// biases, which parks relu pre-activations exactly on the kink where the
/// two-sided difference quotient is meaningless.
pub fn randomize_params<R: Rng>(arena: &mut ParamArena, rng: &mut R, scale: f64) {
    for v in arena.value_mut() {
        *v = rng.gen_range(-scale..scale);
    }
}

/// Pick up to `max_coords` distinct coordinate indices from `0..len`.
pub fn sample_coords<R: Rng>(len: usize, max_coords: usize, rng: &mut R) -> Vec<usize> {
    if len <= max_coords {
        return (0..len).collect();
    }
    let mut all: Vec<usize> = (0..len).collect();
    all.shuffle(rng);
    all.truncate(max_coords);
    all.sort_unstable();
    all
}

/// Compare `analytic` (a full-length gradient vector for `arena`) against
/// central finite differences of `loss` at the selected coordinates.
pub fn fd_vs_analytic<F>(
    arena: &mut ParamArena,
    coords: &[usize],
    analytic: &[f64],
    eps: f64,
    mut loss: F,
) -> GradReport
where
    F: FnMut(&ParamArena) -> f64,
{
    assert_eq!(analytic.len(), arena.len());
    let mut worst = GradReport {
        max_rel_err: 0.0,
        worst_coord: 0,
        checked: coords.len(),
    };
    for &c in coords {
        let old = arena.value()[c];
        arena.value_mut()[c] = old + eps;
        let lp = loss(arena);
        arena.value_mut()[c] = old - eps;
        let lm = loss(arena);
        arena.value_mut()[c] = old;
        let fd = (lp - lm) / (2.0 * eps);
        let e = rel_err(analytic[c], fd);
        if e > worst.max_rel_err {
            worst.max_rel_err = e;
            worst.worst_coord = c;
        }
    }
    worst
}

/// Convenience wrapper for a plain sequential network: the scalar loss is
/// the inner product of the output with a fixed `upstream` matrix, so the
/// analytic gradient is exactly one backward pass with `upstream` as dy.
pub fn check_network<R: Rng>(
    net: &mut Network,
    x: &Mat,
    upstream: &Mat,
    max_coords: usize,
    rng: &mut R,
) -> GradReport {
    net.params.zero_grad();
    let mut tape = Tape::new();
    net.forward(x, &mut tape).expect("gradcheck forward");
    net.backward(&tape, upstream);
    let analytic = net.params.grad().to_vec();
    net.params.zero_grad();
    let coords = sample_coords(net.params.len(), max_coords, rng);
    let ux = upstream.clone();
    let xx = x.clone();
    // Rebuild the loss from scratch on each probe so the check shares no
    // cached state with the backward pass under test.
    let layers: Vec<_> = net.layers().to_vec();
    let in_dim = net.in_dim();
    fd_vs_analytic(&mut net.params, &coords, &analytic, FD_EPS, |arena| {
        let pv = arena.value();
        let mut h = xx.clone();
        for layer in &layers {
            h = layer.forward(pv, &h, None);
        }
        debug_assert_eq!(h.cols(), {
            let mut w = in_dim;
            for l in &layers {
                w = l.out_width(w).unwrap();
            }
            w
        });
        h.data().iter().zip(ux.data()).map(|(a, b)| a * b).sum()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layer::{Conv1d, Dense, Layer, LstmCell};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
        Mat::from_vec(
            rows,
            cols,
            (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
    }

    #[test]
    fn three_layer_mlp_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        for trial in 0..10 {
            let mut arena = ParamArena::new();
            let l0 = Dense::new(&mut arena, "h0", 4, 6, &mut rng);
            let l1 = Dense::new(&mut arena, "h1", 6, 5, &mut rng);
            let l2 = Dense::new(&mut arena, "out", 5, 3, &mut rng);
            let mut net = Network::from_layers(
                arena,
                vec![
                    Layer::Dense(l0),
                    Layer::Relu,
                    Layer::Dense(l1),
                    Layer::Relu,
                    Layer::Dense(l2),
                    Layer::Tanh,
                ],
                4,
            )
            .unwrap();
            randomize_params(&mut net.params, &mut rng, 0.6);
            let x = random_mat(&mut rng, 3, 4);
            let u = random_mat(&mut rng, 3, 3);
            let report = check_network(&mut net, &x, &u, usize::MAX, &mut rng);
            assert!(
                report.max_rel_err < 1e-4,
                "trial {trial}: rel err {} at coord {}",
                report.max_rel_err,
                report.worst_coord
            );
        }
    }

    #[test]
    fn conv_stack_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        for trial in 0..10 {
            let mut arena = ParamArena::new();
            let c0 = Conv1d::new(&mut arena, "c0", 1, 12, 3, 5, 2, &mut rng).unwrap();
            let w1 = c0.c_out * c0.l_out();
            let c1 = Conv1d::new(&mut arena, "c1", 3, c0.l_out(), 2, 3, 2, &mut rng).unwrap();
            let w2 = c1.c_out * c1.l_out();
            let d = Dense::new(&mut arena, "out", w2, 2, &mut rng);
            let mut net = Network::from_layers(
                arena,
                vec![
                    Layer::Conv1d(c0),
                    Layer::Relu,
                    Layer::Conv1d(c1),
                    Layer::Relu,
                    Layer::Flatten { width: w2 },
                    Layer::Dense(d),
                    Layer::Tanh,
                ],
                12,
            )
            .unwrap();
            let _ = w1;
            randomize_params(&mut net.params, &mut rng, 0.6);
            let x = random_mat(&mut rng, 2, 12);
            let u = random_mat(&mut rng, 2, 2);
            let report = check_network(&mut net, &x, &u, usize::MAX, &mut rng);
            assert!(
                report.max_rel_err < 1e-4,
                "trial {trial}: rel err {}",
                report.max_rel_err
            );
        }
    }

    #[test]
    fn lstm_stack_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(102);
        for trial in 0..10 {
            let mut arena = ParamArena::new();
            let cell = LstmCell::new(&mut arena, "l", 5, 4, &mut rng);
            let d = Dense::new(&mut arena, "out", 4, 2, &mut rng);
            let mut net = Network::from_layers(
                arena,
                vec![Layer::Lstm(cell), Layer::Dense(d), Layer::Tanh],
                5,
            )
            .unwrap();
            randomize_params(&mut net.params, &mut rng, 0.6);
            let x = random_mat(&mut rng, 3, 5);
            let u = random_mat(&mut rng, 3, 2);
            let report = check_network(&mut net, &x, &u, usize::MAX, &mut rng);
            assert!(
                report.max_rel_err < 1e-4,
                "trial {trial}: rel err {}",
                report.max_rel_err
            );
        }
    }

    #[test]
    fn lstm_cell_with_live_state_matches_finite_differences() {
        // Exercises the recurrent weights, which the zero-state layer mode
        // never touches: gradients flow through h_prev and c_prev.
        let mut rng = ChaCha8Rng::seed_from_u64(103);
        for trial in 0..10 {
            let mut arena = ParamArena::new();
            let cell = LstmCell::new(&mut arena, "l", 4, 3, &mut rng);
            randomize_params(&mut arena, &mut rng, 0.6);
            let x = random_mat(&mut rng, 2, 4);
            let h0 = random_mat(&mut rng, 2, 3);
            let c0 = random_mat(&mut rng, 2, 3);
            let uh = random_mat(&mut rng, 2, 3);
            let uc = random_mat(&mut rng, 2, 3);

            arena.zero_grad();
            let mut caches = Vec::new();
            cell.step(arena.value(), &x, &h0, &c0, Some(&mut caches));
            {
                let (pv, grads) = arena.value_and_grad_mut();
                cell.step_backward(pv, grads, &caches[0], &uh, Some(&uc));
            }
            let analytic = arena.grad().to_vec();
            arena.zero_grad();
            let coords: Vec<usize> = (0..arena.len()).collect();
            let report = fd_vs_analytic(&mut arena, &coords, &analytic, FD_EPS, |a| {
                let (h1, c1) = cell.step(a.value(), &x, &h0, &c0, None);
                let sh: f64 = h1.data().iter().zip(uh.data()).map(|(p, q)| p * q).sum();
                let sc: f64 = c1.data().iter().zip(uc.data()).map(|(p, q)| p * q).sum();
                sh + sc
            });
            assert!(
                report.max_rel_err < 1e-4,
                "trial {trial}: rel err {}",
                report.max_rel_err
            );
        }
    }

    #[test]
    fn single_layer_kinds_match_finite_differences() {
        // dense, relu, tanh each in isolation (wrapped to keep a scalar loss).
        let mut rng = ChaCha8Rng::seed_from_u64(104);
        for trial in 0..10 {
            let mut arena = ParamArena::new();
            let d = Dense::new(&mut arena, "d", 6, 4, &mut rng);
            randomize_params(&mut arena, &mut rng, 0.6);
            for wrap in [Layer::Relu, Layer::Tanh] {
                let mut net = Network::from_layers(
                    arena.clone(),
                    vec![Layer::Dense(d.clone()), wrap],
                    6,
                )
                .unwrap();
                let x = random_mat(&mut rng, 2, 6);
                let u = random_mat(&mut rng, 2, 4);
                let report = check_network(&mut net, &x, &u, usize::MAX, &mut rng);
                assert!(
                    report.max_rel_err < 1e-4,
                    "trial {trial}: rel err {}",
                    report.max_rel_err
                );
            }
        }
    }

    #[test]
    fn backward_input_matches_full_backward_input_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(105);
        let mut arena = ParamArena::new();
        let l0 = Dense::new(&mut arena, "h0", 5, 7, &mut rng);
        let l1 = Dense::new(&mut arena, "out", 7, 1, &mut rng);
        let mut net = Network::from_layers(
            arena,
            vec![Layer::Dense(l0), Layer::Relu, Layer::Dense(l1)],
            5,
        )
        .unwrap();
        let x = random_mat(&mut rng, 4, 5);
        let u = random_mat(&mut rng, 4, 1);
        let mut tape = Tape::new();
        net.forward(&x, &mut tape).unwrap();
        let dx_full = net.backward(&tape, &u);
        let grads_after = net.params.grad().to_vec();
        let dx_input_only = net.backward_input(&tape, &u);
        assert_eq!(dx_full.data(), dx_input_only.data());
        assert_eq!(net.params.grad(), &grads_after[..], "input-only backward must not touch grads");
        assert!(net.params.grad().iter().any(|&g| g != 0.0));
    }
}
