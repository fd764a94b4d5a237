//! A sequential layer stack over one parameter arena, with tape-based
//! backward. Composite heads (the stochastic actor's mean/log-std pair, the
//! conv actor's feature join) are built from the same pieces in `arch`.

use crate::error::{Error, Result};
use crate::nn::layer::{Layer, LayerCache};
use crate::nn::mat::Mat;
use crate::nn::params::ParamArena;

/// Per-forward-pass cache; one entry per layer in order. Owning the tape at
/// the call site (rather than inside the network) is what makes a backward
/// pass without a prior forward unrepresentable.
#[derive(Debug, Default)]
pub struct Tape {
    pub caches: Vec<LayerCache>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { caches: Vec::new() }
    }
}

#[derive(Debug, Clone)]
pub struct Network {
    pub params: ParamArena,
    layers: Vec<Layer>,
    in_dim: usize,
    out_dim: usize,
}

impl Network {
    /// Wire a validated stack: each layer must accept its predecessor's
    /// output width.
    pub fn from_layers(params: ParamArena, layers: Vec<Layer>, in_dim: usize) -> Result<Self> {
        let mut width = in_dim;
        for (i, layer) in layers.iter().enumerate() {
            width = layer.out_width(width).map_err(|expected| Error::Shape {
                layer: i,
                expected,
                got: width,
            })?;
        }
        Ok(Network {
            params,
            layers,
            in_dim,
            out_dim: width,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    fn check_input(&self, x: &Mat) -> Result<()> {
        if x.cols() != self.in_dim {
            return Err(Error::Shape {
                layer: 0,
                expected: self.in_dim,
                got: x.cols(),
            });
        }
        Ok(())
    }

    /// Forward pass without caching; usable concurrently from many threads.
    pub fn infer(&self, x: &Mat) -> Result<Mat> {
        self.check_input(x)?;
        let pv = self.params.value();
        let mut h = x.clone();
        for layer in &self.layers {
            h = layer.forward(pv, &h, None);
        }
        Ok(h)
    }

    /// Forward pass recording intermediates for [`Network::backward`].
    pub fn forward(&self, x: &Mat, tape: &mut Tape) -> Result<Mat> {
        self.check_input(x)?;
        tape.caches.clear();
        let pv = self.params.value();
        let mut h = x.clone();
        for layer in &self.layers {
            h = layer.forward(pv, &h, Some(&mut tape.caches));
        }
        Ok(h)
    }

    /// Accumulate parameter gradients for upstream gradient `dy`; returns the
    /// input gradient. `tape` must come from a forward pass of this network.
    pub fn backward(&mut self, tape: &Tape, dy: &Mat) -> Mat {
        assert_eq!(
            tape.caches.len(),
            self.layers.len(),
            "tape does not match this network's forward pass"
        );
        let (pv, grads) = self.params.value_and_grad_mut();
        let mut d = dy.clone();
        for (layer, cache) in self.layers.iter().zip(&tape.caches).rev() {
            d = layer.backward(pv, grads, cache, &d);
        }
        d
    }

    /// Input gradient only; parameter gradients stay untouched (the critic is
    /// frozen while the actor ascends it).
    pub fn backward_input(&self, tape: &Tape, dy: &Mat) -> Mat {
        assert_eq!(tape.caches.len(), self.layers.len());
        let pv = self.params.value();
        let mut d = dy.clone();
        for (layer, cache) in self.layers.iter().zip(&tape.caches).rev() {
            d = layer.backward_input(pv, cache, &d);
        }
        d
    }
}
