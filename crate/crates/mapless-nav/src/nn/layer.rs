//! Network layers. Layers are immutable descriptions holding index ranges
//! into a [`ParamArena`]; forward passes optionally record what backward
//! needs into a caller-owned tape, so inference is `&self` and thread-safe.

use rand::Rng;

use crate::nn::mat::{self, Mat};
use crate::nn::params::ParamArena;

/// Uniform init in [−1/√fan_in, +1/√fan_in].
fn uniform_init<R: Rng>(rng: &mut R, fan_in: usize, len: usize) -> Vec<f64> {
    let lim = 1.0 / (fan_in as f64).sqrt();
    (0..len).map(|_| rng.gen_range(-lim..=lim)).collect()
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn axpy_into(dst: &mut [f64], src: &[f64]) {
    debug_assert_eq!(dst.len(), src.len());
    for (d, s) in dst.iter_mut().zip(src) {
        *d += *s;
    }
}

/// What one layer's forward pass recorded for its backward pass.
#[derive(Debug, Clone)]
pub enum LayerCache {
    Dense {
        x: Mat,
    },
    Relu {
        y: Mat,
    },
    Tanh {
        y: Mat,
    },
    Lstm(Box<LstmCache>),
    Conv {
        cols: Mat,
    },
    Flatten,
}

#[derive(Debug, Clone)]
pub struct LstmCache {
    x: Mat,
    h_prev: Mat,
    c_prev: Mat,
    /// Activated gates [B, 4H] in i|f|g|o block order.
    gates: Mat,
    tanh_c: Mat,
    h_prev_is_zero: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Dense,
    Relu,
    Tanh,
    Lstm,
    Conv1d,
    Flatten,
}

/// Fully connected: y = x·W + b, W stored [in, out].
#[derive(Debug, Clone)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    w: usize,
    b: usize,
}

impl Dense {
    pub fn new<R: Rng>(
        arena: &mut ParamArena,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        rng: &mut R,
    ) -> Self {
        let w = arena.push(
            format!("{name}.w"),
            vec![in_dim, out_dim],
            uniform_init(rng, in_dim, in_dim * out_dim),
        );
        let b = arena.push(format!("{name}.b"), vec![out_dim], vec![0.0; out_dim]);
        Dense {
            in_dim,
            out_dim,
            w,
            b,
        }
    }

    fn w<'a>(&self, pv: &'a [f64]) -> &'a [f64] {
        &pv[self.w..self.w + self.in_dim * self.out_dim]
    }

    fn b<'a>(&self, pv: &'a [f64]) -> &'a [f64] {
        &pv[self.b..self.b + self.out_dim]
    }

    pub fn forward(&self, pv: &[f64], x: &Mat, tape: Option<&mut Vec<LayerCache>>) -> Mat {
        let y = mat::gemm(
            x.rows(),
            self.in_dim,
            self.out_dim,
            x.data(),
            self.w(pv),
            self.b(pv),
        );
        if let Some(t) = tape {
            t.push(LayerCache::Dense { x: x.clone() });
        }
        y
    }

    pub fn backward(&self, pv: &[f64], grads: &mut [f64], cache: &LayerCache, dy: &Mat) -> Mat {
        let LayerCache::Dense { x } = cache else {
            unreachable!("dense backward got a foreign cache entry");
        };
        let dw = mat::matmul_at_b(x, dy);
        axpy_into(&mut grads[self.w..self.w + dw.data().len()], dw.data());
        axpy_into(
            &mut grads[self.b..self.b + self.out_dim],
            &mat::col_sums(dy),
        );
        self.backward_input(pv, dy)
    }

    /// dx = dy·Wᵀ without touching parameter gradients (used when a network
    /// is differentiated w.r.t. its inputs only, e.g. the critic during the
    /// policy step).
    pub fn backward_input(&self, pv: &[f64], dy: &Mat) -> Mat {
        let wt = mat::transpose_of(self.w(pv), self.in_dim, self.out_dim);
        mat::matmul(dy, &wt)
    }
}

/// 1-D valid cross-correlation over a channels-major flat layout:
/// row b of the input holds [c_in × l_in], row b of the output [c_out × l_out].
#[derive(Debug, Clone)]
pub struct Conv1d {
    pub c_in: usize,
    pub l_in: usize,
    pub c_out: usize,
    pub kernel: usize,
    pub stride: usize,
    w: usize,
    b: usize,
}

impl Conv1d {
    pub fn new<R: Rng>(
        arena: &mut ParamArena,
        name: &str,
        c_in: usize,
        l_in: usize,
        c_out: usize,
        kernel: usize,
        stride: usize,
        rng: &mut R,
    ) -> crate::Result<Self> {
        if kernel > l_in {
            return Err(crate::Error::config(format!(
                "conv layer '{name}': kernel {kernel} exceeds input length {l_in}"
            )));
        }
        if stride == 0 {
            return Err(crate::Error::config(format!(
                "conv layer '{name}': stride must be positive"
            )));
        }
        let fan_in = c_in * kernel;
        let w = arena.push(
            format!("{name}.w"),
            vec![c_in * kernel, c_out],
            uniform_init(rng, fan_in, fan_in * c_out),
        );
        let b = arena.push(format!("{name}.b"), vec![c_out], vec![0.0; c_out]);
        Ok(Conv1d {
            c_in,
            l_in,
            c_out,
            kernel,
            stride,
            w,
            b,
        })
    }

    pub fn l_out(&self) -> usize {
        (self.l_in - self.kernel) / self.stride + 1
    }

    fn w<'a>(&self, pv: &'a [f64]) -> &'a [f64] {
        &pv[self.w..self.w + self.c_in * self.kernel * self.c_out]
    }

    fn b<'a>(&self, pv: &'a [f64]) -> &'a [f64] {
        &pv[self.b..self.b + self.c_out]
    }

    /// Gather sliding windows into [B·l_out, c_in·kernel] so the convolution
    /// becomes one matrix product.
    fn im2col(&self, x: &Mat) -> Mat {
        let l_out = self.l_out();
        let kw = self.c_in * self.kernel;
        let mut cols = Mat::zeros(x.rows() * l_out, kw);
        for bi in 0..x.rows() {
            let xrow = x.row(bi);
            for l in 0..l_out {
                let dst = cols.row_mut(bi * l_out + l);
                for c in 0..self.c_in {
                    let src = &xrow[c * self.l_in + l * self.stride..];
                    dst[c * self.kernel..(c + 1) * self.kernel]
                        .copy_from_slice(&src[..self.kernel]);
                }
            }
        }
        cols
    }

    pub fn forward(&self, pv: &[f64], x: &Mat, tape: Option<&mut Vec<LayerCache>>) -> Mat {
        let l_out = self.l_out();
        let bsz = x.rows();
        let cols = self.im2col(x);
        let yf = mat::gemm(
            cols.rows(),
            self.c_in * self.kernel,
            self.c_out,
            cols.data(),
            self.w(pv),
            self.b(pv),
        );
        // Scatter [B·l_out, c_out] back to channels-major rows.
        let mut y = Mat::zeros(bsz, self.c_out * l_out);
        for bi in 0..bsz {
            let yrow = y.row_mut(bi);
            for l in 0..l_out {
                let src = yf.row(bi * l_out + l);
                for c in 0..self.c_out {
                    yrow[c * l_out + l] = src[c];
                }
            }
        }
        if let Some(t) = tape {
            t.push(LayerCache::Conv { cols });
        }
        y
    }

    pub fn backward(&self, pv: &[f64], grads: &mut [f64], cache: &LayerCache, dy: &Mat) -> Mat {
        let LayerCache::Conv { cols } = cache else {
            unreachable!("conv backward got a foreign cache entry");
        };
        let l_out = self.l_out();
        let bsz = dy.rows();
        let mut dyf = Mat::zeros(bsz * l_out, self.c_out);
        for bi in 0..bsz {
            let drow = dy.row(bi);
            for l in 0..l_out {
                let dst = dyf.row_mut(bi * l_out + l);
                for c in 0..self.c_out {
                    dst[c] = drow[c * l_out + l];
                }
            }
        }
        let dw = mat::matmul_at_b(cols, &dyf);
        axpy_into(&mut grads[self.w..self.w + dw.data().len()], dw.data());
        axpy_into(&mut grads[self.b..self.b + self.c_out], &mat::col_sums(&dyf));
        let wt = mat::transpose_of(self.w(pv), self.c_in * self.kernel, self.c_out);
        let dcols = mat::matmul(&dyf, &wt);
        // col2im: scatter-add window gradients back onto the input layout.
        let mut dx = Mat::zeros(bsz, self.c_in * self.l_in);
        for bi in 0..bsz {
            let dxrow = dx.row_mut(bi);
            for l in 0..l_out {
                let src = dcols.row(bi * l_out + l);
                for c in 0..self.c_in {
                    let base = c * self.l_in + l * self.stride;
                    for t in 0..self.kernel {
                        dxrow[base + t] += src[c * self.kernel + t];
                    }
                }
            }
        }
        dx
    }
}

/// Standard LSTM cell. Gate blocks in i|f|g|o order; weights W_ih [in, 4H],
/// W_hh [H, 4H], single bias [4H] with the forget block initialized to 1.
#[derive(Debug, Clone)]
pub struct LstmCell {
    pub in_dim: usize,
    pub hidden: usize,
    w_ih: usize,
    w_hh: usize,
    b: usize,
}

impl LstmCell {
    pub fn new<R: Rng>(
        arena: &mut ParamArena,
        name: &str,
        in_dim: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        let w_ih = arena.push(
            format!("{name}.w_ih"),
            vec![in_dim, 4 * hidden],
            uniform_init(rng, in_dim, in_dim * 4 * hidden),
        );
        let w_hh = arena.push(
            format!("{name}.w_hh"),
            vec![hidden, 4 * hidden],
            uniform_init(rng, hidden, hidden * 4 * hidden),
        );
        let mut bias = vec![0.0; 4 * hidden];
        bias[hidden..2 * hidden].fill(1.0);
        let b = arena.push(format!("{name}.b"), vec![4 * hidden], bias);
        LstmCell {
            in_dim,
            hidden,
            w_ih,
            w_hh,
            b,
        }
    }

    fn w_ih<'a>(&self, pv: &'a [f64]) -> &'a [f64] {
        &pv[self.w_ih..self.w_ih + self.in_dim * 4 * self.hidden]
    }

    fn w_hh<'a>(&self, pv: &'a [f64]) -> &'a [f64] {
        &pv[self.w_hh..self.w_hh + self.hidden * 4 * self.hidden]
    }

    fn b<'a>(&self, pv: &'a [f64]) -> &'a [f64] {
        &pv[self.b..self.b + 4 * self.hidden]
    }

    /// One cell step: returns (h', c'). When `tape` is given, records what
    /// [`LstmCell::step_backward`] needs.
    pub fn step(
        &self,
        pv: &[f64],
        x: &Mat,
        h_prev: &Mat,
        c_prev: &Mat,
        tape: Option<&mut Vec<LayerCache>>,
    ) -> (Mat, Mat) {
        let bsz = x.rows();
        let h = self.hidden;
        let mut z = mat::gemm(bsz, self.in_dim, 4 * h, x.data(), self.w_ih(pv), self.b(pv));
        // The recurrent product vanishes exactly for a zero previous state
        // (the stateless single-step mode used inside actors), so skip it.
        let h_prev_is_zero = h_prev.data().iter().all(|&v| v == 0.0);
        if !h_prev_is_zero {
            let zh = mat::gemm(bsz, h, 4 * h, h_prev.data(), self.w_hh(pv), &[]);
            axpy_into(z.data_mut(), zh.data());
        }
        // Activate gates in place.
        for bi in 0..bsz {
            let row = z.row_mut(bi);
            for j in 0..h {
                row[j] = sigmoid(row[j]);
                row[h + j] = sigmoid(row[h + j]);
                row[2 * h + j] = row[2 * h + j].tanh();
                row[3 * h + j] = sigmoid(row[3 * h + j]);
            }
        }
        let gates = z;
        let mut c_new = Mat::zeros(bsz, h);
        let mut tanh_c = Mat::zeros(bsz, h);
        let mut h_new = Mat::zeros(bsz, h);
        for bi in 0..bsz {
            let g = gates.row(bi);
            for j in 0..h {
                let c = g[h + j] * c_prev[(bi, j)] + g[j] * g[2 * h + j];
                c_new[(bi, j)] = c;
                let tc = c.tanh();
                tanh_c[(bi, j)] = tc;
                h_new[(bi, j)] = g[3 * h + j] * tc;
            }
        }
        if let Some(t) = tape {
            t.push(LayerCache::Lstm(Box::new(LstmCache {
                x: x.clone(),
                h_prev: h_prev.clone(),
                c_prev: c_prev.clone(),
                gates,
                tanh_c,
                h_prev_is_zero,
            })));
        }
        (h_new, c_new)
    }

    /// Backward through one step given gradients on h' and (optionally) c'.
    /// Returns (dx, dh_prev, dc_prev).
    pub fn step_backward(
        &self,
        pv: &[f64],
        grads: &mut [f64],
        cache: &LayerCache,
        dh: &Mat,
        dc_ext: Option<&Mat>,
    ) -> (Mat, Mat, Mat) {
        let LayerCache::Lstm(cc) = cache else {
            unreachable!("lstm backward got a foreign cache entry");
        };
        let bsz = dh.rows();
        let h = self.hidden;
        let mut dz = Mat::zeros(bsz, 4 * h);
        let mut dc_prev = Mat::zeros(bsz, h);
        for bi in 0..bsz {
            let g = cc.gates.row(bi);
            for j in 0..h {
                let (i_g, f_g, g_g, o_g) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
                let tc = cc.tanh_c[(bi, j)];
                let dhv = dh[(bi, j)];
                let mut dc = dhv * o_g * (1.0 - tc * tc);
                if let Some(de) = dc_ext {
                    dc += de[(bi, j)];
                }
                let drow = dz.row_mut(bi);
                drow[3 * h + j] = dhv * tc * o_g * (1.0 - o_g);
                drow[h + j] = dc * cc.c_prev[(bi, j)] * f_g * (1.0 - f_g);
                drow[j] = dc * g_g * i_g * (1.0 - i_g);
                drow[2 * h + j] = dc * i_g * (1.0 - g_g * g_g);
                dc_prev[(bi, j)] = dc * f_g;
            }
        }
        let dwih = mat::matmul_at_b(&cc.x, &dz);
        axpy_into(&mut grads[self.w_ih..self.w_ih + dwih.data().len()], dwih.data());
        if !cc.h_prev_is_zero {
            let dwhh = mat::matmul_at_b(&cc.h_prev, &dz);
            axpy_into(&mut grads[self.w_hh..self.w_hh + dwhh.data().len()], dwhh.data());
        }
        axpy_into(&mut grads[self.b..self.b + 4 * h], &mat::col_sums(&dz));
        let wt_ih = mat::transpose_of(self.w_ih(pv), self.in_dim, 4 * h);
        let dx = mat::matmul(&dz, &wt_ih);
        let wt_hh = mat::transpose_of(self.w_hh(pv), h, 4 * h);
        let dh_prev = mat::matmul(&dz, &wt_hh);
        (dx, dh_prev, dc_prev)
    }
}

/// One network layer; activation layers are parameterless.
#[derive(Debug, Clone)]
pub enum Layer {
    Dense(Dense),
    Relu,
    Tanh,
    /// Stateless single-step use: zero initial state on every forward call.
    Lstm(LstmCell),
    Conv1d(Conv1d),
    /// Shape bookkeeping only; channels-major rows are already flat.
    Flatten { width: usize },
}

impl Layer {
    pub fn kind(&self) -> LayerKind {
        match self {
            Layer::Dense(_) => LayerKind::Dense,
            Layer::Relu => LayerKind::Relu,
            Layer::Tanh => LayerKind::Tanh,
            Layer::Lstm(_) => LayerKind::Lstm,
            Layer::Conv1d(_) => LayerKind::Conv1d,
            Layer::Flatten { .. } => LayerKind::Flatten,
        }
    }

    /// Output width for a given input width, or a shape error.
    pub fn out_width(&self, in_width: usize) -> Result<usize, usize> {
        match self {
            Layer::Dense(d) => {
                if in_width == d.in_dim {
                    Ok(d.out_dim)
                } else {
                    Err(d.in_dim)
                }
            }
            Layer::Relu | Layer::Tanh => Ok(in_width),
            Layer::Lstm(l) => {
                if in_width == l.in_dim {
                    Ok(l.hidden)
                } else {
                    Err(l.in_dim)
                }
            }
            Layer::Conv1d(c) => {
                if in_width == c.c_in * c.l_in {
                    Ok(c.c_out * c.l_out())
                } else {
                    Err(c.c_in * c.l_in)
                }
            }
            Layer::Flatten { width } => {
                if in_width == *width {
                    Ok(*width)
                } else {
                    Err(*width)
                }
            }
        }
    }

    pub fn forward(&self, pv: &[f64], x: &Mat, tape: Option<&mut Vec<LayerCache>>) -> Mat {
        match self {
            Layer::Dense(d) => d.forward(pv, x, tape),
            Layer::Relu => {
                let mut y = x.clone();
                for v in y.data_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
                if let Some(t) = tape {
                    t.push(LayerCache::Relu { y: y.clone() });
                }
                y
            }
            Layer::Tanh => {
                let mut y = x.clone();
                for v in y.data_mut() {
                    *v = v.tanh();
                }
                if let Some(t) = tape {
                    t.push(LayerCache::Tanh { y: y.clone() });
                }
                y
            }
            Layer::Lstm(cell) => {
                let zeros_h = Mat::zeros(x.rows(), cell.hidden);
                let zeros_c = Mat::zeros(x.rows(), cell.hidden);
                cell.step(pv, x, &zeros_h, &zeros_c, tape).0
            }
            Layer::Conv1d(c) => c.forward(pv, x, tape),
            Layer::Flatten { .. } => {
                if let Some(t) = tape {
                    t.push(LayerCache::Flatten);
                }
                x.clone()
            }
        }
    }

    pub fn backward(&self, pv: &[f64], grads: &mut [f64], cache: &LayerCache, dy: &Mat) -> Mat {
        match self {
            Layer::Dense(d) => d.backward(pv, grads, cache, dy),
            Layer::Relu => {
                let LayerCache::Relu { y } = cache else {
                    unreachable!("relu backward got a foreign cache entry");
                };
                let mut dx = dy.clone();
                for (d, v) in dx.data_mut().iter_mut().zip(y.data()) {
                    if *v <= 0.0 {
                        *d = 0.0;
                    }
                }
                dx
            }
            Layer::Tanh => {
                let LayerCache::Tanh { y } = cache else {
                    unreachable!("tanh backward got a foreign cache entry");
                };
                let mut dx = dy.clone();
                for (d, v) in dx.data_mut().iter_mut().zip(y.data()) {
                    *d *= 1.0 - v * v;
                }
                dx
            }
            Layer::Lstm(cell) => cell.step_backward(pv, grads, cache, dy, None).0,
            Layer::Conv1d(c) => c.backward(pv, grads, cache, dy),
            Layer::Flatten { .. } => dy.clone(),
        }
    }

    /// Input gradient without parameter-gradient accumulation. Only the layer
    /// kinds that appear in critics (dense/relu/tanh stacks) support this.
    pub fn backward_input(&self, pv: &[f64], cache: &LayerCache, dy: &Mat) -> Mat {
        match self {
            Layer::Dense(d) => d.backward_input(pv, dy),
            Layer::Relu | Layer::Tanh | Layer::Flatten { .. } => {
                // These have no parameters; plain backward already is
                // input-only. Grads slice is unused.
                let mut no_grads: [f64; 0] = [];
                self.backward(pv, &mut no_grads, cache, dy)
            }
            Layer::Lstm(_) | Layer::Conv1d(_) => {
                unreachable!("input-only backward is only used through dense stacks")
            }
        }
    }
}
