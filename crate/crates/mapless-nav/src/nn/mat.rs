//! Dense row-major f64 matrices and the handful of GEMM-shaped kernels the
//! network engine needs.
//!
//! Determinism contract: every output element accumulates its terms in
//! ascending reduction-index order no matter how the work is blocked or which
//! thread computes it, so sequential and parallel runs (and any row
//! partitioning) are bit-identical. Keep that property when touching the
//! kernels.

use crate::par;

/// Fused multiply-add when the target has hardware FMA (we build with
/// `-C target-cpu=native`); otherwise a plain multiply-add, since a soft
/// `mul_add` is a libm call and unusably slow.
#[inline(always)]
pub fn madd(a: f64, b: f64, acc: f64) -> f64 {
    if cfg!(target_feature = "fma") {
        a.mul_add(b, acc)
    } else {
        acc + a * b
    }
}

/// Row-major 2-D array of f64.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(
            rows * cols,
            data.len(),
            "Mat::from_vec: {rows}x{cols} needs {} values, got {}",
            rows * cols,
            data.len()
        );
        Mat { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Explicit transpose. Pure data movement, no arithmetic.
    pub fn transpose(&self) -> Mat {
        transpose_of(&self.data, self.rows, self.cols)
    }
}

/// Transpose a row-major `rows`x`cols` slice into a new matrix.
pub fn transpose_of(data: &[f64], rows: usize, cols: usize) -> Mat {
    assert_eq!(data.len(), rows * cols);
    let mut out = Mat::zeros(cols, rows);
    // 8x8 tiles keep both source and destination access cache-friendly; the
    // fixed-size staging array lets the full-tile copies run without bounds
    // checks.
    const T: usize = 8;
    for i0 in (0..rows).step_by(T) {
        for j0 in (0..cols).step_by(T) {
            let imax = (i0 + T).min(rows);
            let jmax = (j0 + T).min(cols);
            if imax - i0 == T && jmax - j0 == T {
                let mut t = [[0.0f64; T]; T];
                for (di, trow) in t.iter_mut().enumerate() {
                    let src = &data[(i0 + di) * cols + j0..(i0 + di) * cols + j0 + T];
                    trow.copy_from_slice(src);
                }
                for dj in 0..T {
                    let dst = &mut out.data[(j0 + dj) * rows + i0..(j0 + dj) * rows + i0 + T];
                    for (di, dv) in dst.iter_mut().enumerate() {
                        *dv = t[di][dj];
                    }
                }
            } else {
                for i in i0..imax {
                    for j in j0..jmax {
                        out.data[j * rows + i] = data[i * cols + j];
                    }
                }
            }
        }
    }
    out
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

// Register-tile sizes for the matmul micro-kernel: 4 output rows x 32 output
// columns of accumulators stream the shared B row-block once per k step.
const MR: usize = 4;
const NB: usize = 32;
// k-panel height for cache blocking: one packed panel of B (KC x N floats)
// stays resident in L2 while every row block of C consumes it, instead of
// re-streaming all of B once per row block.
const KC: usize = 256;

/// C [M,N] = A [M,K] · B [K,N] + row-broadcast bias, operating on row-major
/// slices. `bias` is either empty or length N.
pub fn gemm(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], bias: &[f64]) -> Mat {
    assert_eq!(a.len(), m * k, "gemm: A size");
    assert_eq!(b.len(), k * n, "gemm: B size");
    assert!(
        bias.is_empty() || bias.len() == n,
        "gemm: bias length {} != {}",
        bias.len(),
        n
    );
    let mut c = Mat::zeros(m, n);
    let full_strips = n / NB;
    if m < 3 * MR || full_strips == 0 {
        // Too small to amortize a packing pass over B.
        par::for_each_chunk_mut(&mut c.data, MR * n, |blk, chunk| {
            let i0 = blk * MR;
            let nr = chunk.len() / n;
            edge_rows(a, b, bias, chunk, i0, nr, k, n, 0, n);
        });
        return c;
    }
    // Repack B panel-major so the register kernel streams each 32-column
    // strip of a k-panel contiguously. One extra pass over B, amortized
    // across m/MR row blocks.
    let bp = pack_b(b, k, n, full_strips);
    let mut k0 = 0;
    while k0 < k {
        let k1 = (k0 + KC).min(k);
        let plen = k1 - k0;
        let pbase = full_strips * NB * k0;
        par::for_each_chunk_mut(&mut c.data, MR * n, |blk, chunk| {
            let i0 = blk * MR;
            let nr = chunk.len() / n;
            if nr == MR {
                for s in 0..full_strips {
                    let strip = &bp[pbase + s * plen * NB..pbase + (s + 1) * plen * NB];
                    tile_block(a, strip, bias, chunk, i0, k, n, s * NB, k0, k1);
                }
                if k0 == 0 && full_strips * NB < n {
                    // Column tail: handled once over the full k range.
                    edge_rows(a, b, bias, chunk, i0, nr, k, n, full_strips * NB, n);
                }
            } else if k0 == 0 {
                // Row tail: handled once over the full k range.
                edge_rows(a, b, bias, chunk, i0, nr, k, n, 0, n);
            }
        });
        k0 = k1;
    }
    c
}

/// Copy B into panel-major layout: for each k-panel, each full 32-column
/// strip becomes a contiguous (panel-height x 32) block.
fn pack_b(b: &[f64], k: usize, n: usize, full_strips: usize) -> Vec<f64> {
    let mut bp = vec![0.0; full_strips * NB * k];
    let mut w = 0;
    let mut k0 = 0;
    while k0 < k {
        let k1 = (k0 + KC).min(k);
        for s in 0..full_strips {
            let j0 = s * NB;
            for kk in k0..k1 {
                bp[w..w + NB].copy_from_slice(&b[kk * n + j0..kk * n + j0 + NB]);
                w += NB;
            }
        }
        k0 = k1;
    }
    bp
}

/// C = A·B + row-broadcast bias, with C [M,N], A [M,K], B [K,N].
/// `bias` must have length N (use `&[]` via [`matmul`] for no bias).
pub fn matmul_bias(a: &Mat, b: &Mat, bias: &[f64]) -> Mat {
    assert_eq!(
        a.cols, b.rows,
        "matmul: inner dims differ ({}x{} · {}x{})",
        a.rows, a.cols, b.rows, b.cols
    );
    gemm(a.rows, a.cols, b.cols, &a.data, &b.data, bias)
}

/// C = A·B.
pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    matmul_bias(a, b, &[])
}

/// C = Aᵀ·B (A [M,K], B [M,N] → C [K,N]); the weight-gradient shape.
/// Implemented as an explicit transpose plus the single tuned kernel, which
/// keeps the fixed ascending-m accumulation order.
pub fn matmul_at_b(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.rows, b.rows, "matmul_at_b: row counts differ");
    matmul(&a.transpose(), b)
}

/// C = A·Bᵀ (A [M,K], B [P,K] → C [M,P]); the input-gradient shape.
pub fn matmul_a_bt(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.cols, b.cols, "matmul_a_bt: col counts differ");
    matmul(a, &b.transpose())
}

/// Per-column sums (bias gradients): out[j] = Σ_i a[i,j], rows ascending.
pub fn col_sums(a: &Mat) -> Vec<f64> {
    let mut out = vec![0.0; a.cols];
    for i in 0..a.rows {
        let row = a.row(i);
        for (o, v) in out.iter_mut().zip(row) {
            *o += *v;
        }
    }
    out
}

/// The 4x32 register tile: accumulate rows [k0,k1) of the product into the
/// 32-column strip at `j0` for the MR rows starting at `i0`. The first panel
/// seeds the accumulators from the bias, later panels reload the partial sums
/// already in `chunk`, so each output element still sums its terms in
/// ascending-k order.
fn tile_block(
    a: &[f64],
    strip: &[f64],
    bias: &[f64],
    chunk: &mut [f64],
    i0: usize,
    k: usize,
    n: usize,
    j0: usize,
    k0: usize,
    k1: usize,
) {
    // Fixed-size row views so every index below is provably in bounds; the
    // checks would otherwise block vectorization.
    let a0 = &a[i0 * k + k0..i0 * k + k1];
    let a1 = &a[(i0 + 1) * k + k0..(i0 + 1) * k + k1];
    let a2 = &a[(i0 + 2) * k + k0..(i0 + 2) * k + k1];
    let a3 = &a[(i0 + 3) * k + k0..(i0 + 3) * k + k1];
    let mut acc = [[0.0f64; NB]; MR];
    if k0 > 0 {
        for (r, accr) in acc.iter_mut().enumerate() {
            accr.copy_from_slice(&chunk[r * n + j0..r * n + j0 + NB]);
        }
    } else if !bias.is_empty() {
        for r in acc.iter_mut() {
            r.copy_from_slice(&bias[j0..j0 + NB]);
        }
    }
    for kk in 0..k1 - k0 {
        let brow: &[f64; NB] = strip[kk * NB..kk * NB + NB].try_into().unwrap();
        let aik = [a0[kk], a1[kk], a2[kk], a3[kk]];
        for (ar, accr) in aik.iter().zip(acc.iter_mut()) {
            for j in 0..NB {
                accr[j] = madd(*ar, brow[j], accr[j]);
            }
        }
    }
    for (r, accr) in acc.iter().enumerate() {
        chunk[r * n + j0..r * n + j0 + NB].copy_from_slice(accr);
    }
}

/// Edge geometry (row tails, column tails, small products): compute columns
/// [j_lo, j_hi) of `nr` C rows starting at `i0` over the full k range,
/// reading B in place. Columns are processed in 1x8 tiles so the eight
/// accumulation chains run independently instead of serializing on one
/// fused-multiply-add latency chain; per element the term order is still
/// ascending k.
fn edge_rows(
    a: &[f64],
    b: &[f64],
    bias: &[f64],
    chunk: &mut [f64],
    i0: usize,
    nr: usize,
    k: usize,
    n: usize,
    j_lo: usize,
    j_hi: usize,
) {
    const JW: usize = 8;
    for r in 0..nr {
        let arow = &a[(i0 + r) * k..(i0 + r + 1) * k];
        let mut j0 = j_lo;
        while j0 + JW <= j_hi {
            let mut acc = [0.0f64; JW];
            if !bias.is_empty() {
                acc.copy_from_slice(&bias[j0..j0 + JW]);
            }
            for (kk, &av) in arow.iter().enumerate() {
                let brow: &[f64; JW] = b[kk * n + j0..kk * n + j0 + JW].try_into().unwrap();
                for j in 0..JW {
                    acc[j] = madd(av, brow[j], acc[j]);
                }
            }
            chunk[r * n + j0..r * n + j0 + JW].copy_from_slice(&acc);
            j0 += JW;
        }
        for j in j0..j_hi {
            let mut s = if bias.is_empty() { 0.0 } else { bias[j] };
            for (kk, &av) in arow.iter().enumerate() {
                s = madd(av, b[kk * n + j], s);
            }
            chunk[r * n + j] = s;
        }
    }
}
