//! Forward and backward kernels. All tensors carry a leading batch axis
//! and are channels-last. Work is split per batch sample; weight gradients
//! are reduced in sample order so results do not depend on thread count.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::Tensor;
use crate::Scalar;

#[inline]
fn axpy<T: Scalar>(acc: &mut [T], a: T, x: &[T]) {
    for (r, &v) in acc.iter_mut().zip(x) {
        *r += a * v;
    }
}

#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut s = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

fn reduce_in_order<T: Scalar>(parts: Vec<Vec<T>>, len: usize) -> Vec<T> {
    let mut acc = vec![T::zero(); len];
    for part in parts {
        for (a, v) in acc.iter_mut().zip(part) {
            *a += v;
        }
    }
    acc
}

// ---------------------------------------------------------------- conv1d

/// `x: [B, L, C]`, `w: [K, C, F]`, `b: [F]` -> `[B, (L - K) / stride + 1, F]`.
pub(crate) fn conv_forward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: &Tensor<T>,
    stride: usize,
) -> Tensor<T> {
    let (batch, len, ch) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (k, f) = (w.shape()[0], w.shape()[2]);
    let out_len = (len - k) / stride + 1;
    let span = k * ch;
    let (xd, wd, bd) = (x.data(), w.data(), b.data());
    let mut y = Tensor::zeros(&[batch, out_len, f]);
    y.data_mut()
        .par_chunks_mut(out_len * f)
        .enumerate()
        .for_each(|(bi, yb)| {
            let xb = &xd[bi * len * ch..(bi + 1) * len * ch];
            for t in 0..out_len {
                let row = &mut yb[t * f..(t + 1) * f];
                row.copy_from_slice(bd);
                let window = &xb[t * stride * ch..t * stride * ch + span];
                for (j, &xv) in window.iter().enumerate() {
                    axpy(row, xv, &wd[j * f..(j + 1) * f]);
                }
            }
        });
    y
}

pub(crate) struct ParamGrads<T> {
    pub dx: Option<Tensor<T>>,
    pub grads: Vec<Tensor<T>>,
}

pub(crate) fn conv_backward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    stride: usize,
    dy: &Tensor<T>,
    need_dx: bool,
) -> ParamGrads<T> {
    let (batch, len, ch) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (k, f) = (w.shape()[0], w.shape()[2]);
    let out_len = dy.shape()[1];
    let span = k * ch;
    let (xd, wd, dyd) = (x.data(), w.data(), dy.data());

    let per_sample: Vec<(Vec<T>, Vec<T>, Vec<T>)> = (0..batch)
        .into_par_iter()
        .map(|bi| {
            let xb = &xd[bi * len * ch..(bi + 1) * len * ch];
            let dyb = &dyd[bi * out_len * f..(bi + 1) * out_len * f];
            let mut dw = vec![T::zero(); span * f];
            let mut db = vec![T::zero(); f];
            let mut dx = if need_dx { vec![T::zero(); len * ch] } else { Vec::new() };
            for t in 0..out_len {
                let g = &dyb[t * f..(t + 1) * f];
                for (d, &v) in db.iter_mut().zip(g) {
                    *d += v;
                }
                let base = t * stride * ch;
                let window = &xb[base..base + span];
                for (j, &xv) in window.iter().enumerate() {
                    axpy(&mut dw[j * f..(j + 1) * f], xv, g);
                }
                if need_dx {
                    for j in 0..span {
                        dx[base + j] += dot(&wd[j * f..(j + 1) * f], g);
                    }
                }
            }
            (dw, db, dx)
        })
        .collect();

    let mut dws = Vec::with_capacity(batch);
    let mut dbs = Vec::with_capacity(batch);
    let mut dx_all = Vec::with_capacity(if need_dx { batch * len * ch } else { 0 });
    for (dw, db, dx) in per_sample {
        dws.push(dw);
        dbs.push(db);
        dx_all.extend(dx);
    }
    ParamGrads {
        dx: need_dx.then(|| Tensor::from_vec(x.shape(), dx_all).unwrap()),
        grads: vec![
            Tensor::from_vec(w.shape(), reduce_in_order(dws, span * f)).unwrap(),
            Tensor::from_vec(&[f], reduce_in_order(dbs, f)).unwrap(),
        ],
    }
}

// ---------------------------------------------------------------- dense

/// Applies `x W + b` along the last axis.
pub(crate) fn dense_forward<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    let (cin, units) = (w.shape()[0], w.shape()[1]);
    let batch = x.batch();
    let rows_per = x.len() / cin / batch.max(1);
    let mut shape = x.shape().to_vec();
    *shape.last_mut().unwrap() = units;
    let mut y = Tensor::zeros(&shape);
    let (xd, wd, bd) = (x.data(), w.data(), b.data());
    y.data_mut()
        .par_chunks_mut(rows_per * units)
        .enumerate()
        .for_each(|(bi, yb)| {
            for r in 0..rows_per {
                let xr = &xd[(bi * rows_per + r) * cin..(bi * rows_per + r + 1) * cin];
                let row = &mut yb[r * units..(r + 1) * units];
                row.copy_from_slice(bd);
                for (c, &xv) in xr.iter().enumerate() {
                    if xv != T::zero() {
                        axpy(row, xv, &wd[c * units..(c + 1) * units]);
                    }
                }
            }
        });
    y
}

pub(crate) fn dense_backward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    dy: &Tensor<T>,
    need_dx: bool,
) -> ParamGrads<T> {
    let (cin, units) = (w.shape()[0], w.shape()[1]);
    let batch = x.batch();
    let rows_per = x.len() / cin / batch.max(1);
    let (xd, wd, dyd) = (x.data(), w.data(), dy.data());

    let per_sample: Vec<(Vec<T>, Vec<T>, Vec<T>)> = (0..batch)
        .into_par_iter()
        .map(|bi| {
            let mut dw = vec![T::zero(); cin * units];
            let mut db = vec![T::zero(); units];
            let mut dx = if need_dx { vec![T::zero(); rows_per * cin] } else { Vec::new() };
            for r in 0..rows_per {
                let row = bi * rows_per + r;
                let xr = &xd[row * cin..(row + 1) * cin];
                let g = &dyd[row * units..(row + 1) * units];
                for (d, &v) in db.iter_mut().zip(g) {
                    *d += v;
                }
                for (c, &xv) in xr.iter().enumerate() {
                    if xv != T::zero() {
                        axpy(&mut dw[c * units..(c + 1) * units], xv, g);
                    }
                }
                if need_dx {
                    for c in 0..cin {
                        dx[r * cin + c] = dot(&wd[c * units..(c + 1) * units], g);
                    }
                }
            }
            (dw, db, dx)
        })
        .collect();

    let mut dws = Vec::with_capacity(batch);
    let mut dbs = Vec::with_capacity(batch);
    let mut dx_all = Vec::new();
    for (dw, db, dx) in per_sample {
        dws.push(dw);
        dbs.push(db);
        dx_all.extend(dx);
    }
    ParamGrads {
        dx: need_dx.then(|| Tensor::from_vec(x.shape(), dx_all).unwrap()),
        grads: vec![
            Tensor::from_vec(w.shape(), reduce_in_order(dws, cin * units)).unwrap(),
            Tensor::from_vec(&[units], reduce_in_order(dbs, units)).unwrap(),
        ],
    }
}

// ---------------------------------------------------------------- relu

pub(crate) fn relu_forward<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

pub(crate) fn relu_backward<T: Scalar>(out: &Tensor<T>, dy: &Tensor<T>) -> Tensor<T> {
    let data = out
        .data()
        .iter()
        .zip(dy.data())
        .map(|(&o, &g)| if o > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::from_vec(dy.shape(), data).unwrap()
}

// ---------------------------------------------------------------- batch norm

pub(crate) struct BnTrace<T> {
    pub xhat: Vec<T>,
    pub inv_std: Vec<T>,
    pub training: bool,
}

/// Batch statistics per channel (last axis): mean and biased variance.
pub(crate) fn channel_moments<T: Scalar>(x: &Tensor<T>) -> (Vec<f64>, Vec<f64>) {
    let c = x.last_dim();
    let n = (x.len() / c) as f64;
    let mut mean = vec![0.0f64; c];
    for row in x.data().chunks_exact(c) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v.to_f64_lossy();
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0f64; c];
    for row in x.data().chunks_exact(c) {
        for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
            *s += (v.to_f64_lossy() - m).powi(2);
        }
    }
    var.iter_mut().for_each(|s| *s /= n);
    (mean, var)
}

pub(crate) fn bn_normalize<T: Scalar>(
    x: &Tensor<T>,
    mean: &[f64],
    var: &[f64],
    eps: f64,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    training: bool,
) -> (Tensor<T>, BnTrace<T>) {
    let c = x.last_dim();
    let mean_t: Vec<T> = mean.iter().map(|&m| T::of(m)).collect();
    let inv_std: Vec<T> = var.iter().map(|&v| T::of(1.0 / (v + eps).sqrt())).collect();
    let (g, b) = (gamma.data(), beta.data());
    let mut xhat = Vec::with_capacity(x.len());
    let mut y = Vec::with_capacity(x.len());
    for row in x.data().chunks_exact(c) {
        for j in 0..c {
            let h = (row[j] - mean_t[j]) * inv_std[j];
            xhat.push(h);
            y.push(g[j] * h + b[j]);
        }
    }
    (
        Tensor::from_vec(x.shape(), y).unwrap(),
        BnTrace {
            xhat,
            inv_std,
            training,
        },
    )
}

pub(crate) fn bn_backward<T: Scalar>(
    trace: &BnTrace<T>,
    gamma: &Tensor<T>,
    dy: &Tensor<T>,
) -> (Tensor<T>, Vec<Tensor<T>>) {
    let c = dy.last_dim();
    let n = dy.len() / c;
    let g = gamma.data();
    let mut dgamma = vec![T::zero(); c];
    let mut dbeta = vec![T::zero(); c];
    for (row, hrow) in dy.data().chunks_exact(c).zip(trace.xhat.chunks_exact(c)) {
        for j in 0..c {
            dgamma[j] += row[j] * hrow[j];
            dbeta[j] += row[j];
        }
    }
    let dx: Vec<T> = if trace.training {
        // dx = inv_std / N * (N dxhat - sum(dxhat) - xhat sum(dxhat xhat)), dxhat = dy gamma
        let nn = T::of_usize(n);
        let mut out = Vec::with_capacity(dy.len());
        for (row, hrow) in dy.data().chunks_exact(c).zip(trace.xhat.chunks_exact(c)) {
            for j in 0..c {
                let sum_dxhat = dbeta[j] * g[j];
                let sum_dxhat_xhat = dgamma[j] * g[j];
                out.push(
                    trace.inv_std[j] / nn
                        * (nn * row[j] * g[j] - sum_dxhat - hrow[j] * sum_dxhat_xhat),
                );
            }
        }
        out
    } else {
        dy.data()
            .chunks_exact(c)
            .flat_map(|row| (0..c).map(move |j| row[j] * g[j] * trace.inv_std[j]))
            .collect()
    };
    (
        Tensor::from_vec(dy.shape(), dx).unwrap(),
        vec![
            Tensor::from_vec(&[c], dgamma).unwrap(),
            Tensor::from_vec(&[c], dbeta).unwrap(),
        ],
    )
}

// ---------------------------------------------------------------- dropout

/// Inverted dropout: survivors are scaled by `1 / (1 - rate)`.
pub(crate) fn dropout_forward<T: Scalar>(
    x: &Tensor<T>,
    rate: f64,
    rng: &mut ChaCha8Rng,
) -> (Tensor<T>, Vec<T>) {
    let threshold = (rate * 4294967296.0) as u64;
    let keep = T::of(1.0 / (1.0 - rate));
    let mask: Vec<T> = (0..x.len())
        .map(|_| {
            if (rng.gen::<u32>() as u64) >= threshold {
                keep
            } else {
                T::zero()
            }
        })
        .collect();
    let data = x.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
    (Tensor::from_vec(x.shape(), data).unwrap(), mask)
}

pub(crate) fn apply_mask<T: Scalar>(dy: &Tensor<T>, mask: &[T]) -> Tensor<T> {
    let data = dy.data().iter().zip(mask).map(|(&g, &m)| g * m).collect();
    Tensor::from_vec(dy.shape(), data).unwrap()
}

// ---------------------------------------------------------------- lstm

#[inline]
fn sigmoid<T: Scalar>(v: T) -> T {
    T::one() / (T::one() + (-v).exp())
}

/// Activations kept for backpropagation through time, per sample:
/// gates `[T, 4H]` (i, f, g, o after activation), cells and hiddens `[T, H]`.
pub(crate) struct LstmTrace<T> {
    pub gates: Vec<Vec<T>>,
    pub cells: Vec<Vec<T>>,
    pub hiddens: Vec<Vec<T>>,
}

/// `x: [B, T, F]`; `wx: [F, 4H]`, `wh: [H, 4H]`, `b: [4H]`, gate order i, f, g, o.
pub(crate) fn lstm_forward<T: Scalar>(
    x: &Tensor<T>,
    wx: &Tensor<T>,
    wh: &Tensor<T>,
    b: &Tensor<T>,
    return_sequences: bool,
) -> (Tensor<T>, LstmTrace<T>) {
    let (batch, steps, feat) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let h4 = wx.shape()[1];
    let h = h4 / 4;
    let (xd, wxd, whd, bd) = (x.data(), wx.data(), wh.data(), b.data());

    let per_sample: Vec<(Vec<T>, Vec<T>, Vec<T>)> = (0..batch)
        .into_par_iter()
        .map(|bi| {
            let mut gates = vec![T::zero(); steps * h4];
            let mut cells = vec![T::zero(); steps * h];
            let mut hiddens = vec![T::zero(); steps * h];
            let mut z = vec![T::zero(); h4];
            for t in 0..steps {
                z.copy_from_slice(bd);
                let xt = &xd[(bi * steps + t) * feat..(bi * steps + t + 1) * feat];
                for (fi, &xv) in xt.iter().enumerate() {
                    axpy(&mut z, xv, &wxd[fi * h4..(fi + 1) * h4]);
                }
                if t > 0 {
                    let (done, _) = hiddens.split_at(t * h);
                    let hp = &done[(t - 1) * h..];
                    for (hi, &hv) in hp.iter().enumerate() {
                        axpy(&mut z, hv, &whd[hi * h4..(hi + 1) * h4]);
                    }
                }
                let gt = &mut gates[t * h4..(t + 1) * h4];
                for j in 0..h {
                    gt[j] = sigmoid(z[j]);
                    gt[h + j] = sigmoid(z[h + j]);
                    gt[2 * h + j] = z[2 * h + j].tanh();
                    gt[3 * h + j] = sigmoid(z[3 * h + j]);
                }
                for j in 0..h {
                    let c_prev = if t > 0 { cells[(t - 1) * h + j] } else { T::zero() };
                    let c = gt[h + j] * c_prev + gt[j] * gt[2 * h + j];
                    cells[t * h + j] = c;
                    hiddens[t * h + j] = gt[3 * h + j] * c.tanh();
                }
            }
            (gates, cells, hiddens)
        })
        .collect();

    let mut trace = LstmTrace {
        gates: Vec::with_capacity(batch),
        cells: Vec::with_capacity(batch),
        hiddens: Vec::with_capacity(batch),
    };
    let mut out = Vec::with_capacity(batch * if return_sequences { steps * h } else { h });
    for (g, c, hs) in per_sample {
        if return_sequences {
            out.extend_from_slice(&hs);
        } else {
            out.extend_from_slice(&hs[(steps - 1) * h..]);
        }
        trace.gates.push(g);
        trace.cells.push(c);
        trace.hiddens.push(hs);
    }
    let shape = if return_sequences {
        vec![batch, steps, h]
    } else {
        vec![batch, h]
    };
    (Tensor::from_vec(&shape, out).unwrap(), trace)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn lstm_backward<T: Scalar>(
    trace: &LstmTrace<T>,
    x: &Tensor<T>,
    wx: &Tensor<T>,
    wh: &Tensor<T>,
    dy: &Tensor<T>,
    return_sequences: bool,
    need_dx: bool,
) -> ParamGrads<T> {
    let (batch, steps, feat) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let h4 = wx.shape()[1];
    let h = h4 / 4;
    let (xd, wxd, whd, dyd) = (x.data(), wx.data(), wh.data(), dy.data());
    let one = T::one();

    let per_sample: Vec<(Vec<T>, Vec<T>, Vec<T>, Vec<T>)> = (0..batch)
        .into_par_iter()
        .map(|bi| {
            let gates = &trace.gates[bi];
            let cells = &trace.cells[bi];
            let hiddens = &trace.hiddens[bi];
            let mut dwx = vec![T::zero(); feat * h4];
            let mut dwh = vec![T::zero(); h * h4];
            let mut db = vec![T::zero(); h4];
            let mut dx = if need_dx { vec![T::zero(); steps * feat] } else { Vec::new() };
            let mut dh_next = vec![T::zero(); h];
            let mut dc_next = vec![T::zero(); h];
            let mut dz = vec![T::zero(); h4];
            for t in (0..steps).rev() {
                let gt = &gates[t * h4..(t + 1) * h4];
                for j in 0..h {
                    let upstream = if return_sequences {
                        dyd[(bi * steps + t) * h + j]
                    } else if t + 1 == steps {
                        dyd[bi * h + j]
                    } else {
                        T::zero()
                    };
                    let dh = upstream + dh_next[j];
                    let (i, f, g, o) = (gt[j], gt[h + j], gt[2 * h + j], gt[3 * h + j]);
                    let tc = cells[t * h + j].tanh();
                    let c_prev = if t > 0 { cells[(t - 1) * h + j] } else { T::zero() };
                    let dc = dc_next[j] + dh * o * (one - tc * tc);
                    dz[j] = dc * g * i * (one - i);
                    dz[h + j] = dc * c_prev * f * (one - f);
                    dz[2 * h + j] = dc * i * (one - g * g);
                    dz[3 * h + j] = dh * tc * o * (one - o);
                    dc_next[j] = dc * f;
                }
                for (d, &v) in db.iter_mut().zip(&dz) {
                    *d += v;
                }
                let xt = &xd[(bi * steps + t) * feat..(bi * steps + t + 1) * feat];
                for (fi, &xv) in xt.iter().enumerate() {
                    axpy(&mut dwx[fi * h4..(fi + 1) * h4], xv, &dz);
                }
                if t > 0 {
                    let hp = &hiddens[(t - 1) * h..t * h];
                    for (hi, &hv) in hp.iter().enumerate() {
                        axpy(&mut dwh[hi * h4..(hi + 1) * h4], hv, &dz);
                    }
                }
                if need_dx {
                    for fi in 0..feat {
                        dx[t * feat + fi] = dot(&wxd[fi * h4..(fi + 1) * h4], &dz);
                    }
                }
                for (hi, d) in dh_next.iter_mut().enumerate() {
                    *d = dot(&whd[hi * h4..(hi + 1) * h4], &dz);
                }
            }
            (dwx, dwh, db, dx)
        })
        .collect();

    let (mut a, mut b_, mut c, mut dx_all) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (dwx, dwh, db, dx) in per_sample {
        a.push(dwx);
        b_.push(dwh);
        c.push(db);
        dx_all.extend(dx);
    }
    ParamGrads {
        dx: need_dx.then(|| Tensor::from_vec(x.shape(), dx_all).unwrap()),
        grads: vec![
            Tensor::from_vec(wx.shape(), reduce_in_order(a, feat * h4)).unwrap(),
            Tensor::from_vec(wh.shape(), reduce_in_order(b_, h * h4)).unwrap(),
            Tensor::from_vec(&[h4], reduce_in_order(c, h4)).unwrap(),
        ],
    }
}

// ---------------------------------------------------------------- softmax

pub(crate) fn softmax_forward<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let k = x.last_dim();
    let mut out = Vec::with_capacity(x.len());
    for row in x.data().chunks_exact(k) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let exps: Vec<T> = row.iter().map(|&v| (v - max).exp()).collect();
        let total: T = exps.iter().copied().sum();
        out.extend(exps.into_iter().map(|e| e / total));
    }
    Tensor::from_vec(x.shape(), out).unwrap()
}

/// Vector-Jacobian product of softmax: `p * (dy - <dy, p>)`.
pub(crate) fn softmax_backward<T: Scalar>(probs: &Tensor<T>, dy: &Tensor<T>) -> Tensor<T> {
    let k = probs.last_dim();
    let mut out = Vec::with_capacity(dy.len());
    for (p, g) in probs.data().chunks_exact(k).zip(dy.data().chunks_exact(k)) {
        let inner = dot(p, g);
        out.extend(p.iter().zip(g).map(|(&pi, &gi)| pi * (gi - inner)));
    }
    Tensor::from_vec(dy.shape(), out).unwrap()
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;

    use super::*;

    fn random(shape: &[usize], seed: u64) -> Tensor<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn conv_matches_sliding_dot_product() {
        for (len, ch, k, f, stride) in [(12, 3, 5, 4, 1), (17, 2, 3, 3, 4), (5, 1, 5, 2, 2)] {
            let x = random(&[2, len, ch], 1);
            let w = random(&[k, ch, f], 2);
            let b = random(&[f], 3);
            let y = conv_forward(&x, &w, &b, stride);
            let out_len = (len - k) / stride + 1;
            assert_eq!(y.shape(), &[2, out_len, f]);
            for bi in 0..2 {
                for t in 0..out_len {
                    for fo in 0..f {
                        let mut s = b.data()[fo];
                        for kk in 0..k {
                            for c in 0..ch {
                                s += x.data()[(bi * len + t * stride + kk) * ch + c]
                                    * w.data()[(kk * ch + c) * f + fo];
                            }
                        }
                        let got = y.data()[(bi * out_len + t) * f + fo];
                        assert!((got - s).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn dense_two_by_two_by_hand() {
        // y = x W + b, loss = sum(y * u) => dW = x^T u, db = u, dx = W u
        let x = Tensor::from_vec(&[1, 2], vec![2.0, -1.0]).unwrap();
        let w = Tensor::from_vec(&[2, 2], vec![0.5, 1.0, -1.5, 2.0]).unwrap();
        let b = Tensor::from_vec(&[2], vec![0.1, 0.2]).unwrap();
        let y = dense_forward(&x, &w, &b);
        for (got, want) in y.data().iter().zip([2.0f64 * 0.5 + 1.5 + 0.1, 0.2]) {
            assert!((got - want).abs() < 1e-12);
        }
        let u = Tensor::from_vec(&[1, 2], vec![3.0, -4.0]).unwrap();
        let g = dense_backward(&x, &w, &u, true);
        assert_eq!(g.grads[0].data(), &[6.0, -8.0, -3.0, 4.0]);
        assert_eq!(g.grads[1].data(), &[3.0, -4.0]);
        assert_eq!(g.dx.unwrap().data(), &[0.5 * 3.0 - 4.0, -1.5 * 3.0 - 8.0]);
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let x = random(&[3, 9, 2], 4);
        let w = random(&[3, 2, 4], 5);
        let dy = Tensor::zeros(&[3, 7, 4]);
        let g = conv_backward(&x, &w, 1, &dy, true);
        assert!(g.grads.iter().all(|t| t.data().iter().all(|&v| v == 0.0)));
        assert!(g.dx.unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn batch_norm_training_moments() {
        let x = random(&[16, 5, 3], 8).map(|v| 3.0 * v + 2.0);
        let (mean, var) = channel_moments(&x);
        let ones = Tensor::full(&[3], 1.0);
        let zeros = Tensor::zeros(&[3]);
        let (y, _) = bn_normalize(&x, &mean, &var, 1e-5, &ones, &zeros, true);
        let (m2, v2) = channel_moments(&y);
        for c in 0..3 {
            assert!(m2[c].abs() < 1e-5);
            assert!((v2[c] - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn dropout_fraction_and_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Tensor::full(&[1, 10000], 1.0f64);
        let (y, _) = dropout_forward(&x, 0.25, &mut rng);
        let dropped = y.data().iter().filter(|&&v| v == 0.0).count() as f64 / 10000.0;
        assert!((dropped - 0.25).abs() < 0.05);
        assert!(y.data().iter().all(|&v| v == 0.0 || (v - 1.0 / 0.75).abs() < 1e-12));
    }

    #[test]
    fn softmax_rows_and_vjp() {
        let x = random(&[4, 6], 11).map(|v| 10.0 * v);
        let p = softmax_forward(&x);
        for row in p.data().chunks(6) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        // finite-difference check of the VJP against loss = <u, softmax(x)>
        let u = random(&[4, 6], 12);
        let analytic = softmax_backward(&p, &u);
        let h = 1e-6;
        for i in 0..x.len() {
            let mut xp = x.clone();
            xp.data_mut()[i] += h;
            let mut xm = x.clone();
            xm.data_mut()[i] -= h;
            let lp: f64 = softmax_forward(&xp).data().iter().zip(u.data()).map(|(a, b)| a * b).sum();
            let lm: f64 = softmax_forward(&xm).data().iter().zip(u.data()).map(|(a, b)| a * b).sum();
            assert!(((lp - lm) / (2.0 * h) - analytic.data()[i]).abs() < 1e-7);
        }
    }
}
