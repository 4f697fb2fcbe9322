//! Gated recurrent network with a linear head and backpropagation through time.
//!
//! The cell follows the usual GRU equations:
//!
//! ```text
//! r  = sigmoid(W_ir x + b_ir + W_hr h + b_hr)
//! z  = sigmoid(W_iz x + b_iz + W_hz h + b_hz)
//! n  = tanh(W_in x + b_in + r * (W_hn h + b_hn))
//! h' = (1 - z) * n + z * h
//! y  = W_o h' + b_o
//! ```
//!
//! All parameters live in one flat `Vec<f64>` so optimizers, gradient
//! clipping, hashing, and checkpoints can treat a network as a single vector.
//! An optional trailing block of `output` values holds per-dimension Gaussian
//! log standard deviations for policy heads.

use ndarray::{s, Array2, ArrayView1, ArrayView2, ArrayViewMut2, Axis, Zip};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Arch {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
    /// Whether a log-std block of `output` values trails the weights.
    pub log_std: bool,
}

/// Offsets of each parameter block in the flat vector.
#[derive(Debug, Clone, Copy)]
struct Layout {
    w_i: usize,
    w_h: usize,
    b_i: usize,
    b_h: usize,
    w_o: usize,
    b_o: usize,
    log_std: usize,
    len: usize,
}

impl Arch {
    fn layout(&self) -> Layout {
        let (i, h, o) = (self.input, self.hidden, self.output);
        let w_i = 0;
        let w_h = w_i + 3 * h * i;
        let b_i = w_h + 3 * h * h;
        let b_h = b_i + 3 * h;
        let w_o = b_h + 3 * h;
        let b_o = w_o + o * h;
        let log_std = b_o + o;
        let len = log_std + if self.log_std { o } else { 0 };
        Layout {
            w_i,
            w_h,
            b_i,
            b_h,
            w_o,
            b_o,
            log_std,
            len,
        }
    }

    pub fn param_count(&self) -> usize {
        self.layout().len
    }
}

/// How to initialize the output head.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HeadInit {
    /// Same uniform range as the recurrent weights, scaled.
    Scaled(f64),
    /// All-zero head: the network outputs exactly zero until trained.
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub arch: Arch,
    pub params: Vec<f64>,
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

impl Network {
    pub fn zeros(arch: Arch) -> Self {
        Network {
            arch,
            params: vec![0.0; arch.param_count()],
        }
    }

    /// Uniform `±1/sqrt(hidden)` recurrent weights, zero biases.
    pub fn init(arch: Arch, seed: u64, head: HeadInit, log_std: f64) -> Self {
        let mut rng = seed::rng(seed);
        let l = arch.layout();
        let bound = 1.0 / (arch.hidden as f64).sqrt();
        let mut params = vec![0.0; l.len];
        for p in &mut params[l.w_i..l.b_i] {
            *p = rng.random_range(-bound..bound);
        }
        match head {
            HeadInit::Scaled(scale) => {
                for p in &mut params[l.w_o..l.b_o] {
                    *p = scale * rng.random_range(-bound..bound);
                }
            }
            HeadInit::Zero => {}
        }
        if arch.log_std {
            params[l.log_std..].fill(log_std);
        }
        Network { arch, params }
    }

    pub fn hidden_zeros(&self) -> Vec<f64> {
        vec![0.0; self.arch.hidden]
    }

    pub fn log_std(&self) -> &[f64] {
        let l = self.arch.layout();
        if self.arch.log_std {
            &self.params[l.log_std..]
        } else {
            &[]
        }
    }

    fn views(&self) -> Views<'_> {
        Views::new(&self.arch, &self.params)
    }

    /// One recurrent step for a single sample; updates `hidden` in place.
    pub fn step(&self, input: &[f64], hidden: &mut [f64]) -> Result<Vec<f64>> {
        if input.len() != self.arch.input || hidden.len() != self.arch.hidden {
            return Err(Error::Contract(format!(
                "network expects input {} / hidden {}, got {} / {}",
                self.arch.input,
                self.arch.hidden,
                input.len(),
                hidden.len()
            )));
        }
        let v = self.views();
        let x = ArrayView2::from_shape((1, input.len()), input).unwrap();
        let h = ArrayView2::from_shape((1, hidden.len()), &*hidden).unwrap();
        let cache = cell_forward(&v, x, h);
        hidden.copy_from_slice(cache.h_new.as_slice().unwrap());
        let y = head_forward(&v, cache.h_new.view());
        Ok(y.into_raw_vec_and_offset().0)
    }

    /// Run `seq` forward from `h0`, returning outputs and the cache for backprop.
    ///
    /// `inputs[t]` is a `batch x input` matrix for step `t`; `h0` is `batch x hidden`.
    pub fn forward_sequence(&self, inputs: &[Array2<f64>], h0: &Array2<f64>) -> SequenceCache {
        let v = self.views();
        let mut steps = Vec::with_capacity(inputs.len());
        let mut outputs = Vec::with_capacity(inputs.len());
        let mut h = h0.clone();
        for x in inputs {
            let cache = cell_forward(&v, x.view(), h.view());
            outputs.push(head_forward(&v, cache.h_new.view()));
            h = cache.h_new.clone();
            steps.push(cache);
        }
        SequenceCache { steps, outputs }
    }

    /// Accumulate parameter gradients given `d_outputs[t]` (`batch x output`).
    ///
    /// Gradients with respect to the log-std block are not touched here.
    pub fn backward_sequence(&self, cache: &SequenceCache, d_outputs: &[Array2<f64>], grad: &mut [f64]) {
        assert_eq!(grad.len(), self.params.len());
        let v = self.views();
        let l = self.arch.layout();
        let (h, i, o) = (self.arch.hidden, self.arch.input, self.arch.output);
        let (g_wi, rest) = grad[..l.log_std].split_at_mut(l.w_h);
        let (g_wh, rest) = rest.split_at_mut(l.b_i - l.w_h);
        let (g_bi, rest) = rest.split_at_mut(l.b_h - l.b_i);
        let (g_bh, rest) = rest.split_at_mut(l.w_o - l.b_h);
        let (g_wo, g_bo) = rest.split_at_mut(l.b_o - l.w_o);
        let mut g_wi = ArrayViewMut2::from_shape((3 * h, i), g_wi).unwrap();
        let mut g_wh = ArrayViewMut2::from_shape((3 * h, h), g_wh).unwrap();
        let mut g_wo = ArrayViewMut2::from_shape((o, h), g_wo).unwrap();

        let batch = cache.steps.first().map_or(0, |c| c.x.nrows());
        let mut dh = Array2::<f64>::zeros((batch, h));
        for t in (0..cache.steps.len()).rev() {
            let c = &cache.steps[t];
            let dy = &d_outputs[t];
            // Head.
            g_wo += &dy.t().dot(&c.h_new);
            for (g, s) in g_bo.iter_mut().zip(dy.sum_axis(Axis(0)).iter()) {
                *g += s;
            }
            dh += &dy.dot(&v.w_o);
            // Cell.
            let mut d_gi = Array2::<f64>::zeros((batch, 3 * h));
            let mut d_gh = Array2::<f64>::zeros((batch, 3 * h));
            let mut dh_prev = Array2::<f64>::zeros((batch, h));
            for b in 0..batch {
                for k in 0..h {
                    let r = c.r[[b, k]];
                    let z = c.z[[b, k]];
                    let n = c.n[[b, k]];
                    let hp = c.h_prev[[b, k]];
                    let g = dh[[b, k]];
                    let dn = g * (1.0 - z) * (1.0 - n * n);
                    let dz = g * (hp - n) * z * (1.0 - z);
                    let dr = dn * c.ghn[[b, k]] * r * (1.0 - r);
                    d_gi[[b, k]] = dr;
                    d_gi[[b, h + k]] = dz;
                    d_gi[[b, 2 * h + k]] = dn;
                    d_gh[[b, k]] = dr;
                    d_gh[[b, h + k]] = dz;
                    d_gh[[b, 2 * h + k]] = dn * r;
                    dh_prev[[b, k]] = g * z;
                }
            }
            g_wi += &d_gi.t().dot(&c.x);
            g_wh += &d_gh.t().dot(&c.h_prev);
            for (g, s) in g_bi.iter_mut().zip(d_gi.sum_axis(Axis(0)).iter()) {
                *g += s;
            }
            for (g, s) in g_bh.iter_mut().zip(d_gh.sum_axis(Axis(0)).iter()) {
                *g += s;
            }
            dh_prev += &d_gh.dot(&v.w_h);
            dh = dh_prev;
        }
    }

    /// Offset of the log-std block within the parameter vector.
    pub fn log_std_offset(&self) -> Option<usize> {
        self.arch.log_std.then(|| self.arch.layout().log_std)
    }
}

struct Views<'a> {
    w_i: ArrayView2<'a, f64>,
    w_h: ArrayView2<'a, f64>,
    b_i: ArrayView1<'a, f64>,
    b_h: ArrayView1<'a, f64>,
    w_o: ArrayView2<'a, f64>,
    b_o: ArrayView1<'a, f64>,
}

impl<'a> Views<'a> {
    fn new(arch: &Arch, p: &'a [f64]) -> Self {
        let l = arch.layout();
        let (i, h, o) = (arch.input, arch.hidden, arch.output);
        Views {
            w_i: ArrayView2::from_shape((3 * h, i), &p[l.w_i..l.w_h]).unwrap(),
            w_h: ArrayView2::from_shape((3 * h, h), &p[l.w_h..l.b_i]).unwrap(),
            b_i: ArrayView1::from(&p[l.b_i..l.b_h]),
            b_h: ArrayView1::from(&p[l.b_h..l.w_o]),
            w_o: ArrayView2::from_shape((o, h), &p[l.w_o..l.b_o]).unwrap(),
            b_o: ArrayView1::from(&p[l.b_o..l.log_std]),
        }
    }
}

/// Intermediate values of one cell step.
#[derive(Debug, Clone)]
pub struct StepCache {
    x: Array2<f64>,
    h_prev: Array2<f64>,
    r: Array2<f64>,
    z: Array2<f64>,
    n: Array2<f64>,
    ghn: Array2<f64>,
    pub h_new: Array2<f64>,
}

#[derive(Debug, Clone)]
pub struct SequenceCache {
    pub steps: Vec<StepCache>,
    pub outputs: Vec<Array2<f64>>,
}

fn cell_forward(v: &Views<'_>, x: ArrayView2<'_, f64>, h: ArrayView2<'_, f64>) -> StepCache {
    let hid = v.w_h.ncols();
    let gi = x.dot(&v.w_i.t()) + &v.b_i;
    let gh = h.dot(&v.w_h.t()) + &v.b_h;
    let mut r = gi.slice(s![.., 0..hid]).to_owned();
    Zip::from(&mut r)
        .and(gh.slice(s![.., 0..hid]))
        .for_each(|a, &b| *a = sigmoid(*a + b));
    let mut z = gi.slice(s![.., hid..2 * hid]).to_owned();
    Zip::from(&mut z)
        .and(gh.slice(s![.., hid..2 * hid]))
        .for_each(|a, &b| *a = sigmoid(*a + b));
    let ghn = gh.slice(s![.., 2 * hid..]).to_owned();
    let mut n = gi.slice(s![.., 2 * hid..]).to_owned();
    Zip::from(&mut n)
        .and(&r)
        .and(&ghn)
        .for_each(|a, &rr, &g| *a = (*a + rr * g).tanh());
    let mut h_new = n.clone();
    Zip::from(&mut h_new)
        .and(&z)
        .and(h)
        .for_each(|a, &zz, &hp| *a = (1.0 - zz) * *a + zz * hp);
    StepCache {
        x: x.to_owned(),
        h_prev: h.to_owned(),
        r,
        z,
        n,
        ghn,
        h_new,
    }
}

fn head_forward(v: &Views<'_>, h: ArrayView2<'_, f64>) -> Array2<f64> {
    h.dot(&v.w_o.t()) + &v.b_o
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(len: usize, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), grad.len());
        assert_eq!(params.len(), self.m.len());
        self.t += 1;
        if self.lr == 0.0 {
            return;
        }
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Scale the concatenated gradient down to `max_norm`; returns the pre-clip norm.
pub fn clip_global_norm(grads: &mut [&mut [f64]], max_norm: f64) -> f64 {
    let norm = grads
        .iter()
        .flat_map(|g| g.iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for g in grads.iter_mut() {
            g.iter_mut().for_each(|v| *v *= scale);
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Network {
        let arch = Arch {
            input: 3,
            hidden: 4,
            output: 2,
            log_std: true,
        };
        let mut net = Network::init(arch, 9, HeadInit::Scaled(1.0), -0.3);
        let mut rng = seed::rng(10);
        // Non-zero biases so every gate path carries gradient.
        for p in net.params.iter_mut() {
            if *p == 0.0 {
                *p = rng.random_range(-0.5..0.5);
            }
        }
        net
    }

    fn inputs(batch: usize, steps: usize, width: usize, seed_: u64) -> Vec<Array2<f64>> {
        let mut rng = seed::rng(seed_);
        (0..steps)
            .map(|_| Array2::from_shape_fn((batch, width), |_| rng.random_range(-1.0..1.0)))
            .collect()
    }

    /// Loss = sum_t sum_b w_tb . y_tb, with fixed random weights.
    fn loss(net: &Network, xs: &[Array2<f64>], h0: &Array2<f64>, w: &[Array2<f64>]) -> f64 {
        let c = net.forward_sequence(xs, h0);
        c.outputs.iter().zip(w).map(|(y, w)| (y * w).sum()).sum()
    }

    #[test]
    fn bptt_matches_central_differences() {
        let net = tiny();
        let xs = inputs(8, 5, 3, 1);
        let h0 = Array2::from_shape_fn((8, 4), |(b, k)| 0.1 * (b as f64 - k as f64).sin());
        let w = inputs(8, 5, 2, 2);
        let cache = net.forward_sequence(&xs, &h0);
        let mut grad = vec![0.0; net.params.len()];
        net.backward_sequence(&cache, &w, &mut grad);
        let eps = 1e-6;
        let end = net.log_std_offset().unwrap();
        for i in 0..end {
            let mut p = net.clone();
            p.params[i] += eps;
            let up = loss(&p, &xs, &h0, &w);
            p.params[i] -= 2.0 * eps;
            let down = loss(&p, &xs, &h0, &w);
            let numeric = (up - down) / (2.0 * eps);
            let denom = numeric.abs().max(grad[i].abs()).max(1e-6);
            assert!(
                (numeric - grad[i]).abs() / denom < 1e-5,
                "param {i}: analytic {} numeric {numeric}",
                grad[i]
            );
        }
    }

    #[test]
    fn single_step_matches_sequence() {
        let net = tiny();
        let xs = inputs(1, 4, 3, 3);
        let mut h = net.hidden_zeros();
        let seq = net.forward_sequence(&xs, &Array2::zeros((1, 4)));
        for (t, x) in xs.iter().enumerate() {
            let y = net.step(x.as_slice().unwrap(), &mut h).unwrap();
            assert_eq!(y.as_slice(), seq.outputs[t].as_slice().unwrap());
        }
    }

    #[test]
    fn zero_head_outputs_zero() {
        let arch = Arch {
            input: 5,
            hidden: 6,
            output: 3,
            log_std: false,
        };
        let net = Network::init(arch, 1, HeadInit::Zero, 0.0);
        let mut h = net.hidden_zeros();
        let y = net.step(&[1.0, -2.0, 0.5, 3.0, 0.0], &mut h).unwrap();
        assert_eq!(y, vec![0.0; 3]);
        assert!(net.step(&[1.0], &mut h).is_err());
    }

    #[test]
    fn zero_lr_is_a_no_op() {
        let mut params = vec![0.3, -1.2, 4.0];
        let before = params.clone();
        let mut adam = Adam::new(3, 0.0);
        adam.step(&mut params, &[1.0, -2.0, 0.5]);
        assert_eq!(params, before);
    }

    #[test]
    fn global_norm_clip() {
        let mut a = vec![3.0, 0.0];
        let mut b = vec![4.0];
        let n = clip_global_norm(&mut [&mut a, &mut b], 1.0);
        assert_eq!(n, 5.0);
        assert!((a[0] - 0.6).abs() < 1e-12 && (b[0] - 0.8).abs() < 1e-12);
    }
}
