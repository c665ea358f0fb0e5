//! GRU memory and arctan Q-head with hand-written backpropagation.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::seed::Rng;

/// Dense row-major matrix. Bias vectors are stored as single-column matrices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn uniform(rows: usize, cols: usize, bound: f64, rng: &mut Rng) -> Self {
        Self {
            rows,
            cols,
            data: (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect(),
        }
    }

    /// `out += self · x`
    #[inline]
    fn mul_add(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *o += row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }

    /// `out += selfᵀ · y`
    #[inline]
    fn mul_t_add(&self, y: &[f64], out: &mut [f64]) {
        for (&yi, row) in y.iter().zip(self.data.chunks_exact(self.cols)) {
            if yi != 0.0 {
                for (o, w) in out.iter_mut().zip(row) {
                    *o += w * yi;
                }
            }
        }
    }

    /// `self += y · xᵀ`
    #[inline]
    fn outer_add(&mut self, y: &[f64], x: &[f64]) {
        for (&yi, row) in y.iter().zip(self.data.chunks_exact_mut(self.cols)) {
            if yi != 0.0 {
                for (w, v) in row.iter_mut().zip(x) {
                    *w += yi * v;
                }
            }
        }
    }

    fn add_vec(&mut self, y: &[f64]) {
        for (b, v) in self.data.iter_mut().zip(y) {
            *b += v;
        }
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Gated recurrent unit: `z` update gate, `r` reset gate, `c` candidate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GruParams {
    pub w_z: Matrix,
    pub u_z: Matrix,
    pub b_z: Matrix,
    pub w_r: Matrix,
    pub u_r: Matrix,
    pub b_r: Matrix,
    pub w_c: Matrix,
    pub u_c: Matrix,
    pub b_c: Matrix,
}

/// Intermediate values of one GRU step, kept for backpropagation.
#[derive(Clone, Debug, Default)]
pub struct GruCache {
    pub h_prev: Vec<f64>,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub rh: Vec<f64>,
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

impl GruParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        let w = || Matrix::zeros(hidden, input);
        let u = || Matrix::zeros(hidden, hidden);
        let b = || Matrix::zeros(hidden, 1);
        Self {
            w_z: w(),
            u_z: u(),
            b_z: b(),
            w_r: w(),
            u_r: u(),
            b_r: b(),
            w_c: w(),
            u_c: u(),
            b_c: b(),
        }
    }

    /// Uniform in `±1/√hidden` for every weight and bias.
    pub fn init(input: usize, hidden: usize, rng: &mut Rng) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut p = Self::zeros(input, hidden);
        for t in p.tensors_mut() {
            *t = Matrix::uniform(t.rows, t.cols, bound, rng);
        }
        p
    }

    pub fn input_dim(&self) -> usize {
        self.w_z.cols
    }

    pub fn hidden_dim(&self) -> usize {
        self.u_z.rows
    }

    pub fn tensors(&self) -> [&Matrix; 9] {
        [&self.w_z, &self.u_z, &self.b_z, &self.w_r, &self.u_r, &self.b_r, &self.w_c, &self.u_c, &self.b_c]
    }

    pub fn tensors_mut(&mut self) -> [&mut Matrix; 9] {
        [
            &mut self.w_z,
            &mut self.u_z,
            &mut self.b_z,
            &mut self.w_r,
            &mut self.u_r,
            &mut self.b_r,
            &mut self.w_c,
            &mut self.u_c,
            &mut self.b_c,
        ]
    }

    pub fn forward(&self, h: &[f64], x: &[f64]) -> Vec<f64> {
        self.forward_cached(h, x).h
    }

    pub fn forward_cached(&self, h: &[f64], x: &[f64]) -> GruCache {
        let n = self.hidden_dim();
        let mut z = self.b_z.data.clone();
        self.w_z.mul_add(x, &mut z);
        self.u_z.mul_add(h, &mut z);
        z.iter_mut().for_each(|v| *v = logistic(*v));

        let mut r = self.b_r.data.clone();
        self.w_r.mul_add(x, &mut r);
        self.u_r.mul_add(h, &mut r);
        r.iter_mut().for_each(|v| *v = logistic(*v));

        let rh: Vec<f64> = r.iter().zip(h).map(|(a, b)| a * b).collect();
        let mut c = self.b_c.data.clone();
        self.w_c.mul_add(x, &mut c);
        self.u_c.mul_add(&rh, &mut c);
        c.iter_mut().for_each(|v| *v = v.tanh());

        let h_new = (0..n).map(|i| (1.0 - z[i]) * h[i] + z[i] * c[i]).collect();
        GruCache {
            h_prev: h.to_vec(),
            x: x.to_vec(),
            z,
            r,
            rh,
            c,
            h: h_new,
        }
    }

    /// Accumulates parameter gradients into `grad` and returns `∂L/∂h_prev`.
    pub fn backward(&self, cache: &GruCache, dh: &[f64], grad: &mut GruParams) -> Vec<f64> {
        let n = self.hidden_dim();
        let mut dh_prev: Vec<f64> = (0..n).map(|i| dh[i] * (1.0 - cache.z[i])).collect();

        let da_c: Vec<f64> = (0..n)
            .map(|i| dh[i] * cache.z[i] * (1.0 - cache.c[i] * cache.c[i]))
            .collect();
        let da_z: Vec<f64> = (0..n)
            .map(|i| dh[i] * (cache.c[i] - cache.h_prev[i]) * cache.z[i] * (1.0 - cache.z[i]))
            .collect();

        grad.w_c.outer_add(&da_c, &cache.x);
        grad.u_c.outer_add(&da_c, &cache.rh);
        grad.b_c.add_vec(&da_c);
        let mut d_rh = vec![0.0; n];
        self.u_c.mul_t_add(&da_c, &mut d_rh);

        let da_r: Vec<f64> = (0..n)
            .map(|i| d_rh[i] * cache.h_prev[i] * cache.r[i] * (1.0 - cache.r[i]))
            .collect();
        for i in 0..n {
            dh_prev[i] += d_rh[i] * cache.r[i];
        }

        grad.w_r.outer_add(&da_r, &cache.x);
        grad.u_r.outer_add(&da_r, &cache.h_prev);
        grad.b_r.add_vec(&da_r);
        self.u_r.mul_t_add(&da_r, &mut dh_prev);

        grad.w_z.outer_add(&da_z, &cache.x);
        grad.u_z.outer_add(&da_z, &cache.h_prev);
        grad.b_z.add_vec(&da_z);
        self.u_z.mul_t_add(&da_z, &mut dh_prev);

        dh_prev
    }
}

/// `q = W2·atan(W1·h + b1) + b2`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QHeadParams {
    pub w1: Matrix,
    pub b1: Matrix,
    pub w2: Matrix,
    pub b2: Matrix,
}

#[derive(Clone, Debug, Default)]
pub struct HeadCache {
    pub h: Vec<f64>,
    pub pre: Vec<f64>,
    pub act: Vec<f64>,
    pub q: Vec<f64>,
}

impl QHeadParams {
    pub fn zeros(hidden: usize, width: usize, actions: usize) -> Self {
        Self {
            w1: Matrix::zeros(width, hidden),
            b1: Matrix::zeros(width, 1),
            w2: Matrix::zeros(actions, width),
            b2: Matrix::zeros(actions, 1),
        }
    }

    /// Uniform in `±1/√fan_in` per layer.
    pub fn init(hidden: usize, width: usize, actions: usize, rng: &mut Rng) -> Self {
        let b1 = 1.0 / (hidden as f64).sqrt();
        let b2 = 1.0 / (width as f64).sqrt();
        Self {
            w1: Matrix::uniform(width, hidden, b1, rng),
            b1: Matrix::uniform(width, 1, b1, rng),
            w2: Matrix::uniform(actions, width, b2, rng),
            b2: Matrix::uniform(actions, 1, b2, rng),
        }
    }

    pub fn action_count(&self) -> usize {
        self.w2.rows
    }

    pub fn tensors(&self) -> [&Matrix; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    pub fn tensors_mut(&mut self) -> [&mut Matrix; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    pub fn q_values(&self, h: &[f64]) -> Vec<f64> {
        self.forward_cached(h).q
    }

    pub fn forward_cached(&self, h: &[f64]) -> HeadCache {
        let mut pre = self.b1.data.clone();
        self.w1.mul_add(h, &mut pre);
        let act: Vec<f64> = pre.iter().map(|v| v.atan()).collect();
        let mut q = self.b2.data.clone();
        self.w2.mul_add(&act, &mut q);
        HeadCache {
            h: h.to_vec(),
            pre,
            act,
            q,
        }
    }

    /// Accumulates gradients for `∂L/∂q = dq` and returns `∂L/∂h`.
    pub fn backward(&self, cache: &HeadCache, dq: &[f64], grad: &mut QHeadParams) -> Vec<f64> {
        grad.w2.outer_add(dq, &cache.act);
        grad.b2.add_vec(dq);
        let mut d_act = vec![0.0; cache.act.len()];
        self.w2.mul_t_add(dq, &mut d_act);
        let d_pre: Vec<f64> = d_act
            .iter()
            .zip(&cache.pre)
            .map(|(d, u)| d / (1.0 + u * u))
            .collect();
        grad.w1.outer_add(&d_pre, &cache.h);
        grad.b1.add_vec(&d_pre);
        let mut dh = vec![0.0; cache.h.len()];
        self.w1.mul_t_add(&d_pre, &mut dh);
        dh
    }
}

/// GRU memory followed by the Q-head.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QNetwork {
    pub gru: GruParams,
    pub head: QHeadParams,
}

impl QNetwork {
    pub fn zeros(input: usize, hidden: usize, width: usize, actions: usize) -> Self {
        Self {
            gru: GruParams::zeros(input, hidden),
            head: QHeadParams::zeros(hidden, width, actions),
        }
    }

    pub fn init(input: usize, hidden: usize, width: usize, actions: usize, rng: &mut Rng) -> Self {
        Self {
            gru: GruParams::init(input, hidden, rng),
            head: QHeadParams::init(hidden, width, actions, rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(
            self.gru.input_dim(),
            self.gru.hidden_dim(),
            self.head.w1.rows,
            self.head.action_count(),
        )
    }

    pub fn tensors(&self) -> Vec<&Matrix> {
        let mut v: Vec<&Matrix> = self.gru.tensors().into();
        v.extend(self.head.tensors());
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut v: Vec<&mut Matrix> = self.gru.tensors_mut().into();
        v.extend(self.head.tensors_mut());
        v
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    /// Hidden states after consuming each input in turn, starting from zero.
    pub fn unroll<'a>(&self, inputs: impl IntoIterator<Item = &'a [f64]>) -> Vec<Vec<f64>> {
        let mut h = vec![0.0; self.gru.hidden_dim()];
        inputs
            .into_iter()
            .map(|x| {
                h = self.gru.forward(&h, x);
                h.clone()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn zero_gru_keeps_zero_state() {
        let gru = GruParams::zeros(7, 32);
        let cache = gru.forward_cached(&vec![0.0; 32], &[1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0]);
        assert!(cache.h.iter().all(|&v| v == 0.0));
        assert!(cache.z.iter().all(|&v| v == 0.5));
        assert!(cache.c.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gru_output_is_a_bounded_interpolation() {
        let mut rng = seed::stream(1, "gru", 0);
        let gru = GruParams::init(5, 8, &mut rng);
        for _ in 0..200 {
            let h: Vec<f64> = (0..8).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let x: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let out = gru.forward(&h, &x);
            assert_eq!(out, gru.forward(&h, &x));
            for (o, hi) in out.iter().zip(&h) {
                assert!(o.abs() <= hi.abs().max(1.0) + 1e-12);
            }
        }
    }

    #[test]
    fn zero_head_outputs_zero() {
        let head = QHeadParams::zeros(32, 32, 4);
        assert_eq!(head.q_values(&vec![0.3; 32]), vec![0.0; 4]);
    }

    #[test]
    fn head_output_width_matches_action_count() {
        let mut rng = seed::stream(2, "head", 0);
        assert_eq!(QHeadParams::init(32, 32, 4, &mut rng).q_values(&[0.0; 32]).len(), 4);
        assert_eq!(QHeadParams::init(32, 32, 8, &mut rng).q_values(&[0.0; 32]).len(), 8);
    }
}
