//! Minimal dense-network machinery: row-major matrices, activations,
//! single-sample forward/backward passes, and momentum SGD.
//!
//! Everything is f64 and single-threaded. Networks here are small (a few
//! hundred units), so clarity wins over blocking/vectorization tricks.
//! Gradients are exact analytic derivatives; `tests` pins them against
//! finite differences.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Mat { rows: r, cols: c, data: rows.into_iter().flatten().collect() }
    }

    /// Uniform(-1/sqrt(cols), 1/sqrt(cols)) entries; the usual fan-in scaling.
    pub fn init_uniform(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (cols.max(1) as f64).sqrt();
        let data = (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect();
        Mat { rows, cols, data }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// y = W x, x.len() == cols.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(x).map(|(w, v)| w * v).sum())
            .collect()
    }

    /// y = W^T x, x.len() == rows. Used for input gradients.
    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows, "matvec_t dimension mismatch");
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            let row = self.row(r);
            let s = x[r];
            for (o, w) in out.iter_mut().zip(row) {
                *o += w * s;
            }
        }
        out
    }
}

/// Pointwise nonlinearity applied after the affine map of a layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
    Softplus,
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable ln(1 + e^x).
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// log(sum_i exp(x_i)) without overflow; -inf for an empty slice.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = xs.iter().map(|x| (x - m).exp()).sum();
    m + s.ln()
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => sigmoid(x),
            Activation::Softplus => softplus(x),
        }
    }

    /// Derivative as a function of the pre-activation. Relu' at 0 is 0.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            Activation::Softplus => sigmoid(x),
        }
    }
}

/// Affine map plus activation: y = act(W x + b).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DenseLayer {
    pub w: Mat,
    pub b: Vec<f64>,
    pub act: Activation,
}

impl DenseLayer {
    pub fn new(out_dim: usize, in_dim: usize, act: Activation, rng: &mut ChaCha8Rng) -> Self {
        DenseLayer { w: Mat::init_uniform(out_dim, in_dim, rng), b: vec![0.0; out_dim], act }
    }

    pub fn in_dim(&self) -> usize {
        self.w.cols
    }

    pub fn out_dim(&self) -> usize {
        self.w.rows
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut z = self.w.matvec(x);
        for (zi, bi) in z.iter_mut().zip(&self.b) {
            *zi = self.act.apply(*zi + bi);
        }
        z
    }

    /// Forward keeping the pre-activation, needed for the backward pass.
    pub fn forward_trace(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut pre = self.w.matvec(x);
        for (zi, bi) in pre.iter_mut().zip(&self.b) {
            *zi += bi;
        }
        let out = pre.iter().map(|&z| self.act.apply(z)).collect();
        (pre, out)
    }

    /// Given d(loss)/d(output), returns parameter gradients and d(loss)/d(input).
    pub fn backward(&self, x: &[f64], pre: &[f64], dout: &[f64]) -> (LayerGrads, Vec<f64>) {
        let dz: Vec<f64> = dout
            .iter()
            .zip(pre)
            .map(|(&d, &z)| d * self.act.derivative(z))
            .collect();
        let mut dw = Mat::zeros(self.w.rows, self.w.cols);
        for r in 0..self.w.rows {
            let s = dz[r];
            let row = &mut dw.data[r * dw.cols..(r + 1) * dw.cols];
            for (g, xi) in row.iter_mut().zip(x) {
                *g = s * xi;
            }
        }
        let dx = self.w.matvec_t(&dz);
        (LayerGrads { dw, db: dz }, dx)
    }
}

/// Gradients for one layer's parameters.
#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub dw: Mat,
    pub db: Vec<f64>,
}

impl LayerGrads {
    pub fn zeros_like(layer: &DenseLayer) -> Self {
        LayerGrads { dw: Mat::zeros(layer.w.rows, layer.w.cols), db: vec![0.0; layer.b.len()] }
    }

    pub fn add(&mut self, other: &LayerGrads) {
        for (a, b) in self.dw.data.iter_mut().zip(&other.dw.data) {
            *a += b;
        }
        for (a, b) in self.db.iter_mut().zip(&other.db) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for a in self.dw.data.iter_mut() {
            *a *= s;
        }
        for a in self.db.iter_mut() {
            *a *= s;
        }
    }
}

/// Stack of dense layers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<DenseLayer>,
}

/// Per-layer inputs and pre-activations saved by [`Mlp::forward_trace`].
#[derive(Debug, Clone)]
pub struct MlpTrace {
    pub inputs: Vec<Vec<f64>>,
    pub pres: Vec<Vec<f64>>,
    pub out: Vec<f64>,
}

impl Mlp {
    /// dims = [in, h1, ..., out]; acts.len() == dims.len() - 1.
    pub fn new(dims: &[usize], acts: &[Activation], rng: &mut ChaCha8Rng) -> Self {
        assert_eq!(acts.len() + 1, dims.len(), "one activation per layer");
        let layers = acts
            .iter()
            .enumerate()
            .map(|(i, &act)| DenseLayer::new(dims[i + 1], dims[i], act, rng))
            .collect();
        Mlp { layers }
    }

    pub fn in_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.in_dim())
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim())
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        for layer in &self.layers {
            cur = layer.forward(&cur);
        }
        cur
    }

    pub fn forward_trace(&self, x: &[f64]) -> MlpTrace {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pres = Vec::with_capacity(self.layers.len());
        let mut cur = x.to_vec();
        for layer in &self.layers {
            inputs.push(cur.clone());
            let (pre, out) = layer.forward_trace(&cur);
            pres.push(pre);
            cur = out;
        }
        MlpTrace { inputs, pres, out: cur }
    }

    /// Backprop d(loss)/d(output) through the stack; returns per-layer grads
    /// (same order as `layers`) and d(loss)/d(input).
    pub fn backward(&self, trace: &MlpTrace, dout: &[f64]) -> (Vec<LayerGrads>, Vec<f64>) {
        let mut grads: Vec<Option<LayerGrads>> = (0..self.layers.len()).map(|_| None).collect();
        let mut d = dout.to_vec();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let (g, dx) = layer.backward(&trace.inputs[i], &trace.pres[i], &d);
            grads[i] = Some(g);
            d = dx;
        }
        (grads.into_iter().map(Option::unwrap).collect(), d)
    }

    pub fn zero_grads(&self) -> Vec<LayerGrads> {
        self.layers.iter().map(LayerGrads::zeros_like).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.data.len() + l.b.len()).sum()
    }
}

/// Knobs shared by every training loop in the crate. `lambda` weights the
/// regularizer: the KL term for the continuous encoders, the (lambda/2)
/// Frobenius penalty on W for contrastive divergence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub momentum: f64,
    pub lambda: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { lr: 0.001, momentum: 0.0, lambda: 0.0, epochs: 200, batch_size: 100 }
    }
}

/// Classical momentum: v <- momentum * v - lr * g; p <- p + v.
pub fn sgd_step(params: &mut [f64], vel: &mut [f64], grads: &[f64], lr: f64, momentum: f64) {
    debug_assert_eq!(params.len(), vel.len());
    debug_assert_eq!(params.len(), grads.len());
    for ((p, v), g) in params.iter_mut().zip(vel.iter_mut()).zip(grads) {
        *v = momentum * *v - lr * g;
        *p += *v;
    }
}

/// Momentum buffers for every parameter of an [`Mlp`].
#[derive(Debug, Clone)]
pub struct MlpVelocity {
    vw: Vec<Vec<f64>>,
    vb: Vec<Vec<f64>>,
}

impl MlpVelocity {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        MlpVelocity {
            vw: mlp.layers.iter().map(|l| vec![0.0; l.w.data.len()]).collect(),
            vb: mlp.layers.iter().map(|l| vec![0.0; l.b.len()]).collect(),
        }
    }

    pub fn step(&mut self, mlp: &mut Mlp, grads: &[LayerGrads], lr: f64, momentum: f64) {
        assert_eq!(grads.len(), mlp.layers.len());
        for (i, layer) in mlp.layers.iter_mut().enumerate() {
            sgd_step(&mut layer.w.data, &mut self.vw[i], &grads[i].dw.data, lr, momentum);
            sgd_step(&mut layer.b, &mut self.vb[i], &grads[i].db, lr, momentum);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn assert_close(actual: f64, expected: f64, tol: f64) {
        let scale = expected.abs().max(1.0);
        assert!(
            (actual - expected).abs() <= tol * scale,
            "expected {expected}, got {actual} (tol {tol})"
        );
    }

    #[test]
    fn matvec_known_values() {
        let w = Mat::from_rows(vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
        assert_eq!(w.matvec(&[1.0, -1.0]), vec![-1.0, -1.0, -1.0]);
        assert_eq!(w.matvec_t(&[1.0, 0.0, -1.0]), vec![-4.0, -4.0]);
    }

    #[test]
    fn activation_values_and_slopes() {
        assert_eq!(Activation::Relu.apply(-2.0), 0.0);
        assert_eq!(Activation::Relu.apply(3.0), 3.0);
        assert_eq!(Activation::Relu.derivative(0.0), 0.0);
        assert_close(Activation::Softplus.apply(0.0), std::f64::consts::LN_2, 1e-12);
        assert_close(Activation::Softplus.derivative(0.0), 0.5, 1e-12);
        assert_close(Activation::Sigmoid.apply(0.0), 0.5, 1e-12);
        // Extreme inputs stay finite.
        assert!(softplus(800.0).is_finite());
        assert_eq!(softplus(-800.0), 0.0);
        assert_eq!(sigmoid(-800.0), 0.0);
        assert_eq!(sigmoid(800.0), 1.0);
    }

    #[test]
    fn logsumexp_matches_direct_sum() {
        let xs = [0.1f64, -0.7, 2.3];
        let direct: f64 = xs.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert_close(logsumexp(&xs), direct, 1e-12);
        // Shift invariance at scales where direct exp would overflow.
        let big = [1000.0, 1001.0];
        assert_close(logsumexp(&big), 1001.0 + (-1f64).exp().ln_1p(), 1e-12);
        assert_close(logsumexp(&big) - 1000.0, logsumexp(&[0.0, 1.0]), 1e-12);
        assert_eq!(logsumexp(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn momentum_two_steps() {
        // lr 0.1, momentum 0.5, unit gradient twice: p = -0.1 then -0.25.
        let mut p = [0.0];
        let mut v = [0.0];
        sgd_step(&mut p, &mut v, &[1.0], 0.1, 0.5);
        assert_close(p[0], -0.1, 1e-12);
        sgd_step(&mut p, &mut v, &[1.0], 0.1, 0.5);
        assert_close(p[0], -0.25, 1e-12);
    }

    #[test]
    fn init_respects_fan_in_bound() {
        let mut r = rng::stream(11);
        let m = Mat::init_uniform(8, 16, &mut r);
        let bound = 1.0 / 4.0;
        assert!(m.data.iter().all(|w| w.abs() < bound));
        assert!(m.data.iter().any(|w| w.abs() > 1e-4));
    }

    /// Finite-difference check of the full backward pass on a smooth network.
    #[test]
    fn gradients_match_finite_differences() {
        let mut r = rng::stream(42);
        let mlp = Mlp::new(&[3, 5, 2], &[Activation::Softplus, Activation::Identity], &mut r);
        let x = [0.3, -0.8, 0.5];
        let target = [0.2, -0.4];
        let loss = |m: &Mlp| -> f64 {
            let y = m.forward(&x);
            y.iter().zip(&target).map(|(a, b)| 0.5 * (a - b) * (a - b)).sum()
        };

        let trace = mlp.forward_trace(&x);
        let dout: Vec<f64> = trace.out.iter().zip(&target).map(|(a, b)| a - b).collect();
        let (grads, _) = mlp.backward(&trace, &dout);

        let eps = 1e-6;
        for li in 0..mlp.layers.len() {
            for wi in 0..mlp.layers[li].w.data.len() {
                let mut plus = mlp.clone();
                plus.layers[li].w.data[wi] += eps;
                let mut minus = mlp.clone();
                minus.layers[li].w.data[wi] -= eps;
                let fd = (loss(&plus) - loss(&minus)) / (2.0 * eps);
                let an = grads[li].dw.data[wi];
                assert!(
                    (fd - an).abs() <= 1e-4 * fd.abs().max(1e-3),
                    "layer {li} w[{wi}]: fd {fd} vs analytic {an}"
                );
            }
            for bi in 0..mlp.layers[li].b.len() {
                let mut plus = mlp.clone();
                plus.layers[li].b[bi] += eps;
                let mut minus = mlp.clone();
                minus.layers[li].b[bi] -= eps;
                let fd = (loss(&plus) - loss(&minus)) / (2.0 * eps);
                let an = grads[li].db[bi];
                assert!(
                    (fd - an).abs() <= 1e-4 * fd.abs().max(1e-3),
                    "layer {li} b[{bi}]: fd {fd} vs analytic {an}"
                );
            }
        }
    }

    /// Input gradients are exact too (needed when chaining through sampled codes).
    #[test]
    fn input_gradient_matches_finite_differences() {
        let mut r = rng::stream(7);
        let mlp = Mlp::new(&[2, 4, 1], &[Activation::Sigmoid, Activation::Identity], &mut r);
        let x = [0.9, -0.3];
        let loss_at = |x: &[f64]| mlp.forward(x)[0].powi(2);
        let trace = mlp.forward_trace(&x);
        let dout = [2.0 * trace.out[0]];
        let (_, dx) = mlp.backward(&trace, &dout);
        let eps = 1e-6;
        for i in 0..x.len() {
            let mut xp = x;
            xp[i] += eps;
            let mut xm = x;
            xm[i] -= eps;
            let fd = (loss_at(&xp) - loss_at(&xm)) / (2.0 * eps);
            assert!((fd - dx[i]).abs() <= 1e-4 * fd.abs().max(1e-3));
        }
    }
}
