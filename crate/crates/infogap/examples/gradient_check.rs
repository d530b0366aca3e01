//! Verifies every analytic gradient against central finite differences:
//! the dense layers, the two KL regularizers, and the decoder
//! cross-entropy. Prints the worst relative error per component.
//!
//!     cargo run --release --example gradient_check

use infogap::classifier::SoftmaxDecoder;
use infogap::harness::{decoder_ce_grads, gaussian_kl_grads, lognormal_kl_grads};
use infogap::nn::{Activation, Mlp};
use infogap::rng;
use rand::Rng;

const EPS: f64 = 1e-6;

fn rel(fd: f64, an: f64) -> f64 {
    let scale = fd.abs().max(an.abs());
    if scale < 1e-7 {
        0.0
    } else {
        (fd - an).abs() / scale
    }
}

fn main() {
    let mut r = rng::stream(42);

    // A smooth two-layer network with a random linear readout.
    let mut mlp = Mlp::new(&[4, 6, 3], &[Activation::Softplus, Activation::Sigmoid], &mut r);
    let x: Vec<f64> = (0..4).map(|_| r.gen_range(-1.0..1.0)).collect();
    let w_out: Vec<f64> = (0..3).map(|_| r.gen_range(-1.0..1.0)).collect();
    let value = |m: &Mlp| -> f64 { m.forward(&x).iter().zip(&w_out).map(|(o, w)| o * w).sum() };
    let trace = mlp.forward_trace(&x);
    let (grads, _) = mlp.backward(&trace, &w_out);
    let mut worst: f64 = 0.0;
    for li in 0..mlp.layers.len() {
        for wi in 0..mlp.layers[li].w.data.len() {
            let orig = mlp.layers[li].w.data[wi];
            mlp.layers[li].w.data[wi] = orig + EPS;
            let plus = value(&mlp);
            mlp.layers[li].w.data[wi] = orig - EPS;
            let minus = value(&mlp);
            mlp.layers[li].w.data[wi] = orig;
            worst = worst.max(rel((plus - minus) / (2.0 * EPS), grads[li].dw.data[wi]));
        }
    }
    println!("network layers      worst relative error {worst:.3e}");

    // Gaussian KL against the standard normal prior.
    let mu: Vec<f64> = (0..3).map(|_| r.gen_range(-2.0..2.0)).collect();
    let lv: Vec<f64> = (0..3).map(|_| r.gen_range(-2.0..2.0)).collect();
    let (_, dmu, _) = gaussian_kl_grads(&mu, &lv);
    let mut worst: f64 = 0.0;
    for j in 0..3 {
        let mut p = mu.clone();
        p[j] += EPS;
        let mut m = mu.clone();
        m[j] -= EPS;
        let fd = (gaussian_kl_grads(&p, &lv).0 - gaussian_kl_grads(&m, &lv).0) / (2.0 * EPS);
        worst = worst.max(rel(fd, dmu[j]));
    }
    println!("gaussian KL         worst relative error {worst:.3e}");

    // Log-normal KL in all four parameter groups.
    let f = [0.8, 2.1];
    let a = [0.3, 0.65];
    let pm = [0.1, -0.2];
    let ps = [0.0, 0.4];
    let (_, df, ..) = lognormal_kl_grads(&f, &a, &pm, &ps);
    let mut worst: f64 = 0.0;
    for j in 0..2 {
        let mut p = f;
        p[j] += EPS;
        let mut m = f;
        m[j] -= EPS;
        let fd = (lognormal_kl_grads(&p, &a, &pm, &ps).0 - lognormal_kl_grads(&m, &a, &pm, &ps).0)
            / (2.0 * EPS);
        worst = worst.max(rel(fd, df[j]));
    }
    println!("log-normal KL       worst relative error {worst:.3e}");

    // Decoder cross-entropy in weights, biases, and the code.
    let dec = SoftmaxDecoder::new(4, 3, &mut r);
    let u: Vec<f64> = (0..3).map(|_| r.gen_range(-1.5..1.5)).collect();
    let (_, _, _, du) = decoder_ce_grads(&dec, &u, 2);
    let loss = |u: &[f64]| -dec.log_probs(u)[2];
    let mut worst: f64 = 0.0;
    for j in 0..3 {
        let mut p = u.clone();
        p[j] += EPS;
        let mut m = u.clone();
        m[j] -= EPS;
        worst = worst.max(rel((loss(&p) - loss(&m)) / (2.0 * EPS), du[j]));
    }
    println!("decoder CE          worst relative error {worst:.3e}");
}
