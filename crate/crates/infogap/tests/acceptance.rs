//! The nine acceptance checks, one test per check, each printing a single
//! [PASS]/[FAIL] line (visible with `--nocapture`) before asserting. Run
//! with `cargo test --test acceptance`.
//!
//! Budgets are generous on purpose; every check also prints its wall time so
//! regressions show up in the log before they hit the limit.

use std::path::PathBuf;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;

use infogap::bound::{l2_concentration, phi, phi_growth_bound};
use infogap::classifier::{exact_loss_binary, sample_loss, SoftmaxDecoder};
use infogap::data::LabeledDataset;
use infogap::encoders::{kl_rbm, lognormal_kl_term, RbmEncoder, StochasticEncoder, ALPHA_CAP};
use infogap::harness::{
    decoder_ce_grads, gaussian_kl_grads, lambda_sweep, lognormal_kl_grads, ExperimentConfig,
    TestVariant,
};
use infogap::mi::mi_bound;
use infogap::nn::{Activation, Mat, Mlp};
use infogap::oracle::{
    assemble_world_bound, brute_force_mi, exact_gap_distribution, DiscreteWorld,
};
use infogap::quantizer::{epsilon_r_hat, loss_kmeans, sweep_k};
use infogap::rng;

fn mnist_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist")
}

fn mnist_config() -> ExperimentConfig {
    let d = mnist_dir();
    ExperimentConfig {
        train_images: d.join("train-images-idx3-ubyte.gz"),
        train_labels: d.join("train-labels-idx1-ubyte.gz"),
        test_images: d.join("t10k-images-idx3-ubyte.gz"),
        test_labels: d.join("t10k-labels-idx1-ubyte.gz"),
        ..ExperimentConfig::default()
    }
}

fn verdict(idx: usize, name: &str, passed: bool, detail: String, t0: Instant, budget_s: u64) {
    let elapsed = t0.elapsed().as_secs_f64();
    let in_budget = elapsed <= budget_s as f64;
    let tag = if passed && in_budget { "[PASS]" } else { "[FAIL]" };
    println!("{tag} {idx}/9 {name}: {detail} ({elapsed:.1}s of {budget_s}s budget)");
    assert!(passed, "{name}: {detail}");
    assert!(in_budget, "{name} exceeded its {budget_s}s budget: {elapsed:.1}s");
}

/// 1. The squared variational bound dominates brute-force mutual information
/// on 100 random small discrete worlds.
#[test]
fn a1_mi_bound_dominates_brute_force() {
    let t0 = Instant::now();
    let mut worst = f64::INFINITY;
    for i in 0..100u64 {
        let world = DiscreteWorld::random(
            rng::splitmix64(0xACC1 ^ i),
            2 + (i % 7) as usize, // |X| <= 8
            1 + (i % 4) as usize,
            1 + (i % 3) as usize, // m <= 3
            3,
            64,
        )
        .unwrap();
        let exact = brute_force_mi(&world).unwrap();
        let ds = world.materialize().unwrap();
        let enc = StochasticEncoder::Rbm(world.encoder.clone());
        let est = mi_bound(&enc, &ds).unwrap();
        worst = worst.min(est.sqrt_bound * est.sqrt_bound - exact);
    }
    verdict(
        1,
        "variational MI bound dominates brute force",
        worst >= -1e-9,
        format!("min(bound^2 - exact MI) = {worst:.3e} over 100 worlds"),
        t0,
        60,
    );
}

/// 2. Closed-form per-unit KL values match independently computed hand
/// values to 1e-10 and stay nonnegative over 1000 random draws.
#[test]
fn a2_kl_closed_forms() {
    let t0 = Instant::now();
    let mut max_err: f64 = 0.0;

    // Diagonal Gaussian vs standard normal at mu = 0.5, variance 0.64.
    let (kl, _, _) = gaussian_kl_grads(&[0.5], &[0.64f64.ln()]);
    max_err = max_err.max((kl - 0.16814355131420976).abs());

    // Log-normal pair at log f = 0.3, alpha = 0.5 vs prior (0.1, sigma 2).
    let kl = lognormal_kl_term(0.3, 0.5, 0.1, 2.0);
    max_err = max_err.max((kl - 0.92254436111989062).abs());

    // One Bernoulli unit, weight 2 and bias -1, two equiprobable inputs
    // {0, 1}: activations sigmoid(-1), sigmoid(1), prior their average.
    let mut enc = RbmEncoder::new(1, 1, &mut rng::stream(1));
    enc.weights.data = vec![2.0];
    enc.hidden_bias = vec![-1.0];
    let ds = LabeledDataset::new(vec![0.0, 1.0], vec![0, 1], 1, 1, 2).unwrap();
    let kl = kl_rbm(&enc, &ds).unwrap()[0];
    max_err = max_err.max((kl - 0.11094407167172735).abs());

    // Nonnegativity across the three families, 1000 draws total.
    let mut min_kl = f64::INFINITY;
    let mut r = rng::stream(0xACC2);
    for _ in 0..350 {
        let mu: Vec<f64> = (0..3).map(|_| r.gen_range(-3.0..3.0)).collect();
        let lv: Vec<f64> = (0..3).map(|_| r.gen_range(-3.0..3.0)).collect();
        min_kl = min_kl.min(gaussian_kl_grads(&mu, &lv).0);
    }
    for _ in 0..350 {
        let kl = lognormal_kl_term(
            r.gen_range(-2.0..2.0),
            r.gen_range(1e-3..ALPHA_CAP),
            r.gen_range(-2.0..2.0),
            r.gen_range(0.2..3.0),
        );
        min_kl = min_kl.min(kl);
    }
    for i in 0..300 {
        let mut rr = rng::substream(0xACC2, i);
        let enc = RbmEncoder::new(2, 1, &mut rr);
        let images: Vec<f32> = (0..8).map(|_| rr.gen_range(0.0..1.0)).collect();
        let ds = LabeledDataset::new(images, vec![0, 1, 0, 1], 1, 2, 2).unwrap();
        min_kl = min_kl.min(kl_rbm(&enc, &ds).unwrap()[0]);
    }

    verdict(
        2,
        "closed-form KL estimators",
        max_err <= 1e-10 && min_kl >= -1e-12,
        format!("max hand-value error {max_err:.2e}, min KL over 1000 draws {min_kl:.2e}"),
        t0,
        60,
    );
}

fn rel_err(fd: f64, an: f64) -> f64 {
    let scale = fd.abs().max(an.abs());
    if scale < 1e-7 {
        0.0 // both vanish; nothing to compare at this precision
    } else {
        (fd - an).abs() / scale
    }
}

/// 2. Worst relative error of analytic vs central-difference gradients for a
/// smooth two-layer network with a linear readout.
fn mlp_fd_worst(seed: u64) -> f64 {
    let mut r = rng::stream(seed);
    let mut mlp = Mlp::new(&[3, 5, 2], &[Activation::Softplus, Activation::Sigmoid], &mut r);
    let x: Vec<f64> = (0..3).map(|_| r.gen_range(-1.0..1.0)).collect();
    let w_out: Vec<f64> = (0..2).map(|_| r.gen_range(-1.0..1.0)).collect();
    let value = |m: &Mlp| -> f64 { m.forward(&x).iter().zip(&w_out).map(|(o, w)| o * w).sum() };

    let trace = mlp.forward_trace(&x);
    let (grads, _) = mlp.backward(&trace, &w_out);

    let eps = 1e-6;
    let mut worst: f64 = 0.0;
    for li in 0..mlp.layers.len() {
        for wi in 0..mlp.layers[li].w.data.len() {
            let orig = mlp.layers[li].w.data[wi];
            mlp.layers[li].w.data[wi] = orig + eps;
            let plus = value(&mlp);
            mlp.layers[li].w.data[wi] = orig - eps;
            let minus = value(&mlp);
            mlp.layers[li].w.data[wi] = orig;
            worst = worst.max(rel_err((plus - minus) / (2.0 * eps), grads[li].dw.data[wi]));
        }
        for bi in 0..mlp.layers[li].b.len() {
            let orig = mlp.layers[li].b[bi];
            mlp.layers[li].b[bi] = orig + eps;
            let plus = value(&mlp);
            mlp.layers[li].b[bi] = orig - eps;
            let minus = value(&mlp);
            mlp.layers[li].b[bi] = orig;
            worst = worst.max(rel_err((plus - minus) / (2.0 * eps), grads[li].db[bi]));
        }
    }
    worst
}

fn kl_fd_worst(seed: u64) -> f64 {
    let mut r = rng::stream(seed);
    let eps = 1e-6;
    let mut worst: f64 = 0.0;

    let mu: Vec<f64> = (0..3).map(|_| r.gen_range(-2.0..2.0)).collect();
    let lv: Vec<f64> = (0..3).map(|_| r.gen_range(-2.0..2.0)).collect();
    let (_, dmu, dlv) = gaussian_kl_grads(&mu, &lv);
    for j in 0..3 {
        let mut p = mu.clone();
        p[j] += eps;
        let mut m = mu.clone();
        m[j] -= eps;
        let fd = (gaussian_kl_grads(&p, &lv).0 - gaussian_kl_grads(&m, &lv).0) / (2.0 * eps);
        worst = worst.max(rel_err(fd, dmu[j]));
        let mut p = lv.clone();
        p[j] += eps;
        let mut m = lv.clone();
        m[j] -= eps;
        let fd = (gaussian_kl_grads(&mu, &p).0 - gaussian_kl_grads(&mu, &m).0) / (2.0 * eps);
        worst = worst.max(rel_err(fd, dlv[j]));
    }

    let f: Vec<f64> = (0..2).map(|_| r.gen_range(0.2..3.0)).collect();
    let a: Vec<f64> = (0..2).map(|_| r.gen_range(0.05..ALPHA_CAP)).collect();
    let pm: Vec<f64> = (0..2).map(|_| r.gen_range(-1.0..1.0)).collect();
    let ps: Vec<f64> = (0..2).map(|_| r.gen_range(-1.0..1.0)).collect();
    let at = |f: &[f64], a: &[f64], pm: &[f64], ps: &[f64]| lognormal_kl_grads(f, a, pm, ps).0;
    let (_, df, da, dpm, dps) = lognormal_kl_grads(&f, &a, &pm, &ps);
    for j in 0..2 {
        for which in 0..4usize {
            let base = match which {
                0 => &f,
                1 => &a,
                2 => &pm,
                _ => &ps,
            };
            let mut p = base.clone();
            p[j] += eps;
            let mut m = base.clone();
            m[j] -= eps;
            let (vp, vm) = match which {
                0 => (at(&p, &a, &pm, &ps), at(&m, &a, &pm, &ps)),
                1 => (at(&f, &p, &pm, &ps), at(&f, &m, &pm, &ps)),
                2 => (at(&f, &a, &p, &ps), at(&f, &a, &m, &ps)),
                _ => (at(&f, &a, &pm, &p), at(&f, &a, &pm, &m)),
            };
            let an = match which {
                0 => df[j],
                1 => da[j],
                2 => dpm[j],
                _ => dps[j],
            };
            worst = worst.max(rel_err((vp - vm) / (2.0 * eps), an));
        }
    }
    worst
}

fn ce_fd_worst(seed: u64) -> f64 {
    let mut r = rng::stream(seed);
    let mut dec = SoftmaxDecoder::new(4, 3, &mut r);
    let u: Vec<f64> = (0..3).map(|_| r.gen_range(-1.5..1.5)).collect();
    let y = r.gen_range(0..4u8);
    let (_, dw, db, du) = decoder_ce_grads(&dec, &u, y);
    let eps = 1e-6;
    let mut worst: f64 = 0.0;
    let loss = |d: &SoftmaxDecoder, u: &[f64]| -d.log_probs(u)[y as usize];
    for wi in 0..dec.weights.data.len() {
        let orig = dec.weights.data[wi];
        dec.weights.data[wi] = orig + eps;
        let plus = loss(&dec, &u);
        dec.weights.data[wi] = orig - eps;
        let minus = loss(&dec, &u);
        dec.weights.data[wi] = orig;
        worst = worst.max(rel_err((plus - minus) / (2.0 * eps), dw.data[wi]));
    }
    for bi in 0..dec.biases.len() {
        let orig = dec.biases[bi];
        dec.biases[bi] = orig + eps;
        let plus = loss(&dec, &u);
        dec.biases[bi] = orig - eps;
        let minus = loss(&dec, &u);
        dec.biases[bi] = orig;
        worst = worst.max(rel_err((plus - minus) / (2.0 * eps), db[bi]));
    }
    for j in 0..u.len() {
        let mut p = u.clone();
        p[j] += eps;
        let mut m = u.clone();
        m[j] -= eps;
        worst = worst.max(rel_err((loss(&dec, &p) - loss(&dec, &m)) / (2.0 * eps), du[j]));
    }
    worst
}

/// 3. Analytic gradients of the network layers, the KL regularizers, and
/// the decoder cross-entropy agree with central finite differences to
/// relative error 1e-4 across 20 seeds each.
#[test]
fn a3_gradients_match_finite_differences() {
    let t0 = Instant::now();
    let mut worst_nn: f64 = 0.0;
    let mut worst_kl: f64 = 0.0;
    let mut worst_ce: f64 = 0.0;
    for seed in 0..20 {
        worst_nn = worst_nn.max(mlp_fd_worst(1000 + seed));
        worst_kl = worst_kl.max(kl_fd_worst(2000 + seed));
        worst_ce = worst_ce.max(ce_fd_worst(3000 + seed));
    }
    let worst = worst_nn.max(worst_kl).max(worst_ce);
    verdict(
        3,
        "gradients vs finite differences",
        worst < 1e-4,
        format!(
            "worst relative error {worst:.2e} (layers {worst_nn:.2e}, KL {worst_kl:.2e}, cross-entropy {worst_ce:.2e}) over 20 seeds each"
        ),
        t0,
        120,
    );
}

/// 4. Monte Carlo loss estimates agree with exact binary-code enumeration
/// within three standard errors on at least 47 of 50 instances.
#[test]
fn a4_monte_carlo_loss_matches_exact_enumeration() {
    let t0 = Instant::now();
    let mut hits = 0usize;
    for i in 0..50u64 {
        let mut r = rng::substream(0xACC4, i);
        let m = 1 + (i as usize % 10); // <= 10: exact enumeration applies
        let enc = RbmEncoder::new(3, m, &mut r);
        let dec = SoftmaxDecoder::new(3, m, &mut r);
        let x: Vec<f64> = (0..3).map(|_| r.gen_range(0.0..1.0)).collect();
        let y = (i % 3) as u8;
        let exact = exact_loss_binary(&enc, &dec, &x, y).unwrap();
        let est = sample_loss(
            &StochasticEncoder::Rbm(enc),
            &dec,
            &x,
            y,
            2048,
            &mut rng::substream(0xACC5, i),
        );
        let ok = if est.std_error > 0.0 {
            (est.value - exact).abs() <= 3.0 * est.std_error
        } else {
            (est.value - exact).abs() <= 1e-9
        };
        if ok {
            hits += 1;
        }
    }
    verdict(
        4,
        "Monte Carlo vs exact loss",
        hits >= 47,
        format!("{hits}/50 instances within 3 standard errors"),
        t0,
        120,
    );
}

/// 5. The vector-mean concentration bound is violated no more often than
/// delta (+2% slack) over 1e4 trials, and the phi growth bound dominates
/// phi on a grid.
#[test]
fn a5_concentration_and_phi_growth() {
    let t0 = Instant::now();
    let mut detail = String::new();
    let mut all_ok = true;

    // iid vectors in the unit ball of R^4, mean zero by symmetry.
    let dim = 4;
    for &n in &[100u64, 1000] {
        for &delta in &[0.05f64, 0.2] {
            let bound = l2_concentration(n, delta);
            let mut violations = 0usize;
            for trial in 0..10_000u64 {
                let mut r = rng::substream(0xACC5 ^ n as u64, trial);
                let mut mean = vec![0.0; dim];
                for _ in 0..n {
                    let g: Vec<f64> = (0..dim).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
                    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
                    let radius: f64 = r.gen_range(0.0f64..1.0).powf(1.0 / dim as f64);
                    for (acc, gv) in mean.iter_mut().zip(&g) {
                        *acc += gv / norm * radius;
                    }
                }
                let mean_norm =
                    mean.iter().map(|v| (v / n as f64) * (v / n as f64)).sum::<f64>().sqrt();
                if mean_norm > bound {
                    violations += 1;
                }
            }
            let rate = violations as f64 / 10_000.0;
            if rate > delta + 0.02 {
                all_ok = false;
            }
            detail.push_str(&format!("(n={n}, delta={delta}): rate {rate:.4}; "));
        }
    }

    // phi(a/sqrt(n)) <= (a/2) ln(n)/sqrt(n) + (1/e)/sqrt(n) wherever valid.
    let mut worst_slack = f64::INFINITY;
    for &a in &[0.5f64, 1.0, 2.0, 4.0] {
        for &n in &[64u64, 256, 1024, 4096, 65536] {
            if (n as f64) < a * a * std::f64::consts::E.powi(2) {
                continue;
            }
            let lhs = phi(a / (n as f64).sqrt());
            let rhs = phi_growth_bound(a, n).unwrap();
            worst_slack = worst_slack.min(rhs - lhs);
        }
    }
    if worst_slack < 0.0 {
        all_ok = false;
    }
    detail.push_str(&format!("min phi-bound slack {worst_slack:.3e}"));

    verdict(5, "concentration and phi growth bounds", all_ok, detail, t0, 120);
}

/// 6. Quantizer sanity: zero deviation with one cell per distinct row,
/// r_hat >= K always, and a three-cluster table selects K = 3.
#[test]
fn a6_quantizer_sanity() {
    let t0 = Instant::now();

    // Eight distinct rows, K = 8: every cell a singleton.
    let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
    let table = Mat::from_rows(rows);
    let part = loss_kmeans(&table, 8, 100, &mut rng::stream(5)).unwrap();
    let singleton = epsilon_r_hat(&part, &table);
    let singleton_ok = singleton.epsilon_hat == 0.0 && singleton.r_hat >= 8.0;

    // r_hat >= K on random tables for every K.
    let mut r = rng::stream(0xACC6);
    let rows: Vec<Vec<f64>> = (0..20).map(|_| (0..3).map(|_| r.gen_range(0.0..4.0)).collect()).collect();
    let table = Mat::from_rows(rows);
    let mut rhat_ok = true;
    for k in 1..=5 {
        let part = loss_kmeans(&table, k, 100, &mut rng::substream(0xACC6, k as u64)).unwrap();
        let rep = epsilon_r_hat(&part, &table);
        if rep.r_hat < part.k as f64 - 1e-12 {
            rhat_ok = false;
        }
    }

    // Three tight clusters: the tradeoff picks K = 3.
    let centers = [[0.0, 0.0], [5.0, 5.0], [10.0, 0.0]];
    let mut rows = Vec::new();
    let mut r = rng::stream(0xACC7);
    for c in &centers {
        for _ in 0..10 {
            rows.push(vec![c[0] + r.gen_range(-0.2..0.2), c[1] + r.gen_range(-0.2..0.2)]);
        }
    }
    let table = Mat::from_rows(rows);
    let (_, chosen) = sweep_k(&table, &[1, 2, 3, 4, 5, 6], 0.5, 100, 99).unwrap();

    verdict(
        6,
        "quantizer estimators",
        singleton_ok && rhat_ok && chosen == 3,
        format!(
            "singleton deviation {} (r_hat {}), r_hat >= K everywhere: {rhat_ok}, three-cluster choice K = {chosen}",
            singleton.epsilon_hat, singleton.r_hat
        ),
        t0,
        60,
    );
}

/// 7. The assembled bound covers the exact gap in at least 95% of 1000
/// draws of a 1000-sample testing set from a known discrete world.
#[test]
fn a7_assembled_bound_coverage() {
    let t0 = Instant::now();
    let world = DiscreteWorld::random(0xACC8, 8, 4, 3, 3, 256).unwrap();
    let dec = SoftmaxDecoder::new(4, 3, &mut rng::stream(0xDEC0));
    let report = assemble_world_bound(&world, &dec, 1000, 0.05, &[1, 2, 4, 8, 16], 0xCAFE).unwrap();
    let coverage =
        exact_gap_distribution(&world, &dec, 1000, 1000, 0xC0F_FEE, report.total).unwrap();
    verdict(
        7,
        "assembled bound coverage",
        coverage >= 0.95,
        format!("coverage {coverage:.3} at delta 0.05 (bound total {:.4})", report.total),
        t0,
        300,
    );
}

/// 8. Desk-scale regularization sweep on MNIST: seed-averaged MI is
/// nonincreasing in lambda (at most one inversion), and the 0.95 gap
/// quantile at the largest lambda does not exceed the smallest lambda's,
/// on the clean and the perturbed testing variant alike.
#[test]
fn a8_mnist_sweep_mi_vs_gap() {
    let t0 = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let config = ExperimentConfig {
        hidden: 64,
        epochs: 100,
        learning_rate: Some(0.003),
        out_dir: dir.path().join("out"),
        ..mnist_config()
    };
    let grid = config.effective_lambda_grid();
    assert_eq!(grid.len(), 6, "six log-spaced regularization weights");
    assert_eq!(config.seeds.len(), 3);
    assert_eq!(config.train_size, 2000);

    let artifact = lambda_sweep(&config).unwrap();
    assert!(
        artifact.failures.is_empty(),
        "sweep failures: {:?}",
        artifact.failures
    );
    infogap::harness::emit_report(&artifact, &config.out_dir).unwrap();

    let series = |variant: TestVariant| -> (Vec<f64>, Vec<f64>) {
        let mi = grid
            .iter()
            .map(|&l| {
                artifact
                    .aggregates
                    .iter()
                    .find(|a| a.lambda == l && a.variant == variant)
                    .expect("aggregate for every grid point")
                    .mean_mi_sqrt_bound
            })
            .collect();
        let gap = grid
            .iter()
            .map(|&l| {
                artifact
                    .aggregates
                    .iter()
                    .find(|a| a.lambda == l && a.variant == variant)
                    .unwrap()
                    .mean_gap_quantile
            })
            .collect();
        (mi, gap)
    };
    let (mi_clean, gap_clean) = series(TestVariant::Clean);
    let (mi_pert, gap_pert) = series(TestVariant::Perturbed);

    let inversions =
        |s: &[f64]| s.windows(2).filter(|w| w[1] > w[0] + 1e-12).count();
    let inv_clean = inversions(&mi_clean);
    let inv_pert = inversions(&mi_pert);
    let gap_ok_clean = gap_clean[grid.len() - 1] <= gap_clean[0];
    let gap_ok_pert = gap_pert[grid.len() - 1] <= gap_pert[0];

    let fmt = |s: &[f64]| s.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(", ");
    verdict(
        8,
        "MNIST sweep: MI falls with lambda and the gap follows",
        inv_clean <= 1 && inv_pert <= 1 && gap_ok_clean && gap_ok_pert,
        format!(
            "MI clean [{}] ({inv_clean} inversions), MI perturbed [{}] ({inv_pert} inversions), gap clean [{}], gap perturbed [{}]",
            fmt(&mi_clean),
            fmt(&mi_pert),
            fmt(&gap_clean),
            fmt(&gap_pert)
        ),
        t0,
        1800,
    );
}

/// 9. Re-running a sweep with the same seeds reproduces runs.csv (modulo
/// the wall-time column), aggregates.csv, and config.json byte for byte.
#[test]
fn a9_reports_are_byte_reproducible() {
    let t0 = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let config = ExperimentConfig {
        lambda_grid: vec![1e-3, 1.0],
        seeds: vec![1, 2],
        train_size: 300,
        reference_size: 200,
        mini_test_size: 50,
        hidden: 32,
        latent_dim: 8,
        epochs: 3,
        decoder_epochs: 3,
        mc_samples: 4,
        quant_bank: 64,
        k_grid: vec![1, 2, 4, 8],
        eta_probes: 32,
        out_dir: dir.path().join("out1"),
        ..mnist_config()
    };
    let a = lambda_sweep(&config).unwrap();
    let files_a = infogap::harness::emit_report(&a, dir.path().join("out1")).unwrap();
    let b = lambda_sweep(&config).unwrap();
    let files_b = infogap::harness::emit_report(&b, dir.path().join("out2")).unwrap();

    let read = |p: &PathBuf| std::fs::read_to_string(p).unwrap();
    // runs.csv: drop the trailing wall-time column, compare the rest.
    let strip = |text: String| -> String {
        text.lines().map(|l| l.rsplit_once(',').unwrap().0.to_string()).collect::<Vec<_>>().join("\n")
    };
    let runs_match = strip(read(&files_a[0])) == strip(read(&files_b[0]));
    let aggs_match = read(&files_a[1]) == read(&files_b[1]);
    let config_match = read(&files_a[2]) == read(&files_b[2]);
    let n_records = a.records.len();

    verdict(
        9,
        "byte-reproducible reports",
        runs_match && aggs_match && config_match && n_records == 8,
        format!(
            "runs.csv (sans wall time) identical: {runs_match}, aggregates.csv identical: {aggs_match}, config.json identical: {config_match}, {n_records} records"
        ),
        t0,
        300,
    );
}
