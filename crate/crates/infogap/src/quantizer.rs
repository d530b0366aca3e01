//! Loss-space quantization: partition the samples by their per-label loss
//! rows (k-means-like iteration under the max-abs metric), estimate the
//! within-cell loss deviation and the inverse minimum cell mass, sweep the
//! cell count against an information term, and build the quantized
//! distributions (cell-label joint, code marginal, induced decoder table)
//! the gap bound needs.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::encoders::{CondDist, StochasticEncoder};
use crate::error::{Error, Result};
use crate::nn::{logsumexp, Mat};
use crate::rng;

/// A cell assignment of samples with per-label loss centroids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    /// Number of (nonempty) cells.
    pub k: usize,
    /// Sample index -> cell index, cell indices dense in 0..k.
    pub assignment: Vec<usize>,
    /// k x |Y|: mean loss row of each cell's members.
    pub loss_centroids: Mat,
    pub cell_counts: Vec<usize>,
}

/// The two quantization estimators at one cell count, plus the tradeoff
/// objective once an information term is supplied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizationReport {
    pub k: usize,
    /// Largest |loss(sample) - loss(centroid)| over samples and labels.
    pub epsilon_hat: f64,
    /// Inverse minimum cell mass, n / min cell count.
    pub r_hat: f64,
    /// 2 * epsilon_hat + mi_term * r_hat; None until a sweep fills it in.
    pub objective: Option<f64>,
}

/// Max-abs distance between two loss rows.
#[inline]
fn chebyshev(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn nearest_centroid(row: &[f64], centroids: &Mat) -> (usize, f64) {
    let mut best = (0usize, f64::INFINITY);
    for c in 0..centroids.rows {
        let d = chebyshev(row, centroids.row(c));
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn cell_means(loss_table: &Mat, assignment: &[usize], k: usize) -> (Mat, Vec<usize>) {
    let y = loss_table.cols;
    let mut sums = Mat::zeros(k, y);
    let mut counts = vec![0usize; k];
    for (i, &c) in assignment.iter().enumerate() {
        counts[c] += 1;
        for j in 0..y {
            *sums.at_mut(c, j) += loss_table.at(i, j);
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            let inv = 1.0 / counts[c] as f64;
            for j in 0..y {
                *sums.at_mut(c, j) *= inv;
            }
        }
    }
    (sums, counts)
}

/// Largest sample-to-centroid deviation under the current assignment.
fn max_deviation(loss_table: &Mat, assignment: &[usize], centroids: &Mat) -> f64 {
    (0..loss_table.rows)
        .map(|i| chebyshev(loss_table.row(i), centroids.row(assignment[i])))
        .fold(0.0, f64::max)
}

/// Alternating coloring/centroid iteration over loss rows.
///
/// Initialization is k-means++-style under the max-abs metric. An empty cell
/// re-seeds from the currently worst-fitting sample. The iteration stops at
/// an assignment fixed point or after `max_iters` rounds, whichever comes
/// first, and the best assignment seen (smallest max deviation) wins. Empty
/// cells are pruned from the result, so `k` may come back smaller than asked.
pub fn loss_kmeans(loss_table: &Mat, k: usize, max_iters: usize, rng: &mut ChaCha8Rng) -> Result<Partition> {
    let n = loss_table.rows;
    if k == 0 || k > n {
        return Err(Error::config(format!("cell count {k} must lie in 1..={n}")));
    }
    if loss_table.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("loss table contains non-finite entries"));
    }

    // Seeding: first centroid uniform, then rows weighted by squared distance
    // to the nearest chosen centroid.
    let mut centroid_rows: Vec<usize> = vec![rng.gen_range(0..n)];
    let mut dist: Vec<f64> = (0..n)
        .map(|i| chebyshev(loss_table.row(i), loss_table.row(centroid_rows[0])))
        .collect();
    while centroid_rows.len() < k {
        let total: f64 = dist.iter().map(|d| d * d).sum();
        let pick = if total > 0.0 {
            let mut t = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, d) in dist.iter().enumerate() {
                t -= d * d;
                if t <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.gen_range(0..n) // all residual distances zero: any row works
        };
        centroid_rows.push(pick);
        for i in 0..n {
            dist[i] = dist[i].min(chebyshev(loss_table.row(i), loss_table.row(pick)));
        }
    }
    let mut centroids = Mat::zeros(k, loss_table.cols);
    for (c, &row) in centroid_rows.iter().enumerate() {
        centroids.data[c * loss_table.cols..(c + 1) * loss_table.cols]
            .copy_from_slice(loss_table.row(row));
    }

    let mut assignment = vec![0usize; n];
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..max_iters.max(1) {
        // Coloring: each sample to its nearest centroid (ties to the lowest
        // cell index via strict improvement).
        let mut changed = false;
        for i in 0..n {
            let (c, _) = nearest_centroid(loss_table.row(i), &centroids);
            if assignment[i] != c {
                assignment[i] = c;
                changed = true;
            }
        }

        // Empty cells re-seed from the worst-fitting sample.
        let (mut means, mut counts) = cell_means(loss_table, &assignment, k);
        for c in 0..k {
            if counts[c] == 0 {
                let worst = (0..n)
                    .max_by(|&a, &b| {
                        chebyshev(loss_table.row(a), means.row(assignment[a]))
                            .total_cmp(&chebyshev(loss_table.row(b), means.row(assignment[b])))
                    })
                    .expect("nonempty table");
                assignment[worst] = c;
                changed = true;
                let refreshed = cell_means(loss_table, &assignment, k);
                means = refreshed.0;
                counts = refreshed.1;
            }
        }

        centroids = means;
        let score = max_deviation(loss_table, &assignment, &centroids);
        if best.as_ref().is_none_or(|(b, _)| score < *b) {
            best = Some((score, assignment.clone()));
        }
        if !changed {
            break;
        }
    }

    let (_, best_assignment) = best.expect("at least one iteration ran");
    // Prune empty cells and compact indices.
    let (_, counts) = cell_means(loss_table, &best_assignment, k);
    let mut remap = vec![usize::MAX; k];
    let mut next = 0usize;
    for c in 0..k {
        if counts[c] > 0 {
            remap[c] = next;
            next += 1;
        }
    }
    let assignment: Vec<usize> = best_assignment.iter().map(|&c| remap[c]).collect();
    let (loss_centroids, cell_counts) = cell_means(loss_table, &assignment, next);
    Ok(Partition { k: next, assignment, loss_centroids, cell_counts })
}

/// The deviation and inverse-minimum-mass estimators of a partition.
pub fn epsilon_r_hat(partition: &Partition, loss_table: &Mat) -> QuantizationReport {
    assert_eq!(partition.assignment.len(), loss_table.rows, "partition does not cover the table");
    let epsilon_hat = max_deviation(loss_table, &partition.assignment, &partition.loss_centroids);
    let min_count = partition.cell_counts.iter().copied().min().unwrap_or(1).max(1);
    let r_hat = loss_table.rows as f64 / min_count as f64;
    QuantizationReport { k: partition.k, epsilon_hat, r_hat, objective: None }
}

/// Evaluates 2 * epsilon_hat(K) + mi_term * r_hat(K) over a grid of cell
/// counts; returns every report (grid order) plus the minimizing K, ties
/// going to the smallest K. Each K gets its own RNG stream derived from
/// `seed`, so results do not depend on grid order.
pub fn sweep_k(
    loss_table: &Mat,
    k_grid: &[usize],
    mi_term: f64,
    max_iters: usize,
    seed: u64,
) -> Result<(Vec<QuantizationReport>, usize)> {
    if k_grid.is_empty() {
        return Err(Error::config("empty cell-count grid"));
    }
    let mut reports = Vec::with_capacity(k_grid.len());
    for &k in k_grid {
        let mut r = rng::substream(seed, k as u64);
        let part = loss_kmeans(loss_table, k, max_iters, &mut r)?;
        let mut rep = epsilon_r_hat(&part, loss_table);
        rep.objective = Some(2.0 * rep.epsilon_hat + mi_term * rep.r_hat);
        reports.push(rep);
    }
    let chosen = reports[best_report_index(&reports).expect("nonempty grid")].k;
    Ok((reports, chosen))
}

/// Index of the report with the smallest recorded objective, ties going to
/// the smaller cell count — the selection rule of [`sweep_k`], exposed so
/// callers can rebuild the winning partition from its grid entry.
pub fn best_report_index(reports: &[QuantizationReport]) -> Option<usize> {
    reports
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| {
            a.objective
                .unwrap_or(f64::INFINITY)
                .total_cmp(&b.objective.unwrap_or(f64::INFINITY))
                .then(a.k.cmp(&b.k))
        })
        .map(|(i, _)| i)
}

/// How the code marginal of a quantized model is represented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UMode {
    /// Enumerate {0,1}^m exactly (binary codes only).
    Exact,
    /// A bank of seeded draws from the quantized code marginal.
    MonteCarlo { samples: usize },
}

/// The quantization-induced distributions: cell-label joint, code support
/// with marginal weights, and the decoder table the quantized world implies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedModel {
    /// k x |Y| joint masses; sums to 1, label marginal = dataset frequencies.
    pub joint: Mat,
    /// Representative input index per (cell, label) with mass > 0.
    pub representatives: Vec<Vec<Option<usize>>>,
    /// Codes: all of {0,1}^m in exact mode, the sample bank otherwise.
    pub u_support: Vec<Vec<f64>>,
    /// Marginal mass per supported code (exact) or 1/N bank weights.
    pub u_weights: Vec<f64>,
    /// Rows parallel to u_support: the quantized conditional over labels.
    pub decoder_d: Mat,
    pub mode: UMode,
}

/// log q(u | x_rep) for each (cell, label) with mass, plus log joint masses.
struct RepDists {
    /// (cell, label, log joint mass, conditional at the representative).
    entries: Vec<(usize, usize, f64, CondDist)>,
}

fn representative_dists(
    joint: &Mat,
    reps: &[Vec<Option<usize>>],
    enc: &StochasticEncoder,
    ds: &LabeledDataset,
) -> RepDists {
    let mut entries = Vec::new();
    for k in 0..joint.rows {
        for y in 0..joint.cols {
            let mass = joint.at(k, y);
            if mass > 0.0 {
                let i = reps[k][y].expect("mass > 0 implies a representative");
                entries.push((k, y, mass.ln(), enc.condition(&ds.image_f64(i))));
            }
        }
    }
    RepDists { entries }
}

/// Builds the quantized model of a partitioned dataset under an encoder.
///
/// joint(k,y) is the fraction of samples with label y in cell k. The
/// representative of (k,y) is the medoid: the cell member with label y whose
/// loss row is closest (max-abs) to the cell centroid. The code marginal and
/// quantized decoder are mixtures over representatives, computed exactly for
/// binary codes and by a seeded sample bank otherwise; densities combine in
/// log space.
pub fn quantized_model(
    partition: &Partition,
    enc: &StochasticEncoder,
    ds: &LabeledDataset,
    loss_table: &Mat,
    mode: UMode,
    seed: u64,
) -> Result<QuantizedModel> {
    let n = ds.len();
    if partition.assignment.len() != n || loss_table.rows != n {
        return Err(Error::config("partition, dataset, and loss table sizes disagree"));
    }
    let y_card = ds.num_classes;
    let k = partition.k;

    let mut joint = Mat::zeros(k, y_card);
    for (i, &c) in partition.assignment.iter().enumerate() {
        *joint.at_mut(c, ds.labels[i] as usize) += 1.0 / n as f64;
    }

    // Medoid representative per (cell, label).
    let mut representatives: Vec<Vec<Option<usize>>> = vec![vec![None; y_card]; k];
    let mut best_dist: Vec<Vec<f64>> = vec![vec![f64::INFINITY; y_card]; k];
    for (i, &c) in partition.assignment.iter().enumerate() {
        let y = ds.labels[i] as usize;
        let d = chebyshev(loss_table.row(i), partition.loss_centroids.row(c));
        if d < best_dist[c][y] {
            best_dist[c][y] = d;
            representatives[c][y] = Some(i);
        }
    }

    let reps = representative_dists(&joint, &representatives, enc, ds);
    let m = enc.latent_dim();

    let (u_support, u_weights): (Vec<Vec<f64>>, Vec<f64>) = match mode {
        UMode::Exact => {
            let binary = reps.entries.iter().all(|(_, _, _, d)| matches!(d, CondDist::Bernoulli { .. }));
            if !binary {
                return Err(Error::config("exact code enumeration requires a binary-code encoder"));
            }
            if m > crate::classifier::EXACT_ENUM_MAX_M {
                return Err(Error::config(format!(
                    "exact code enumeration needs m <= {}, got {m}",
                    crate::classifier::EXACT_ENUM_MAX_M
                )));
            }
            let support: Vec<Vec<f64>> = (0u64..(1 << m))
                .map(|bits| (0..m).map(|j| ((bits >> j) & 1) as f64).collect())
                .collect();
            let weights = support
                .iter()
                .map(|u| {
                    reps.entries
                        .iter()
                        .map(|(_, _, lm, d)| (lm + d.log_density(u)).exp())
                        .sum()
                })
                .collect();
            (support, weights)
        }
        UMode::MonteCarlo { samples } => {
            if samples == 0 {
                return Err(Error::config("Monte Carlo code bank needs at least one sample"));
            }
            // Draw (cell,label) by joint mass, then u from its representative.
            let mut r = rng::substream(seed, 0x7175_616e);
            let mut bank = Vec::with_capacity(samples);
            for _ in 0..samples {
                let mut t = r.gen::<f64>();
                let mut pick = reps.entries.len() - 1;
                for (e, (_, _, lm, _)) in reps.entries.iter().enumerate() {
                    t -= lm.exp();
                    if t <= 0.0 {
                        pick = e;
                        break;
                    }
                }
                bank.push(reps.entries[pick].3.sample(&mut r));
            }
            let w = 1.0 / samples as f64;
            let weights = vec![w; samples];
            (bank, weights)
        }
    };

    // Quantized decoder: for each supported u, mix the per-label mass of the
    // representatives in log space and normalize across labels.
    let mut decoder_d = Mat::zeros(u_support.len(), y_card);
    for (row, u) in u_support.iter().enumerate() {
        let mut log_numer = vec![f64::NEG_INFINITY; y_card];
        for (_, y, lm, d) in &reps.entries {
            let contrib = lm + d.log_density(u);
            log_numer[*y] = logsumexp(&[log_numer[*y], contrib]);
        }
        let lse = logsumexp(&log_numer);
        for y in 0..y_card {
            *decoder_d.at_mut(row, y) = if lse.is_finite() {
                (log_numer[y] - lse).exp()
            } else {
                1.0 / y_card as f64 // zero-mass code: unused uniform row
            };
        }
    }

    Ok(QuantizedModel { joint, representatives, u_support, u_weights, decoder_d, mode })
}
