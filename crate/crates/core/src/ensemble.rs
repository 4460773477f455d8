//! FLD ensemble classifier: an odd number of Fisher linear
//! discriminants, each fit on a bootstrap sample over a random feature
//! subspace, combined by majority vote. Out-of-bag (OOB) error drives
//! the subspace-size and ensemble-size search.
//!
//! Everything is deterministic under a fixed training seed: each base
//! learner derives its own PRNG stream from `(seed, learner index)`,
//! so growing the ensemble never perturbs earlier learners.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedders::Prng;
use crate::error::{Error, Result};

/// One Fisher discriminant on a feature subspace. Classifies into
/// class 1 when `w·x[subspace] − bias > 0`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaseLearner {
    /// Sorted, unique feature indices.
    pub subspace: Vec<usize>,
    pub w: Vec<f64>,
    pub bias: f64,
}

/// A trained ensemble. `learners.len()` is odd, so majority votes
/// cannot tie.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub learners: Vec<BaseLearner>,
    pub d_sub: usize,
    pub feature_dim: usize,
    pub training_seed: u64,
    pub oob_error: f64,
}

/// Training knobs. Unset `l`/`d_sub` are searched via OOB error;
/// unset `lambda` defaults to a scale-aware `1e−6 · trace(S_w)/d`.
#[derive(Debug, Clone, Copy, Default)]
pub struct TrainParams {
    pub l: Option<usize>,
    pub d_sub: Option<usize>,
    pub lambda: Option<f64>,
    pub seed: u64,
}

/// Cholesky factorization of a symmetric positive-definite matrix
/// (row-major, n×n), in place into the lower triangle. `None` when a
/// non-positive pivot shows the matrix is not (numerically) SPD.
fn cholesky(a: &mut [f64], n: usize) -> Option<()> {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut v = a[i * n + j];
            for k in 0..j {
                v -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = v / d;
        }
    }
    Some(())
}

/// Solves `A x = b` for SPD `A` via Cholesky (forward then back
/// substitution). Consumes `a` as scratch.
fn spd_solve(mut a: Vec<f64>, b: &[f64], n: usize) -> Option<Vec<f64>> {
    cholesky(&mut a, n)?;
    // L y = b
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= a[i * n + k] * y[k];
        }
        y[i] /= a[i * n + i];
    }
    // L^T x = y
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= a[k * n + i] * y[k];
        }
        y[i] /= a[i * n + i];
    }
    Some(y)
}

fn column_means(rows: &[&[f64]], dim: usize) -> Vec<f64> {
    let mut mu = vec![0.0; dim];
    for row in rows {
        for (m, v) in mu.iter_mut().zip(*row) {
            *m += v;
        }
    }
    for m in &mut mu {
        *m /= rows.len() as f64;
    }
    mu
}

/// Adds class `rows`' covariance (1/(n−1) normalization) into `s`.
fn add_covariance(s: &mut [f64], rows: &[&[f64]], mu: &[f64], dim: usize) {
    let norm = 1.0 / (rows.len() as f64 - 1.0);
    let mut centered = vec![0.0; dim];
    for row in rows {
        for ((c, v), m) in centered.iter_mut().zip(*row).zip(mu) {
            *c = v - m;
        }
        for i in 0..dim {
            let ci = centered[i] * norm;
            if ci == 0.0 {
                continue;
            }
            for j in i..dim {
                s[i * dim + j] += ci * centered[j];
            }
        }
    }
}

/// Fits a Fisher discriminant: `w = (S_w + λI)^{−1}(μ1 − μ0)` with
/// `S_w` the sum of the two class covariances, `bias = w·(μ0+μ1)/2`.
/// If the regularized system is still numerically singular, λ is
/// escalated ×10 up to three times before giving up.
pub fn fit_fld(x0: &[&[f64]], x1: &[&[f64]], lambda: f64) -> Result<(Vec<f64>, f64)> {
    if x0.len() < 2 || x1.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "FLD needs at least 2 rows per class, got {} and {}",
            x0.len(),
            x1.len()
        )));
    }
    let dim = x0[0].len();
    if x0.iter().chain(x1).any(|r| r.len() != dim) {
        return Err(Error::Argument("feature rows have mixed widths".into()));
    }
    if lambda < 0.0 {
        return Err(Error::Argument(format!("lambda must be ≥ 0, got {lambda}")));
    }

    let mu0 = column_means(x0, dim);
    let mu1 = column_means(x1, dim);
    let mut s_w = vec![0.0; dim * dim];
    add_covariance(&mut s_w, x0, &mu0, dim);
    add_covariance(&mut s_w, x1, &mu1, dim);
    // Mirror the computed upper triangle.
    for i in 0..dim {
        for j in i + 1..dim {
            s_w[j * dim + i] = s_w[i * dim + j];
        }
    }

    let trace: f64 = (0..dim).map(|i| s_w[i * dim + i]).sum();
    let lambda = if lambda > 0.0 {
        lambda
    } else {
        // Scale-aware floor keeping λ meaningful for any feature scale;
        // a degenerate (zero/subnormal) trace falls back to an absolute
        // floor so the solve cannot overflow.
        let scaled = 1e-6 * trace / dim as f64;
        if scaled.is_normal() && scaled > 0.0 {
            scaled
        } else {
            1e-6
        }
    };
    let diff: Vec<f64> = mu1.iter().zip(&mu0).map(|(a, b)| a - b).collect();

    let mut lam = lambda;
    for _ in 0..4 {
        let mut a = s_w.clone();
        for i in 0..dim {
            a[i * dim + i] += lam;
        }
        if let Some(w) = spd_solve(a, &diff, dim) {
            // Near-singular systems can pass the factorization yet yield
            // overflowed solutions; treat those like a failed solve.
            if w.iter().all(|v| v.is_finite()) {
                let bias = w
                    .iter()
                    .zip(mu0.iter().zip(&mu1))
                    .map(|(wi, (m0, m1))| wi * (m0 + m1) / 2.0)
                    .sum();
                return Ok((w, bias));
            }
        }
        lam *= 10.0;
    }
    Err(Error::Fit(format!(
        "scatter matrix stayed singular after regularization up to {lam}"
    )))
}

/// Derives learner `idx`'s private PRNG from the training seed.
fn learner_prng(seed: u64, idx: usize) -> Prng {
    Prng::from_seed(seed ^ (idx as u64 + 1).wrapping_mul(0xA24B_AED4_963E_E407))
}

/// One trained learner plus the training-row indices it never saw.
struct FittedLearner {
    learner: BaseLearner,
    oob_rows: Vec<usize>,
}

/// Draws `d_sub` distinct feature indices and one stratified bootstrap
/// (per-class, with replacement), then fits the FLD. Row indices index
/// the concatenation `rows0 ‖ rows1`.
fn fit_one(
    idx: usize,
    rows0: &[&[f64]],
    rows1: &[&[f64]],
    d_sub: usize,
    lambda: f64,
    seed: u64,
) -> Result<FittedLearner> {
    let dim = rows0[0].len();
    let mut prng = learner_prng(seed, idx);

    // Partial Fisher–Yates: the first d_sub entries are the subspace.
    let mut pool: Vec<usize> = (0..dim).collect();
    for i in 0..d_sub {
        let j = i + prng.next_below((dim - i) as u64) as usize;
        pool.swap(i, j);
    }
    let mut subspace = pool[..d_sub].to_vec();
    subspace.sort_unstable();

    let project = |row: &[f64]| -> Vec<f64> { subspace.iter().map(|&c| row[c]).collect() };

    let mut in_bag = vec![false; rows0.len() + rows1.len()];
    let mut boot0: Vec<Vec<f64>> = Vec::with_capacity(rows0.len());
    for _ in 0..rows0.len() {
        let r = prng.next_below(rows0.len() as u64) as usize;
        in_bag[r] = true;
        boot0.push(project(rows0[r]));
    }
    let mut boot1: Vec<Vec<f64>> = Vec::with_capacity(rows1.len());
    for _ in 0..rows1.len() {
        let r = prng.next_below(rows1.len() as u64) as usize;
        in_bag[rows0.len() + r] = true;
        boot1.push(project(rows1[r]));
    }

    let b0: Vec<&[f64]> = boot0.iter().map(Vec::as_slice).collect();
    let b1: Vec<&[f64]> = boot1.iter().map(Vec::as_slice).collect();
    let (w, bias) = fit_fld(&b0, &b1, lambda)?;
    Ok(FittedLearner {
        learner: BaseLearner { subspace, w, bias },
        oob_rows: (0..in_bag.len()).filter(|&i| !in_bag[i]).collect(),
    })
}

fn learner_votes_stego(learner: &BaseLearner, row: &[f64]) -> bool {
    let score: f64 = learner
        .subspace
        .iter()
        .zip(&learner.w)
        .map(|(&c, w)| w * row[c])
        .sum();
    score - learner.bias > 0.0
}

/// OOB error of the first `count` learners: per training row, majority
/// over the learners that held it out; ties count half an error, rows
/// no learner held out are skipped.
fn oob_error(
    fitted: &[FittedLearner],
    count: usize,
    rows: &[&[f64]],
    labels: &[u8],
) -> f64 {
    let mut votes1 = vec![0u32; rows.len()];
    let mut total = vec![0u32; rows.len()];
    for f in &fitted[..count] {
        for &r in &f.oob_rows {
            total[r] += 1;
            votes1[r] += learner_votes_stego(&f.learner, rows[r]) as u32;
        }
    }
    let mut err = 0.0;
    let mut n = 0u64;
    for i in 0..rows.len() {
        if total[i] == 0 {
            continue;
        }
        n += 1;
        let pred1 = 2 * votes1[i] > total[i];
        let tie = 2 * votes1[i] == total[i];
        if tie {
            err += 0.5;
        } else if pred1 != (labels[i] == 1) {
            err += 1.0;
        }
    }
    if n == 0 {
        0.5
    } else {
        err / n as f64
    }
}

const L_START: usize = 11;
const L_MAX: usize = 101;
/// Stop growing once ten more learners improve OOB error by less than
/// this.
const L_IMPROVEMENT_EPS: f64 = 0.005;

/// Trains an ensemble on labeled feature rows (labels 0 = cover,
/// 1 = stego).
///
/// With `d_sub` unset, the power-of-two grid `{2^k : 8 ≤ 2^k ≤ dim/2}`
/// is searched by OOB error (for very low-dimensional inputs the grid
/// is empty and `max(1, dim/2)` is used). With `l` unset, the ensemble
/// grows from 11 learners in odd steps until ten additional learners
/// stop paying for themselves, capped at 101.
pub fn train(rows: &[Vec<f64>], labels: &[u8], params: &TrainParams) -> Result<EnsembleModel> {
    if rows.len() != labels.len() {
        return Err(Error::Argument(format!(
            "{} rows vs {} labels",
            rows.len(),
            labels.len()
        )));
    }
    if let Some(l) = params.l {
        if l % 2 == 0 {
            return Err(Error::Argument(format!("learner count must be odd, got {l}")));
        }
    }
    let dim = rows.first().map(Vec::len).unwrap_or(0);
    // Keep covers first so row indices stay stable: rows0 ‖ rows1.
    let rows0: Vec<&[f64]> = rows
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l == 0)
        .map(|(r, _)| r.as_slice())
        .collect();
    let rows1: Vec<&[f64]> = rows
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l == 1)
        .map(|(r, _)| r.as_slice())
        .collect();
    if rows0.len() < 2 || rows1.len() < 2 {
        return Err(Error::Argument(format!(
            "training needs both classes (≥2 rows each), got {} covers and {} stegos",
            rows0.len(),
            rows1.len()
        )));
    }
    let (n0, n1) = (rows0.len() as f64, rows1.len() as f64);
    if (n0 - n1).abs() / n0.max(n1) > 0.10 {
        log::warn!(
            "class imbalance: {} covers vs {} stegos (>10%); results may be biased",
            rows0.len(),
            rows1.len()
        );
    }
    let ordered: Vec<&[f64]> = rows0.iter().chain(rows1.iter()).copied().collect();
    let ordered_labels: Vec<u8> = std::iter::repeat(0u8)
        .take(rows0.len())
        .chain(std::iter::repeat(1u8).take(rows1.len()))
        .collect();

    let candidates: Vec<usize> = match params.d_sub {
        Some(d) => {
            if d == 0 || d > dim {
                return Err(Error::Argument(format!(
                    "subspace size {d} outside 1..={dim}"
                )));
            }
            vec![d]
        }
        None => {
            let grid: Vec<usize> = (3..)
                .map(|k| 1usize << k)
                .take_while(|&d| d <= dim / 2)
                .collect();
            if grid.is_empty() {
                vec![(dim / 2).max(1)]
            } else {
                grid
            }
        }
    };

    let lambda = params.lambda.unwrap_or(0.0); // 0 → scale-aware default in fit_fld
    let mut best: Option<EnsembleModel> = None;
    for d_sub in candidates {
        let model = train_fixed_dsub(
            &ordered,
            &ordered_labels,
            dim,
            d_sub,
            lambda,
            params.l,
            params.seed,
        )?;
        if best.as_ref().is_none_or(|b| model.oob_error < b.oob_error) {
            best = Some(model);
        }
    }
    Ok(best.expect("at least one candidate"))
}

fn train_fixed_dsub(
    rows: &[&[f64]],
    labels: &[u8],
    dim: usize,
    d_sub: usize,
    lambda: f64,
    fixed_l: Option<usize>,
    seed: u64,
) -> Result<EnsembleModel> {
    let n0 = labels.iter().filter(|&&l| l == 0).count();
    let (rows0, rows1) = rows.split_at(n0);
    let target = fixed_l.unwrap_or(L_MAX);

    // Learners are independent given (seed, index): fit the next chunk
    // in parallel, then evaluate OOB stopping sequentially.
    let mut fitted: Vec<FittedLearner> = Vec::new();
    let mut history: Vec<(usize, f64)> = Vec::new(); // (count, oob)
    let mut chosen = target;
    while fitted.len() < target {
        let next = if fixed_l.is_some() {
            target
        } else {
            (fitted.len() + if fitted.is_empty() { L_START } else { 2 }).min(target)
        };
        let newly: Vec<FittedLearner> = (fitted.len()..next)
            .into_par_iter()
            .map(|i| fit_one(i, rows0, rows1, d_sub, lambda, seed))
            .collect::<Result<_>>()?;
        fitted.extend(newly);
        if fixed_l.is_some() {
            break;
        }
        let count = fitted.len();
        let err = oob_error(&fitted, count, rows, labels);
        history.push((count, err));
        if let Some(&(_, prev)) = history
            .iter()
            .find(|(c, _)| count >= 10 && *c == count - 10)
        {
            if prev - err < L_IMPROVEMENT_EPS {
                chosen = count;
                break;
            }
        }
        chosen = count;
    }

    let oob = oob_error(&fitted, chosen, rows, labels);
    fitted.truncate(chosen);
    Ok(EnsembleModel {
        learners: fitted.into_iter().map(|f| f.learner).collect(),
        d_sub,
        feature_dim: dim,
        training_seed: seed,
        oob_error: oob,
    })
}

/// Majority-vote labels (0/1) for `rows`.
pub fn predict(model: &EnsembleModel, rows: &[Vec<f64>]) -> Result<Vec<u8>> {
    for r in rows {
        if r.len() != model.feature_dim {
            return Err(Error::Argument(format!(
                "row width {} does not match model feature_dim {}",
                r.len(),
                model.feature_dim
            )));
        }
    }
    Ok(rows
        .iter()
        .map(|row| {
            let votes = model
                .learners
                .iter()
                .filter(|l| learner_votes_stego(l, row))
                .count();
            (2 * votes > model.learners.len()) as u8
        })
        .collect())
}

/// Serializes the model as JSON. `serde_json` prints floats with
/// shortest round-trip precision, so save → load → save is
/// byte-stable.
pub fn save_model(model: &EnsembleModel, path: impl AsRef<std::path::Path>) -> Result<()> {
    let json = serde_json::to_string_pretty(model)?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<std::path::Path>) -> Result<EnsembleModel> {
    let json = std::fs::read_to_string(path)?;
    let model: EnsembleModel = serde_json::from_str(&json)?;
    if model.learners.len() % 2 == 0 {
        return Err(Error::Argument(format!(
            "model has an even learner count {}",
            model.learners.len()
        )));
    }
    Ok(model)
}
