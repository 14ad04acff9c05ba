//! Independent reference implementations used as test oracles. None of them
//! calls into the code under test beyond plain data types.

#![allow(dead_code)]

use std::collections::BTreeMap;

/// Every itemset of size `1..=max_size` with count strictly above
/// `percent / 100 * m`, found by enumerating all subsets of the item universe.
/// Transactions hold item indices in `0..n_items`, `n_items <= 20`.
pub fn brute_force_frequent(
    transactions: &[Vec<usize>],
    n_items: usize,
    percent: u64,
    max_size: usize,
) -> BTreeMap<Vec<usize>, usize> {
    let m = transactions.len() as u64;
    let masks: Vec<u32> = transactions
        .iter()
        .map(|t| t.iter().fold(0u32, |acc, &i| acc | 1 << i))
        .collect();
    let mut out = BTreeMap::new();
    for subset in 1u32..(1 << n_items) {
        let size = subset.count_ones() as usize;
        if size > max_size {
            continue;
        }
        let count = masks.iter().filter(|&&t| t & subset == subset).count();
        if count as u64 * 100 > percent * m {
            let items = (0..n_items).filter(|i| subset >> i & 1 == 1).collect();
            out.insert(items, count);
        }
    }
    out
}

/// Binomial log-likelihood of a logistic model, each term computed as
/// `y·η − ln(1 + e^η)` with the overflow-safe split on the sign of η.
pub fn log_likelihood(x: &[Vec<f64>], y: &[bool], w: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(row, &yi)| {
            let eta: f64 = row.iter().zip(w).map(|(a, b)| a * b).sum();
            let log1p_exp = if eta > 0.0 {
                eta + (-eta).exp().ln_1p()
            } else {
                eta.exp().ln_1p()
            };
            if yi { eta - log1p_exp } else { -log1p_exp }
        })
        .sum()
}

/// Central-difference gradient of the log-likelihood.
pub fn numeric_gradient(x: &[Vec<f64>], y: &[bool], w: &[f64], h: f64) -> Vec<f64> {
    (0..w.len())
        .map(|j| {
            let mut up = w.to_vec();
            let mut down = w.to_vec();
            up[j] += h;
            down[j] -= h;
            (log_likelihood(x, y, &up) - log_likelihood(x, y, &down)) / (2.0 * h)
        })
        .collect()
}

/// Solves `a·x = b` by Gaussian elimination with partial pivoting.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

/// Maximum-likelihood coefficients by Newton's method where both the
/// gradient and the Hessian come from finite differences of the
/// log-likelihood. Returns `None` if it fails to settle.
pub fn newton_numeric(x: &[Vec<f64>], y: &[bool]) -> Option<Vec<f64>> {
    let p = x[0].len();
    let mut w = vec![0.0; p];
    for _ in 0..200 {
        let g = numeric_gradient(x, y, &w, 1e-5);
        let mut hessian = vec![vec![0.0; p]; p];
        let h = 1e-4;
        for j in 0..p {
            let mut up = w.clone();
            let mut down = w.clone();
            up[j] += h;
            down[j] -= h;
            let gu = numeric_gradient(x, y, &up, 1e-5);
            let gd = numeric_gradient(x, y, &down, 1e-5);
            for i in 0..p {
                hessian[i][j] = (gu[i] - gd[i]) / (2.0 * h);
            }
        }
        for i in 0..p {
            for j in 0..i {
                let s = 0.5 * (hessian[i][j] + hessian[j][i]);
                hessian[i][j] = s;
                hessian[j][i] = s;
            }
        }
        let neg: Vec<Vec<f64>> = hessian.iter().map(|r| r.iter().map(|v| -v).collect()).collect();
        let step = solve(neg, g);
        let ll = log_likelihood(x, y, &w);
        let mut t = 1.0;
        let mut next: Vec<f64> = w.iter().zip(&step).map(|(a, s)| a + s).collect();
        while log_likelihood(x, y, &next) < ll - 1e-12 && t > 1e-6 {
            t *= 0.5;
            next = w.iter().zip(&step).map(|(a, s)| a + t * s).collect();
        }
        let change = w
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        w = next;
        if change < 1e-9 {
            return Some(w);
        }
    }
    None
}

/// Standard normal density.
pub fn normal_pdf(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Φ(z) = 1/2 + ∫₀^z φ(t) dt by composite Simpson's rule.
pub fn normal_cdf_simpson(z: f64) -> f64 {
    let n = 20_000;
    let h = z / n as f64;
    let mut s = normal_pdf(0.0) + normal_pdf(z);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * normal_pdf(k as f64 * h);
    }
    0.5 + s * h / 3.0
}
