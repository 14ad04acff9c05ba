//! Small dense symmetric solves for the regression normal equations.

use alloc::vec::Vec;

/// Lower Cholesky factor of a row-major `p × p` symmetric positive definite
/// matrix, or `None` if a pivot is not positive.
pub(crate) fn cholesky(a: &[f64], p: usize) -> Option<Vec<f64>> {
    let mut l = alloc::vec![0.0; p * p];
    for i in 0..p {
        for j in 0..=i {
            let mut sum = a[i * p + j];
            for k in 0..j {
                sum -= l[i * p + k] * l[j * p + k];
            }
            if i == j {
                if !(sum > 0.0) || !sum.is_finite() {
                    return None;
                }
                l[i * p + i] = libm::sqrt(sum);
            } else {
                l[i * p + j] = sum / l[j * p + j];
            }
        }
    }
    Some(l)
}

/// Solves `L Lᵀ x = b`.
pub(crate) fn cholesky_solve(l: &[f64], p: usize, b: &[f64]) -> Vec<f64> {
    let mut y = b.to_vec();
    for i in 0..p {
        for k in 0..i {
            y[i] -= l[i * p + k] * y[k];
        }
        y[i] /= l[i * p + i];
    }
    for i in (0..p).rev() {
        for k in i + 1..p {
            y[i] -= l[k * p + i] * y[k];
        }
        y[i] /= l[i * p + i];
    }
    y
}

/// Inverse from a Cholesky factor, row-major.
pub(crate) fn cholesky_inverse(l: &[f64], p: usize) -> Vec<f64> {
    let mut inv = alloc::vec![0.0; p * p];
    let mut e = alloc::vec![0.0; p];
    for j in 0..p {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[j] = 1.0;
        let col = cholesky_solve(l, p, &e);
        for i in 0..p {
            inv[i * p + j] = col[i];
        }
    }
    inv
}

/// Index of the first column lying (numerically) in the span of the columns
/// before it, by modified Gram-Schmidt on a row-major `n × p` matrix.
pub(crate) fn first_dependent_column(x: &[f64], n: usize, p: usize, rel_tol: f64) -> Option<usize> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(p);
    for j in 0..p {
        let mut v: Vec<f64> = (0..n).map(|i| x[i * p + j]).collect();
        let norm0 = norm(&v);
        if norm0 == 0.0 {
            return Some(j);
        }
        // Two passes keep the projection stable.
        for _ in 0..2 {
            for q in &basis {
                let d = dot(q, &v);
                v.iter_mut().zip(q).for_each(|(vi, qi)| *vi -= d * qi);
            }
        }
        let r = norm(&v);
        if r <= rel_tol * norm0 {
            return Some(j);
        }
        v.iter_mut().for_each(|vi| *vi /= r);
        basis.push(v);
    }
    None
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}
