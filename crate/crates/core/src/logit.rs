//! Maximum-likelihood logistic regression by iteratively reweighted least
//! squares, with Wald tests on every coefficient.
//!
//! The model is `P(outcome = 1 | x) = sigmoid(w · x)`. Each iteration solves
//! the weighted normal equations `(Xᵀ W X) δ = Xᵀ (y − p)` and halves the
//! step until the log-likelihood does not decrease. Standard errors come from
//! the inverse Fisher information at the optimum.

use alloc::string::String;
use alloc::vec::Vec;

use crate::itemset::Itemset;
use crate::linalg;
use crate::stats::{two_sided_p, wald_p_value};
use crate::study::{assemble_rows, RegressionRow, Selection};

pub const MAX_ITERATIONS: usize = 50;
pub const COEFFICIENT_TOLERANCE: f64 = 1e-8;
/// A non-converged fit with any coefficient beyond this magnitude is
/// flagged as separated.
pub const SEPARATION_BOUND: f64 = 15.0;
pub const RIDGE_JITTER: f64 = 1e-10;
const RANK_TOLERANCE: f64 = 1e-9;
const MAX_STEP_HALVINGS: usize = 40;
/// Newton steps below this size are taken even when the summed likelihood
/// cannot confirm the ascent.
const RESOLUTION_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FitError {
    #[error("need at least 2 rows to fit, got {0}")]
    TooFewRows(usize),
    #[error("every outcome is {0}: both classes are required")]
    SingleClass(bool),
    #[error("design column {0:?} is collinear with the columns before it")]
    Collinear(String),
    #[error("feature vector has length {got}, model has {expected} coefficients")]
    Length { expected: usize, got: usize },
    #[error("design matrix has {got} values, expected {rows} × {cols}")]
    Shape { rows: usize, cols: usize, got: usize },
    #[error("weighted normal equations are numerically singular")]
    Singular,
}

/// Row-major design matrix with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    names: Vec<String>,
    rows: usize,
    values: Vec<f64>,
}

impl Design {
    pub fn new(names: Vec<String>, values: Vec<f64>) -> Result<Self, FitError> {
        let cols = names.len();
        if cols == 0 || !values.len().is_multiple_of(cols) {
            return Err(FitError::Shape {
                rows: values.len().checked_div(cols).unwrap_or(0),
                cols,
                got: values.len(),
            });
        }
        Ok(Design {
            rows: values.len() / cols,
            names,
            values,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.cols();
        &self.values[i * p..(i + 1) * p]
    }
}

/// Columns of the per-itemset model, in order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    Intercept,
    /// Age in years, mean-centred when `DesignSpec::center_age` is set.
    Age,
    /// 1 when gender code is 2.
    Gender,
    X,
    Exposure,
    /// `X × Exposure`.
    Interaction,
}

impl Column {
    pub const ALL: [Column; 6] = [
        Column::Intercept,
        Column::Age,
        Column::Gender,
        Column::X,
        Column::Exposure,
        Column::Interaction,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Column::Intercept => "intercept",
            Column::Age => "age",
            Column::Gender => "gender",
            Column::X => "x",
            Column::Exposure => "exposure",
            Column::Interaction => "interaction",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Layout of the six-column candidate model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DesignSpec {
    pub center_age: bool,
}

impl Default for DesignSpec {
    fn default() -> Self {
        DesignSpec { center_age: true }
    }
}

impl DesignSpec {
    pub fn build(&self, rows: &[RegressionRow]) -> (Design, Vec<bool>) {
        let mean_age = if self.center_age && !rows.is_empty() {
            rows.iter().map(|r| r.age as f64).sum::<f64>() / rows.len() as f64
        } else {
            0.0
        };
        let ind = |b: bool| if b { 1.0 } else { 0.0 };
        let mut values = Vec::with_capacity(rows.len() * Column::ALL.len());
        for r in rows {
            values.extend_from_slice(&[
                1.0,
                r.age as f64 - mean_age,
                ind(r.gender.code() == 2),
                ind(r.x_present),
                ind(r.exposure_present),
                ind(r.x_present && r.exposure_present),
            ]);
        }
        let names = Column::ALL.iter().map(|c| String::from(c.name())).collect();
        let design = Design {
            names,
            rows: rows.len(),
            values,
        };
        (design, rows.iter().map(|r| r.outcome).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub column_names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub z_scores: Vec<f64>,
    pub p_values: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub log_likelihood: f64,
    /// Did not converge and some coefficient exceeded [`SEPARATION_BOUND`].
    pub separation: bool,
    /// Log-likelihood at the start and after every iteration.
    pub log_likelihood_trace: Vec<f64>,
}

impl FitResult {
    pub fn p_value(&self, column: Column) -> f64 {
        self.p_values[column.index()]
    }

    pub fn coefficient(&self, column: Column) -> f64 {
        self.coefficients[column.index()]
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + libm::log1p(libm::exp(-libm::fabs(z)))
}

/// Binomial log-likelihood of `w` on the design.
pub fn log_likelihood(design: &Design, y: &[bool], w: &[f64]) -> f64 {
    (0..design.rows())
        .map(|i| {
            let eta = linalg::dot(design.row(i), w);
            let yi = if y[i] { eta } else { 0.0 };
            yi - softplus(eta)
        })
        .sum()
}

/// Gradient of the log-likelihood, `Xᵀ (y − p)`.
pub fn score(design: &Design, y: &[bool], w: &[f64]) -> Vec<f64> {
    let p = design.cols();
    let mut g = alloc::vec![0.0; p];
    for i in 0..design.rows() {
        let row = design.row(i);
        let resid = if y[i] { 1.0 } else { 0.0 } - sigmoid(linalg::dot(row, w));
        g.iter_mut().zip(row).for_each(|(gj, xj)| *gj += xj * resid);
    }
    g
}

/// `Xᵀ W X` with `W = diag(p (1 − p))`.
fn information(design: &Design, w: &[f64]) -> Vec<f64> {
    let p = design.cols();
    let mut h = alloc::vec![0.0; p * p];
    for i in 0..design.rows() {
        let row = design.row(i);
        let mu = sigmoid(linalg::dot(row, w));
        let wt = mu * (1.0 - mu);
        for a in 0..p {
            let xa = row[a] * wt;
            for b in 0..=a {
                h[a * p + b] += xa * row[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            h[b * p + a] = h[a * p + b];
        }
    }
    h
}

fn factor_with_jitter(mut h: Vec<f64>, p: usize) -> Option<Vec<f64>> {
    if let Some(l) = linalg::cholesky(&h, p) {
        return Some(l);
    }
    let scale = (0..p).map(|i| h[i * p + i]).fold(1.0, f64::max);
    let mut ridge = RIDGE_JITTER * scale;
    for _ in 0..8 {
        for i in 0..p {
            h[i * p + i] += ridge;
        }
        if let Some(l) = linalg::cholesky(&h, p) {
            return Some(l);
        }
        ridge *= 100.0;
    }
    None
}

/// Fits the logistic model on an arbitrary design.
pub fn fit_design(design: &Design, y: &[bool]) -> Result<FitResult, FitError> {
    let n = design.rows();
    let p = design.cols();
    if n < 2 {
        return Err(FitError::TooFewRows(n));
    }
    if y.len() != n {
        return Err(FitError::Shape {
            rows: n,
            cols: 1,
            got: y.len(),
        });
    }
    let positives = y.iter().filter(|&&v| v).count();
    if positives == 0 || positives == n {
        return Err(FitError::SingleClass(positives == n));
    }
    if let Some(j) = linalg::first_dependent_column(&design.values, n, p, RANK_TOLERANCE) {
        return Err(FitError::Collinear(design.names[j].clone()));
    }

    let mut w = alloc::vec![0.0; p];
    let mut ll = log_likelihood(design, y, &w);
    let mut trace = alloc::vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let g = score(design, y, &w);
        let mut h = information(design, &w);
        for i in 0..p {
            h[i * p + i] += RIDGE_JITTER;
        }
        let l = factor_with_jitter(h, p).ok_or(FitError::Singular)?;
        let delta = linalg::cholesky_solve(&l, p, &g);
        let full_change = delta.iter().fold(0.0f64, |m, d| m.max(libm::fabs(*d)));
        if full_change < COEFFICIENT_TOLERANCE {
            // The likelihood cannot resolve a step this small, so take it
            // without the ascent check.
            w.iter_mut().zip(&delta).for_each(|(wi, di)| *wi += di);
            ll = log_likelihood(design, y, &w);
            trace.push(ll);
            converged = true;
            break;
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_STEP_HALVINGS {
            let cand: Vec<f64> = w.iter().zip(&delta).map(|(wi, di)| wi + step * di).collect();
            let cand_ll = log_likelihood(design, y, &cand);
            // A damped step that merely ties would stall at the plateau.
            if cand_ll > ll || cand_ll == ll && step == 1.0 {
                accepted = Some((cand, cand_ll));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((cand, cand_ll)) => {
                w = cand;
                ll = cand_ll;
                trace.push(ll);
            }
            None if full_change < RESOLUTION_STEP => {
                // Inside the quadratic basin the likelihood no longer
                // resolves the gain, but the Newton step is still sound.
                w.iter_mut().zip(&delta).for_each(|(wi, di)| *wi += di);
                ll = log_likelihood(design, y, &w);
                trace.push(ll);
            }
            None => {
                trace.push(ll);
                break;
            }
        }
    }

    let h = information(design, &w);
    let l = factor_with_jitter(h, p).ok_or(FitError::Singular)?;
    let cov = linalg::cholesky_inverse(&l, p);
    let standard_errors: Vec<f64> = (0..p).map(|j| libm::sqrt(cov[j * p + j].max(0.0))).collect();
    let z_scores: Vec<f64> = w.iter().zip(&standard_errors).map(|(b, se)| b / se).collect();
    let p_values = w
        .iter()
        .zip(&standard_errors)
        .map(|(&b, &se)| wald_p_value(b, se).unwrap_or_else(|_| two_sided_p(0.0)))
        .collect();
    let separation = !converged && w.iter().any(|b| libm::fabs(*b) > SEPARATION_BOUND);
    Ok(FitResult {
        column_names: design.names.clone(),
        coefficients: w,
        standard_errors,
        z_scores,
        p_values,
        converged,
        iterations,
        log_likelihood: ll,
        separation,
        log_likelihood_trace: trace,
    })
}

/// Fits the six-column candidate model to regression rows.
pub fn fit(rows: &[RegressionRow], spec: &DesignSpec) -> Result<FitResult, FitError> {
    let (design, y) = spec.build(rows);
    fit_design(&design, &y)
}

/// `sigmoid(w · x)`, the fitted probability of the outcome.
pub fn predict_probability(fit: &FitResult, features: &[f64]) -> Result<f64, FitError> {
    if features.len() != fit.coefficients.len() {
        return Err(FitError::Length {
            expected: fit.coefficients.len(),
            got: features.len(),
        });
    }
    Ok(sigmoid(linalg::dot(&fit.coefficients, features)))
}

/// Builds the rows for itemset `x` over a matched selection and fits the
/// candidate model. The interaction p-value is the ranking key.
pub fn evaluate_candidate(
    x: &Itemset,
    selection: &Selection,
    spec: &DesignSpec,
) -> Result<FitResult, FitError> {
    fit(&assemble_rows(selection, x), spec)
}
