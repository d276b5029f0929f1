//! Binary logistic regression by iteratively reweighted least squares.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LogitError {
    #[error("no observations")]
    Empty,
    #[error("outcome has a single class (all {0})")]
    SingleClass(u8),
    #[error("design matrix is rank deficient (column {column} `{term}`)")]
    RankDeficient { column: usize, term: String },
    #[error("separation: coefficient `{term}` diverged past {bound} at iteration {iteration}")]
    Separation {
        term: String,
        bound: f64,
        iteration: usize,
    },
    #[error("weighted normal equations are not positive definite at iteration {0}")]
    Singular(usize),
    #[error("design has {rows} rows of width {width}, expected {expected} columns and {outcomes} outcomes")]
    Shape {
        rows: usize,
        width: usize,
        expected: usize,
        outcomes: usize,
    },
}

/// Largest Newton step compatible with score-based convergence.
const SCORE_STEP_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IrlsOptions {
    pub score_tol: f64,
    pub step_tol: f64,
    pub max_iter: usize,
    pub ridge: f64,
    pub separation_bound: f64,
}

impl Default for IrlsOptions {
    fn default() -> Self {
        Self {
            score_tol: 1e-8,
            step_tol: 1e-10,
            max_iter: 100,
            ridge: 1e-10,
            separation_bound: 30.0,
        }
    }
}

/// Row-major design matrix with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub terms: Vec<String>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Design {
    pub fn new(terms: Vec<String>) -> Self {
        Self {
            terms,
            x: Vec::new(),
            y: Vec::new(),
        }
    }

    pub fn push(&mut self, row: &[f64], outcome: bool) {
        assert_eq!(row.len(), self.width());
        self.x.extend_from_slice(row);
        self.y.push(if outcome { 1.0 } else { 0.0 });
    }

    pub fn width(&self) -> usize {
        self.terms.len()
    }

    pub fn rows(&self) -> usize {
        self.y.len()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let p = self.width();
        &self.x[r * p..(r + 1) * p]
    }

    fn check_shape(&self) -> Result<(), LogitError> {
        if self.width() == 0 || self.x.len() != self.rows() * self.width() {
            return Err(LogitError::Shape {
                rows: self.rows(),
                width: self.x.len().checked_div(self.rows()).unwrap_or(0),
                expected: self.width(),
                outcomes: self.y.len(),
            });
        }
        Ok(())
    }

    fn linear_predictor(&self, beta: &[f64], r: usize) -> f64 {
        self.row(r).iter().zip(beta).map(|(x, b)| x * b).sum()
    }
}

/// `ln(1 + e^t)` without overflow.
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

pub fn log_likelihood(design: &Design, beta: &[f64]) -> f64 {
    (0..design.rows())
        .map(|r| {
            let eta = design.linear_predictor(beta, r);
            design.y[r] * eta - softplus(eta)
        })
        .sum()
}

/// Gradient of the log-likelihood, `X'(y - mu)`.
pub fn score(design: &Design, beta: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; design.width()];
    for r in 0..design.rows() {
        let resid = design.y[r] - sigmoid(design.linear_predictor(beta, r));
        for (gj, xj) in g.iter_mut().zip(design.row(r)) {
            *gj += resid * xj;
        }
    }
    g
}

/// Observed information `X'WX` with `W = mu(1 - mu)`.
pub fn information(design: &Design, beta: &[f64]) -> DMatrix<f64> {
    let p = design.width();
    let mut h = DMatrix::zeros(p, p);
    for r in 0..design.rows() {
        let mu = sigmoid(design.linear_predictor(beta, r));
        let w = mu * (1.0 - mu);
        let row = design.row(r);
        for a in 0..p {
            let wa = w * row[a];
            for b in a..p {
                h[(a, b)] += wa * row[b];
            }
        }
    }
    h.fill_lower_triangle_with_upper_triangle();
    h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub term: String,
    pub estimate: f64,
    pub std_error: f64,
    pub z: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitFit {
    pub coefficients: Vec<Coefficient>,
    pub log_likelihood: f64,
    pub null_log_likelihood: f64,
    /// McFadden: `1 - LL / LL0`.
    pub pseudo_r2: f64,
    pub n_observations: usize,
    pub converged: bool,
    pub iterations: usize,
    pub max_abs_score: f64,
}

impl LogitFit {
    pub fn get(&self, term: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.term == term)
    }

    pub fn estimates(&self) -> Vec<f64> {
        self.coefficients.iter().map(|c| c.estimate).collect()
    }
}

fn check_rank(design: &Design) -> Result<(), LogitError> {
    let p = design.width();
    let mut gram = DMatrix::<f64>::zeros(p, p);
    for r in 0..design.rows() {
        let row = design.row(r);
        for a in 0..p {
            for b in 0..p {
                gram[(a, b)] += row[a] * row[b];
            }
        }
    }
    let deficient = |column: usize| LogitError::RankDeficient {
        column,
        term: design.terms[column].clone(),
    };
    let scale: Vec<f64> = (0..p).map(|j| gram[(j, j)].sqrt()).collect();
    if let Some(j) = scale.iter().position(|&s| s == 0.0) {
        return Err(deficient(j));
    }
    let corr = DMatrix::from_fn(p, p, |a, b| gram[(a, b)] / (scale[a] * scale[b]));
    let eig = SymmetricEigen::new(corr);
    let (min_idx, min) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (k, &v)| if v < acc.1 { (k, v) } else { acc });
    if min < 1e-12 * p as f64 {
        // Blame the column with the largest weight in the null direction.
        let v = eig.eigenvectors.column(min_idx);
        let column = (0..p)
            .max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()))
            .unwrap_or(0);
        return Err(deficient(column));
    }
    Ok(())
}

/// Maximum-likelihood fit starting from zero coefficients.
///
/// Converges when the largest absolute score falls below `score_tol` (with a Newton step
/// under 1e-6) or the largest Newton step falls below `step_tol`. A coefficient beyond
/// `separation_bound` is reported as separation.
pub fn fit(design: &Design, opts: &IrlsOptions) -> Result<LogitFit, LogitError> {
    design.check_shape()?;
    let n = design.rows();
    if n == 0 {
        return Err(LogitError::Empty);
    }
    let ones = design.y.iter().filter(|&&y| y == 1.0).count();
    if ones == 0 || ones == n {
        return Err(LogitError::SingleClass(u8::from(ones == n)));
    }
    check_rank(design)?;

    let mut beta = vec![0.0; design.width()];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        let g = score(design, &beta);
        let step = newton_step(design, &beta, &g, opts.ridge).ok_or(LogitError::Singular(iterations))?;
        let (g_max, step_max) = (max_abs(&g), max_abs(step.as_slice()));
        // A vanishing score with a large pending step means the likelihood is still
        // rising along a diverging direction (separation), not an optimum.
        if g_max < opts.score_tol && step_max < SCORE_STEP_LIMIT {
            converged = true;
            break;
        }
        for (b, s) in beta.iter_mut().zip(step.iter()) {
            *b += s;
        }
        iterations += 1;
        if let Some(j) = beta.iter().position(|b| b.abs() > opts.separation_bound) {
            return Err(LogitError::Separation {
                term: design.terms[j].clone(),
                bound: opts.separation_bound,
                iteration: iterations,
            });
        }
        if step_max < opts.step_tol {
            converged = true;
            break;
        }
    }

    let info = information(design, &beta);
    let cov = info
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .or_else(|| info.try_inverse())
        .ok_or(LogitError::Singular(iterations))?;
    let coefficients = design
        .terms
        .iter()
        .enumerate()
        .map(|(j, term)| {
            let std_error = cov[(j, j)].max(0.0).sqrt();
            let z = beta[j] / std_error;
            Coefficient {
                term: term.clone(),
                estimate: beta[j],
                std_error,
                z,
                p_value: erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0),
            }
        })
        .collect();

    let ll = log_likelihood(design, &beta);
    let ybar = ones as f64 / n as f64;
    let ll0 = n as f64 * (ybar * ybar.ln() + (1.0 - ybar) * (1.0 - ybar).ln());
    Ok(LogitFit {
        coefficients,
        log_likelihood: ll,
        null_log_likelihood: ll0,
        pseudo_r2: 1.0 - ll / ll0,
        n_observations: n,
        converged,
        iterations,
        max_abs_score: max_abs(&score(design, &beta)),
    })
}

/// Solves `(X'WX) step = score`, adding the ridge only when the plain system is not
/// numerically positive definite.
fn newton_step(design: &Design, beta: &[f64], g: &[f64], ridge: f64) -> Option<DVector<f64>> {
    let h = information(design, beta);
    let rhs = DVector::from_column_slice(g);
    if let Some(c) = h.clone().cholesky() {
        return Some(c.solve(&rhs));
    }
    let p = h.nrows();
    (h + DMatrix::identity(p, p) * ridge).cholesky().map(|c| c.solve(&rhs))
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
