//! Ordinary Kriging over precomputed distance matrices.
//!
//! The correlation between two samples is `exp(-theta * d)`, where `d` is a
//! single distance or, for mixed models, `sum_k beta_k * d_k`. The constant
//! mean `mu` and process variance `sigma2` take their closed-form maximum
//! likelihood values for a given `theta`; `theta` (and `beta`) maximize the
//! concentrated log-likelihood
//!
//! ```text
//! ln L = -n/2 * ln(sigma2) - 1/2 * ln|R|
//! ```
//!
//! A small nugget is added to the diagonal of `R`. It starts at `1e-8` and is
//! raised by decades up to `1e-2` until the Cholesky factorization succeeds,
//! which keeps duplicate samples (distance 0) usable.

mod optimize;

use std::fmt;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};

pub use optimize::{brent_minimize, nelder_mead};

pub const MIN_NUGGET: f64 = 1e-8;
pub const MAX_NUGGET: f64 = 1e-2;
pub const THETA_BOUNDS: (f64, f64) = (1e-3, 1e3);
pub const BETA_BOUNDS: (f64, f64) = (0.0, 10.0);

/// Floor for the process variance when all observations are equal.
const MIN_SIGMA2: f64 = 1e-200;
const THETA_STARTS: usize = 5;
const MIXED_RESTARTS: usize = 5;
const MIXED_EVALS_PER_RESTART: usize = 120;

/// Kernel parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelParams {
    pub theta: f64,
    /// One weight per distance component; `[1.0]` for single-distance models.
    pub beta: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub std: f64,
}

/// Fitted ordinary-Kriging model.
#[derive(Clone)]
pub struct KrigingModel {
    distances: Vec<DMatrix<f64>>,
    y: DVector<f64>,
    params: KernelParams,
    nugget: f64,
    mu: f64,
    sigma2: f64,
    log_likelihood: f64,
    chol: Cholesky<f64, Dyn>,
    /// R^-1 (y - mu)
    alpha: DVector<f64>,
    /// L^-1 1
    l_inv_one: DVector<f64>,
    /// 1' R^-1 1
    one_r_one: f64,
}

impl fmt::Debug for KrigingModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KrigingModel")
            .field("n", &self.y.len())
            .field("params", &self.params)
            .field("nugget", &self.nugget)
            .field("mu", &self.mu)
            .field("sigma2", &self.sigma2)
            .field("log_likelihood", &self.log_likelihood)
            .finish()
    }
}

fn validate_distances(distances: &[DMatrix<f64>], n: usize) -> Result<()> {
    let bad = |msg: String| Err(Error::InvalidTrainingData(msg));
    if distances.is_empty() {
        return bad("no distance matrices".into());
    }
    for (k, d) in distances.iter().enumerate() {
        if d.nrows() != n || d.ncols() != n {
            return bad(format!("distance matrix {k} is {}x{}, expected {n}x{n}", d.nrows(), d.ncols()));
        }
        for i in 0..n {
            if d[(i, i)] != 0.0 {
                return bad(format!("distance matrix {k} has non-zero diagonal at {i}"));
            }
            for j in 0..i {
                let v = d[(i, j)];
                if !v.is_finite() || v < 0.0 {
                    return bad(format!("distance matrix {k} entry ({i},{j}) = {v}"));
                }
                if v != d[(j, i)] {
                    return bad(format!("distance matrix {k} is not symmetric at ({i},{j})"));
                }
            }
        }
    }
    Ok(())
}

/// Correlation matrix without nugget.
fn correlation(distances: &[DMatrix<f64>], params: &KernelParams) -> DMatrix<f64> {
    let n = distances[0].nrows();
    DMatrix::from_fn(n, n, |i, j| {
        let d: f64 = distances.iter().zip(&params.beta).map(|(m, b)| b * m[(i, j)]).sum();
        (-params.theta * d).exp()
    })
}

/// Cholesky of `r + nugget * I`, escalating the nugget by decades.
fn factorize(r: &DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let mut nugget = MIN_NUGGET;
    loop {
        let mut m = r.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += nugget;
        }
        if let Some(chol) = Cholesky::new(m) {
            return Ok((chol, nugget));
        }
        if nugget >= MAX_NUGGET * (1.0 - 1e-9) {
            return Err(Error::DegenerateCorrelation { nugget });
        }
        nugget = (nugget * 10.0).min(MAX_NUGGET);
    }
}

struct Solved {
    chol: Cholesky<f64, Dyn>,
    nugget: f64,
    mu: f64,
    sigma2: f64,
    log_likelihood: f64,
    alpha: DVector<f64>,
    l_inv_one: DVector<f64>,
    one_r_one: f64,
}

fn solve(distances: &[DMatrix<f64>], y: &DVector<f64>, params: &KernelParams) -> Result<Solved> {
    let n = y.len();
    let (chol, nugget) = factorize(&correlation(distances, params))?;
    let ones = DVector::from_element(n, 1.0);
    let r_inv_one = chol.solve(&ones);
    let r_inv_y = chol.solve(y);
    let one_r_one = ones.dot(&r_inv_one);
    let mu = ones.dot(&r_inv_y) / one_r_one;
    let resid = y - DVector::from_element(n, mu);
    let alpha = chol.solve(&resid);
    let sigma2 = (resid.dot(&alpha) / n as f64).max(MIN_SIGMA2);
    let log_det: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let log_likelihood = -0.5 * n as f64 * sigma2.ln() - 0.5 * log_det;
    let mut l_inv_one = ones;
    chol.l_dirty().solve_lower_triangular_mut(&mut l_inv_one);
    Ok(Solved {
        chol,
        nugget,
        mu,
        sigma2,
        log_likelihood,
        alpha,
        l_inv_one,
        one_r_one,
    })
}

/// Concentrated log-likelihood at fixed kernel parameters, or `-inf` when the
/// correlation matrix cannot be factorized.
pub fn concentrated_log_likelihood(distances: &[DMatrix<f64>], y: &[f64], params: &KernelParams) -> f64 {
    let y = DVector::from_column_slice(y);
    match solve(distances, &y, params) {
        Ok(s) if s.log_likelihood.is_finite() => s.log_likelihood,
        _ => f64::NEG_INFINITY,
    }
}

impl KrigingModel {
    /// Fits a model to observations `y` (minimization convention) given one
    /// distance matrix, or three for a mixed model whose weights are fitted too.
    pub fn fit(distances: Vec<DMatrix<f64>>, y: &[f64]) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::InvalidTrainingData("no observations".into()));
        }
        if let Some(v) = y.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidTrainingData(format!("non-finite observation {v}")));
        }
        validate_distances(&distances, n)?;
        let params = if distances.len() == 1 {
            Self::search_theta(&distances, y)
        } else {
            Self::search_mixed(&distances, y)
        };
        Self::with_params(distances, y, params)
    }

    /// Builds a model at fixed kernel parameters (no likelihood search).
    pub fn with_params(distances: Vec<DMatrix<f64>>, y: &[f64], params: KernelParams) -> Result<Self> {
        let n = y.len();
        validate_distances(&distances, n)?;
        if params.beta.len() != distances.len() {
            return Err(Error::InvalidTrainingData(format!(
                "{} weights for {} distance matrices",
                params.beta.len(),
                distances.len()
            )));
        }
        let yv = DVector::from_column_slice(y);
        let s = solve(&distances, &yv, &params)?;
        Ok(Self {
            distances,
            y: yv,
            params,
            nugget: s.nugget,
            mu: s.mu,
            sigma2: s.sigma2,
            log_likelihood: s.log_likelihood,
            chol: s.chol,
            alpha: s.alpha,
            l_inv_one: s.l_inv_one,
            one_r_one: s.one_r_one,
        })
    }

    /// Multi-start Brent search over log10(theta).
    fn search_theta(distances: &[DMatrix<f64>], y: &[f64]) -> KernelParams {
        let objective = |log_theta: f64| {
            let params = KernelParams {
                theta: 10f64.powf(log_theta),
                beta: vec![1.0],
            };
            -concentrated_log_likelihood(distances, y, &params)
        };
        let (lo, hi) = (THETA_BOUNDS.0.log10(), THETA_BOUNDS.1.log10());
        let width = (hi - lo) / THETA_STARTS as f64;
        let mut best = (0.0, f64::INFINITY);
        for k in 0..=THETA_STARTS {
            let edge = lo + width * k as f64;
            let v = objective(edge);
            if v < best.1 {
                best = (edge, v);
            }
        }
        for k in 0..THETA_STARTS {
            let a = lo + width * k as f64;
            let (x, v) = brent_minimize(objective, a, a + width, 1e-4, 40);
            if v < best.1 {
                best = (x, v);
            }
        }
        KernelParams {
            theta: 10f64.powf(best.0),
            beta: vec![1.0],
        }
    }

    /// Nelder-Mead over (log10 theta, beta_1..beta_k) with deterministic restarts.
    fn search_mixed(distances: &[DMatrix<f64>], y: &[f64]) -> KernelParams {
        let k = distances.len();
        let unpack = |p: &[f64]| KernelParams {
            theta: 10f64.powf(p[0]),
            beta: p[1..].to_vec(),
        };
        let objective = |p: &[f64]| {
            if p[1..].iter().all(|&b| b == 0.0) {
                return f64::INFINITY;
            }
            -concentrated_log_likelihood(distances, y, &unpack(p))
        };
        let mut bounds = vec![(THETA_BOUNDS.0.log10(), THETA_BOUNDS.1.log10())];
        bounds.extend(std::iter::repeat_n(BETA_BOUNDS, k));
        let mut step = vec![1.0];
        step.extend(std::iter::repeat_n(2.0, k));
        let mut starts: Vec<Vec<f64>> = Vec::new();
        for r in 0..MIXED_RESTARTS {
            let mut s = vec![-1.0 + r as f64 * 0.75];
            s.extend((0..k).map(|i| if r == 0 || i == (r - 1) % k { 1.0 } else { 0.1 }));
            starts.push(s);
        }
        let mut best: Option<(Vec<f64>, f64)> = None;
        for s in &starts {
            let (p, v) = nelder_mead(objective, s, &step, &bounds, MIXED_EVALS_PER_RESTART, 1e-8);
            if best.as_ref().is_none_or(|b| v < b.1) {
                best = Some((p, v));
            }
        }
        unpack(&best.expect("at least one restart").0)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn components(&self) -> usize {
        self.distances.len()
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn theta(&self) -> f64 {
        self.params.theta
    }

    pub fn nugget(&self) -> f64 {
        self.nugget
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    pub fn observations(&self) -> &[f64] {
        self.y.as_slice()
    }

    /// Smallest observation (minimization convention).
    pub fn y_best(&self) -> f64 {
        self.y.min()
    }

    pub fn train_distances(&self) -> &[DMatrix<f64>] {
        &self.distances
    }

    /// Prediction from distances to every training sample (single-distance model).
    pub fn predict(&self, d_new: &[f64]) -> Result<Prediction> {
        if self.components() != 1 {
            return Err(Error::InvalidTrainingData(
                "mixed model needs component distances; use predict_components".into(),
            ));
        }
        self.check_len(d_new.len())?;
        let r: DVector<f64> = DVector::from_iterator(
            d_new.len(),
            d_new.iter().map(|&d| (-self.params.theta * d).exp()),
        );
        Ok(self.predict_correlation(r))
    }

    /// Prediction from per-component distances to every training sample. Only
    /// the first `components()` entries of each triple are read.
    pub fn predict_components(&self, d_new: &[[f64; 3]]) -> Result<Prediction> {
        self.check_len(d_new.len())?;
        let beta = &self.params.beta;
        let r = DVector::from_iterator(
            d_new.len(),
            d_new.iter().map(|d| {
                let combined: f64 = beta.iter().zip(d).map(|(b, v)| b * v).sum();
                (-self.params.theta * combined).exp()
            }),
        );
        Ok(self.predict_correlation(r))
    }

    fn check_len(&self, got: usize) -> Result<()> {
        if got != self.len() {
            return Err(Error::InvalidTrainingData(format!(
                "expected {} distances, got {got}",
                self.len()
            )));
        }
        Ok(())
    }

    fn predict_correlation(&self, r: DVector<f64>) -> Prediction {
        let mean = self.mu + r.dot(&self.alpha);
        let mut l_inv_r = r;
        self.chol.l_dirty().solve_lower_triangular_mut(&mut l_inv_r);
        let r_r = l_inv_r.norm_squared();
        let one_r = self.l_inv_one.dot(&l_inv_r);
        let mse = self.sigma2 * (1.0 - r_r + (1.0 - one_r).powi(2) / self.one_r_one);
        Prediction {
            mean,
            std: mse.max(0.0).sqrt(),
        }
    }

    /// Key-value diagnostics dump.
    pub fn dump(&self) -> String {
        let beta: Vec<String> = self.params.beta.iter().map(|b| b.to_string()).collect();
        format!(
            "n = {}\ntheta = {}\nbeta = {}\nmu = {}\nsigma2 = {}\nnugget = {}\nlog_likelihood = {}\n",
            self.len(),
            self.params.theta,
            beta.join(","),
            self.mu,
            self.sigma2,
            self.nugget,
            self.log_likelihood
        )
    }
}

/// Expected improvement below `y_best` for a Gaussian prediction.
pub fn expected_improvement(mean: f64, std: f64, y_best: f64) -> f64 {
    let gain = y_best - mean;
    if std <= 1e-12 * (1.0 + mean.abs()) {
        return gain.max(0.0);
    }
    let u = gain / std;
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let ei = gain * normal.cdf(u) + std * normal.pdf(u);
    ei.max(0.0)
}
