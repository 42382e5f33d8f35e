//! Ordinary Kriging with a Gaussian correlation and per-dimension activity
//! parameters `theta` on a log10 scale.

use super::lhs::latin_hypercube;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const THETA_BOUNDS: (f64, f64) = (-3.0, 2.0);
/// log10 bounds of the nugget when it is estimated.
pub const LOG_NUGGET_BOUNDS: (f64, f64) = (-8.0, 0.0);
pub const FIXED_NUGGET: f64 = 1e-10;

const STARTS: usize = 10;
const MAX_ITER: usize = 200;
const TOL: f64 = 1e-6;
/// Upper limit on the squared ratio of extreme Cholesky pivots.
const MAX_CONDITION: f64 = 1e10;
/// Without noise the fit at a design point may miss the observation by at
/// most this much, relative to the response scale.
const MAX_SHIFT: f64 = 1e-7;
/// Likelihood assigned to inadmissible parameters. It still decreases with
/// the condition estimate so the search can climb out of such regions.
const PENALTY: f64 = -1e12;

#[derive(Debug, Error, PartialEq)]
pub enum KrigingError {
    #[error("need at least two distinct design points, got {0}")]
    TooFewPoints(usize),
    #[error("design rows have {found} coordinates, expected {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("responses must be finite")]
    NonFinite,
    #[error("correlation matrix is not positive definite")]
    NotPositiveDefinite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KrigingParams {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub theta: Vec<f64>,
    pub nugget: f64,
    pub noise: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "KrigingParams", into = "KrigingParams")]
pub struct Kriging {
    params: KrigingParams,
    mu: f64,
    sigma2: f64,
    log_likelihood: f64,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    rinv_one: DVector<f64>,
    one_rinv_one: f64,
}

impl From<Kriging> for KrigingParams {
    fn from(k: Kriging) -> Self {
        k.params
    }
}

impl TryFrom<KrigingParams> for Kriging {
    type Error = KrigingError;

    fn try_from(p: KrigingParams) -> Result<Self, Self::Error> {
        Kriging::with_params(p)
    }
}

fn correlation(a: &[f64], b: &[f64], weights: &[f64]) -> f64 {
    let s: f64 = a
        .iter()
        .zip(b)
        .zip(weights)
        .map(|((u, v), w)| w * (u - v) * (u - v))
        .sum();
    (-s).exp()
}

struct Factored {
    chol: Cholesky<f64, Dyn>,
    mu: f64,
    sigma2: f64,
    log_likelihood: f64,
    alpha: DVector<f64>,
    rinv_one: DVector<f64>,
    one_rinv_one: f64,
    condition: f64,
    /// Largest gap between fitted and observed values at the design points.
    nugget_shift: f64,
}

fn factor(x: &[Vec<f64>], y: &[f64], theta: &[f64], nugget: f64) -> Option<Factored> {
    let n = x.len();
    let weights: Vec<f64> = theta.iter().map(|t| 10f64.powf(*t)).collect();
    let r = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0 + nugget
        } else {
            correlation(&x[i], &x[j], &weights)
        }
    });
    let chol = r.clone().cholesky()?;
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = diag
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let condition = (hi / lo).powi(2);
    let ones = DVector::from_element(n, 1.0);
    let yv = DVector::from_column_slice(y);
    let rinv_one = chol.solve(&ones);
    let one_rinv_one = ones.dot(&rinv_one);
    let mu = rinv_one.dot(&yv) / one_rinv_one;
    let resid = yv.add_scalar(-mu);
    let alpha = chol.solve(&resid);
    let sigma2 = (resid.dot(&alpha) / n as f64).max(0.0);
    let ln_det: f64 = 2.0 * diag.iter().map(|v| v.ln()).sum::<f64>();
    let log_likelihood = -0.5 * n as f64 * sigma2.max(1e-300).ln() - 0.5 * ln_det;
    if !(mu.is_finite() && sigma2.is_finite() && log_likelihood.is_finite()) {
        return None;
    }
    // Fitted value at each design point, recomputed through the matrix so
    // that rounding error shows up as well as the nugget itself.
    let fitted = (&r * &alpha - &alpha * nugget).add_scalar(mu);
    let nugget_shift = (fitted - &yv).amax();
    Some(Factored {
        chol,
        mu,
        sigma2,
        log_likelihood,
        alpha,
        rinv_one,
        one_rinv_one,
        condition,
        nugget_shift,
    })
}

/// Average the responses of coincident design points.
pub fn merge_duplicates(x: &[Vec<f64>], y: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut xs: Vec<Vec<f64>> = Vec::new();
    let mut sums: Vec<(f64, usize)> = Vec::new();
    for (p, &v) in x.iter().zip(y) {
        match xs.iter().position(|q| linf(p, q) <= 1e-12) {
            Some(i) => {
                sums[i].0 += v;
                sums[i].1 += 1;
            }
            None => {
                xs.push(p.clone());
                sums.push((v, 1));
            }
        }
    }
    (xs, sums.into_iter().map(|(s, c)| s / c as f64).collect())
}

pub(crate) fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (u, v)| m.max((u - v).abs()))
}

/// Coordinate pattern search maximizing `f` inside a box.
fn pattern_search(
    f: &dyn Fn(&[f64]) -> f64,
    start: Vec<f64>,
    lo: &[f64],
    hi: &[f64],
) -> (Vec<f64>, f64) {
    let mut z = start;
    let mut best = f(&z);
    let mut step = 0.25;
    for _ in 0..MAX_ITER {
        let mut improved = false;
        for k in 0..z.len() {
            for dir in [1.0, -1.0] {
                let mut cand = z.clone();
                cand[k] = (z[k] + dir * step * (hi[k] - lo[k])).clamp(lo[k], hi[k]);
                if cand[k] == z[k] {
                    continue;
                }
                let v = f(&cand);
                if v > best {
                    best = v;
                    z = cand;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
            if step < TOL {
                break;
            }
        }
    }
    (z, best)
}

impl Kriging {
    /// Factor a model with given hyperparameters (no likelihood search).
    pub fn with_params(params: KrigingParams) -> Result<Self, KrigingError> {
        let n = params.x.len();
        if n < 2 {
            return Err(KrigingError::TooFewPoints(n));
        }
        let d = params.theta.len();
        if let Some(row) = params.x.iter().find(|r| r.len() != d) {
            return Err(KrigingError::Dimension {
                expected: d,
                found: row.len(),
            });
        }
        if params.y.len() != n || params.y.iter().any(|v| !v.is_finite()) {
            return Err(KrigingError::NonFinite);
        }
        let f = factor(&params.x, &params.y, &params.theta, params.nugget)
            .ok_or(KrigingError::NotPositiveDefinite)?;
        Ok(Self {
            params,
            mu: f.mu,
            sigma2: f.sigma2,
            log_likelihood: f.log_likelihood,
            chol: f.chol,
            alpha: f.alpha,
            rinv_one: f.rinv_one,
            one_rinv_one: f.one_rinv_one,
        })
    }

    /// Maximum-likelihood fit. Coincident rows are merged first.
    pub fn fit(x: &[Vec<f64>], y: &[f64], noise: bool, seed: u64) -> Result<Self, KrigingError> {
        if y.iter().any(|v| !v.is_finite()) {
            return Err(KrigingError::NonFinite);
        }
        let (x, y) = merge_duplicates(x, y);
        let n = x.len();
        if n < 2 {
            return Err(KrigingError::TooFewPoints(n));
        }
        let d = x[0].len();
        if let Some(row) = x.iter().find(|r| r.len() != d) {
            return Err(KrigingError::Dimension {
                expected: d,
                found: row.len(),
            });
        }

        let dims = d + usize::from(noise);
        let mut lo = vec![THETA_BOUNDS.0; d];
        let mut hi = vec![THETA_BOUNDS.1; d];
        if noise {
            lo.push(LOG_NUGGET_BOUNDS.0);
            hi.push(LOG_NUGGET_BOUNDS.1);
        }
        let split = |z: &[f64]| -> (Vec<f64>, f64) {
            let nugget = if noise { 10f64.powf(z[d]) } else { FIXED_NUGGET };
            (z[..d].to_vec(), nugget)
        };
        let y_scale = 1.0 + y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let admissible = |f: &Factored| {
            f.condition <= MAX_CONDITION && (noise || f.nugget_shift <= MAX_SHIFT * y_scale)
        };
        let objective = |z: &[f64]| -> f64 {
            let (theta, nugget) = split(z);
            match factor(&x, &y, &theta, nugget) {
                Some(f) if admissible(&f) => f.log_likelihood,
                Some(f) => PENALTY - f.condition.ln() - f.nugget_shift.ln_1p(),
                None => 10.0 * PENALTY,
            }
        };

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let starts = latin_hypercube(STARTS, dims, &mut rng);
        let mut best: Option<(Vec<f64>, f64)> = None;
        for s in starts {
            let z0: Vec<f64> = s
                .iter()
                .enumerate()
                .map(|(k, u)| lo[k] + u * (hi[k] - lo[k]))
                .collect();
            let (z, v) = pattern_search(&objective, z0, &lo, &hi);
            if best.as_ref().is_none_or(|(_, b)| v > *b) {
                best = Some((z, v));
            }
        }
        let (z, v) = best.expect("at least one start");
        let (mut theta, mut nugget) = split(&z);
        if v <= PENALTY {
            // Nothing admissible: take the least correlated setting and
            // escalate the nugget until it factors.
            theta = vec![THETA_BOUNDS.1; d];
            while factor(&x, &y, &theta, nugget).is_none_or(|f| f.condition > MAX_CONDITION) {
                nugget *= 10.0;
                if nugget > 1.0 {
                    return Err(KrigingError::NotPositiveDefinite);
                }
            }
        }
        Self::with_params(KrigingParams {
            x,
            y,
            theta,
            nugget,
            noise,
        })
    }

    pub fn params(&self) -> &KrigingParams {
        &self.params
    }

    pub fn theta(&self) -> &[f64] {
        &self.params.theta
    }

    pub fn nugget(&self) -> f64 {
        self.params.nugget
    }

    pub fn dim(&self) -> usize {
        self.params.theta.len()
    }

    pub fn design(&self) -> &[Vec<f64>] {
        &self.params.x
    }

    pub fn responses(&self) -> &[f64] {
        &self.params.y
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

    /// Predicted mean and variance (clamped at zero) at `x`.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let weights: Vec<f64> = self.params.theta.iter().map(|t| 10f64.powf(*t)).collect();
        let r = DVector::from_iterator(
            self.params.x.len(),
            self.params.x.iter().map(|p| correlation(p, x, &weights)),
        );
        let mean = self.mu + r.dot(&self.alpha);
        let rinv_r = self.chol.solve(&r);
        let gap = 1.0 - self.rinv_one.dot(&r);
        let var = self.sigma2 * (1.0 - r.dot(&rinv_r) + gap * gap / self.one_rinv_one);
        (mean, var.max(0.0))
    }

    /// Smallest predicted mean over the design points.
    pub fn min_design_mean(&self) -> f64 {
        self.params
            .x
            .iter()
            .map(|p| self.predict(p).0)
            .fold(f64::INFINITY, f64::min)
    }
}
