use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{ensure_len, Error, Result};

/// Jitter added to the covariance diagonal when factorization fails.
pub const GAUSSIAN_JITTER: f64 = 1e-6;

/// Full-covariance multivariate normal with its Cholesky factor.
#[derive(Debug, Clone)]
pub struct FullGaussian {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    log_norm: f64,
}

impl PartialEq for FullGaussian {
    fn eq(&self, other: &Self) -> bool {
        self.mean == other.mean && self.cov == other.cov
    }
}

impl FullGaussian {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        ensure_len("covariance rows", d, cov.nrows())?;
        ensure_len("covariance columns", d, cov.ncols())?;
        let chol = Cholesky::new(cov.clone())
            .ok_or_else(|| Error::Domain("covariance is not positive definite".into()))?;
        let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        if !log_det.is_finite() {
            return Err(Error::Domain("covariance log-determinant is not finite".into()));
        }
        let log_norm = -0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + log_det);
        Ok(FullGaussian {
            mean,
            cov,
            chol,
            log_norm,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn log_prob(&self, x: &[f64]) -> Result<f64> {
        ensure_len("input", self.dim(), x.len())?;
        let diff = DVector::from_column_slice(x) - &self.mean;
        let z = self
            .chol
            .l()
            .solve_lower_triangular(&diff)
            .ok_or_else(|| Error::Domain("singular Cholesky factor".into()))?;
        Ok(self.log_norm - 0.5 * z.norm_squared())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        (&self.mean + self.chol.l() * z).iter().copied().collect()
    }
}

/// Sample mean and (biased, maximum-likelihood) covariance.
pub fn gaussian_fit_mle(data: &[Vec<f64>]) -> Result<FullGaussian> {
    let d = data.first().map(Vec::len).ok_or_else(|| Error::Dataset("empty training set".into()))?;
    if data.len() <= d {
        return Err(Error::Dataset(format!("need more rows than dimensions: N={}, D={d}", data.len())));
    }
    let n = data.len() as f64;
    let mut mean = DVector::zeros(d);
    for x in data {
        ensure_len("input", d, x.len())?;
        mean += DVector::from_column_slice(x);
    }
    mean /= n;
    let mut cov = DMatrix::zeros(d, d);
    for x in data {
        let c = DVector::from_column_slice(x) - &mean;
        cov.ger(1.0, &c, &c, 1.0);
    }
    cov /= n;
    match FullGaussian::new(mean.clone(), cov.clone()) {
        Ok(g) => Ok(g),
        Err(_) => {
            let jittered = cov + DMatrix::identity(d, d) * GAUSSIAN_JITTER;
            FullGaussian::new(mean, jittered)
                .map_err(|_| Error::Domain("covariance is degenerate even after jitter".into()))
        }
    }
}

pub fn gaussian_logprob(g: &FullGaussian, x: &[f64]) -> Result<f64> {
    g.log_prob(x)
}
