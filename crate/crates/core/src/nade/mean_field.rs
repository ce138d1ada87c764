//! Mean-field inference in an RBM conditioned on an ordering prefix.
//!
//! One hidden update from input marginals initialized at zero reproduces the
//! NADE hidden layer, and one input update with `V = Wᵀ` reproduces its output.

use crate::error::{ensure_len, Error, Result};
use crate::math::{sigmoid, Matrix};
use crate::ordering::Ordering;

/// RBM parameters; the partition function is never computed.
#[derive(Debug, Clone, PartialEq)]
pub struct RbmParams {
    /// H×D.
    pub w: Matrix,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl RbmParams {
    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn hidden(&self) -> usize {
        self.c.len()
    }

    fn check(&self) -> Result<()> {
        ensure_len("RBM W rows", self.hidden(), self.w.rows())?;
        ensure_len("RBM W cols", self.dim(), self.w.cols())
    }
}

/// Factorized marginals for the conditional given the first `d` dimensions of an ordering.
///
/// `mu` is indexed by ordering position: `mu[j]` is the marginal of `x_{o_j}`.
/// Positions `j < d` are clamped to the observed values.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldState {
    pub mu: Vec<f64>,
    pub tau: Vec<f64>,
    pub d: usize,
}

impl MeanFieldState {
    /// Clamps the first `d` positions to `x` and sets every free marginal to zero.
    pub fn clamped(o: &Ordering, x: &[f64], d: usize, hidden: usize) -> Result<Self> {
        ensure_len("input", o.len(), x.len())?;
        if d > o.len() {
            return Err(Error::Contract(format!(
                "prefix length {d} exceeds dimensionality {}",
                o.len()
            )));
        }
        let mu = (0..o.len())
            .map(|j| if j < d { x[o.at(j)] } else { 0.0 })
            .collect();
        Ok(MeanFieldState {
            mu,
            tau: vec![0.0; hidden],
            d,
        })
    }
}

/// One hidden-marginal update followed by one input-marginal update on the free positions.
pub fn mean_field_step(
    rbm: &RbmParams,
    o: &Ordering,
    x: &[f64],
    state: &MeanFieldState,
) -> Result<MeanFieldState> {
    rbm.check()?;
    let d_dim = rbm.dim();
    ensure_len("ordering", d_dim, o.len())?;
    ensure_len("input", d_dim, x.len())?;
    ensure_len("mu", d_dim, state.mu.len())?;
    ensure_len("tau", rbm.hidden(), state.tau.len())?;
    for j in 0..state.d {
        if state.mu[j] != x[o.at(j)] {
            return Err(Error::Contract(format!(
                "clamped marginal mu[{j}] = {} differs from observed x[{}] = {}",
                state.mu[j],
                o.at(j),
                x[o.at(j)]
            )));
        }
    }

    let tau: Vec<f64> = (0..rbm.hidden())
        .map(|k| {
            let mut a = rbm.c[k];
            for j in 0..d_dim {
                a += rbm.w.get(k, o.at(j)) * state.mu[j];
            }
            sigmoid(a)
        })
        .collect();

    let mut mu = state.mu.clone();
    for (j, m) in mu.iter_mut().enumerate().skip(state.d) {
        let i = o.at(j);
        let mut a = rbm.b[i];
        for (k, &t) in tau.iter().enumerate() {
            a += t * rbm.w.get(k, i);
        }
        *m = sigmoid(a);
    }
    Ok(MeanFieldState {
        mu,
        tau,
        d: state.d,
    })
}

/// Alternates updates until the largest marginal change is below `tol`.
///
/// No canonical iteration count exists; callers choose `max_iters`.
pub fn mean_field_fixed_point(
    rbm: &RbmParams,
    o: &Ordering,
    x: &[f64],
    d: usize,
    tol: f64,
    max_iters: usize,
) -> Result<(MeanFieldState, usize)> {
    let mut state = MeanFieldState::clamped(o, x, d, rbm.hidden())?;
    for it in 0..max_iters {
        let next = mean_field_step(rbm, o, x, &state)?;
        let change = next
            .mu
            .iter()
            .zip(&state.mu)
            .chain(next.tau.iter().zip(&state.tau))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        state = next;
        if change < tol {
            return Ok((state, it + 1));
        }
    }
    Ok((state, max_iters))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_give_bias_sigmoids() {
        let rbm = RbmParams {
            w: Matrix::zeros(2, 4),
            b: vec![0.3, -1.0, 2.0, 0.0],
            c: vec![0.5, -0.5],
        };
        let o = Ordering::new(vec![3, 1, 0, 2]).unwrap();
        let x = [1.0, 0.0, 1.0, 1.0];
        let s0 = MeanFieldState::clamped(&o, &x, 2, 2).unwrap();
        let s1 = mean_field_step(&rbm, &o, &x, &s0).unwrap();
        assert_eq!(s1.tau, vec![sigmoid(0.5), sigmoid(-0.5)]);
        assert_eq!(&s1.mu[..2], &[1.0, 0.0]);
        assert_eq!(s1.mu[2], sigmoid(0.3));
        assert_eq!(s1.mu[3], sigmoid(2.0));
    }

    #[test]
    fn rejects_unclamped_prefix() {
        let rbm = RbmParams {
            w: Matrix::zeros(1, 2),
            b: vec![0.0; 2],
            c: vec![0.0],
        };
        let o = Ordering::identity(2);
        let bad = MeanFieldState {
            mu: vec![0.5, 0.0],
            tau: vec![0.0],
            d: 1,
        };
        assert!(matches!(
            mean_field_step(&rbm, &o, &[1.0, 0.0], &bad),
            Err(Error::Contract(_))
        ));
    }
}
