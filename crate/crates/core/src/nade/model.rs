use rand::Rng;

use crate::error::{ensure_len, Error, Result};
use crate::math::{clamp_prob, dot, init_bound, log_bernoulli, sigmoid, Activation, Matrix};
use crate::ordering::{all_binary_vectors, Ordering};
use crate::params::{BlockRole, BlockSpec, ParamBlocks};

/// Largest dimensionality accepted by [`NadeParams::total_mass`].
pub const TOTAL_MASS_MAX_DIM: usize = 14;

/// Weights of a single-hidden-layer NADE over `D` binary inputs with `H` hidden units.
///
/// `w_t` holds the input-to-hidden matrix `W` (H×D) transposed, so that the
/// column `W[:, i]` used by the recurrence is the contiguous row `w_t[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NadeParams {
    pub w_t: Matrix,
    /// Hidden-to-output matrix `V`, D×H.
    pub v: Matrix,
    /// Output biases, length D.
    pub b: Vec<f64>,
    /// Hidden biases, length H.
    pub c: Vec<f64>,
    pub activation: Activation,
}

/// Everything computed by the forward recurrence for one example.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    /// Hidden pre-activations `a_d`, indexed by ordering position.
    pub a: Vec<Vec<f64>>,
    /// Hidden activations `h_d`.
    pub h: Vec<Vec<f64>>,
    /// `p(x_{o_d} = 1 | x_{o_<d})`, indexed by ordering position.
    pub p: Vec<f64>,
    pub logp: f64,
}

/// Gradient of `-log p(x)`; same layout as [`NadeParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct NadeGrad {
    pub dw_t: Matrix,
    pub dv: Matrix,
    pub db: Vec<f64>,
    pub dc: Vec<f64>,
}

pub(crate) fn check_binary(x: &[f64]) -> Result<()> {
    for (i, &v) in x.iter().enumerate() {
        if v != 0.0 && v != 1.0 {
            return Err(Error::Domain(format!(
                "entry {i} = {v} is not binary"
            )));
        }
    }
    Ok(())
}

impl NadeParams {
    pub fn zeros(d: usize, h: usize) -> Self {
        NadeParams {
            w_t: Matrix::zeros(d, h),
            v: Matrix::zeros(d, h),
            b: vec![0.0; d],
            c: vec![0.0; h],
            activation: Activation::Sigmoid,
        }
    }

    /// Weights uniform in `±1/√fan_in`, biases zero.
    pub fn init<R: Rng + ?Sized>(d: usize, h: usize, activation: Activation, rng: &mut R) -> Self {
        NadeParams {
            w_t: Matrix::uniform(d, h, init_bound(d), rng),
            v: Matrix::uniform(d, h, init_bound(h), rng),
            b: vec![0.0; d],
            c: vec![0.0; h],
            activation,
        }
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.b.len()
    }

    #[inline]
    pub fn hidden(&self) -> usize {
        self.c.len()
    }

    /// Builds parameters from `W` in its natural H×D layout.
    pub fn from_w(w: &Matrix, v: Matrix, b: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        let p = NadeParams {
            w_t: w.transpose(),
            v,
            b,
            c,
            activation: Activation::Sigmoid,
        };
        p.check_shapes()?;
        Ok(p)
    }

    /// `W` in its natural H×D layout.
    pub fn w(&self) -> Matrix {
        self.w_t.transpose()
    }

    pub fn check_shapes(&self) -> Result<()> {
        let (d, h) = (self.dim(), self.hidden());
        ensure_len("W rows (inputs)", d, self.w_t.rows())?;
        ensure_len("W cols (hidden)", h, self.w_t.cols())?;
        ensure_len("V rows (outputs)", d, self.v.rows())?;
        ensure_len("V cols (hidden)", h, self.v.cols())?;
        Ok(())
    }

    fn check_input(&self, o: &Ordering, x: &[f64]) -> Result<()> {
        ensure_len("ordering", self.dim(), o.len())?;
        ensure_len("input", self.dim(), x.len())?;
        check_binary(x)
    }

    /// Exact log-density with the full per-step trace; O(HD).
    pub fn log_prob(&self, o: &Ordering, x: &[f64]) -> Result<ForwardTrace> {
        self.check_input(o, x)?;
        let (d_dim, h_dim) = (self.dim(), self.hidden());
        let mut a = self.c.clone();
        let mut trace = ForwardTrace {
            a: Vec::with_capacity(d_dim),
            h: Vec::with_capacity(d_dim),
            p: Vec::with_capacity(d_dim),
            logp: 0.0,
        };
        let mut h = vec![0.0; h_dim];
        for d in 0..d_dim {
            let i = o.at(d);
            for (hk, &ak) in h.iter_mut().zip(&a) {
                *hk = self.activation.apply(ak);
            }
            let p = sigmoid(dot(self.v.row(i), &h) + self.b[i]);
            trace.logp += log_bernoulli(x[i], p);
            trace.a.push(a.clone());
            trace.h.push(h.clone());
            trace.p.push(p);
            if x[i] != 0.0 {
                crate::math::axpy(x[i], self.w_t.row(i), &mut a);
            }
        }
        Ok(trace)
    }

    /// Log-density only, without retaining the trace.
    pub fn log_density(&self, o: &Ordering, x: &[f64]) -> Result<f64> {
        self.check_input(o, x)?;
        let mut a = self.c.clone();
        let mut h = vec![0.0; self.hidden()];
        let mut logp = 0.0;
        for i in o.iter() {
            for (hk, &ak) in h.iter_mut().zip(&a) {
                *hk = self.activation.apply(ak);
            }
            let p = sigmoid(dot(self.v.row(i), &h) + self.b[i]);
            logp += log_bernoulli(x[i], p);
            if x[i] != 0.0 {
                crate::math::axpy(x[i], self.w_t.row(i), &mut a);
            }
        }
        Ok(logp)
    }

    /// Exact gradient of `-log p(x)` and the forward trace; O(HD).
    pub fn grad_nll(&self, o: &Ordering, x: &[f64]) -> Result<(NadeGrad, ForwardTrace)> {
        let mut grad = NadeGrad::zeros_like(self);
        let trace = self.accumulate_grad_nll(o, x, 1.0, &mut grad)?;
        Ok((grad, trace))
    }

    /// Adds `scale * ∇(-log p(x))` into `grad` and returns the trace.
    pub fn accumulate_grad_nll(
        &self,
        o: &Ordering,
        x: &[f64],
        scale: f64,
        grad: &mut NadeGrad,
    ) -> Result<ForwardTrace> {
        let trace = self.log_prob(o, x)?;
        let h_dim = self.hidden();
        // Sum of hidden pre-activation gradients from positions after the current one.
        let mut delta_a = vec![0.0; h_dim];
        let mut delta_h = vec![0.0; h_dim];
        for d in (0..self.dim()).rev() {
            let i = o.at(d);
            let h = &trace.h[d];
            let a = &trace.a[d];
            let err = scale * (trace.p[d] - x[i]);
            grad.db[i] += err;
            crate::math::axpy(err, h, grad.dv.row_mut(i));
            if x[i] != 0.0 {
                crate::math::axpy(x[i], &delta_a, grad.dw_t.row_mut(i));
            }
            let vrow = self.v.row(i);
            for k in 0..h_dim {
                delta_h[k] = err * vrow[k] * self.activation.derivative(a[k], h[k]);
            }
            crate::math::axpy(1.0, &delta_h, &mut grad.dc);
            crate::math::axpy(1.0, &delta_h, &mut delta_a);
        }
        Ok(trace)
    }

    /// Ancestral sample; returns the vector and the conditional probabilities used.
    pub fn sample<R: Rng + ?Sized>(&self, o: &Ordering, rng: &mut R) -> Result<(Vec<f64>, Vec<f64>)> {
        ensure_len("ordering", self.dim(), o.len())?;
        let mut x = vec![0.0; self.dim()];
        let mut probs = Vec::with_capacity(self.dim());
        let mut a = self.c.clone();
        let mut h = vec![0.0; self.hidden()];
        for i in o.iter() {
            for (hk, &ak) in h.iter_mut().zip(&a) {
                *hk = self.activation.apply(ak);
            }
            let p = clamp_prob(sigmoid(dot(self.v.row(i), &h) + self.b[i]));
            probs.push(p);
            if rng.random::<f64>() < p {
                x[i] = 1.0;
                crate::math::axpy(1.0, self.w_t.row(i), &mut a);
            }
        }
        Ok((x, probs))
    }

    /// `Σ_x exp(log p(x))` over all of `{0,1}^D`. Test oracle; refuses `D > 14`.
    pub fn total_mass(&self, o: &Ordering) -> Result<f64> {
        if self.dim() > TOTAL_MASS_MAX_DIM {
            return Err(Error::Contract(format!(
                "total_mass enumerates 2^D states; D = {} exceeds {TOTAL_MASS_MAX_DIM}",
                self.dim()
            )));
        }
        let mut total = 0.0;
        for x in all_binary_vectors(self.dim())? {
            total += self.log_density(o, &x)?.exp();
        }
        Ok(total)
    }
}

impl NadeGrad {
    pub fn zeros_like(p: &NadeParams) -> Self {
        NadeGrad {
            dw_t: Matrix::zeros(p.dim(), p.hidden()),
            dv: Matrix::zeros(p.dim(), p.hidden()),
            db: vec![0.0; p.dim()],
            dc: vec![0.0; p.hidden()],
        }
    }
}

fn nade_specs(d: usize, h: usize) -> Vec<BlockSpec> {
    vec![
        BlockSpec::new("W", d * h, BlockRole::InputHidden),
        BlockSpec::new("V", d * h, BlockRole::Other),
        BlockSpec::new("b", d, BlockRole::Other),
        BlockSpec::new("c", h, BlockRole::Other),
    ]
}

impl ParamBlocks for NadeParams {
    fn block_specs(&self) -> Vec<BlockSpec> {
        nade_specs(self.dim(), self.hidden())
    }

    fn blocks(&self) -> Vec<&[f64]> {
        vec![self.w_t.as_slice(), self.v.as_slice(), &self.b, &self.c]
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.w_t.as_mut_slice(),
            self.v.as_mut_slice(),
            &mut self.b,
            &mut self.c,
        ]
    }
}

impl ParamBlocks for NadeGrad {
    fn block_specs(&self) -> Vec<BlockSpec> {
        nade_specs(self.db.len(), self.dc.len())
    }

    fn blocks(&self) -> Vec<&[f64]> {
        vec![self.dw_t.as_slice(), self.dv.as_slice(), &self.db, &self.dc]
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.dw_t.as_mut_slice(),
            self.dv.as_mut_slice(),
            &mut self.db,
            &mut self.dc,
        ]
    }
}
