use rand::Rng;

use super::family::{
    head_outputs, log_density_1d, output_gradients, params_from_outputs, sample_1d,
    ConditionalFamily, DimHeads, HeadOutputs, MixtureParams1D,
};
use crate::error::{ensure_len, Error, Result};
use crate::math::{axpy, init_bound, Activation, Matrix};
use crate::ordering::Ordering;
use crate::params::{BlockRole, BlockSpec, ParamBlocks};

/// RNADE weights: the tied NADE hidden side plus per-dimension output heads.
///
/// Heads are stored dimension-major: rows `i*C .. (i+1)*C` of each `v_*`
/// (each of width H) and entries `i*C .. (i+1)*C` of each `b_*` belong to
/// dimension `i`. Heads the family does not use have zero rows.
#[derive(Debug, Clone, PartialEq)]
pub struct RnadeParams {
    pub family: ConditionalFamily,
    pub activation: Activation,
    /// Input-to-hidden `W` transposed (D×H).
    pub w_t: Matrix,
    pub c: Vec<f64>,
    pub v_pi: Matrix,
    pub b_pi: Vec<f64>,
    pub v_mu: Matrix,
    pub b_mu: Vec<f64>,
    pub v_sigma: Matrix,
    pub b_sigma: Vec<f64>,
}

/// Per-example forward record.
#[derive(Debug, Clone, PartialEq)]
pub struct RnadeTrace {
    pub a: Vec<Vec<f64>>,
    pub h: Vec<Vec<f64>>,
    /// Head outputs per ordering position.
    pub z: Vec<HeadOutputs>,
    /// Conditional parameters per ordering position.
    pub conditionals: Vec<MixtureParams1D>,
    /// `log p(x_{o_d} | x_{o_<d})` per ordering position.
    pub log_conditionals: Vec<f64>,
    pub logp: f64,
}

impl RnadeParams {
    pub fn zeros(d: usize, h: usize, family: ConditionalFamily) -> Self {
        let c = family.components();
        let rows = |present: bool| if present { d * c } else { 0 };
        let (pi_rows, sigma_rows) = (rows(family.has_pi_head()), rows(family.has_sigma_head()));
        RnadeParams {
            family,
            activation: Activation::Relu,
            w_t: Matrix::zeros(d, h),
            c: vec![0.0; h],
            v_pi: Matrix::zeros(pi_rows, h),
            b_pi: vec![0.0; pi_rows],
            v_mu: Matrix::zeros(d * c, h),
            b_mu: vec![0.0; d * c],
            v_sigma: Matrix::zeros(sigma_rows, h),
            b_sigma: vec![0.0; sigma_rows],
        }
    }

    /// Weights uniform in `±1/√fan_in`, biases zero.
    ///
    /// Mixture location biases are spread over `[-1, 1]` so components start
    /// distinguishable on standardized data.
    pub fn init<R: Rng + ?Sized>(
        d: usize,
        h: usize,
        family: ConditionalFamily,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let mut p = Self::zeros(d, h, family);
        p.activation = activation;
        p.w_t = Matrix::uniform(d, h, init_bound(d), rng);
        let hb = init_bound(h);
        for m in [&mut p.v_pi, &mut p.v_mu, &mut p.v_sigma] {
            *m = Matrix::uniform(m.rows(), m.cols(), hb, rng);
        }
        let c = family.components();
        if c > 1 {
            for i in 0..d {
                for k in 0..c {
                    p.b_mu[i * c + k] = -1.0 + 2.0 * k as f64 / (c - 1) as f64;
                }
            }
        }
        p
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.w_t.rows()
    }

    #[inline]
    pub fn hidden(&self) -> usize {
        self.c.len()
    }

    pub fn heads(&self, i: usize) -> DimHeads<'_> {
        let c = self.family.components();
        let h = self.hidden();
        let slice = |m: &Matrix| -> (std::ops::Range<usize>, std::ops::Range<usize>) {
            if m.rows() == 0 {
                (0..0, 0..0)
            } else {
                (i * c * h..(i + 1) * c * h, i * c..(i + 1) * c)
            }
        };
        let (vp, bp) = slice(&self.v_pi);
        let (vs, bs) = slice(&self.v_sigma);
        DimHeads {
            v_pi: &self.v_pi.as_slice()[vp],
            b_pi: &self.b_pi[bp],
            v_mu: &self.v_mu.as_slice()[i * c * h..(i + 1) * c * h],
            b_mu: &self.b_mu[i * c..(i + 1) * c],
            v_sigma: &self.v_sigma.as_slice()[vs],
            b_sigma: &self.b_sigma[bs],
        }
    }

    pub fn check_shapes(&self) -> Result<()> {
        let (d, h, c) = (self.dim(), self.hidden(), self.family.components());
        ensure_len("W cols", h, self.w_t.cols())?;
        ensure_len("mu head rows", d * c, self.v_mu.rows())?;
        ensure_len("mu head bias", d * c, self.b_mu.len())?;
        let expect = |present: bool| if present { d * c } else { 0 };
        ensure_len("pi head rows", expect(self.family.has_pi_head()), self.v_pi.rows())?;
        ensure_len("pi head bias", expect(self.family.has_pi_head()), self.b_pi.len())?;
        ensure_len("sigma head rows", expect(self.family.has_sigma_head()), self.v_sigma.rows())?;
        ensure_len("sigma head bias", expect(self.family.has_sigma_head()), self.b_sigma.len())?;
        for m in [&self.v_pi, &self.v_mu, &self.v_sigma] {
            if m.rows() > 0 {
                ensure_len("head width", h, m.cols())?;
            }
        }
        Ok(())
    }

    fn check_input(&self, o: &Ordering, x: &[f64]) -> Result<()> {
        ensure_len("ordering", self.dim(), o.len())?;
        ensure_len("input", self.dim(), x.len())?;
        if let Some((i, v)) = x.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Domain(format!("entry {i} = {v} is not finite")));
        }
        if self.family.is_binary() {
            crate::nade::check_binary(x)?;
        }
        Ok(())
    }

    /// Exact log-density with per-dimension conditionals; O(HD) hidden recurrence.
    pub fn log_prob(&self, o: &Ordering, x: &[f64]) -> Result<RnadeTrace> {
        self.check_input(o, x)?;
        let d_dim = self.dim();
        let mut trace = RnadeTrace {
            a: Vec::with_capacity(d_dim),
            h: Vec::with_capacity(d_dim),
            z: Vec::with_capacity(d_dim),
            conditionals: Vec::with_capacity(d_dim),
            log_conditionals: Vec::with_capacity(d_dim),
            logp: 0.0,
        };
        let mut a = self.c.clone();
        for i in o.iter() {
            let h: Vec<f64> = a.iter().map(|&v| self.activation.apply(v)).collect();
            let z = head_outputs(self.family, &h, &self.heads(i));
            let params = params_from_outputs(self.family, &z);
            let lp = log_density_1d(self.family, &params, x[i]);
            trace.logp += lp;
            trace.log_conditionals.push(lp);
            trace.a.push(a.clone());
            trace.h.push(h);
            trace.z.push(z);
            trace.conditionals.push(params);
            if x[i] != 0.0 {
                axpy(x[i], self.w_t.row(i), &mut a);
            }
        }
        Ok(trace)
    }

    pub fn log_density(&self, o: &Ordering, x: &[f64]) -> Result<f64> {
        self.check_input(o, x)?;
        let mut a = self.c.clone();
        let mut h = vec![0.0; self.hidden()];
        let mut logp = 0.0;
        for i in o.iter() {
            for (hk, &ak) in h.iter_mut().zip(&a) {
                *hk = self.activation.apply(ak);
            }
            let z = head_outputs(self.family, &h, &self.heads(i));
            logp += log_density_1d(self.family, &params_from_outputs(self.family, &z), x[i]);
            if x[i] != 0.0 {
                axpy(x[i], self.w_t.row(i), &mut a);
            }
        }
        Ok(logp)
    }

    /// Gradient of `-log p(x)`. With `scale_mean_grad_by_sigma` the result is the
    /// scaled training direction rather than the exact gradient.
    pub fn grad_nll(
        &self,
        o: &Ordering,
        x: &[f64],
        scale_mean_grad_by_sigma: bool,
    ) -> Result<(RnadeParams, RnadeTrace)> {
        let mut grad = self.zeros_like();
        let trace = self.accumulate_grad_nll(o, x, scale_mean_grad_by_sigma, 1.0, &mut grad)?;
        Ok((grad, trace))
    }

    /// A zero-valued parameter set with the same shape (used as a gradient buffer).
    pub fn zeros_like(&self) -> RnadeParams {
        let mut z = RnadeParams::zeros(self.dim(), self.hidden(), self.family);
        z.activation = self.activation;
        z
    }

    pub fn accumulate_grad_nll(
        &self,
        o: &Ordering,
        x: &[f64],
        scale_mean_grad_by_sigma: bool,
        scale: f64,
        grad: &mut RnadeParams,
    ) -> Result<RnadeTrace> {
        let trace = self.log_prob(o, x)?;
        let (h_dim, c) = (self.hidden(), self.family.components());
        let mut delta_a = vec![0.0; h_dim];
        let mut delta_h = vec![0.0; h_dim];
        for d in (0..self.dim()).rev() {
            let i = o.at(d);
            let h = &trace.h[d];
            let a = &trace.a[d];
            let gz = output_gradients(
                self.family,
                &trace.z[d],
                &trace.conditionals[d],
                x[i],
                scale_mean_grad_by_sigma,
            );
            if x[i] != 0.0 {
                axpy(x[i], &delta_a, grad.w_t.row_mut(i));
            }
            delta_h.fill(0.0);
            let heads = [
                (&gz.z_pi, &self.v_pi, &mut grad.v_pi, &mut grad.b_pi),
                (&gz.z_mu, &self.v_mu, &mut grad.v_mu, &mut grad.b_mu),
                (&gz.z_sigma, &self.v_sigma, &mut grad.v_sigma, &mut grad.b_sigma),
            ];
            for (gzs, v, gv, gb) in heads {
                for (k, &g) in gzs.iter().enumerate() {
                    let row = i * c + k;
                    let g = scale * g;
                    gb[row] += g;
                    axpy(g, h, gv.row_mut(row));
                    axpy(g, v.row(row), &mut delta_h);
                }
            }
            for k in 0..h_dim {
                delta_h[k] *= self.activation.derivative(a[k], h[k]);
            }
            axpy(1.0, &delta_h, &mut grad.c);
            axpy(1.0, &delta_h, &mut delta_a);
        }
        Ok(trace)
    }

    /// Ancestral sample.
    pub fn sample<R: Rng + ?Sized>(&self, o: &Ordering, rng: &mut R) -> Result<Vec<f64>> {
        ensure_len("ordering", self.dim(), o.len())?;
        let mut x = vec![0.0; self.dim()];
        let mut a = self.c.clone();
        let mut h = vec![0.0; self.hidden()];
        for i in o.iter() {
            for (hk, &ak) in h.iter_mut().zip(&a) {
                *hk = self.activation.apply(ak);
            }
            let z = head_outputs(self.family, &h, &self.heads(i));
            x[i] = sample_1d(self.family, &params_from_outputs(self.family, &z), rng);
            axpy(x[i], self.w_t.row(i), &mut a);
        }
        Ok(x)
    }
}

impl ParamBlocks for RnadeParams {
    fn block_specs(&self) -> Vec<BlockSpec> {
        vec![
            BlockSpec::new("W", self.w_t.as_slice().len(), BlockRole::InputHidden),
            BlockSpec::new("c", self.c.len(), BlockRole::Other),
            BlockSpec::new("V_pi", self.v_pi.as_slice().len(), BlockRole::Other),
            BlockSpec::new("b_pi", self.b_pi.len(), BlockRole::Other),
            BlockSpec::new("V_mu", self.v_mu.as_slice().len(), BlockRole::Other),
            BlockSpec::new("b_mu", self.b_mu.len(), BlockRole::Other),
            BlockSpec::new("V_sigma", self.v_sigma.as_slice().len(), BlockRole::Other),
            BlockSpec::new("b_sigma", self.b_sigma.len(), BlockRole::Other),
        ]
    }

    fn blocks(&self) -> Vec<&[f64]> {
        vec![
            self.w_t.as_slice(),
            &self.c,
            self.v_pi.as_slice(),
            &self.b_pi,
            self.v_mu.as_slice(),
            &self.b_mu,
            self.v_sigma.as_slice(),
            &self.b_sigma,
        ]
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.w_t.as_mut_slice(),
            &mut self.c,
            self.v_pi.as_mut_slice(),
            &mut self.b_pi,
            self.v_mu.as_mut_slice(),
            &mut self.b_mu,
            self.v_sigma.as_mut_slice(),
            &mut self.b_sigma,
        ]
    }
}
