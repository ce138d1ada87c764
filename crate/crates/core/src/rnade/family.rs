use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Error;
use crate::math::{clamp_prob, dot, log_bernoulli, logsumexp, sigmoid, softmax_into};

/// Lower bound applied to every scale after exponentiation.
pub const SIGMA_FLOOR: f64 = 1e-6;

/// Scale used by [`ConditionalFamily::FixedVarGaussian`] (data are assumed standardized).
pub const FIXED_SIGMA: f64 = 1.0;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Parametric form of every one-dimensional conditional.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConditionalFamily {
    /// Binary data only; the single location output is a logit.
    Bernoulli,
    FixedVarGaussian,
    Gaussian,
    Laplace,
    MixtureOfGaussians(usize),
    MixtureOfLaplace(usize),
}

/// Shape of each component density.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kernel {
    Bernoulli,
    Gaussian,
    Laplace,
}

impl ConditionalFamily {
    pub fn components(self) -> usize {
        match self {
            ConditionalFamily::MixtureOfGaussians(c) | ConditionalFamily::MixtureOfLaplace(c) => c,
            _ => 1,
        }
    }

    pub fn kernel(self) -> Kernel {
        match self {
            ConditionalFamily::Bernoulli => Kernel::Bernoulli,
            ConditionalFamily::Laplace | ConditionalFamily::MixtureOfLaplace(_) => Kernel::Laplace,
            _ => Kernel::Gaussian,
        }
    }

    /// Whether mixing proportions come from a network head.
    pub fn has_pi_head(self) -> bool {
        matches!(
            self,
            ConditionalFamily::MixtureOfGaussians(_) | ConditionalFamily::MixtureOfLaplace(_)
        )
    }

    /// Whether scales come from a network head.
    pub fn has_sigma_head(self) -> bool {
        !matches!(
            self,
            ConditionalFamily::Bernoulli | ConditionalFamily::FixedVarGaussian
        )
    }

    pub fn is_mixture(self) -> bool {
        self.has_pi_head()
    }

    pub fn is_binary(self) -> bool {
        self == ConditionalFamily::Bernoulli
    }
}

impl fmt::Display for ConditionalFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConditionalFamily::Bernoulli => write!(f, "bernoulli"),
            ConditionalFamily::FixedVarGaussian => write!(f, "fv"),
            ConditionalFamily::Gaussian => write!(f, "gaussian"),
            ConditionalFamily::Laplace => write!(f, "laplace"),
            ConditionalFamily::MixtureOfGaussians(c) => write!(f, "mog:{c}"),
            ConditionalFamily::MixtureOfLaplace(c) => write!(f, "mol:{c}"),
        }
    }
}

impl FromStr for ConditionalFamily {
    type Err = Error;

    /// Accepts `bernoulli`, `fv`, `gaussian`, `laplace`, `mog:C`, `mol:C`.
    fn from_str(s: &str) -> Result<Self, Error> {
        let s = s.trim().to_ascii_lowercase();
        let (name, comps) = match s.split_once(':') {
            Some((n, c)) => (n.to_string(), Some(c.to_string())),
            None => (s.clone(), None),
        };
        let parse_c = |c: Option<String>| -> Result<usize, Error> {
            let c = c.ok_or_else(|| Error::Config(format!("family `{s}` needs a component count")))?;
            let c: usize = c
                .parse()
                .map_err(|_| Error::Config(format!("bad component count in `{s}`")))?;
            if c == 0 {
                return Err(Error::Config("component count must be >= 1".into()));
            }
            Ok(c)
        };
        match name.as_str() {
            "bernoulli" => Ok(ConditionalFamily::Bernoulli),
            "fv" | "fixed_var" | "fixed_var_gaussian" => Ok(ConditionalFamily::FixedVarGaussian),
            "gaussian" => Ok(ConditionalFamily::Gaussian),
            "laplace" => Ok(ConditionalFamily::Laplace),
            "mog" => Ok(ConditionalFamily::MixtureOfGaussians(parse_c(comps)?)),
            "mol" => Ok(ConditionalFamily::MixtureOfLaplace(parse_c(comps)?)),
            _ => Err(Error::Config(format!("unknown conditional family `{s}`"))),
        }
    }
}

/// Parameters of one dimension's conditional.
///
/// For [`ConditionalFamily::Bernoulli`], `mu[0]` holds the success probability.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureParams1D {
    pub pi: Vec<f64>,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

/// Output-head weights for a single dimension: `v_*` are C×H row-major, `b_*` length C.
/// Absent heads are empty slices.
#[derive(Debug, Clone, Copy)]
pub struct DimHeads<'a> {
    pub v_pi: &'a [f64],
    pub b_pi: &'a [f64],
    pub v_mu: &'a [f64],
    pub b_mu: &'a [f64],
    pub v_sigma: &'a [f64],
    pub b_sigma: &'a [f64],
}

/// Raw head outputs `z` for one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadOutputs {
    pub z_pi: Vec<f64>,
    pub z_mu: Vec<f64>,
    pub z_sigma: Vec<f64>,
}

fn head_matvec(v: &[f64], b: &[f64], h: &[f64]) -> Vec<f64> {
    b.iter()
        .zip(v.chunks_exact(h.len().max(1)))
        .map(|(&bc, row)| bc + dot(row, h))
        .collect()
}

pub fn head_outputs(family: ConditionalFamily, h: &[f64], heads: &DimHeads<'_>) -> HeadOutputs {
    HeadOutputs {
        z_pi: if family.has_pi_head() {
            head_matvec(heads.v_pi, heads.b_pi, h)
        } else {
            Vec::new()
        },
        z_mu: head_matvec(heads.v_mu, heads.b_mu, h),
        z_sigma: if family.has_sigma_head() {
            head_matvec(heads.v_sigma, heads.b_sigma, h)
        } else {
            Vec::new()
        },
    }
}

/// Maps head outputs to mixture parameters: softmax weights, identity means, floored exp scales.
pub fn params_from_outputs(family: ConditionalFamily, z: &HeadOutputs) -> MixtureParams1D {
    let c = family.components();
    let pi = if family.has_pi_head() {
        let mut pi = vec![0.0; c];
        softmax_into(&z.z_pi, &mut pi);
        pi
    } else {
        vec![1.0]
    };
    let mu = if family.is_binary() {
        vec![sigmoid(z.z_mu[0])]
    } else {
        z.z_mu.clone()
    };
    let sigma = if family.has_sigma_head() {
        z.z_sigma.iter().map(|&s| s.exp().max(SIGMA_FLOOR)).collect()
    } else {
        vec![FIXED_SIGMA; c]
    };
    MixtureParams1D { pi, mu, sigma }
}

/// Conditional parameters for one dimension from its hidden vector.
pub fn conditional_params(
    family: ConditionalFamily,
    h: &[f64],
    heads: &DimHeads<'_>,
) -> MixtureParams1D {
    params_from_outputs(family, &head_outputs(family, h, heads))
}

#[inline]
fn component_log_density(kernel: Kernel, mu: f64, sigma: f64, v: f64) -> f64 {
    match kernel {
        Kernel::Gaussian => {
            let z = (v - mu) / sigma;
            -HALF_LN_2PI - sigma.ln() - 0.5 * z * z
        }
        Kernel::Laplace => -(2.0 * sigma).ln() - (v - mu).abs() / sigma,
        Kernel::Bernoulli => log_bernoulli(v, mu),
    }
}

/// `log π_c + log f_c(v)` for every component.
pub fn component_log_terms(
    family: ConditionalFamily,
    params: &MixtureParams1D,
    v: f64,
) -> Vec<f64> {
    let kernel = family.kernel();
    params
        .pi
        .iter()
        .zip(params.mu.iter().zip(&params.sigma))
        .map(|(&p, (&m, &s))| p.ln() + component_log_density(kernel, m, s, v))
        .collect()
}

/// Log-density of `v` under one conditional, via log-sum-exp over components.
pub fn log_density_1d(family: ConditionalFamily, params: &MixtureParams1D, v: f64) -> f64 {
    if family.is_binary() {
        return log_bernoulli(v, params.mu[0]);
    }
    logsumexp(&component_log_terms(family, params, v))
}

/// Gradient of `-log p(v)` with respect to the head outputs `z`.
///
/// With `scale_mean_by_sigma`, the location gradient of each component is
/// multiplied by its scale before it reaches the location head.
pub fn output_gradients(
    family: ConditionalFamily,
    z: &HeadOutputs,
    params: &MixtureParams1D,
    v: f64,
    scale_mean_by_sigma: bool,
) -> HeadOutputs {
    if family.is_binary() {
        return HeadOutputs {
            z_pi: Vec::new(),
            z_mu: vec![params.mu[0] - v],
            z_sigma: Vec::new(),
        };
    }
    let terms = component_log_terms(family, params, v);
    let lse = logsumexp(&terms);
    let resp: Vec<f64> = terms.iter().map(|t| (t - lse).exp()).collect();
    let kernel = family.kernel();

    let z_pi = if family.has_pi_head() {
        params.pi.iter().zip(&resp).map(|(p, r)| p - r).collect()
    } else {
        Vec::new()
    };
    let mut z_mu = Vec::with_capacity(resp.len());
    let mut z_sigma = Vec::with_capacity(resp.len());
    for (c, &r) in resp.iter().enumerate() {
        let (m, s) = (params.mu[c], params.sigma[c]);
        let diff = v - m;
        let (dmu, dlog_sigma) = match kernel {
            Kernel::Gaussian => (-diff / (s * s), 1.0 - diff * diff / (s * s)),
            Kernel::Laplace => (-diff.signum() / s, 1.0 - diff.abs() / s),
            Kernel::Bernoulli => unreachable!(),
        };
        let mut g_mu = r * dmu;
        if scale_mean_by_sigma {
            g_mu *= s;
        }
        z_mu.push(g_mu);
        if family.has_sigma_head() {
            // The floor is flat, so a floored scale receives no gradient.
            let floored = z.z_sigma[c].exp() < SIGMA_FLOOR;
            z_sigma.push(if floored { 0.0 } else { r * dlog_sigma });
        }
    }
    HeadOutputs {
        z_pi,
        z_mu,
        z_sigma,
    }
}

/// Draws a component by `pi`, then a value from that component.
pub fn sample_1d<R: Rng + ?Sized>(
    family: ConditionalFamily,
    params: &MixtureParams1D,
    rng: &mut R,
) -> f64 {
    if family.is_binary() {
        return if rng.random::<f64>() < clamp_prob(params.mu[0]) {
            1.0
        } else {
            0.0
        };
    }
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut comp = params.pi.len() - 1;
    for (c, &p) in params.pi.iter().enumerate() {
        acc += p;
        if u < acc {
            comp = c;
            break;
        }
    }
    let (m, s) = (params.mu[comp], params.sigma[comp]);
    match family.kernel() {
        Kernel::Gaussian => {
            let n: f64 = StandardNormal.sample(rng);
            m + s * n
        }
        Kernel::Laplace => {
            let u: f64 = rng.random::<f64>() - 0.5;
            m - s * u.signum() * (1.0 - 2.0 * u.abs()).ln()
        }
        Kernel::Bernoulli => unreachable!(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zero_heads(c: usize, h: usize) -> (Vec<f64>, Vec<f64>) {
        (vec![0.0; c * h], vec![0.0; c])
    }

    #[test]
    fn zero_heads_give_uniform_unit_mixture() {
        let (v, b) = zero_heads(3, 4);
        let heads = DimHeads {
            v_pi: &v,
            b_pi: &b,
            v_mu: &v,
            b_mu: &b,
            v_sigma: &v,
            b_sigma: &b,
        };
        let p = conditional_params(ConditionalFamily::MixtureOfGaussians(3), &[0.3, 1.0, -2.0, 0.0], &heads);
        assert!(p.pi.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
        assert_eq!(p.mu, vec![0.0; 3]);
        assert_eq!(p.sigma, vec![1.0; 3]);
    }

    #[test]
    fn softmax_arithmetic() {
        let z = HeadOutputs {
            z_pi: vec![3f64.ln(), 0.0],
            z_mu: vec![0.0, 0.0],
            z_sigma: vec![0.0, 0.0],
        };
        let p = params_from_outputs(ConditionalFamily::MixtureOfGaussians(2), &z);
        assert!((p.pi[0] - 0.75).abs() < 1e-15);
        assert!((p.pi[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn softmax_shift_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let z_pi: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
        let family = ConditionalFamily::MixtureOfGaussians(5);
        let mk = |shift: f64| HeadOutputs {
            z_pi: z_pi.iter().map(|z| z + shift).collect(),
            z_mu: vec![0.0; 5],
            z_sigma: vec![0.0; 5],
        };
        let a = params_from_outputs(family, &mk(0.0));
        let b = params_from_outputs(family, &mk(123.0));
        assert!((a.pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (x, y) in a.pi.iter().zip(&b.pi) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn standard_densities_at_mode() {
        let unit = MixtureParams1D {
            pi: vec![1.0],
            mu: vec![0.0],
            sigma: vec![1.0],
        };
        assert!((log_density_1d(ConditionalFamily::Gaussian, &unit, 0.0) + 0.918_938_533_204_672_7).abs() < 1e-12);
        assert!((log_density_1d(ConditionalFamily::Laplace, &unit, 0.0) + 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn stable_for_extreme_arguments() {
        let p = MixtureParams1D {
            pi: vec![0.5, 0.5],
            mu: vec![-1.0, 1.0],
            sigma: vec![SIGMA_FLOOR, 1.0],
        };
        for fam in [ConditionalFamily::MixtureOfGaussians(2), ConditionalFamily::MixtureOfLaplace(2)] {
            for v in [-1e6, -1.0, 0.0, 1e6] {
                assert!(log_density_1d(fam, &p, v).is_finite(), "{fam} at {v}");
            }
        }
    }

    #[test]
    fn family_names_round_trip() {
        for f in [
            ConditionalFamily::Bernoulli,
            ConditionalFamily::FixedVarGaussian,
            ConditionalFamily::Gaussian,
            ConditionalFamily::Laplace,
            ConditionalFamily::MixtureOfGaussians(5),
            ConditionalFamily::MixtureOfLaplace(20),
        ] {
            assert_eq!(f.to_string().parse::<ConditionalFamily>().unwrap(), f);
        }
        assert!("mog".parse::<ConditionalFamily>().is_err());
        assert!("mog:0".parse::<ConditionalFamily>().is_err());
    }

    #[test]
    fn degenerate_mixture_never_picks_zero_weight_component() {
        let p = MixtureParams1D {
            pi: vec![1.0, 0.0],
            mu: vec![-100.0, 100.0],
            sigma: vec![1.0, 1.0],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10_000 {
            assert!(sample_1d(ConditionalFamily::MixtureOfGaussians(2), &p, &mut rng) < 0.0);
        }
    }
}
