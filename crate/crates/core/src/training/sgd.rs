use crate::error::{Error, Result};
use crate::params::{BlockRole, ParamBlocks};

/// Stochastic gradient descent with optional momentum and input-side weight decay.
///
/// `velocity = momentum * velocity - lr * (grad + decay * W_input)`, then
/// `params += velocity`.
#[derive(Debug, Clone, Default)]
pub struct Sgd {
    velocity: Vec<Vec<f64>>,
}

impl Sgd {
    pub fn new() -> Self {
        Sgd::default()
    }

    /// Applies one update; `step` is only used to label errors.
    pub fn step<P: ParamBlocks, G: ParamBlocks>(
        &mut self,
        params: &mut P,
        grad: &G,
        lr: f64,
        momentum: f64,
        weight_decay: f64,
        step: usize,
    ) -> Result<()> {
        let specs = params.block_specs();
        let gblocks = grad.blocks();
        if gblocks.len() != specs.len() {
            return Err(Error::dim("gradient blocks", specs.len(), gblocks.len()));
        }
        for (spec, g) in specs.iter().zip(&gblocks) {
            if g.len() != spec.len {
                return Err(Error::dim("gradient block length", spec.len, g.len()));
            }
            if let Some(pos) = g.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    step,
                    what: format!("gradient of block {} at index {pos}", spec.name),
                });
            }
        }
        if self.velocity.len() != specs.len() {
            self.velocity = specs.iter().map(|s| vec![0.0; s.len]).collect();
        }
        for (((spec, p), g), vel) in specs
            .iter()
            .zip(params.blocks_mut())
            .zip(gblocks)
            .zip(self.velocity.iter_mut())
        {
            let decay = if spec.role == BlockRole::InputHidden {
                weight_decay
            } else {
                0.0
            };
            for ((pi, &gi), vi) in p.iter_mut().zip(g).zip(vel.iter_mut()) {
                *vi = momentum * *vi - lr * (gi + decay * *pi);
                *pi += *vi;
            }
        }
        Ok(())
    }
}

pub fn sgd_step<P: ParamBlocks, G: ParamBlocks>(
    params: &mut P,
    grad: &G,
    lr: f64,
    momentum: f64,
    weight_decay: f64,
    velocity: &mut Sgd,
    step: usize,
) -> Result<()> {
    velocity.step(params, grad, lr, momentum, weight_decay, step)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::BlockSpec;

    #[derive(Clone, Debug, PartialEq)]
    struct Two {
        input: Vec<f64>,
        output: Vec<f64>,
    }

    impl ParamBlocks for Two {
        fn block_specs(&self) -> Vec<BlockSpec> {
            vec![
                BlockSpec::new("W", self.input.len(), BlockRole::InputHidden),
                BlockSpec::new("V", self.output.len(), BlockRole::Other),
            ]
        }
        fn blocks(&self) -> Vec<&[f64]> {
            vec![&self.input, &self.output]
        }
        fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
            vec![&mut self.input, &mut self.output]
        }
    }

    #[test]
    fn plain_step() {
        let mut p = Two {
            input: vec![1.0, 2.0],
            output: vec![3.0],
        };
        let g = Two {
            input: vec![0.5, -1.0],
            output: vec![2.0],
        };
        Sgd::new().step(&mut p, &g, 0.1, 0.0, 0.0, 0).unwrap();
        assert_eq!(p.input, vec![1.0 - 0.05, 2.0 + 0.1]);
        assert_eq!(p.output, vec![3.0 - 0.2]);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = Two {
            input: vec![1.0],
            output: vec![-2.0],
        };
        let before = p.clone();
        let g = Two {
            input: vec![0.0],
            output: vec![0.0],
        };
        Sgd::new().step(&mut p, &g, 0.3, 0.0, 0.0, 0).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn quadratic_bowl_contracts_by_point_nine() {
        let mut p = Two {
            input: vec![],
            output: vec![4.0],
        };
        let mut opt = Sgd::new();
        for t in 0..50 {
            let prev = p.output[0];
            let g = Two {
                input: vec![],
                output: vec![prev],
            };
            opt.step(&mut p, &g, 0.1, 0.0, 0.0, t).unwrap();
            assert!((p.output[0] - 0.9 * prev).abs() <= 1e-15 * prev.abs());
        }
        assert!((p.output[0] - 4.0 * 0.9f64.powi(50)).abs() < 1e-12);
    }

    #[test]
    fn decay_touches_only_input_hidden() {
        let mut p = Two {
            input: vec![1.0],
            output: vec![1.0],
        };
        let g = Two {
            input: vec![0.0],
            output: vec![0.0],
        };
        Sgd::new().step(&mut p, &g, 0.1, 0.0, 0.5, 0).unwrap();
        assert_eq!(p.output, vec![1.0]);
        assert!((p.input[0] - 0.95).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_reports_step() {
        let mut p = Two {
            input: vec![1.0],
            output: vec![1.0],
        };
        let g = Two {
            input: vec![f64::NAN],
            output: vec![0.0],
        };
        match Sgd::new().step(&mut p, &g, 0.1, 0.0, 0.0, 17) {
            Err(Error::NonFinite { step, .. }) => assert_eq!(step, 17),
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }
}
