//! Flat views over parameter blocks, shared by the optimizer, finite-difference
//! checks and the model container.

/// What a parameter block is used for; weight decay applies to `InputHidden` only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockRole {
    InputHidden,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSpec {
    pub name: String,
    pub len: usize,
    pub role: BlockRole,
}

impl BlockSpec {
    pub fn new(name: impl Into<String>, len: usize, role: BlockRole) -> Self {
        BlockSpec {
            name: name.into(),
            len,
            role,
        }
    }
}

/// A model (or gradient) exposed as an ordered list of flat `f64` blocks.
///
/// Block order and lengths are fixed for a given shape; gradients of a model
/// use the same layout as the model itself.
pub trait ParamBlocks {
    fn block_specs(&self) -> Vec<BlockSpec>;
    fn blocks(&self) -> Vec<&[f64]>;
    fn blocks_mut(&mut self) -> Vec<&mut [f64]>;

    fn num_params(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    fn all_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    fn fill_zero(&mut self) {
        for b in self.blocks_mut() {
            b.fill(0.0);
        }
    }

    /// `self += alpha * other`, block by block.
    fn add_scaled(&mut self, alpha: f64, other: &Self)
    where
        Self: Sized,
    {
        for (dst, src) in self.blocks_mut().into_iter().zip(other.blocks()) {
            crate::math::axpy(alpha, src, dst);
        }
    }

    fn scale(&mut self, alpha: f64) {
        for b in self.blocks_mut() {
            for v in b.iter_mut() {
                *v *= alpha;
            }
        }
    }

    /// Copies every parameter into one flat vector (block order).
    fn to_flat(&self) -> Vec<f64> {
        self.blocks().concat()
    }

    /// Mutable access to the `i`-th parameter in flat order.
    fn flat_get_mut(&mut self, mut i: usize) -> Option<&mut f64> {
        for b in self.blocks_mut() {
            if i < b.len() {
                return Some(&mut b[i]);
            }
            i -= b.len();
        }
        None
    }
}
