use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A permutation of `0..D` giving the order in which dimensions are generated.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Ordering {
    perm: Vec<usize>,
}

impl Ordering {
    /// Validates that `perm` is a permutation of `0..perm.len()`.
    pub fn new(perm: Vec<usize>) -> Result<Self> {
        let d = perm.len();
        let mut seen = vec![false; d];
        for &i in &perm {
            if i >= d || seen[i] {
                return Err(Error::Contract(format!(
                    "ordering is not a permutation of 0..{d}: {perm:?}"
                )));
            }
            seen[i] = true;
        }
        Ok(Ordering { perm })
    }

    pub fn identity(d: usize) -> Self {
        Ordering {
            perm: (0..d).collect(),
        }
    }

    pub fn random<R: rand::Rng + ?Sized>(d: usize, rng: &mut R) -> Self {
        let mut perm: Vec<usize> = (0..d).collect();
        perm.shuffle(rng);
        Ordering { perm }
    }

    /// Deterministic shuffle from a recorded seed.
    pub fn from_seed(d: usize, seed: u64) -> Self {
        Self::random(d, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.perm.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    /// Dimension generated at position `d` (0-based).
    #[inline]
    pub fn at(&self, d: usize) -> usize {
        self.perm[d]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.perm
    }

    /// Position of each dimension within the ordering.
    pub fn inverse(&self) -> Vec<usize> {
        let mut inv = vec![0; self.perm.len()];
        for (pos, &dim) in self.perm.iter().enumerate() {
            inv[dim] = pos;
        }
        inv
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.perm.iter().copied()
    }
}

/// Enumerates every permutation of `0..d` (Heap's algorithm); test-scale only.
pub fn all_orderings(d: usize) -> Vec<Ordering> {
    fn heap(k: usize, a: &mut Vec<usize>, out: &mut Vec<Ordering>) {
        if k <= 1 {
            out.push(Ordering { perm: a.clone() });
            return;
        }
        heap(k - 1, a, out);
        for i in 0..k - 1 {
            if k % 2 == 0 {
                a.swap(i, k - 1);
            } else {
                a.swap(0, k - 1);
            }
            heap(k - 1, a, out);
        }
    }
    let mut a: Vec<usize> = (0..d).collect();
    let mut out = Vec::new();
    heap(d, &mut a, &mut out);
    out
}

/// Every binary vector of length `d` in counting order; refuses `d > 20`.
pub fn all_binary_vectors(d: usize) -> Result<Vec<Vec<f64>>> {
    if d > 20 {
        return Err(Error::Contract(format!(
            "refusing to enumerate 2^{d} binary vectors"
        )));
    }
    Ok((0..1usize << d)
        .map(|bits| (0..d).map(|j| ((bits >> j) & 1) as f64).collect())
        .collect())
}
