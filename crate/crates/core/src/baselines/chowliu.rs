use rand::Rng;

use crate::error::{ensure_len, Error, Result};
use crate::nade::check_binary;

/// Tree-structured distribution over binary variables.
#[derive(Debug, Clone, PartialEq)]
pub struct ChowLiuTree {
    pub root: usize,
    /// `parent[d]` is `None` only for the root.
    pub parent: Vec<Option<usize>>,
    /// `cpt[d][z] = p(x_d = 1 | x_parent = z)`; unused for the root.
    pub cpt: Vec<[f64; 2]>,
    /// `p(x_root = 1)`.
    pub root_p: f64,
    pub alpha: f64,
}

/// Pairwise joint counts `n[i][j][a][b]` for `i < j`, plus single counts.
struct Counts {
    n: usize,
    ones: Vec<usize>,
    pair: Vec<Vec<[[usize; 2]; 2]>>,
}

fn counts(data: &[Vec<f64>], dim: usize) -> Counts {
    let mut ones = vec![0; dim];
    let mut pair = vec![vec![[[0usize; 2]; 2]; dim]; dim];
    for x in data {
        let b: Vec<usize> = x.iter().map(|&v| v as usize).collect();
        for i in 0..dim {
            ones[i] += b[i];
            for j in i + 1..dim {
                pair[i][j][b[i]][b[j]] += 1;
            }
        }
    }
    Counts {
        n: data.len(),
        ones,
        pair,
    }
}

fn joint(c: &Counts, i: usize, j: usize, a: usize, b: usize) -> usize {
    if i < j {
        c.pair[i][j][a][b]
    } else {
        c.pair[j][i][b][a]
    }
}

/// Empirical mutual information (nats) between variables `i` and `j`.
fn mutual_info(c: &Counts, i: usize, j: usize) -> f64 {
    let n = c.n as f64;
    let marg = |k: usize, v: usize| if v == 1 { c.ones[k] } else { c.n - c.ones[k] } as f64;
    let mut mi = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            let nab = joint(c, i, j, a, b) as f64;
            if nab > 0.0 {
                mi += nab / n * (nab * n / (marg(i, a) * marg(j, b))).ln();
            }
        }
    }
    mi
}

/// Pairwise mutual-information matrix from empirical counts.
pub fn mutual_information(data: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let dim = validate(data)?;
    let c = counts(data, dim);
    Ok((0..dim)
        .map(|i| (0..dim).map(|j| if i == j { 0.0 } else { mutual_info(&c, i, j) }).collect())
        .collect())
}

fn validate(data: &[Vec<f64>]) -> Result<usize> {
    let dim = data.first().map(Vec::len).ok_or_else(|| Error::Dataset("empty training set".into()))?;
    for x in data {
        ensure_len("input", dim, x.len())?;
        check_binary(x)?;
    }
    Ok(dim)
}

fn lidstone(k: usize, n: usize, alpha: f64) -> f64 {
    let den = n as f64 + 2.0 * alpha;
    if den > 0.0 {
        (k as f64 + alpha) / den
    } else {
        0.5
    }
}

/// Estimates smoothed CPTs for a fixed tree given as a parent vector.
pub fn fit_structure(data: &[Vec<f64>], parent: &[Option<usize>], alpha: f64) -> Result<ChowLiuTree> {
    let dim = validate(data)?;
    ensure_len("parent vector", dim, parent.len())?;
    let roots: Vec<usize> = (0..dim).filter(|&d| parent[d].is_none()).collect();
    if roots.len() != 1 {
        return Err(Error::Contract(format!("tree must have exactly one root, found {}", roots.len())));
    }
    let c = counts(data, dim);
    let root = roots[0];
    let mut cpt = vec![[0.5; 2]; dim];
    for d in 0..dim {
        if let Some(p) = parent[d] {
            for z in 0..2 {
                let npz = joint(&c, p, d, z, 0) + joint(&c, p, d, z, 1);
                cpt[d][z] = lidstone(joint(&c, p, d, z, 1), npz, alpha);
            }
        }
    }
    Ok(ChowLiuTree {
        root,
        parent: parent.to_vec(),
        cpt,
        root_p: lidstone(c.ones[root], c.n, alpha),
        alpha,
    })
}

/// Maximum-likelihood tree (maximum-MI spanning tree) rooted at variable 0.
///
/// Equal-MI edges are taken in lexicographic `(i, j)` order.
pub fn chowliu_fit(data: &[Vec<f64>], alpha: f64) -> Result<ChowLiuTree> {
    chowliu_fit_rooted(data, alpha, 0)
}

pub fn chowliu_fit_rooted(data: &[Vec<f64>], alpha: f64, root: usize) -> Result<ChowLiuTree> {
    if alpha.is_nan() || alpha < 0.0 {
        return Err(Error::Config(format!("smoothing alpha must be non-negative, got {alpha}")));
    }
    let dim = validate(data)?;
    if dim < 2 {
        return Err(Error::Dataset("Chow-Liu needs at least two variables".into()));
    }
    if root >= dim {
        return Err(Error::dim("root index bound", dim, root));
    }
    let c = counts(data, dim);
    let mut edges: Vec<(f64, usize, usize)> = Vec::with_capacity(dim * (dim - 1) / 2);
    for i in 0..dim {
        for j in i + 1..dim {
            edges.push((mutual_info(&c, i, j), i, j));
        }
    }
    edges.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    let mut uf: Vec<usize> = (0..dim).collect();
    fn find(uf: &mut [usize], mut i: usize) -> usize {
        while uf[i] != i {
            uf[i] = uf[uf[i]];
            i = uf[i];
        }
        i
    }
    let mut adj = vec![Vec::new(); dim];
    for (_, i, j) in edges {
        let (ri, rj) = (find(&mut uf, i), find(&mut uf, j));
        if ri != rj {
            uf[ri] = rj;
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    let mut parent = vec![None; dim];
    let mut seen = vec![false; dim];
    let mut stack = vec![root];
    seen[root] = true;
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                parent[v] = Some(u);
                stack.push(v);
            }
        }
    }
    fit_structure(data, &parent, alpha)
}

impl ChowLiuTree {
    pub fn dim(&self) -> usize {
        self.parent.len()
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.parent
            .iter()
            .enumerate()
            .filter_map(|(d, p)| p.map(|p| (p.min(d), p.max(d))))
            .collect()
    }

    /// Topological order from the root.
    fn order(&self) -> Vec<usize> {
        let mut out = vec![self.root];
        let mut i = 0;
        while i < out.len() {
            let u = out[i];
            out.extend((0..self.dim()).filter(|&v| self.parent[v] == Some(u)));
            i += 1;
        }
        out
    }
}

fn ln_bern(x: f64, p: f64) -> f64 {
    if x == 1.0 {
        p.ln()
    } else {
        (1.0 - p).ln()
    }
}

/// Root marginal plus one CPT term per edge.
pub fn chowliu_logprob(tree: &ChowLiuTree, x: &[f64]) -> Result<f64> {
    ensure_len("input", tree.dim(), x.len())?;
    check_binary(x)?;
    let mut lp = ln_bern(x[tree.root], tree.root_p);
    for (d, p) in tree.parent.iter().enumerate() {
        if let Some(p) = *p {
            lp += ln_bern(x[d], tree.cpt[d][x[p] as usize]);
        }
    }
    Ok(lp)
}

pub fn chowliu_sample<R: Rng + ?Sized>(tree: &ChowLiuTree, rng: &mut R) -> Vec<f64> {
    let mut x = vec![0.0; tree.dim()];
    for d in tree.order() {
        let p = match tree.parent[d] {
            None => tree.root_p,
            Some(pa) => tree.cpt[d][x[pa] as usize],
        };
        x[d] = if rng.random::<f64>() < p { 1.0 } else { 0.0 };
    }
    x
}
