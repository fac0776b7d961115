//! Direct solver for the block structure of the momentum-ordered generator.
//!
//! Unknowns are grouped by momentum row (block size `m_q`). Interior block
//! rows couple only the neighbouring momentum rows through diagonal blocks;
//! the two boundary rows reach three rows away and are first reduced to
//! block-tridiagonal form. Elimination is block LU (Schur complements) with
//! partial pivoting inside each diagonal block.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

use super::generator::CsrMatrix;

#[derive(Clone, Debug)]
enum Block {
    Diag(Vec<f64>),
    Dense(Vec<f64>),
}

impl Block {
    fn to_dense(&self, n: usize) -> Vec<f64> {
        match self {
            Block::Dense(a) => a.clone(),
            Block::Diag(d) => {
                let mut a = vec![0.0; n * n];
                for (i, x) in d.iter().enumerate() {
                    a[i * n + i] = *x;
                }
                a
            }
        }
    }

    /// `self · B` where `B` is `n × c` row-major.
    fn mul_mat(&self, b: &[f64], n: usize, c: usize) -> Vec<f64> {
        let mut out = vec![0.0; n * c];
        match self {
            Block::Diag(d) => {
                for i in 0..n {
                    for k in 0..c {
                        out[i * c + k] = d[i] * b[i * c + k];
                    }
                }
            }
            Block::Dense(a) => {
                for i in 0..n {
                    let row = &mut out[i * c..(i + 1) * c];
                    for (l, &x) in a[i * n..(i + 1) * n].iter().enumerate() {
                        if x != 0.0 {
                            for (o, y) in row.iter_mut().zip(&b[l * c..(l + 1) * c]) {
                                *o += x * y;
                            }
                        }
                    }
                }
            }
        }
        out
    }

    fn mul_block(&self, other: &Block, n: usize) -> Block {
        match (self, other) {
            (Block::Diag(a), Block::Diag(b)) => Block::Diag(a.iter().zip(b).map(|(x, y)| x * y).collect()),
            _ => Block::Dense(self.mul_mat(&other.to_dense(n), n, n)),
        }
    }

    fn sub_assign(&mut self, other: &Block, n: usize) {
        match (&mut *self, other) {
            (Block::Diag(a), Block::Diag(b)) => a.iter_mut().zip(b).for_each(|(x, y)| *x -= y),
            (Block::Dense(a), Block::Diag(b)) => {
                for (i, y) in b.iter().enumerate() {
                    a[i * n + i] -= y;
                }
            }
            (Block::Dense(a), Block::Dense(b)) => a.iter_mut().zip(b).for_each(|(x, y)| *x -= y),
            (Block::Diag(_), Block::Dense(b)) => {
                let mut a = self.to_dense(n);
                a.iter_mut().zip(b).for_each(|(x, y)| *x -= y);
                *self = Block::Dense(a);
            }
        }
    }
}

/// Row-reduction `row_r −= F·row_s` recorded for replay on right-hand sides.
#[derive(Clone, Debug)]
struct RowOp {
    target: usize,
    source: usize,
    factor: Block,
}

/// Block-tridiagonal system, possibly after boundary reduction.
#[derive(Clone, Debug)]
pub struct BlockSystem {
    n: usize,
    rows: Vec<BTreeMap<usize, Block>>,
    ops: Vec<RowOp>,
}

impl BlockSystem {
    /// Splits a CSR matrix into `n_blocks` block rows of size `block`.
    pub fn from_csr(a: &CsrMatrix, block: usize) -> Result<Self> {
        let n_blocks = a.dim() / block;
        if n_blocks * block != a.dim() || n_blocks < 8 {
            return Err(Error::invalid("block", "matrix does not split into at least 8 blocks"));
        }
        let n = block;
        let mut rows = Vec::with_capacity(n_blocks);
        for bj in 0..n_blocks {
            let mut dense: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
            for i in 0..n {
                for (c, v) in a.row(bj * n + i) {
                    let (bc, ic) = (c / n, c % n);
                    dense.entry(bc).or_insert_with(|| vec![0.0; n * n])[i * n + ic] += v;
                }
            }
            let row = dense
                .into_iter()
                .map(|(bc, m)| {
                    let diagonal = (0..n).all(|i| (0..n).all(|k| i == k || m[i * n + k] == 0.0));
                    let b = if diagonal && bc != bj {
                        Block::Diag((0..n).map(|i| m[i * n + i]).collect())
                    } else {
                        Block::Dense(m)
                    };
                    (bc, b)
                })
                .collect();
            rows.push(row);
        }
        let mut sys = Self { n, rows, ops: Vec::new() };
        sys.reduce_boundaries()?;
        Ok(sys)
    }

    pub fn n_blocks(&self) -> usize {
        self.rows.len()
    }

    /// Replaces scalar row `r` by the unit row `e_r`.
    pub fn pin(&mut self, r: usize) -> Result<()> {
        let (bj, i) = (r / self.n, r % self.n);
        if bj < 3 || bj + 4 > self.rows.len() {
            return Err(Error::invalid("pin", "pinned row must be away from the boundary blocks"));
        }
        let n = self.n;
        for (&bc, b) in self.rows[bj].iter_mut() {
            match b {
                Block::Diag(d) => d[i] = 0.0,
                Block::Dense(a) => {
                    a[i * n..(i + 1) * n].iter_mut().for_each(|x| *x = 0.0);
                    if bc == bj {
                        a[i * n + i] = 1.0;
                    }
                }
            }
        }
        Ok(())
    }

    fn eliminate(&mut self, target: usize, source: usize, col: usize) -> Result<()> {
        let n = self.n;
        let pivot = match self.rows[source].get(&col) {
            Some(Block::Diag(d)) => d.clone(),
            _ => return Err(Error::invalid("block", "boundary reduction needs a diagonal pivot block")),
        };
        if pivot.iter().any(|&x| x == 0.0) {
            return Err(Error::Solver {
                residual: f64::INFINITY,
                tolerance: 0.0,
            });
        }
        let Some(entry) = self.rows[target].remove(&col) else {
            return Ok(());
        };
        let factor = match entry {
            Block::Diag(d) => Block::Diag(d.iter().zip(&pivot).map(|(x, y)| x / y).collect()),
            Block::Dense(mut a) => {
                for i in 0..n {
                    for k in 0..n {
                        a[i * n + k] /= pivot[k];
                    }
                }
                Block::Dense(a)
            }
        };
        let source_row: Vec<(usize, Block)> = self.rows[source]
            .iter()
            .filter(|(&c, _)| c != col)
            .map(|(&c, b)| (c, b.clone()))
            .collect();
        for (c, b) in source_row {
            let update = factor.mul_block(&b, n);
            let slot = self.rows[target].entry(c).or_insert_with(|| Block::Diag(vec![0.0; n]));
            slot.sub_assign(&update, n);
        }
        self.ops.push(RowOp { target, source, factor });
        Ok(())
    }

    fn reduce_boundaries(&mut self) -> Result<()> {
        let last = self.rows.len() - 1;
        self.eliminate(0, 2, 3)?;
        self.eliminate(0, 1, 2)?;
        self.eliminate(last, last - 2, last - 3)?;
        self.eliminate(last, last - 1, last - 2)?;
        for (j, row) in self.rows.iter().enumerate() {
            if row.keys().any(|&c| c + 1 < j || c > j + 1) {
                return Err(Error::invalid("block", "matrix is not block-tridiagonal after reduction"));
            }
        }
        Ok(())
    }

    /// Solves for several right-hand sides at once. Replays the boundary
    /// reductions on the right-hand sides first; pinning must have happened
    /// before this call.
    pub fn solve(&self, rhs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let n = self.n;
        let nb = self.rows.len();
        let c = rhs.len();
        // per block: n × c row-major
        let mut b: Vec<Vec<f64>> = (0..nb)
            .map(|j| {
                let mut m = vec![0.0; n * c];
                for i in 0..n {
                    for (k, col) in rhs.iter().enumerate() {
                        m[i * c + k] = col[j * n + i];
                    }
                }
                m
            })
            .collect();
        for op in &self.ops {
            let upd = op.factor.mul_mat(&b[op.source], n, c);
            b[op.target].iter_mut().zip(&upd).for_each(|(x, y)| *x -= y);
        }
        let mut gs: Vec<Vec<f64>> = Vec::with_capacity(nb);
        let mut zs: Vec<Vec<f64>> = Vec::with_capacity(nb);
        for j in 0..nb {
            let row = &self.rows[j];
            let mut s = row.get(&j).map(|d| d.to_dense(n)).unwrap_or_else(|| vec![0.0; n * n]);
            let mut r = std::mem::take(&mut b[j]);
            if j > 0 {
                if let Some(lo) = row.get(&(j - 1)) {
                    let lg = lo.mul_mat(&gs[j - 1], n, n);
                    s.iter_mut().zip(&lg).for_each(|(x, y)| *x -= y);
                    let lz = lo.mul_mat(&zs[j - 1], n, c);
                    r.iter_mut().zip(&lz).for_each(|(x, y)| *x -= y);
                }
            }
            let lu = Lu::factor(s, n)?;
            if j + 1 < nb {
                let mut g = row.get(&(j + 1)).map(|u| u.to_dense(n)).unwrap_or_else(|| vec![0.0; n * n]);
                lu.solve_in_place(&mut g, n);
                gs.push(g);
            } else {
                gs.push(Vec::new());
            }
            lu.solve_in_place(&mut r, c);
            zs.push(r);
        }
        for j in (0..nb - 1).rev() {
            let next = zs[j + 1].clone();
            let g = &gs[j];
            let z = &mut zs[j];
            for i in 0..n {
                for (l, &gil) in g[i * n..(i + 1) * n].iter().enumerate() {
                    if gil != 0.0 {
                        for k in 0..c {
                            z[i * c + k] -= gil * next[l * c + k];
                        }
                    }
                }
            }
            gs[j] = Vec::new();
        }
        let mut out = vec![vec![0.0; nb * n]; c];
        for (j, z) in zs.iter().enumerate() {
            for i in 0..n {
                for (k, col) in out.iter_mut().enumerate() {
                    col[j * n + i] = z[i * c + k];
                }
            }
        }
        Ok(out)
    }
}

/// Dense LU with partial pivoting, row-major.
struct Lu {
    a: Vec<f64>,
    perm: Vec<usize>,
    n: usize,
}

impl Lu {
    fn factor(mut a: Vec<f64>, n: usize) -> Result<Self> {
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for k in 0..n {
            let (piv, val) = (k..n)
                .map(|i| (i, a[i * n + k].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(val > scale * 1e-300) {
                return Err(Error::Solver {
                    residual: f64::INFINITY,
                    tolerance: 0.0,
                });
            }
            if piv != k {
                for col in 0..n {
                    a.swap(k * n + col, piv * n + col);
                }
                perm.swap(k, piv);
            }
            let d = a[k * n + k];
            let (top, bottom) = a.split_at_mut((k + 1) * n);
            let pivot_row = &top[k * n + k + 1..k * n + n];
            for i in 0..n - k - 1 {
                let row = &mut bottom[i * n..(i + 1) * n];
                let l = row[k] / d;
                row[k] = l;
                if l != 0.0 {
                    for (x, y) in row[k + 1..].iter_mut().zip(pivot_row) {
                        *x -= l * y;
                    }
                }
            }
        }
        Ok(Self { a, perm, n })
    }

    /// Overwrites the `n × c` matrix `b` with `A⁻¹b`.
    fn solve_in_place(&self, b: &mut [f64], c: usize) {
        let n = self.n;
        let mut pb = vec![0.0; n * c];
        for (i, &p) in self.perm.iter().enumerate() {
            pb[i * c..(i + 1) * c].copy_from_slice(&b[p * c..(p + 1) * c]);
        }
        for i in 0..n {
            let (done, rest) = pb.split_at_mut(i * c);
            let row = &mut rest[..c];
            for k in 0..i {
                let l = self.a[i * n + k];
                if l != 0.0 {
                    for (x, y) in row.iter_mut().zip(&done[k * c..(k + 1) * c]) {
                        *x -= l * y;
                    }
                }
            }
        }
        for i in (0..n).rev() {
            let (head, tail) = pb.split_at_mut((i + 1) * c);
            let row = &mut head[i * c..];
            for k in i + 1..n {
                let u = self.a[i * n + k];
                if u != 0.0 {
                    for (x, y) in row.iter_mut().zip(&tail[(k - i - 1) * c..(k - i) * c]) {
                        *x -= u * y;
                    }
                }
            }
            let d = self.a[i * n + i];
            row.iter_mut().for_each(|x| *x /= d);
        }
        b.copy_from_slice(&pb);
    }
}
