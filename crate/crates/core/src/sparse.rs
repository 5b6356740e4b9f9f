//! Sparse symmetric factorization of block-structured normal equations.
//!
//! The pattern is computed once per problem: variables (blocks) are permuted by a
//! greedy minimum-degree ordering on the block graph, the scalar upper triangle is
//! laid out in compressed-column form, and the elimination tree is derived for an
//! up-looking LDLᵀ factorization.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap};

use nalgebra::{DMatrix, DVector};

/// Greedy minimum-degree ordering of a block graph.
///
/// The degree of a block is the summed dimension of its neighbours in the current
/// elimination graph. Ties go to the lowest block index, so the result is
/// deterministic. Returns `order[new_position] = block`.
pub fn minimum_degree_order(dims: &[usize], adjacency: &[BTreeSet<usize>]) -> Vec<usize> {
    let n = dims.len();
    let mut adj: Vec<BTreeSet<usize>> = adjacency.to_vec();
    let degree_of = |adj: &Vec<BTreeSet<usize>>, v: usize| adj[v].iter().map(|&u| dims[u]).sum::<usize>();
    let mut degree: Vec<usize> = (0..n).map(|v| degree_of(&adj, v)).collect();
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> = (0..n).map(|v| Reverse((degree[v], v))).collect();
    let mut eliminated = vec![false; n];
    let mut order = Vec::with_capacity(n);

    while let Some(Reverse((d, v))) = heap.pop() {
        if eliminated[v] || d != degree[v] {
            continue;
        }
        eliminated[v] = true;
        order.push(v);
        let nbrs: Vec<usize> = std::mem::take(&mut adj[v]).into_iter().collect();
        for &u in &nbrs {
            adj[u].remove(&v);
            for &w in &nbrs {
                if w != u {
                    adj[u].insert(w);
                }
            }
        }
        for &u in &nbrs {
            degree[u] = degree_of(&adj, u);
            heap.push(Reverse((degree[u], u)));
        }
    }
    order
}

/// Failed pivot during numeric factorization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PivotFailure {
    /// Block (in the caller's original numbering) owning the failed column.
    pub block: usize,
    pub pivot: f64,
    pub diagonal: f64,
}

/// Symbolic structure of permuted block normal equations.
#[derive(Clone, Debug)]
pub struct SymbolicStructure {
    n: usize,
    /// `block_order[new] = original block`.
    block_order: Vec<usize>,
    /// `block_pos[original] = new position`.
    block_pos: Vec<usize>,
    /// Scalar offset of each original block in the permuted space.
    block_offset: Vec<usize>,
    block_dim: Vec<usize>,
    /// Scalar column → owning original block.
    column_block: Vec<usize>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    diag_idx: Vec<usize>,
    /// `(row block, column block)` in original numbering → row start within each column of the column block.
    run_start: HashMap<(usize, usize), usize>,
    parent: Vec<Option<usize>>,
    l_col_ptr: Vec<usize>,
}

impl SymbolicStructure {
    /// Builds the structure from block dimensions and the block sets touched by each factor.
    pub fn new<'a>(dims: &[usize], factor_blocks: impl IntoIterator<Item = &'a [usize]>) -> Self {
        let nb = dims.len();
        let mut adjacency = vec![BTreeSet::new(); nb];
        for blocks in factor_blocks {
            for &a in blocks {
                for &b in blocks {
                    if a != b {
                        adjacency[a].insert(b);
                    }
                }
            }
        }
        let block_order = minimum_degree_order(dims, &adjacency);
        let mut block_pos = vec![0; nb];
        for (p, &b) in block_order.iter().enumerate() {
            block_pos[b] = p;
        }
        let mut block_offset = vec![0; nb];
        let mut column_block = Vec::new();
        let mut n = 0;
        for &b in &block_order {
            block_offset[b] = n;
            n += dims[b];
            column_block.extend(std::iter::repeat_n(b, dims[b]));
        }

        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        let mut diag_idx = Vec::with_capacity(n);
        let mut run_start = HashMap::new();
        col_ptr.push(0);
        for &b in &block_order {
            let mut earlier: Vec<usize> = adjacency[b].iter().copied().filter(|&u| block_pos[u] < block_pos[b]).collect();
            earlier.sort_by_key(|&u| block_pos[u]);
            let mut start = 0;
            for &u in &earlier {
                run_start.insert((u, b), start);
                start += dims[u];
            }
            run_start.insert((b, b), start);
            for c in 0..dims[b] {
                for &u in &earlier {
                    row_idx.extend(block_offset[u]..block_offset[u] + dims[u]);
                }
                row_idx.extend(block_offset[b]..=block_offset[b] + c);
                diag_idx.push(row_idx.len() - 1);
                col_ptr.push(row_idx.len());
            }
        }

        // Elimination tree and column counts of L.
        let mut parent = vec![None; n];
        let mut flag = vec![usize::MAX; n];
        let mut l_nnz = vec![0usize; n];
        for k in 0..n {
            flag[k] = k;
            for &row in &row_idx[col_ptr[k]..col_ptr[k + 1]] {
                let mut i = row;
                while i < k && flag[i] != k {
                    if parent[i].is_none() {
                        parent[i] = Some(k);
                    }
                    l_nnz[i] += 1;
                    flag[i] = k;
                    i = parent[i].expect("parent set above");
                }
            }
        }
        let mut l_col_ptr = Vec::with_capacity(n + 1);
        l_col_ptr.push(0);
        for k in 0..n {
            l_col_ptr.push(l_col_ptr[k] + l_nnz[k]);
        }

        SymbolicStructure {
            n,
            block_order,
            block_pos,
            block_offset,
            block_dim: dims.to_vec(),
            column_block,
            col_ptr,
            row_idx,
            diag_idx,
            run_start,
            parent,
            l_col_ptr,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of stored entries in the upper triangle of the matrix.
    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    /// Number of off-diagonal entries in the factor `L`.
    pub fn factor_nnz(&self) -> usize {
        self.l_col_ptr[self.n]
    }

    pub fn block_order(&self) -> &[usize] {
        &self.block_order
    }

    pub fn zero_matrix(&self) -> SymmetricMatrix {
        SymmetricMatrix { values: vec![0.0; self.nnz()] }
    }

    /// Adds a dense block at `(row_block, col_block)` of the symmetric matrix.
    ///
    /// `block` is `dim(row_block) × dim(col_block)`; for off-diagonal blocks either
    /// ordering of the pair may be given. Diagonal blocks contribute their upper triangle.
    pub fn add_block(&self, m: &mut SymmetricMatrix, row_block: usize, col_block: usize, block: &DMatrix<f64>) {
        if row_block == col_block {
            let start = self.run_start[&(row_block, row_block)];
            let off = self.block_offset[row_block];
            for c in 0..self.block_dim[row_block] {
                let base = self.col_ptr[off + c] + start;
                for r in 0..=c {
                    m.values[base + r] += block[(r, c)];
                }
            }
            return;
        }
        let transposed = self.block_pos[row_block] > self.block_pos[col_block];
        let (rb, cb) = if transposed { (col_block, row_block) } else { (row_block, col_block) };
        let start = self.run_start[&(rb, cb)];
        let off = self.block_offset[cb];
        for c in 0..self.block_dim[cb] {
            let base = self.col_ptr[off + c] + start;
            for r in 0..self.block_dim[rb] {
                m.values[base + r] += if transposed { block[(c, r)] } else { block[(r, c)] };
            }
        }
    }

    /// Adds a segment to a permuted vector at the rows of `block`.
    pub fn add_to_vector(&self, v: &mut [f64], block: usize, segment: &DVector<f64>) {
        let off = self.block_offset[block];
        for (i, x) in segment.iter().enumerate() {
            v[off + i] += x;
        }
    }

    /// Copies a permuted vector back to the natural order given by `natural_offsets`.
    pub fn unpermute(&self, v: &[f64], natural_offsets: &[usize]) -> DVector<f64> {
        let mut out = DVector::zeros(self.n);
        for (b, &noff) in natural_offsets.iter().enumerate() {
            let off = self.block_offset[b];
            for i in 0..self.block_dim[b] {
                out[noff + i] = v[off + i];
            }
        }
        out
    }

    pub fn diagonal(&self, m: &SymmetricMatrix) -> Vec<f64> {
        self.diag_idx.iter().map(|&i| m.values[i]).collect()
    }

    /// Scales the diagonal by `1 + lambda` (Marquardt damping).
    pub fn damp(&self, m: &mut SymmetricMatrix, lambda: f64) {
        for &i in &self.diag_idx {
            m.values[i] += lambda * m.values[i];
        }
    }

    /// Numeric LDLᵀ factorization.
    ///
    /// A pivot `d_k ≤ rel_tol · a_kk` (or non-finite) is reported as a failure of
    /// the owning block.
    pub fn factor(&self, m: &SymmetricMatrix, rel_tol: f64) -> Result<LdlFactor, PivotFailure> {
        let n = self.n;
        let lnz_total = self.l_col_ptr[n];
        let mut li = vec![0usize; lnz_total];
        let mut lx = vec![0.0; lnz_total];
        let mut d = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut pattern = vec![0usize; n];
        let mut flag = vec![usize::MAX; n];
        let mut l_nnz = vec![0usize; n];

        for k in 0..n {
            let mut top = n;
            flag[k] = k;
            let mut diagonal = 0.0;
            for p in self.col_ptr[k]..self.col_ptr[k + 1] {
                let mut i = self.row_idx[p];
                y[i] += m.values[p];
                if i == k {
                    diagonal = m.values[p];
                }
                let mut len = 0;
                while flag[i] != k {
                    pattern[len] = i;
                    len += 1;
                    flag[i] = k;
                    i = self.parent[i].expect("row below diagonal has a parent");
                }
                while len > 0 {
                    top -= 1;
                    len -= 1;
                    pattern[top] = pattern[len];
                }
            }
            d[k] = y[k];
            y[k] = 0.0;
            for &i in &pattern[top..n] {
                let yi = y[i];
                y[i] = 0.0;
                let start = self.l_col_ptr[i];
                for p in start..start + l_nnz[i] {
                    y[li[p]] -= lx[p] * yi;
                }
                let l_ki = yi / d[i];
                d[k] -= l_ki * yi;
                let p = start + l_nnz[i];
                li[p] = k;
                lx[p] = l_ki;
                l_nnz[i] += 1;
            }
            if !(d[k].is_finite() && d[k] > rel_tol * diagonal) {
                return Err(PivotFailure { block: self.column_block[k], pivot: d[k], diagonal });
            }
        }
        Ok(LdlFactor { l_col_ptr: self.l_col_ptr.clone(), li, lx, d })
    }
}

/// Values of a symmetric matrix stored in a [`SymbolicStructure`]'s pattern.
#[derive(Clone, Debug)]
pub struct SymmetricMatrix {
    values: Vec<f64>,
}

impl SymmetricMatrix {
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Result of a numeric factorization, `A = L D Lᵀ` with unit lower-triangular `L`.
#[derive(Clone, Debug)]
pub struct LdlFactor {
    l_col_ptr: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
}

impl LdlFactor {
    pub fn pivots(&self) -> &[f64] {
        &self.d
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.d.len();
        for j in 0..n {
            let xj = x[j];
            for p in self.l_col_ptr[j]..self.l_col_ptr[j + 1] {
                x[self.li[p]] -= self.lx[p] * xj;
            }
        }
        for (xj, dj) in x.iter_mut().zip(&self.d) {
            *xj /= dj;
        }
        for j in (0..n).rev() {
            let mut xj = x[j];
            for p in self.l_col_ptr[j]..self.l_col_ptr[j + 1] {
                xj -= self.lx[p] * x[self.li[p]];
            }
            x[j] = xj;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Dense reference assembled from the same blocks.
    fn random_spd_problem() -> (Vec<usize>, Vec<Vec<usize>>, Vec<DMatrix<f64>>) {
        let dims = vec![6, 3, 3, 6, 3, 6];
        let factors = vec![vec![0, 1], vec![1, 2, 5], vec![3], vec![3, 4], vec![0, 5], vec![2], vec![4, 0]];
        let mut seed = 7u64;
        let mut next = move || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 33) as f64 / (1u64 << 31) as f64) - 0.5
        };
        let jacobians = factors
            .iter()
            .map(|blocks| {
                let cols: usize = blocks.iter().map(|&b| dims[b]).sum();
                DMatrix::from_fn(cols + 2, cols, |_, _| next())
            })
            .collect();
        (dims, factors, jacobians)
    }

    #[test]
    fn ldl_matches_dense_solve() {
        let (dims, factors, jacobians) = random_spd_problem();
        let sym = SymbolicStructure::new(&dims, factors.iter().map(|f| f.as_slice()));
        let n: usize = dims.iter().sum();
        let mut natural = vec![0; dims.len()];
        for b in 1..dims.len() {
            natural[b] = natural[b - 1] + dims[b - 1];
        }

        let mut dense: DMatrix<f64> = DMatrix::zeros(n, n);
        let mut m = sym.zero_matrix();
        for (blocks, j) in factors.iter().zip(&jacobians) {
            let h = j.transpose() * j;
            let mut local = vec![0; blocks.len()];
            for a in 1..blocks.len() {
                local[a] = local[a - 1] + dims[blocks[a - 1]];
            }
            for (ia, &a) in blocks.iter().enumerate() {
                for (ib, &b) in blocks.iter().enumerate() {
                    let sub = h.view((local[ia], local[ib]), (dims[a], dims[b])).into_owned();
                    let mut v = dense.view_mut((natural[a], natural[b]), (dims[a], dims[b]));
                    v += &sub;
                    if ia <= ib {
                        sym.add_block(&mut m, a, b, &sub);
                    }
                }
            }
        }
        let b = DVector::from_fn(n, |i, _| (i as f64 * 0.37).sin());
        let mut permuted = vec![0.0; n];
        for (blk, &off) in natural.iter().enumerate() {
            sym.add_to_vector(&mut permuted, blk, &b.rows(off, dims[blk]).into_owned());
        }
        let f = sym.factor(&m, 1e-12).unwrap();
        f.solve_in_place(&mut permuted);
        let x = sym.unpermute(&permuted, &natural);
        let expected = dense.clone().cholesky().unwrap().solve(&b);
        assert!((x - expected).amax() < 1e-9);
    }

    #[test]
    fn singular_matrix_reports_pivot_failure() {
        // Two blocks tied by a single relative constraint: one direction is free.
        let dims = vec![3, 3];
        let sym = SymbolicStructure::new(&dims, [&[0usize, 1][..]]);
        let mut j = DMatrix::zeros(3, 6);
        j.view_mut((0, 0), (3, 3)).fill_with_identity();
        j.view_mut((0, 3), (3, 3)).copy_from(&-DMatrix::<f64>::identity(3, 3));
        let h = j.transpose() * &j;
        let mut m = sym.zero_matrix();
        sym.add_block(&mut m, 0, 0, &h.view((0, 0), (3, 3)).into_owned());
        sym.add_block(&mut m, 1, 1, &h.view((3, 3), (3, 3)).into_owned());
        sym.add_block(&mut m, 0, 1, &h.view((0, 3), (3, 3)).into_owned());
        assert!(sym.factor(&m, 1e-10).is_err());
        sym.damp(&mut m, 1e-3);
        assert!(sym.factor(&m, 1e-10).is_ok());
    }

    #[test]
    fn minimum_degree_eliminates_leaves_first() {
        // Star graph: hub 0 connected to leaves 1..=4.
        let dims = vec![6, 3, 3, 3, 3];
        let mut adj = vec![BTreeSet::new(); 5];
        for leaf in 1..5 {
            adj[0].insert(leaf);
            adj[leaf].insert(0);
        }
        let order = minimum_degree_order(&dims, &adj);
        assert_eq!(order.len(), 5);
        // The hub starts at degree 12 and only ties with the leaves once two are gone.
        assert_eq!(order, vec![1, 2, 0, 3, 4]);
    }
}
