//! Compressed sparse row storage with a 3×3 nodal block pattern.

use rayon::prelude::*;

use crate::mesh::Tet10Mesh;

/// Elements per parallel batch; batches are scattered in element order so
/// assembly is bit-reproducible regardless of thread count.
const ASSEMBLY_BATCH: usize = 2048;

pub type ElementMatrix = [[f64; 30]; 30];

#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    /// Node-level adjacency used to locate blocks quickly.
    block_ptr: Vec<usize>,
    block_cols: Vec<usize>,
}

impl CsrMatrix {
    /// Zero matrix with the sparsity pattern induced by the mesh connectivity.
    pub fn for_mesh(mesh: &Tet10Mesh) -> Self {
        let nn = mesh.num_nodes();
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nn];
        for conn in mesh.elements() {
            for &a in conn {
                adj[a].extend_from_slice(conn);
            }
        }
        let mut block_ptr = Vec::with_capacity(nn + 1);
        let mut block_cols = Vec::new();
        block_ptr.push(0);
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
            block_cols.extend_from_slice(list);
            block_ptr.push(block_cols.len());
        }
        let n = 3 * nn;
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(9 * block_cols.len());
        row_ptr.push(0);
        for a in 0..nn {
            let cols = &block_cols[block_ptr[a]..block_ptr[a + 1]];
            for _ in 0..3 {
                for &c in cols {
                    col_idx.extend_from_slice(&[3 * c, 3 * c + 1, 3 * c + 2]);
                }
                row_ptr.push(col_idx.len());
            }
        }
        let nnz = col_idx.len();
        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values: vec![0.0; nnz],
            block_ptr,
            block_cols,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn clear(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
    }

    fn block_offset(&self, a: usize, c: usize) -> usize {
        let cols = &self.block_cols[self.block_ptr[a]..self.block_ptr[a + 1]];
        cols.binary_search(&c)
            .expect("node pair outside sparsity pattern")
    }

    /// Position of entry `(3a + i, 3c + j)` in `values`.
    fn position(&self, a: usize, i: usize, c: usize, j: usize) -> usize {
        self.row_ptr[3 * a + i] + 3 * self.block_offset(a, c) + j
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        match self.col_idx[range.clone()].binary_search(&col) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn add_element(&mut self, conn: &[usize; 10], ke: &ElementMatrix) {
        for (la, &a) in conn.iter().enumerate() {
            for (lc, &c) in conn.iter().enumerate() {
                let base = self.row_ptr[3 * a] + 3 * self.block_offset(a, c);
                let stride = self.row_ptr[3 * a + 1] - self.row_ptr[3 * a];
                for i in 0..3 {
                    for j in 0..3 {
                        self.values[base + i * stride + j] += ke[3 * la + i][3 * lc + j];
                    }
                }
            }
        }
    }

    /// Assembles element contributions computed in parallel, scattered in order.
    pub fn assemble<F>(&mut self, mesh: &Tet10Mesh, element_matrix: F) -> crate::Result<()>
    where
        F: Fn(usize) -> crate::Result<ElementMatrix> + Sync,
    {
        self.clear();
        let ne = mesh.num_elements();
        let mut start = 0;
        while start < ne {
            let end = (start + ASSEMBLY_BATCH).min(ne);
            let batch: Vec<crate::Result<ElementMatrix>> =
                (start..end).into_par_iter().map(&element_matrix).collect();
            for (e, ke) in (start..end).zip(batch) {
                self.add_element(&mesh.elements()[e], &ke?);
            }
            start = end;
        }
        Ok(())
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().for_each(|(r, out)| {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *out = acc;
        });
    }

    /// 3×3 diagonal block of node `a`, row-major.
    pub fn diagonal_block(&self, a: usize) -> [[f64; 3]; 3] {
        let mut b = [[0.0; 3]; 3];
        for (i, row) in b.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.values[self.position(a, i, a, j)];
            }
        }
        b
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Largest `|K_ij − K_ji|` over stored entries.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k];
                worst = worst.max((self.values[k] - self.get(c, r)).abs());
            }
        }
        worst
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }

    /// Dense copy, for small test problems.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (r, row) in d.iter_mut().enumerate() {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                row[self.col_idx[k]] = self.values[k];
            }
        }
        d
    }
}

/// Dot product with a fixed reduction order.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    const CHUNK: usize = 4096;
    let partial: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum())
        .collect();
    partial.iter().sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
