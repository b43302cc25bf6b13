//! Mesh construction from linear tetrahedra and structured hexahedral blocks.

use std::collections::HashMap;

use super::{tet_volume, Tet10Mesh, EDGES};
use crate::error::Result;

/// Promotes a linear tetrahedral mesh to Tet10 by inserting shared mid-edge
/// nodes. Negatively oriented tetrahedra are reordered.
pub fn from_tet4(vertices: &[[f64; 3]], tets: &[[usize; 4]]) -> Result<Tet10Mesh> {
    let mut nodes = vertices.to_vec();
    let mut mids: HashMap<(usize, usize), usize> = HashMap::new();
    let mut elements = Vec::with_capacity(tets.len());
    for t in tets {
        let mut t = *t;
        if tet_volume(&t.map(|i| vertices[i])) < 0.0 {
            t.swap(1, 2);
        }
        let mut conn = [0usize; 10];
        conn[..4].copy_from_slice(&t);
        for (e, &(i, j)) in EDGES.iter().enumerate() {
            let key = (t[i].min(t[j]), t[i].max(t[j]));
            let idx = *mids.entry(key).or_insert_with(|| {
                let (a, b) = (vertices[key.0], vertices[key.1]);
                nodes.push([0, 1, 2].map(|d| 0.5 * (a[d] + b[d])));
                nodes.len() - 1
            });
            conn[4 + e] = idx;
        }
        elements.push(conn);
    }
    Tet10Mesh::new(nodes, elements)
}

pub fn single_tet(v: [[f64; 3]; 4]) -> Result<Tet10Mesh> {
    from_tet4(&v, &[[0, 1, 2, 3]])
}

/// Six-tetrahedron split of the unit cube along its main diagonal; identical
/// for every cell, so neighbouring cells conform.
const KUHN: [[usize; 4]; 6] = [
    [0, 1, 3, 7],
    [0, 1, 5, 7],
    [0, 2, 3, 7],
    [0, 2, 6, 7],
    [0, 4, 5, 7],
    [0, 4, 6, 7],
];

/// Tet10 mesh of the box `[lo, hi]` with `n` hexahedral cells per axis.
pub fn structured_box(lo: [f64; 3], hi: [f64; 3], n: [usize; 3]) -> Result<Tet10Mesh> {
    let h = [0, 1, 2].map(|d| (hi[d] - lo[d]) / n[d] as f64);
    let mut cells = Vec::with_capacity(n[0] * n[1] * n[2]);
    for k in 0..n[2] {
        for j in 0..n[1] {
            for i in 0..n[0] {
                cells.push([i, j, k]);
            }
        }
    }
    from_hex_cells(lo, h, &cells)
}

/// Tet10 mesh of a union of grid cells `(i, j, k)` of size `h` anchored at `origin`.
pub fn from_hex_cells(origin: [f64; 3], h: [f64; 3], cells: &[[usize; 3]]) -> Result<Tet10Mesh> {
    let mut index: HashMap<[usize; 3], usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut tets = Vec::with_capacity(cells.len() * 6);
    for c in cells {
        let mut corner = [0usize; 8];
        for (b, slot) in corner.iter_mut().enumerate() {
            let g = [c[0] + (b & 1), c[1] + ((b >> 1) & 1), c[2] + ((b >> 2) & 1)];
            *slot = *index.entry(g).or_insert_with(|| {
                vertices.push([0, 1, 2].map(|d| origin[d] + g[d] as f64 * h[d]));
                vertices.len() - 1
            });
        }
        for t in &KUHN {
            tets.push(t.map(|b| corner[b]));
        }
    }
    from_tet4(&vertices, &tets)
}

/// Uniform refinement of a box mesh, used by convergence studies.
pub fn refined_box(lo: [f64; 3], hi: [f64; 3], level: u32) -> Result<Tet10Mesh> {
    let n = 1usize << level;
    structured_box(lo, hi, [n, n, n])
}
