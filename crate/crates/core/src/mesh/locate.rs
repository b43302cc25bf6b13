//! Point location through a uniform grid of element bounding boxes.

use super::{NaturalCoords, Tet10Mesh, INSIDE_TOL};

/// Uniform bucket grid over element bounding boxes; cell size is about
/// twice the mean edge length.
#[derive(Debug, Clone)]
pub struct PointLocator {
    origin: [f64; 3],
    cell: f64,
    dims: [usize; 3],
    starts: Vec<usize>,
    items: Vec<u32>,
}

const MAX_CELLS: usize = 1 << 22;

impl PointLocator {
    pub fn new(mesh: &Tet10Mesh) -> Self {
        let (lo, hi) = mesh.bounding_box();
        if mesh.num_elements() == 0 {
            return PointLocator {
                origin: [0.0; 3],
                cell: 1.0,
                dims: [1; 3],
                starts: vec![0, 0],
                items: Vec::new(),
            };
        }
        let extent = [0, 1, 2].map(|d| (hi[d] - lo[d]).max(1e-12));
        let mut cell = 2.0 * mesh.mean_edge_length();
        let mut dims = [0usize; 3];
        loop {
            for d in 0..3 {
                dims[d] = ((extent[d] / cell).ceil() as usize).max(1);
            }
            if dims.iter().product::<usize>() <= MAX_CELLS {
                break;
            }
            cell *= 2.0;
        }
        let ncell = dims.iter().product::<usize>();
        let cell_range = |bmin: [f64; 3], bmax: [f64; 3]| {
            let r = |v: f64, d: usize| {
                (((v - lo[d]) / cell).floor().max(0.0) as usize).min(dims[d] - 1)
            };
            (
                [0, 1, 2].map(|d| r(bmin[d], d)),
                [0, 1, 2].map(|d| r(bmax[d], d)),
            )
        };
        let boxes: Vec<_> = (0..mesh.num_elements())
            .map(|e| {
                let v = mesh.vertices(e);
                let mut bmin = [f64::INFINITY; 3];
                let mut bmax = [f64::NEG_INFINITY; 3];
                for p in &v {
                    for d in 0..3 {
                        bmin[d] = bmin[d].min(p[d] - 1e-9 * cell);
                        bmax[d] = bmax[d].max(p[d] + 1e-9 * cell);
                    }
                }
                cell_range(bmin, bmax)
            })
            .collect();
        let mut counts = vec![0usize; ncell + 1];
        let flat = |i: usize, j: usize, k: usize| i + dims[0] * (j + dims[1] * k);
        for (a, b) in &boxes {
            for k in a[2]..=b[2] {
                for j in a[1]..=b[1] {
                    for i in a[0]..=b[0] {
                        counts[flat(i, j, k) + 1] += 1;
                    }
                }
            }
        }
        for c in 0..ncell {
            counts[c + 1] += counts[c];
        }
        let starts = counts.clone();
        let mut fill = counts;
        let mut items = vec![0u32; starts[ncell]];
        for (e, (a, b)) in boxes.iter().enumerate() {
            for k in a[2]..=b[2] {
                for j in a[1]..=b[1] {
                    for i in a[0]..=b[0] {
                        let c = flat(i, j, k);
                        items[fill[c]] = e as u32;
                        fill[c] += 1;
                    }
                }
            }
        }
        PointLocator {
            origin: lo,
            cell,
            dims,
            starts,
            items,
        }
    }

    fn candidates(&self, p: [f64; 3]) -> &[u32] {
        let mut idx = [0usize; 3];
        for d in 0..3 {
            let t = (p[d] - self.origin[d]) / self.cell;
            let slack = 1e-9;
            if !(t >= -slack && t <= self.dims[d] as f64 + slack) {
                return &[];
            }
            idx[d] = (t.floor().max(0.0) as usize).min(self.dims[d] - 1);
        }
        let c = idx[0] + self.dims[0] * (idx[1] + self.dims[1] * idx[2]);
        &self.items[self.starts[c]..self.starts[c + 1]]
    }

    pub fn locate(&self, mesh: &Tet10Mesh, p: [f64; 3]) -> Option<(usize, NaturalCoords)> {
        let mut best: Option<(usize, NaturalCoords)> = None;
        for &e in self.candidates(p) {
            let e = e as usize;
            let nc = mesh.geometry(e).barycentric(p);
            if nc.min() >= INSIDE_TOL {
                let better = match best {
                    None => true,
                    Some((b, _)) => mesh.element_ids()[e] < mesh.element_ids()[b],
                };
                if better {
                    best = Some((e, nc));
                }
            }
        }
        best
    }
}

/// Exhaustive scan over all elements; same containment and tie rules as the index.
pub fn locate_point_brute_force(mesh: &Tet10Mesh, p: [f64; 3]) -> Option<(usize, NaturalCoords)> {
    let mut best: Option<(usize, NaturalCoords)> = None;
    for e in 0..mesh.num_elements() {
        let nc = mesh.geometry(e).barycentric(p);
        if nc.min() >= INSIDE_TOL
            && best.is_none_or(|(b, _)| mesh.element_ids()[e] < mesh.element_ids()[b])
        {
            best = Some((e, nc));
        }
    }
    best
}
