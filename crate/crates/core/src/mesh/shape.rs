//! Quadratic tetrahedron shape functions in barycentric coordinates.
//!
//! Node order: vertices 0..4, then mid-edge nodes on edges
//! (0,1), (1,2), (0,2), (0,3), (1,3), (2,3).

/// Vertex pairs spanned by mid-edge nodes 4..10.
pub const EDGES: [(usize, usize); 6] = [(0, 1), (1, 2), (0, 2), (0, 3), (1, 3), (2, 3)];

/// Barycentric coordinates `(ξ0, ξ1, ξ2, ξ3)`, one per element vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NaturalCoords(pub [f64; 4]);

impl NaturalCoords {
    pub const CENTROID: NaturalCoords = NaturalCoords([0.25; 4]);

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn shape_tet10(nc: &NaturalCoords) -> [f64; 10] {
    let l = nc.0;
    let mut n = [0.0; 10];
    for i in 0..4 {
        n[i] = l[i] * (2.0 * l[i] - 1.0);
    }
    for (e, &(i, j)) in EDGES.iter().enumerate() {
        n[4 + e] = 4.0 * l[i] * l[j];
    }
    n
}

/// Cartesian gradients of the ten shape functions, given the (constant)
/// gradients of the barycentric coordinates of a straight-edged element.
pub fn shape_gradients(nc: &NaturalCoords, grad_bary: &[[f64; 3]; 4]) -> [[f64; 3]; 10] {
    let l = nc.0;
    let mut g = [[0.0; 3]; 10];
    for i in 0..4 {
        let s = 4.0 * l[i] - 1.0;
        g[i] = grad_bary[i].map(|c| s * c);
    }
    for (e, &(i, j)) in EDGES.iter().enumerate() {
        for d in 0..3 {
            g[4 + e][d] = 4.0 * (l[j] * grad_bary[i][d] + l[i] * grad_bary[j][d]);
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn vertex_coordinates_select_their_node() {
        let w = shape_tet10(&NaturalCoords([1.0, 0.0, 0.0, 0.0]));
        assert_eq!(w[0], 1.0);
        assert!(w[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn centroid_weights() {
        let w = shape_tet10(&NaturalCoords::CENTROID);
        for v in &w[..4] {
            assert!((v + 0.125).abs() < 1e-15);
        }
        for v in &w[4..] {
            assert!((v - 0.25).abs() < 1e-15);
        }
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mid_edge_coordinates_select_their_node() {
        for (e, &(i, j)) in EDGES.iter().enumerate() {
            let mut l = [0.0; 4];
            l[i] = 0.5;
            l[j] = 0.5;
            let w = shape_tet10(&NaturalCoords(l));
            for (a, v) in w.iter().enumerate() {
                let expect = if a == 4 + e { 1.0 } else { 0.0 };
                assert!((v - expect).abs() < 1e-15);
            }
        }
    }

    fn random_coords() -> impl Strategy<Value = NaturalCoords> {
        proptest::array::uniform4(0.0..1.0f64).prop_map(|r| {
            let s: f64 = r.iter().sum::<f64>().max(1e-12);
            NaturalCoords(r.map(|v| v / s))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn partition_of_unity(nc in random_coords()) {
            let s: f64 = shape_tet10(&nc).iter().sum();
            prop_assert!((s - 1.0).abs() <= 1e-12);
        }
    }

    proptest! {
        #[test]
        fn gradients_sum_to_zero(nc in random_coords()) {
            let gb = [[-1.0, -1.0, -1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
            let g = shape_gradients(&nc, &gb);
            for d in 0..3 {
                let s: f64 = g.iter().map(|r| r[d]).sum();
                prop_assert!(s.abs() < 1e-12);
            }
        }
    }
}
