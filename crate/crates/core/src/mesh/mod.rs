//! Quadratic tetrahedral meshes with straight edges.
//!
//! Geometry is taken from the four vertices (mid-edge nodes sit on edge
//! midpoints), so the Jacobian is constant per element while fields are
//! interpolated quadratically.

pub mod build;
pub mod io;
mod locate;
mod shape;

use std::collections::{BTreeMap, HashMap};
use std::sync::OnceLock;

use nalgebra::{Matrix3, Vector3};

use crate::error::{HfeError, Result};

pub use locate::{locate_point_brute_force, PointLocator};
pub use shape::{shape_gradients, shape_tet10, NaturalCoords, EDGES};

/// Barycentric coordinates at or above this value count as inside.
pub const INSIDE_TOL: f64 = -1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementGeometry {
    pub volume: f64,
    /// Gradients of the barycentric coordinates (constant over the element).
    pub grad_bary: [[f64; 3]; 4],
    origin: [f64; 3],
    inv_jacobian: Matrix3<f64>,
}

impl ElementGeometry {
    pub fn from_vertices(v: &[[f64; 3]; 4]) -> Option<Self> {
        let col = |i: usize| Vector3::new(v[i][0] - v[0][0], v[i][1] - v[0][1], v[i][2] - v[0][2]);
        let jac = Matrix3::from_columns(&[col(1), col(2), col(3)]);
        let det = jac.determinant();
        let inv = jac.try_inverse()?;
        let mut grad_bary = [[0.0; 3]; 4];
        for i in 0..3 {
            grad_bary[i + 1] = [inv[(i, 0)], inv[(i, 1)], inv[(i, 2)]];
        }
        grad_bary[0] = [0, 1, 2].map(|d| -(grad_bary[1][d] + grad_bary[2][d] + grad_bary[3][d]));
        Some(ElementGeometry {
            volume: det / 6.0,
            grad_bary,
            origin: v[0],
            inv_jacobian: inv,
        })
    }

    pub fn barycentric(&self, p: [f64; 3]) -> NaturalCoords {
        let d = Vector3::new(
            p[0] - self.origin[0],
            p[1] - self.origin[1],
            p[2] - self.origin[2],
        );
        let l = self.inv_jacobian * d;
        NaturalCoords([1.0 - l[0] - l[1] - l[2], l[0], l[1], l[2]])
    }
}

/// Signed volume of a tetrahedron.
pub fn tet_volume(v: &[[f64; 3]; 4]) -> f64 {
    let a = Vector3::from(v[1]) - Vector3::from(v[0]);
    let b = Vector3::from(v[2]) - Vector3::from(v[0]);
    let c = Vector3::from(v[3]) - Vector3::from(v[0]);
    a.dot(&b.cross(&c)) / 6.0
}

#[derive(Debug, Clone)]
pub struct Tet10Mesh {
    nodes: Vec<[f64; 3]>,
    node_ids: Vec<u64>,
    elements: Vec<[usize; 10]>,
    element_ids: Vec<u64>,
    axial: [f64; 3],
    geometry: Vec<ElementGeometry>,
    attributes: BTreeMap<String, Vec<f64>>,
    locator: OnceLock<PointLocator>,
}

impl Tet10Mesh {
    /// Builds a mesh with ids `1..=n` for nodes and elements.
    pub fn new(nodes: Vec<[f64; 3]>, elements: Vec<[usize; 10]>) -> Result<Self> {
        let node_ids = (1..=nodes.len() as u64).collect();
        let element_ids = (1..=elements.len() as u64).collect();
        Self::with_ids(nodes, node_ids, elements, element_ids)
    }

    /// Builds a mesh with explicit external ids; connectivity uses node indices.
    pub fn with_ids(
        nodes: Vec<[f64; 3]>,
        node_ids: Vec<u64>,
        elements: Vec<[usize; 10]>,
        element_ids: Vec<u64>,
    ) -> Result<Self> {
        if node_ids.len() != nodes.len() || element_ids.len() != elements.len() {
            return Err(HfeError::InvalidMesh("id count mismatch".into()));
        }
        check_unique(&node_ids, "node")?;
        check_unique(&element_ids, "element")?;
        let mut geometry = Vec::with_capacity(elements.len());
        for (e, conn) in elements.iter().enumerate() {
            if let Some(&bad) = conn.iter().find(|&&n| n >= nodes.len()) {
                return Err(HfeError::InvalidMesh(format!(
                    "element {} references missing node index {bad}",
                    element_ids[e]
                )));
            }
            let v = [0, 1, 2, 3].map(|i| nodes[conn[i]]);
            let vol = tet_volume(&v);
            if !(vol > 0.0) {
                return Err(HfeError::InvertedElement {
                    element: element_ids[e],
                    det: 6.0 * vol,
                });
            }
            for (k, &(i, j)) in EDGES.iter().enumerate() {
                let mid = [0, 1, 2].map(|d| 0.5 * (v[i][d] + v[j][d]));
                let len = dist(&v[i], &v[j]);
                if dist(&mid, &nodes[conn[4 + k]]) > 1e-6 * len {
                    return Err(HfeError::InvalidMesh(format!(
                        "element {}: mid-edge node {} is off its edge midpoint",
                        element_ids[e],
                        node_ids[conn[4 + k]]
                    )));
                }
            }
            geometry.push(
                ElementGeometry::from_vertices(&v).ok_or(HfeError::InvertedElement {
                    element: element_ids[e],
                    det: 0.0,
                })?,
            );
        }
        Ok(Tet10Mesh {
            nodes,
            node_ids,
            elements,
            element_ids,
            axial: [0.0, 0.0, 1.0],
            geometry,
            attributes: BTreeMap::new(),
            locator: OnceLock::new(),
        })
    }

    pub fn with_axial_direction(mut self, dir: [f64; 3]) -> Result<Self> {
        let n = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
        if !(n > 0.0) {
            return Err(HfeError::InvalidMesh(
                "axial direction must be non-zero".into(),
            ));
        }
        self.axial = dir.map(|c| c / n);
        Ok(self)
    }

    pub fn nodes(&self) -> &[[f64; 3]] {
        &self.nodes
    }
    pub fn node_ids(&self) -> &[u64] {
        &self.node_ids
    }
    pub fn elements(&self) -> &[[usize; 10]] {
        &self.elements
    }
    pub fn element_ids(&self) -> &[u64] {
        &self.element_ids
    }
    pub fn geometry(&self, element: usize) -> &ElementGeometry {
        &self.geometry[element]
    }
    pub fn axial_direction(&self) -> [f64; 3] {
        self.axial
    }
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }
    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn vertices(&self, element: usize) -> [[f64; 3]; 4] {
        let c = &self.elements[element];
        [0, 1, 2, 3].map(|i| self.nodes[c[i]])
    }

    pub fn attributes(&self) -> &BTreeMap<String, Vec<f64>> {
        &self.attributes
    }

    pub fn set_attribute(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        if values.len() != self.elements.len() {
            return Err(HfeError::InvalidMesh(format!(
                "attribute `{name}` has {} values for {} elements",
                values.len(),
                self.elements.len()
            )));
        }
        self.attributes.insert(name.to_string(), values);
        Ok(())
    }

    pub fn node_index_map(&self) -> HashMap<u64, usize> {
        self.node_ids
            .iter()
            .enumerate()
            .map(|(i, &id)| (id, i))
            .collect()
    }

    /// Returns a copy with every node mapped through `f`; ids and connectivity are kept.
    pub fn map_nodes(&self, f: impl Fn([f64; 3]) -> [f64; 3]) -> Result<Self> {
        let nodes = self.nodes.iter().map(|&p| f(p)).collect();
        let mut out = Self::with_ids(
            nodes,
            self.node_ids.clone(),
            self.elements.clone(),
            self.element_ids.clone(),
        )?;
        out.axial = self.axial;
        out.attributes = self.attributes.clone();
        Ok(out)
    }

    pub fn bounding_box(&self) -> ([f64; 3], [f64; 3]) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &self.nodes {
            for d in 0..3 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        (lo, hi)
    }

    pub fn mean_edge_length(&self) -> f64 {
        if self.elements.is_empty() {
            return 0.0;
        }
        let mut total = 0.0;
        for e in 0..self.elements.len() {
            let v = self.vertices(e);
            for &(i, j) in &EDGES {
                total += dist(&v[i], &v[j]);
            }
        }
        total / (6 * self.elements.len()) as f64
    }

    pub fn axial_coordinate(&self, p: [f64; 3]) -> f64 {
        p[0] * self.axial[0] + p[1] * self.axial[1] + p[2] * self.axial[2]
    }

    pub fn axial_extent(&self) -> (f64, f64) {
        self.nodes
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| {
                let a = self.axial_coordinate(p);
                (lo.min(a), hi.max(a))
            })
    }

    pub fn locator(&self) -> &PointLocator {
        self.locator.get_or_init(|| PointLocator::new(self))
    }

    /// Element containing `p` (lowest id on ties) and its barycentric coordinates.
    pub fn locate_point(&self, p: [f64; 3]) -> Option<(usize, NaturalCoords)> {
        self.locator().locate(self, p)
    }

    /// Evaluates a nodal vector field at `p` with the element shape functions.
    pub fn interpolate_nodal_field(&self, field: &[[f64; 3]], p: [f64; 3]) -> Option<[f64; 3]> {
        let (e, nc) = self.locate_point(p)?;
        Some(self.interpolate_in_element(field, e, &nc))
    }

    pub fn interpolate_in_element(
        &self,
        field: &[[f64; 3]],
        element: usize,
        nc: &NaturalCoords,
    ) -> [f64; 3] {
        let w = shape_tet10(nc);
        let mut out = [0.0; 3];
        for (a, &n) in self.elements[element].iter().enumerate() {
            for d in 0..3 {
                out[d] += w[a] * field[n][d];
            }
        }
        out
    }

    /// Flags points whose axial coordinate lies in the central `fraction` of
    /// the mesh's axial extent (band limits inclusive).
    pub fn central_region_filter(&self, points: &[[f64; 3]], fraction: f64) -> Result<Vec<bool>> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(HfeError::Contract(format!(
                "central fraction {fraction} must lie in (0, 1]"
            )));
        }
        if points.is_empty() {
            return Ok(Vec::new());
        }
        let (lo, hi) = self.axial_extent();
        let trim = 0.5 * (1.0 - fraction) * (hi - lo);
        let (band_lo, band_hi) = (lo + trim, hi - trim);
        Ok(points
            .iter()
            .map(|&p| {
                let a = self.axial_coordinate(p);
                a >= band_lo && a <= band_hi
            })
            .collect())
    }
}

fn check_unique(ids: &[u64], what: &str) -> Result<()> {
    let mut seen = std::collections::HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(*id) {
            return Err(HfeError::InvalidMesh(format!("duplicate {what} id {id}")));
        }
    }
    Ok(())
}

pub(crate) fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::build::{single_tet, structured_box};
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn inverted_element_is_reported_by_id() {
        let m = single_tet([[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        let c = m.elements()[0];
        // Vertices 1 and 2 exchanged, mid-edge nodes relabelled to match.
        let conn = [c[0], c[2], c[1], c[3], c[6], c[5], c[4], c[7], c[9], c[8]];
        let err = Tet10Mesh::new(m.nodes().to_vec(), vec![conn]).unwrap_err();
        assert!(
            matches!(err, HfeError::InvertedElement { element: 1, .. }),
            "{err}"
        );
    }

    #[test]
    fn off_midpoint_node_is_rejected() {
        let m = single_tet([[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        let mut nodes = m.nodes().to_vec();
        nodes[m.elements()[0][4]][2] += 1e-3;
        assert!(matches!(
            Tet10Mesh::new(nodes, m.elements().to_vec()),
            Err(HfeError::InvalidMesh(_))
        ));
    }

    #[test]
    fn centroid_of_single_tet_is_located() {
        let m = single_tet([[0.0; 3], [2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 2.0]]).unwrap();
        let (e, nc) = m.locate_point([0.5, 0.5, 0.5]).unwrap();
        assert_eq!(e, 0);
        for v in nc.0 {
            assert!((v - 0.25).abs() < 1e-14);
        }
        assert!(m.locate_point([1e6, 0.0, 0.0]).is_none());
    }

    #[test]
    fn constant_field_is_reproduced() {
        let m = structured_box([0.0; 3], [2.0, 1.0, 1.0], [2, 1, 1]).unwrap();
        let field = vec![[1.5, -2.0, 0.25]; m.num_nodes()];
        let v = m.interpolate_nodal_field(&field, [1.3, 0.2, 0.7]).unwrap();
        for d in 0..3 {
            assert!((v[d] - field[0][d]).abs() < 1e-14);
        }
    }

    #[test]
    fn central_band_is_inclusive() {
        let m = structured_box([0.0; 3], [4.0, 4.0, 40.0], [1, 1, 4]).unwrap();
        let pts = [
            [1.0, 1.0, 20.0],
            [1.0, 1.0, 4.0],
            [1.0, 1.0, 5.0],
            [1.0, 1.0, 35.0],
        ];
        assert_eq!(
            m.central_region_filter(&pts, 0.75).unwrap(),
            vec![true, false, true, true]
        );
        assert!(m
            .central_region_filter(&pts, 1.0)
            .unwrap()
            .iter()
            .all(|&b| b));
        assert!(m.central_region_filter(&pts, 0.0).is_err());
        assert!(m.central_region_filter(&[], 0.75).unwrap().is_empty());
    }

    proptest! {
        #[test]
        fn affine_fields_are_exact(x in 0.0..3.0f64, y in 0.0..2.0f64, z in 0.0..1.0f64) {
            let m = structured_box([0.0; 3], [3.0, 2.0, 1.0], [3, 2, 2]).unwrap();
            let f = |p: [f64; 3]| [0.1 + 0.3 * p[0] - 0.2 * p[2], -0.4 * p[1] + 0.05 * p[0], 1.0 + p[2]];
            let field: Vec<_> = m.nodes().iter().map(|&p| f(p)).collect();
            let got = m.interpolate_nodal_field(&field, [x, y, z]).unwrap();
            let exact = f([x, y, z]);
            for d in 0..3 {
                prop_assert!((got[d] - exact[d]).abs() <= 1e-9);
            }
        }

        #[test]
        fn quadratic_fields_are_exact(a in 0.0..1.0f64, b in 0.0..1.0f64, c in 0.0..1.0f64) {
            let verts = [[0.3, -0.2, 0.1], [2.1, 0.2, -0.1], [0.4, 1.9, 0.3], [0.2, 0.5, 1.7]];
            let m = single_tet(verts).unwrap();
            // Random interior point via normalized barycentric weights.
            let s = 1.0 + a + b + c;
            let l = [1.0 / s, a / s, b / s, c / s];
            let p = [0, 1, 2].map(|d| (0..4).map(|i| l[i] * verts[i][d]).sum::<f64>());
            let f = |p: [f64; 3]| [p[0] * p[0], p[0] * p[1] - p[2] * p[2], 3.0 * p[1] * p[2]];
            let field: Vec<_> = m.nodes().iter().map(|&q| f(q)).collect();
            let got = m.interpolate_nodal_field(&field, p).unwrap();
            let exact = f(p);
            for d in 0..3 {
                prop_assert!((got[d] - exact[d]).abs() <= 1e-12);
            }
        }
    }
}
