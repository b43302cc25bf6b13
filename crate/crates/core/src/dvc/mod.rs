//! Displacement fields measured on a regular DVC grid: interpolation, strain
//! differentiation, zero-strain uncertainty and synthetic generation.

pub mod io;
mod strain;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{HfeError, Result};
use crate::mesh::Tet10Mesh;

pub use strain::{differentiate_strains, zero_strain_uncertainty, StrainGrid};

/// Default grid spacing (mm).
pub const DEFAULT_SPACING: f64 = 1.95;

const POSITION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridGeometry {
    pub origin: [f64; 3],
    pub spacing: f64,
    pub dims: [usize; 3],
}

impl GridGeometry {
    pub fn new(origin: [f64; 3], spacing: f64, dims: [usize; 3]) -> Result<Self> {
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(HfeError::GridMismatch(format!(
                "spacing {spacing} must be positive"
            )));
        }
        if dims.contains(&0) {
            return Err(HfeError::GridMismatch(format!("empty grid {dims:?}")));
        }
        if origin.iter().any(|v| !v.is_finite()) {
            return Err(HfeError::GridMismatch("non-finite origin".into()));
        }
        Ok(GridGeometry {
            origin,
            spacing,
            dims,
        })
    }

    /// Smallest grid with the given spacing whose nodes cover `[lo, hi]`,
    /// starting at `lo`.
    pub fn covering(lo: [f64; 3], hi: [f64; 3], spacing: f64) -> Result<Self> {
        let dims = [0, 1, 2].map(|d| ((hi[d] - lo[d]) / spacing).floor().max(0.0) as usize + 1);
        Self::new(lo, spacing, dims)
    }

    pub fn num_points(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn ijk(&self, index: usize) -> [usize; 3] {
        let [nx, ny, _] = self.dims;
        [index % nx, (index / nx) % ny, index / (nx * ny)]
    }

    pub fn position(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        let ijk = [i, j, k];
        [0, 1, 2].map(|d| self.origin[d] + ijk[d] as f64 * self.spacing)
    }

    pub fn position_of(&self, index: usize) -> [f64; 3] {
        let [i, j, k] = self.ijk(index);
        self.position(i, j, k)
    }

    /// Cell containing `p` and the local coordinates in `[0, 1]³`.
    pub(crate) fn locate(&self, p: [f64; 3]) -> Option<([usize; 3], [f64; 3])> {
        let mut cell = [0; 3];
        let mut frac = [0.0; 3];
        for d in 0..3 {
            let t = (p[d] - self.origin[d]) / self.spacing;
            let n = self.dims[d];
            let max = (n - 1) as f64;
            if t < -POSITION_TOL || t > max + POSITION_TOL {
                return None;
            }
            if n == 1 {
                continue;
            }
            let t = t.clamp(0.0, max);
            let c = (t.floor() as usize).min(n - 2);
            cell[d] = c;
            frac[d] = t - c as f64;
        }
        Some((cell, frac))
    }

    pub fn same_as(&self, other: &GridGeometry) -> bool {
        self.dims == other.dims
            && (self.spacing - other.spacing).abs() <= 1e-12 * self.spacing
            && (0..3).all(|d| (self.origin[d] - other.origin[d]).abs() <= 1e-9 * self.spacing)
    }
}

/// Nodal displacements (mm) with correlation and inside-bone flags.
#[derive(Debug, Clone, PartialEq)]
pub struct DvcGrid {
    geometry: GridGeometry,
    displacements: Vec<[f64; 3]>,
    correlate: Vec<bool>,
    inside_bone: Vec<bool>,
}

impl DvcGrid {
    pub fn new(
        geometry: GridGeometry,
        displacements: Vec<[f64; 3]>,
        correlate: Vec<bool>,
        inside_bone: Vec<bool>,
    ) -> Result<Self> {
        let n = geometry.num_points();
        if displacements.len() != n || correlate.len() != n || inside_bone.len() != n {
            return Err(HfeError::GridMismatch(format!(
                "{n} grid points but field sizes differ"
            )));
        }
        if displacements
            .iter()
            .zip(&correlate)
            .any(|(u, &c)| c && u.iter().any(|v| !v.is_finite()))
        {
            return Err(HfeError::GridMismatch(
                "non-finite displacement at a correlating point".into(),
            ));
        }
        Ok(DvcGrid {
            geometry,
            displacements,
            correlate,
            inside_bone,
        })
    }

    /// Grid sampling `field`; points where it returns `None` do not correlate.
    pub fn from_fn(geometry: GridGeometry, field: impl Fn([f64; 3]) -> Option<[f64; 3]>) -> Self {
        let n = geometry.num_points();
        let mut displacements = Vec::with_capacity(n);
        let mut correlate = Vec::with_capacity(n);
        for idx in 0..n {
            let u = field(geometry.position_of(idx));
            correlate.push(u.is_some());
            displacements.push(u.unwrap_or([0.0; 3]));
        }
        DvcGrid {
            geometry,
            displacements,
            inside_bone: correlate.clone(),
            correlate,
        }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn dims(&self) -> [usize; 3] {
        self.geometry.dims
    }

    pub fn spacing(&self) -> f64 {
        self.geometry.spacing
    }

    pub fn num_points(&self) -> usize {
        self.displacements.len()
    }

    pub fn displacements(&self) -> &[[f64; 3]] {
        &self.displacements
    }

    pub fn correlate(&self) -> &[bool] {
        &self.correlate
    }

    pub fn inside_bone(&self) -> &[bool] {
        &self.inside_bone
    }

    pub fn displacement(&self, index: usize) -> Option<[f64; 3]> {
        self.correlate[index].then(|| self.displacements[index])
    }

    pub fn set_correlate(&mut self, index: usize, value: bool) {
        self.correlate[index] = value;
    }

    pub fn set_inside_bone(&mut self, index: usize, value: bool) {
        self.inside_bone[index] = value;
    }

    /// Marks points as non-correlating where `predicate(position)` holds.
    pub fn mask_correlation(&mut self, predicate: impl Fn([f64; 3]) -> bool) {
        for idx in 0..self.num_points() {
            if predicate(self.geometry.position_of(idx)) {
                self.correlate[idx] = false;
            }
        }
    }

    /// Copy with `f` applied to every displacement.
    pub fn map_displacements(&self, f: impl Fn([f64; 3], [f64; 3]) -> [f64; 3]) -> Self {
        let mut out = self.clone();
        for (idx, u) in out.displacements.iter_mut().enumerate() {
            *u = f(self.geometry.position_of(idx), *u);
        }
        out
    }

    /// Pointwise difference `self − other`, correlating where both do.
    pub fn difference(&self, other: &DvcGrid) -> Result<DvcGrid> {
        if !self.geometry.same_as(&other.geometry) {
            return Err(HfeError::GridMismatch(format!(
                "{:?} vs {:?}",
                self.geometry, other.geometry
            )));
        }
        let displacements = self
            .displacements
            .iter()
            .zip(&other.displacements)
            .map(|(a, b)| [a[0] - b[0], a[1] - b[1], a[2] - b[2]])
            .collect();
        let correlate = self
            .correlate
            .iter()
            .zip(&other.correlate)
            .map(|(a, b)| *a && *b)
            .collect();
        let inside_bone = self
            .inside_bone
            .iter()
            .zip(&other.inside_bone)
            .map(|(a, b)| *a && *b)
            .collect();
        DvcGrid::new(self.geometry, displacements, correlate, inside_bone)
    }

    /// Trilinear displacement at `p`; `None` outside the grid or when a
    /// corner of the containing cell does not correlate.
    pub fn trilinear_displacement(&self, p: [f64; 3]) -> Option<[f64; 3]> {
        let ([i, j, k], [fx, fy, fz]) = self.geometry.locate(p)?;
        let dims = self.geometry.dims;
        let mut out = [0.0; 3];
        for corner in 0..8 {
            let (a, b, c) = (corner & 1, (corner >> 1) & 1, (corner >> 2) & 1);
            let w = [1.0 - fx, fx][a] * [1.0 - fy, fy][b] * [1.0 - fz, fz][c];
            let (ci, cj, ck) = (
                (i + a).min(dims[0] - 1),
                (j + b).min(dims[1] - 1),
                (k + c).min(dims[2] - 1),
            );
            let u = self.displacement(self.geometry.index(ci, cj, ck))?;
            for d in 0..3 {
                out[d] += w * u[d];
            }
        }
        Some(out)
    }
}

/// Samples the FE displacement field at the grid nodes and adds i.i.d.
/// Gaussian noise of standard deviation `sigma` (mm) per component.
///
/// Nodes outside the mesh neither correlate nor count as bone. Three normal
/// deviates are drawn for every node in index order, so the noise at a node
/// does not depend on which other nodes correlate.
pub fn synthesize_dvc(
    mesh: &Tet10Mesh,
    displacements: &[[f64; 3]],
    geometry: GridGeometry,
    sigma: f64,
    seed: u64,
) -> Result<DvcGrid> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(HfeError::Contract(format!(
            "noise level {sigma} must be non-negative"
        )));
    }
    if displacements.len() != mesh.num_nodes() {
        return Err(HfeError::Contract(
            "displacement field does not match mesh".into(),
        ));
    }
    let n = geometry.num_points();
    let exact: Vec<Option<[f64; 3]>> = (0..n)
        .into_par_iter()
        .map(|idx| mesh.interpolate_nodal_field(displacements, geometry.position_of(idx)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).map_err(|e| HfeError::Contract(e.to_string()))?;
    let mut values = Vec::with_capacity(n);
    for u in &exact {
        let noise: [f64; 3] = std::array::from_fn(|_| normal.sample(&mut rng));
        values.push(match u {
            Some(u) => [0, 1, 2].map(|d| u[d] + noise[d]),
            None => [0.0; 3],
        });
    }
    let correlate: Vec<bool> = exact.iter().map(Option::is_some).collect();
    DvcGrid::new(geometry, values, correlate.clone(), correlate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build::structured_box;
    use proptest::prelude::*;

    fn affine(p: [f64; 3]) -> [f64; 3] {
        [
            0.01 * p[0] - 0.003 * p[1] + 0.2,
            0.002 * p[2] + 0.004 * p[0],
            -0.02 * p[2] + 0.001 * p[1] - 0.1,
        ]
    }

    fn grid() -> DvcGrid {
        let g = GridGeometry::new([1.0, -2.0, 0.5], DEFAULT_SPACING, [4, 3, 5]).unwrap();
        DvcGrid::from_fn(g, |p| Some(affine(p)))
    }

    #[test]
    fn node_and_cell_center_values() {
        let g = grid();
        let p = g.geometry().position(2, 1, 3);
        let at_node = g.trilinear_displacement(p).unwrap();
        for d in 0..3 {
            assert!((at_node[d] - affine(p)[d]).abs() < 1e-15);
        }
        let center = g
            .geometry()
            .position(0, 0, 0)
            .map(|c| c + 0.5 * DEFAULT_SPACING);
        let mut mean = [0.0; 3];
        for c in 0..8 {
            let u = g.displacements()[g.geometry().index(c & 1, (c >> 1) & 1, (c >> 2) & 1)];
            for d in 0..3 {
                mean[d] += u[d] / 8.0;
            }
        }
        let got = g.trilinear_displacement(center).unwrap();
        for d in 0..3 {
            assert!((got[d] - mean[d]).abs() < 1e-15);
        }
    }

    #[test]
    fn outside_or_uncorrelated_is_unavailable() {
        let mut g = grid();
        assert!(g.trilinear_displacement([0.0, 0.0, 0.0]).is_none());
        let idx = g.geometry().index(1, 1, 1);
        g.set_correlate(idx, false);
        let p = g.geometry().position(1, 1, 1).map(|c| c - 0.3);
        assert!(g.trilinear_displacement(p).is_none());
    }

    proptest! {
        #[test]
        fn affine_fields_are_interpolated_exactly(
            fx in 0.0..1.0f64, fy in 0.0..1.0f64, fz in 0.0..1.0f64,
        ) {
            let g = grid();
            let [nx, ny, nz] = g.dims();
            let o = g.geometry().origin;
            let h = g.spacing();
            let p = [
                o[0] + fx * (nx - 1) as f64 * h,
                o[1] + fy * (ny - 1) as f64 * h,
                o[2] + fz * (nz - 1) as f64 * h,
            ];
            let got = g.trilinear_displacement(p).unwrap();
            let want = affine(p);
            for d in 0..3 {
                prop_assert!((got[d] - want[d]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn noiseless_synthesis_samples_the_fe_field() {
        let mesh = structured_box([0.0; 3], [6.0; 3], [2, 2, 2]).unwrap();
        let u: Vec<[f64; 3]> = mesh.nodes().iter().map(|p| affine(*p)).collect();
        let g = GridGeometry::new([0.5; 3], DEFAULT_SPACING, [4, 4, 4]).unwrap();
        let dvc = synthesize_dvc(&mesh, &u, g, 0.0, 1).unwrap();
        for idx in 0..dvc.num_points() {
            let p = g.position_of(idx);
            let inside = p.iter().all(|&c| c <= 6.0);
            assert_eq!(dvc.correlate()[idx], inside);
            if inside {
                let want = affine(p);
                for d in 0..3 {
                    assert!((dvc.displacements()[idx][d] - want[d]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn grid_outside_mesh_does_not_correlate() {
        let mesh = structured_box([0.0; 3], [1.0; 3], [1, 1, 1]).unwrap();
        let u = vec![[0.0; 3]; mesh.num_nodes()];
        let g = GridGeometry::new([10.0; 3], 1.0, [3, 3, 3]).unwrap();
        let dvc = synthesize_dvc(&mesh, &u, g, 0.01, 4).unwrap();
        assert!(dvc.correlate().iter().all(|c| !c));
    }

    #[test]
    fn synthetic_noise_has_requested_spread_and_is_reproducible() {
        let mesh = structured_box([0.0; 3], [50.0; 3], [2, 2, 2]).unwrap();
        let u = vec![[0.0; 3]; mesh.num_nodes()];
        let g = GridGeometry::new([0.0; 3], 2.0, [22, 22, 22]).unwrap();
        let sigma = 0.005;
        let a = synthesize_dvc(&mesh, &u, g, sigma, 42).unwrap();
        let b = synthesize_dvc(&mesh, &u, g, sigma, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.num_points() >= 10_000);
        for d in 0..3 {
            let v: Vec<f64> = a.displacements().iter().map(|u| u[d]).collect();
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
            assert!((var.sqrt() - sigma).abs() < 0.05 * sigma);
        }
    }

    #[test]
    fn negative_noise_is_rejected() {
        let mesh = structured_box([0.0; 3], [1.0; 3], [1, 1, 1]).unwrap();
        let u = vec![[0.0; 3]; mesh.num_nodes()];
        let g = GridGeometry::new([0.0; 3], 1.0, [2, 2, 2]).unwrap();
        assert!(synthesize_dvc(&mesh, &u, g, -1.0, 0).is_err());
    }
}
