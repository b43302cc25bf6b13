use nalgebra::Matrix3;

use super::{DvcGrid, GridGeometry};
use crate::error::{HfeError, Result};
use crate::tensor::SymTensor;

/// Strain per hexahedral grid cell; `None` where a corner does not correlate.
#[derive(Debug, Clone, PartialEq)]
pub struct StrainGrid {
    geometry: GridGeometry,
    cells: Vec<Option<SymTensor>>,
}

impl StrainGrid {
    /// Builds a strain grid from per-cell values on the nodes of `geometry`.
    pub fn new(geometry: GridGeometry, cells: Vec<Option<SymTensor>>) -> Result<Self> {
        let n: usize = cell_dims(&geometry).iter().product();
        if cells.len() != n {
            return Err(HfeError::GridMismatch(format!(
                "{} cell values for {n} cells",
                cells.len()
            )));
        }
        Ok(StrainGrid { geometry, cells })
    }

    /// Node geometry of the underlying grid.
    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn cell_dims(&self) -> [usize; 3] {
        cell_dims(&self.geometry)
    }

    pub fn cells(&self) -> &[Option<SymTensor>] {
        &self.cells
    }

    pub fn cell_index(&self, i: usize, j: usize, k: usize) -> usize {
        let [cx, cy, _] = self.cell_dims();
        i + cx * (j + cy * k)
    }

    pub fn cell_ijk(&self, index: usize) -> [usize; 3] {
        let [cx, cy, _] = self.cell_dims();
        [index % cx, (index / cx) % cy, index / (cx * cy)]
    }

    pub fn cell_center(&self, index: usize) -> [f64; 3] {
        let [i, j, k] = self.cell_ijk(index);
        self.geometry
            .position(i, j, k)
            .map(|c| c + 0.5 * self.geometry.spacing)
    }

    pub fn defined_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    /// Cells sharing grid node `node` as a corner.
    pub fn cells_around(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        let [i, j, k] = self.geometry.ijk(node);
        let cd = self.cell_dims();
        (0..8).filter_map(move |c| {
            let ijk = [i, j, k];
            let mut cell = [0; 3];
            for d in 0..3 {
                let off = (c >> d) & 1;
                cell[d] = ijk[d].checked_sub(off).filter(|&v| v < cd[d])?;
            }
            Some(self.cell_index(cell[0], cell[1], cell[2]))
        })
    }

    /// Node values averaged over the adjacent defined cells.
    pub fn nodal_average(&self) -> Vec<Option<SymTensor>> {
        (0..self.geometry.num_points())
            .map(|node| {
                let (sum, n) = self
                    .cells_around(node)
                    .filter_map(|c| self.cells[c])
                    .fold((SymTensor::ZERO, 0usize), |(s, n), t| (s.add(&t), n + 1));
                (n > 0).then(|| sum.scale(1.0 / n as f64))
            })
            .collect()
    }
}

fn cell_dims(g: &GridGeometry) -> [usize; 3] {
    g.dims.map(|n| n.saturating_sub(1))
}

/// Symmetric gradient of the trilinear interpolant at each cell center.
pub fn differentiate_strains(grid: &DvcGrid) -> Result<StrainGrid> {
    let geometry = *grid.geometry();
    let cd = cell_dims(&geometry);
    let h = geometry.spacing;
    let mut cells = Vec::with_capacity(cd.iter().product());
    for k in 0..cd[2] {
        for j in 0..cd[1] {
            for i in 0..cd[0] {
                let mut corners = [[0.0; 3]; 8];
                let mut ok = true;
                for (c, slot) in corners.iter_mut().enumerate() {
                    let idx = geometry.index(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
                    match grid.displacement(idx) {
                        Some(u) => *slot = u,
                        None => {
                            ok = false;
                            break;
                        }
                    }
                }
                cells.push(ok.then(|| center_strain(&corners, h)));
            }
        }
    }
    if !cells.iter().any(Option::is_some) {
        return Err(HfeError::EmptyStrain);
    }
    StrainGrid::new(geometry, cells)
}

/// Corners indexed by bits `(x, y, z)` of the corner number.
fn center_strain(corners: &[[f64; 3]; 8], h: f64) -> SymTensor {
    let mut grad = Matrix3::zeros();
    for (c, u) in corners.iter().enumerate() {
        for d in 0..3 {
            let sign = if (c >> d) & 1 == 1 { 1.0 } else { -1.0 };
            for i in 0..3 {
                grad[(i, d)] += sign * u[i];
            }
        }
    }
    SymTensor::sym_of(&(grad / (4.0 * h)))
}

/// Per grid node, the mean absolute strain component of the difference of
/// two unloaded-state grids, averaged over adjacent defined cells.
pub fn zero_strain_uncertainty(a: &DvcGrid, b: &DvcGrid) -> Result<Vec<Option<f64>>> {
    let diff = a.difference(b)?;
    let strains = differentiate_strains(&diff)?;
    Ok((0..diff.num_points())
        .map(|node| {
            let (sum, n) = strains
                .cells_around(node)
                .filter_map(|c| strains.cells()[c])
                .fold((0.0, 0usize), |(s, n), t| (s + t.mean_abs(), n + 1));
            (n > 0).then(|| sum / n as f64)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dvc::DEFAULT_SPACING;

    fn geometry() -> GridGeometry {
        GridGeometry::new([0.3, -1.0, 2.0], DEFAULT_SPACING, [5, 4, 6]).unwrap()
    }

    #[test]
    fn affine_field_gives_uniform_symmetric_gradient() {
        let a = [
            [0.01, -0.002, 0.003],
            [0.004, -0.005, 0.0],
            [0.001, 0.002, 0.007],
        ];
        let grid = DvcGrid::from_fn(geometry(), |p| {
            Some([0, 1, 2].map(|i| 0.3 + (0..3).map(|j| a[i][j] * p[j]).sum::<f64>()))
        });
        let s = differentiate_strains(&grid).unwrap();
        let want = SymTensor::sym_of(&Matrix3::from_fn(|i, j| a[i][j]));
        for c in s.cells() {
            let c = c.unwrap();
            for m in 0..6 {
                assert!((c.0[m] - want.0[m]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn zero_field_gives_zero_strain_and_no_cells_is_an_error() {
        let grid = DvcGrid::from_fn(geometry(), |_| Some([0.0; 3]));
        let s = differentiate_strains(&grid).unwrap();
        assert!(s.cells().iter().all(|c| *c == Some(SymTensor::ZERO)));
        let none = DvcGrid::from_fn(geometry(), |_| None);
        assert!(matches!(
            differentiate_strains(&none),
            Err(HfeError::EmptyStrain)
        ));
    }

    #[test]
    fn uncertainty_of_identical_grids_is_zero() {
        let grid = DvcGrid::from_fn(geometry(), |p| Some([p[0].sin(), p[1] * p[2], 0.1]));
        let u = zero_strain_uncertainty(&grid, &grid).unwrap();
        assert!(u.iter().all(|v| *v == Some(0.0)));
    }

    #[test]
    fn uncertainty_of_affine_difference_is_mean_abs_component() {
        let c = 2e-4;
        let a = DvcGrid::from_fn(geometry(), |p| {
            Some([c * p[0] + c * p[1], c * p[1] - c * p[2], -c * p[2]])
        });
        let b = DvcGrid::from_fn(geometry(), |_| Some([0.0; 3]));
        // exx = c, eyy = c, ezz = −c, exy = c/2, eyz = −c/2, exz = 0.
        let want = (c + c + c + 0.5 * c + 0.5 * c) / 6.0;
        for v in zero_strain_uncertainty(&a, &b).unwrap() {
            assert!((v.unwrap() - want).abs() < 1e-15);
        }
    }

    #[test]
    fn non_correlating_corner_undefines_its_neighbourhood() {
        let g = geometry();
        let mut a = DvcGrid::from_fn(g, |p| Some([1e-3 * p[0], 0.0, 0.0]));
        let b = DvcGrid::from_fn(g, |_| Some([0.0; 3]));
        let node = g.index(2, 2, 2);
        a.set_correlate(node, false);
        let s = differentiate_strains(&a).unwrap();
        let around: Vec<usize> = s.cells_around(node).collect();
        assert_eq!(around.len(), 8);
        for c in &around {
            assert!(s.cells()[*c].is_none());
        }
        assert_eq!(s.defined_count(), s.cells().len() - 8);
        let u = zero_strain_uncertainty(&a, &b).unwrap();
        assert!(u[node].is_none());
        assert!(u[g.index(0, 0, 0)].is_some());
    }

    #[test]
    fn mismatched_geometry_is_rejected() {
        let a = DvcGrid::from_fn(geometry(), |_| Some([0.0; 3]));
        let g2 = GridGeometry::new([0.0; 3], DEFAULT_SPACING, [5, 4, 6]).unwrap();
        let b = DvcGrid::from_fn(g2, |_| Some([0.0; 3]));
        assert!(matches!(
            zero_strain_uncertainty(&a, &b),
            Err(HfeError::GridMismatch(_))
        ));
    }

    #[test]
    fn cubic_field_matches_analytic_gradient_at_cell_centers() {
        // Strains up to about 1% over the grid.
        let (a, b, c, d) = (3e4, 5e4, 4e4, 6e4);
        let f = move |p: [f64; 3]| {
            let [x, y, z] = p;
            Some([x * x * x / a - x * y * z / b, y * y * z / c, x * x * y / d])
        };
        let grid = DvcGrid::from_fn(geometry(), f);
        let s = differentiate_strains(&grid).unwrap();
        let h = DEFAULT_SPACING;
        for (idx, cell) in s.cells().iter().enumerate() {
            let [x, y, z] = s.cell_center(idx);
            let g = Matrix3::new(
                3.0 * x * x / a - y * z / b,
                -x * z / b,
                -x * y / b,
                0.0,
                2.0 * y * z / c,
                y * y / c,
                2.0 * x * y / d,
                x * x / d,
                0.0,
            );
            let want = SymTensor::sym_of(&g);
            let got = cell.unwrap();
            for m in 0..6 {
                assert!((got.0[m] - want.0[m]).abs() < 1e-3);
            }
            // Only the pure cubic term leaves a discretization error, h²/4a.
            assert!((got.0[0] - want.0[0] - h * h / (4.0 * a)).abs() < 1e-15);
        }
    }
}
