use rayon::prelude::*;
use serde::Serialize;

use super::metrics::{regression_metrics, RegressionMetrics};
use crate::dvc::DvcGrid;
use crate::error::{HfeError, Result};
use crate::mesh::Tet10Mesh;
use crate::volume::{VolumeKind, VoxelVolume};

pub const AXES: [&str; 3] = ["x", "y", "z"];

/// Measured and predicted displacements at the qualifying grid points.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PairedSamples {
    pub grid_index: Vec<usize>,
    pub points: Vec<[f64; 3]>,
    pub dvc: Vec<[f64; 3]>,
    pub fe: Vec<[f64; 3]>,
}

impl PairedSamples {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn component(&self, axis: usize) -> (Vec<f64>, Vec<f64>) {
        (
            self.dvc.iter().map(|u| u[axis]).collect(),
            self.fe.iter().map(|u| u[axis]).collect(),
        )
    }

    /// Predicted minus measured displacement per pair.
    pub fn errors(&self) -> Vec<[f64; 3]> {
        self.fe
            .iter()
            .zip(&self.dvc)
            .map(|(f, d)| [f[0] - d[0], f[1] - d[1], f[2] - d[2]])
            .collect()
    }

    pub fn metrics(&self, axis: usize) -> Result<RegressionMetrics> {
        let (d, f) = self.component(axis);
        regression_metrics(&d, &f)
    }

    /// All three components pooled into one regression.
    pub fn pooled_metrics(&self) -> Result<RegressionMetrics> {
        let d: Vec<f64> = self.dvc.iter().flatten().copied().collect();
        let f: Vec<f64> = self.fe.iter().flatten().copied().collect();
        regression_metrics(&d, &f)
    }

    pub fn retain(&mut self, keep: impl Fn(usize) -> bool) {
        let idx: Vec<usize> = (0..self.len())
            .filter(|&i| keep(self.grid_index[i]))
            .collect();
        self.grid_index = idx.iter().map(|&i| self.grid_index[i]).collect();
        self.points = idx.iter().map(|&i| self.points[i]).collect();
        self.dvc = idx.iter().map(|&i| self.dvc[i]).collect();
        self.fe = idx.iter().map(|&i| self.fe[i]).collect();
    }
}

/// Pairs every correlating grid point inside the mesh and the central axial
/// band with the FE displacement interpolated by the element shape functions.
pub fn fe_at_dvc_points(
    mesh: &Tet10Mesh,
    displacements: &[[f64; 3]],
    grid: &DvcGrid,
    central_fraction: f64,
) -> Result<PairedSamples> {
    if displacements.len() != mesh.num_nodes() {
        return Err(HfeError::Contract(
            "displacement field does not match mesh".into(),
        ));
    }
    let g = grid.geometry();
    let positions: Vec<[f64; 3]> = (0..grid.num_points()).map(|i| g.position_of(i)).collect();
    let central = mesh.central_region_filter(&positions, central_fraction)?;
    let fe: Vec<Option<[f64; 3]>> = (0..grid.num_points())
        .into_par_iter()
        .map(|i| {
            if grid.correlate()[i] && central[i] {
                mesh.interpolate_nodal_field(displacements, positions[i])
            } else {
                None
            }
        })
        .collect();
    let mut out = PairedSamples::default();
    for (i, f) in fe.into_iter().enumerate() {
        if let (Some(f), Some(d)) = (f, grid.displacement(i)) {
            out.grid_index.push(i);
            out.points.push(positions[i]);
            out.dvc.push(d);
            out.fe.push(f);
        }
    }
    if out.is_empty() {
        return Err(HfeError::EmptyComparison);
    }
    Ok(out)
}

/// Grid points whose nearest mask voxel is set.
pub fn subset_trabecular(grid: &DvcGrid, mask: &VoxelVolume) -> Result<Vec<bool>> {
    if mask.kind() != VolumeKind::Mask {
        return Err(HfeError::KindMismatch {
            expected: VolumeKind::Mask.as_str(),
            found: mask.kind().as_str(),
        });
    }
    let g = grid.geometry();
    Ok((0..grid.num_points())
        .map(|i| {
            mask.sample_nearest(g.position_of(i))
                .is_some_and(|v| v >= 0.5)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DirectionReliability {
    pub median_abs: [f64; 3],
    /// False where the median |displacement| is below the voxel size.
    pub reliable: [bool; 3],
}

/// Median absolute displacement per direction over correlating points.
pub fn direction_reliability(grid: &DvcGrid, voxel_size: f64) -> DirectionReliability {
    let mut median_abs = [0.0; 3];
    for (d, m) in median_abs.iter_mut().enumerate() {
        let mut v: Vec<f64> = (0..grid.num_points())
            .filter_map(|i| grid.displacement(i).map(|u| u[d].abs()))
            .collect();
        *m = median(&mut v);
    }
    DirectionReliability {
        median_abs,
        reliable: median_abs.map(|m| m >= voxel_size),
    }
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dvc::{synthesize_dvc, GridGeometry};
    use crate::mesh::build::structured_box;

    fn field(p: [f64; 3]) -> [f64; 3] {
        [
            0.001 * p[0] * p[2],
            -0.002 * p[1],
            -0.01 * p[2] + 0.0005 * p[0] * p[0],
        ]
    }

    #[test]
    fn noiseless_synthesis_pairs_match_and_count_matches_brute_force() {
        let mesh = structured_box([0.0; 3], [6.0, 6.0, 10.0], [3, 3, 5]).unwrap();
        let u: Vec<[f64; 3]> = mesh.nodes().iter().map(|p| field(*p)).collect();
        let g = GridGeometry::new([-1.1, -1.1, -1.1], 0.7, [12, 12, 19]).unwrap();
        let dvc = synthesize_dvc(&mesh, &u, g, 0.0, 0).unwrap();
        let pairs = fe_at_dvc_points(&mesh, &u, &dvc, 0.75).unwrap();
        for (a, b) in pairs.dvc.iter().zip(&pairs.fe) {
            assert_eq!(a, b);
        }
        // Independent scan: inside the box and inside the central band.
        let brute = (0..g.num_points())
            .filter(|&i| {
                let p = g.position_of(i);
                let inside = (0..2).all(|d| (-1e-9..=6.0 + 1e-9).contains(&p[d]))
                    && (-1e-9..=10.0 + 1e-9).contains(&p[2]);
                inside && p[2] >= 1.25 && p[2] <= 8.75
            })
            .count();
        assert_eq!(pairs.len(), brute);
        assert!(pairs.points.iter().all(|p| p[2] >= 1.25 && p[2] <= 8.75));
    }

    #[test]
    fn no_qualifying_points_is_an_error() {
        let mesh = structured_box([0.0; 3], [1.0; 3], [1, 1, 1]).unwrap();
        let u = vec![[0.0; 3]; mesh.num_nodes()];
        let g = GridGeometry::new([5.0; 3], 1.0, [2, 2, 2]).unwrap();
        let grid = DvcGrid::from_fn(g, |_| Some([0.0; 3]));
        assert!(matches!(
            fe_at_dvc_points(&mesh, &u, &grid, 0.75),
            Err(HfeError::EmptyComparison)
        ));
    }

    fn mask(f: impl Fn([f64; 3]) -> bool) -> VoxelVolume {
        VoxelVolume::from_fn([20, 20, 20], [0.5; 3], [0.0; 3], VolumeKind::Mask, |p| {
            f32::from(u8::from(f(p)))
        })
        .unwrap()
    }

    #[test]
    fn trabecular_subset_follows_the_mask() {
        let g = GridGeometry::new([0.3; 3], 1.1, [8, 8, 8]).unwrap();
        let grid = DvcGrid::from_fn(g, |_| Some([0.0; 3]));
        assert!(subset_trabecular(&grid, &mask(|_| true))
            .unwrap()
            .iter()
            .all(|&b| b));
        assert!(subset_trabecular(&grid, &mask(|_| false))
            .unwrap()
            .iter()
            .all(|&b| !b));
        let half = subset_trabecular(&grid, &mask(|p| p[0] < 5.0)).unwrap();
        for (i, keep) in half.iter().enumerate() {
            assert_eq!(*keep, g.position_of(i)[0] < 5.0);
        }
    }

    #[test]
    fn direction_reliability_uses_strict_median_rule() {
        let g = GridGeometry::new([0.0; 3], 1.0, [3, 3, 3]).unwrap();
        let grid = DvcGrid::from_fn(g, |p| Some([0.0, 0.039, -0.1 * (1.0 + p[2])]));
        let r = direction_reliability(&grid, 0.039);
        assert_eq!(r.reliable, [false, true, true]);
        let mut values: Vec<f64> = (0..27).map(|i| ((i * 7) % 27) as f64 * 0.01).collect();
        let grid = DvcGrid::from_fn(g, |p| {
            let i = g.index(p[0] as usize, p[1] as usize, p[2] as usize);
            Some([values[i], 0.0, 0.0])
        });
        values.sort_by(f64::total_cmp);
        assert_eq!(
            direction_reliability(&grid, 0.039).median_abs[0],
            values[13]
        );
    }
}
