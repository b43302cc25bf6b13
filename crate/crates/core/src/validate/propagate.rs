use nalgebra::Matrix3;

use crate::dvc::{differentiate_strains, DvcGrid, StrainGrid};
use crate::error::{HfeError, Result};
use crate::tensor::SymTensor;

/// Strain-level consequences of a displacement error field on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorPropagation {
    /// `|error| / spacing` per grid point.
    pub quick_estimate: Vec<Option<f64>>,
    /// Cell-center strain of the error field.
    pub strains: StrainGrid,
    /// Per cell, the largest strain component of the trilinear error
    /// interpolant over the cell (attained at a corner).
    pub cell_peak: Vec<Option<f64>>,
    /// Per grid point, mean |component| of the node-averaged error strain
    /// minus the zero-strain uncertainty, floored at zero.
    pub residual: Option<Vec<Option<f64>>>,
}

/// Differentiates the FE-minus-DVC displacement error superimposed on the grid.
///
/// `errors[i]` is the error at grid point `i`, `None` where undefined.
pub fn propagate_displacement_error(
    grid: &DvcGrid,
    errors: &[Option<[f64; 3]>],
    uncertainty: Option<&[Option<f64>]>,
) -> Result<ErrorPropagation> {
    let n = grid.num_points();
    if errors.len() != n || uncertainty.is_some_and(|u| u.len() != n) {
        return Err(HfeError::GridMismatch(
            "error field does not match grid".into(),
        ));
    }
    let h = grid.spacing();
    let error_grid = DvcGrid::new(
        *grid.geometry(),
        errors.iter().map(|e| e.unwrap_or([0.0; 3])).collect(),
        errors.iter().map(Option::is_some).collect(),
        grid.inside_bone().to_vec(),
    )?;
    let quick_estimate = errors
        .iter()
        .map(|e| e.map(|e| (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]).sqrt() / h))
        .collect();
    let strains = differentiate_strains(&error_grid)?;
    let g = *grid.geometry();
    let cell_peak = (0..strains.cells().len())
        .map(|c| {
            strains.cells()[c]?;
            let [i, j, k] = strains.cell_ijk(c);
            let corners: [[f64; 3]; 8] = std::array::from_fn(|b| {
                error_grid.displacements()
                    [g.index(i + (b & 1), j + ((b >> 1) & 1), k + ((b >> 2) & 1))]
            });
            Some(corner_peak(&corners, h))
        })
        .collect();
    let residual = uncertainty.map(|u| {
        strains
            .nodal_average()
            .iter()
            .zip(u)
            .map(|(s, u)| Some((s.as_ref()?.mean_abs() - (*u)?).max(0.0)))
            .collect()
    });
    Ok(ErrorPropagation {
        quick_estimate,
        strains,
        cell_peak,
        residual,
    })
}

/// Largest strain component of the trilinear interpolant over its cell.
///
/// Each gradient entry is linear in the two transverse local coordinates, so
/// its extremes over the cell sit on the corners.
fn corner_peak(corners: &[[f64; 3]; 8], h: f64) -> f64 {
    let mut peak = 0.0_f64;
    for at in 0..8 {
        let xi = [at & 1, (at >> 1) & 1, (at >> 2) & 1].map(|b| b as f64);
        let mut grad = Matrix3::zeros();
        for (c, u) in corners.iter().enumerate() {
            let bits = [c & 1, (c >> 1) & 1, (c >> 2) & 1];
            // Trilinear weight factors and their derivatives.
            let w = |d: usize| if bits[d] == 1 { xi[d] } else { 1.0 - xi[d] };
            let dw = |d: usize| if bits[d] == 1 { 1.0 } else { -1.0 };
            let dn = [
                dw(0) * w(1) * w(2),
                w(0) * dw(1) * w(2),
                w(0) * w(1) * dw(2),
            ];
            for i in 0..3 {
                for d in 0..3 {
                    grad[(i, d)] += u[i] * dn[d] / h;
                }
            }
        }
        peak = peak.max(SymTensor::sym_of(&grad).max_abs());
    }
    peak
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dvc::GridGeometry;

    fn geometry() -> GridGeometry {
        GridGeometry::new([0.0; 3], 1.95, [5, 5, 5]).unwrap()
    }

    #[test]
    fn zero_error_propagates_to_zero() {
        let g = geometry();
        let grid = DvcGrid::from_fn(g, |_| Some([0.0; 3]));
        let errors = vec![Some([0.0; 3]); g.num_points()];
        let unc = vec![Some(1e-4); g.num_points()];
        let out = propagate_displacement_error(&grid, &errors, Some(&unc)).unwrap();
        assert!(out.quick_estimate.iter().all(|v| *v == Some(0.0)));
        assert!(out
            .strains
            .cells()
            .iter()
            .all(|c| *c == Some(SymTensor::ZERO)));
        assert!(out.cell_peak.iter().all(|v| *v == Some(0.0)));
        assert!(out.residual.unwrap().iter().all(|v| *v == Some(0.0)));
    }

    #[test]
    fn affine_error_gives_its_symmetric_gradient() {
        let g = geometry();
        let grid = DvcGrid::from_fn(g, |_| Some([0.0; 3]));
        let a = Matrix3::new(1e-3, 2e-4, 0.0, -4e-4, 5e-4, 1e-4, 0.0, 3e-4, -2e-3);
        let errors: Vec<_> = (0..g.num_points())
            .map(|i| {
                let p = g.position_of(i);
                let v = a * nalgebra::Vector3::from(p);
                Some([v[0] + 0.01, v[1], v[2]])
            })
            .collect();
        let out = propagate_displacement_error(&grid, &errors, None).unwrap();
        let want = SymTensor::sym_of(&a);
        for c in out.strains.cells() {
            for m in 0..6 {
                assert!((c.unwrap().0[m] - want.0[m]).abs() < 1e-15);
            }
        }
        for p in &out.cell_peak {
            assert!((p.unwrap() - want.max_abs()).abs() < 1e-15);
        }
    }

    #[test]
    fn single_node_error_peaks_at_e_over_spacing() {
        let g = geometry();
        let grid = DvcGrid::from_fn(g, |_| Some([0.0; 3]));
        let e = 0.01;
        let node = g.index(2, 2, 2);
        let errors: Vec<_> = (0..g.num_points())
            .map(|i| Some(if i == node { [e, 0.0, 0.0] } else { [0.0; 3] }))
            .collect();
        let out = propagate_displacement_error(&grid, &errors, None).unwrap();
        let peak = out
            .cell_peak
            .iter()
            .flatten()
            .fold(0.0_f64, |m, v| m.max(*v));
        // Hat gradient at its own node: ∂u/∂x = e/h.
        assert!((peak - e / g.spacing).abs() < 1e-15);
        // The cell-center value is a quarter of that.
        let center = out
            .strains
            .cells()
            .iter()
            .flatten()
            .fold(0.0_f64, |m, t| m.max(t.max_abs()));
        assert!((center - e / (4.0 * g.spacing)).abs() < 1e-15);
        assert_eq!(out.quick_estimate[node], Some(e / g.spacing));
    }

    #[test]
    fn undefined_errors_stay_undefined() {
        let g = geometry();
        let grid = DvcGrid::from_fn(g, |_| Some([0.0; 3]));
        let mut errors = vec![Some([1e-3, 0.0, 0.0]); g.num_points()];
        errors[0] = None;
        let out = propagate_displacement_error(&grid, &errors, None).unwrap();
        assert_eq!(out.quick_estimate[0], None);
        assert_eq!(out.cell_peak[0], None);
        assert!(out.strains.cells()[0].is_none());
    }
}
