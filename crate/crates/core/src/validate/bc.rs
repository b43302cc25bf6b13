use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use crate::dvc::DvcGrid;
use crate::error::{HfeError, Result};
use crate::mesh::Tet10Mesh;
use crate::solver::DirichletSet;

/// Search radius of the rim fit, in grid spacings.
const RIM_RADIUS: f64 = 2.5;
/// Minimum in-plane spread (smallest covariance eigenvalue / h²) of the rim fit points.
const RIM_SPREAD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcOptions {
    /// Correlating inside-bone points a slice needs to qualify.
    pub min_points: usize,
    /// Fit nodes outside the fully correlated slice cells with a local
    /// affine least-squares field instead of failing.
    pub rim_extrapolation: bool,
}

impl Default for BcOptions {
    fn default() -> Self {
        BcOptions {
            min_points: 4,
            rim_extrapolation: true,
        }
    }
}

/// Axial grid slice indices used for the boundary conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BcSlices {
    pub upper: usize,
    pub lower: usize,
}

/// Most cranial and most caudal axial slices with at least `min_points`
/// correlating inside-bone points.
pub fn extract_bc_slices(grid: &DvcGrid, min_points: usize) -> Result<BcSlices> {
    let g = grid.geometry();
    let mut counts = vec![0usize; g.dims[2]];
    for idx in 0..grid.num_points() {
        if grid.correlate()[idx] && grid.inside_bone()[idx] {
            counts[g.ijk(idx)[2]] += 1;
        }
    }
    let qualifying: Vec<usize> = (0..counts.len())
        .filter(|&k| counts[k] >= min_points.max(1))
        .collect();
    match (qualifying.first(), qualifying.last()) {
        (Some(&lower), Some(&upper)) if upper > lower => Ok(BcSlices { upper, lower }),
        _ => Err(HfeError::InsufficientCoverage(format!(
            "{} axial slices with at least {min_points} correlating bone points, 2 needed",
            qualifying.len()
        ))),
    }
}

#[derive(Debug, Clone)]
pub struct BoundaryConditions {
    pub dirichlet: DirichletSet,
    /// Node indices at or above the upper slice plane.
    pub upper_nodes: Vec<usize>,
    /// Node indices at or below the lower slice plane.
    pub lower_nodes: Vec<usize>,
    pub upper_plane: f64,
    pub lower_plane: f64,
    /// Nodes whose values came from the rim fit.
    pub extrapolated: usize,
}

/// Prescribes every node beyond the slice planes with the in-plane
/// interpolated slice displacement (clamped axially).
pub fn build_dirichlet_from_dvc(
    mesh: &Tet10Mesh,
    grid: &DvcGrid,
    slices: BcSlices,
    options: &BcOptions,
) -> Result<BoundaryConditions> {
    let g = grid.geometry();
    if slices.upper >= g.dims[2] || slices.lower >= slices.upper {
        return Err(HfeError::Contract(format!("invalid slices {slices:?}")));
    }
    let upper_plane = g.position(0, 0, slices.upper)[2];
    let lower_plane = g.position(0, 0, slices.lower)[2];
    let tol = 1e-9 * g.spacing;
    let mut out = BoundaryConditions {
        dirichlet: DirichletSet::new(),
        upper_nodes: Vec::new(),
        lower_nodes: Vec::new(),
        upper_plane,
        lower_plane,
        extrapolated: 0,
    };
    let mut uncovered = Vec::new();
    for (n, p) in mesh.nodes().iter().enumerate() {
        let (k, side) = if p[2] >= upper_plane - tol {
            (slices.upper, &mut out.upper_nodes)
        } else if p[2] <= lower_plane + tol {
            (slices.lower, &mut out.lower_nodes)
        } else {
            continue;
        };
        side.push(n);
        let value = match slice_bilinear(grid, k, p[0], p[1]) {
            Some(v) => Some(v),
            None if options.rim_extrapolation => {
                let v = slice_affine_fit(grid, k, p[0], p[1]);
                out.extrapolated += usize::from(v.is_some());
                v
            }
            None => None,
        };
        match value {
            Some(v) => out.dirichlet.insert_vector(n, v)?,
            None => uncovered.push(mesh.node_ids()[n]),
        }
    }
    if !uncovered.is_empty() {
        return Err(HfeError::BcCoverage(uncovered));
    }
    Ok(out)
}

/// Bilinear interpolation in axial slice `k`; `None` outside the slice or
/// when a corner of the containing cell does not correlate.
pub fn slice_bilinear(grid: &DvcGrid, k: usize, x: f64, y: f64) -> Option<[f64; 3]> {
    let g = grid.geometry();
    let z = g.position(0, 0, k)[2];
    let ([i, j, _], [fx, fy, _]) = g.locate([x, y, z])?;
    let mut out = [0.0; 3];
    for c in 0..4 {
        let (a, b) = (c & 1, c >> 1);
        let w = [1.0 - fx, fx][a] * [1.0 - fy, fy][b];
        let (ci, cj) = ((i + a).min(g.dims[0] - 1), (j + b).min(g.dims[1] - 1));
        let u = grid.displacement(g.index(ci, cj, k))?;
        for d in 0..3 {
            out[d] += w * u[d];
        }
    }
    Some(out)
}

/// Affine least-squares fit over correlating slice points near `(x, y)`.
fn slice_affine_fit(grid: &DvcGrid, k: usize, x: f64, y: f64) -> Option<[f64; 3]> {
    let g = grid.geometry();
    let h = g.spacing;
    let radius = RIM_RADIUS * h;
    let reach = RIM_RADIUS.ceil() as isize + 1;
    let ci = ((x - g.origin[0]) / h).round() as isize;
    let cj = ((y - g.origin[1]) / h).round() as isize;
    let mut pts = Vec::new();
    for j in cj - reach..=cj + reach {
        for i in ci - reach..=ci + reach {
            if i < 0 || j < 0 || i as usize >= g.dims[0] || j as usize >= g.dims[1] {
                continue;
            }
            let idx = g.index(i as usize, j as usize, k);
            let Some(u) = grid.displacement(idx) else {
                continue;
            };
            let p = g.position_of(idx);
            let (dx, dy) = (p[0] - x, p[1] - y);
            if dx.hypot(dy) <= radius {
                pts.push((dx / h, dy / h, u));
            }
        }
    }
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let (mx, my) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), p| (a + p.0 / n, b + p.1 / n));
    let (mut cxx, mut cyy, mut cxy) = (0.0, 0.0, 0.0);
    for p in &pts {
        cxx += (p.0 - mx).powi(2) / n;
        cyy += (p.1 - my).powi(2) / n;
        cxy += (p.0 - mx) * (p.1 - my) / n;
    }
    let spread = 0.5 * (cxx + cyy) - (0.25 * (cxx - cyy).powi(2) + cxy * cxy).sqrt();
    if spread < RIM_SPREAD {
        return None;
    }
    let mut ata = Matrix3::zeros();
    let mut atb = [Vector3::zeros(); 3];
    for (dx, dy, u) in &pts {
        let row = Vector3::new(1.0, *dx, *dy);
        ata += row * row.transpose();
        for d in 0..3 {
            atb[d] += row * u[d];
        }
    }
    let chol = ata.cholesky()?;
    // Local coordinates are centred on the query point, so the constant term is the value.
    Some([0, 1, 2].map(|d| chol.solve(&atb[d])[0]))
}
