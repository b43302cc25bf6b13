//! Tet10 element kernels: strain-displacement operator, isotropic
//! elasticity matrix and element stiffness.
//!
//! Voigt order is `[xx, yy, zz, xy, yz, xz]` with engineering shear strains.

use nalgebra::{Matrix3, Matrix6, SMatrix, SVector};

use super::sparse::ElementMatrix;
use crate::materials::{gauss4, ElementMaterial};
use crate::mesh::{shape_gradients, NaturalCoords, Tet10Mesh};
use crate::tensor::SymTensor;

pub type BMatrix = SMatrix<f64, 6, 30>;
pub type Voigt = SVector<f64, 6>;

pub fn b_matrix(grads: &[[f64; 3]; 10]) -> BMatrix {
    let mut b = BMatrix::zeros();
    for (a, g) in grads.iter().enumerate() {
        let c = 3 * a;
        b[(0, c)] = g[0];
        b[(1, c + 1)] = g[1];
        b[(2, c + 2)] = g[2];
        b[(3, c)] = g[1];
        b[(3, c + 1)] = g[0];
        b[(4, c + 1)] = g[2];
        b[(4, c + 2)] = g[1];
        b[(5, c)] = g[2];
        b[(5, c + 2)] = g[0];
    }
    b
}

pub fn elasticity_matrix(material: &ElementMaterial) -> Matrix6<f64> {
    let (lambda, mu) = material.lame();
    let mut d = Matrix6::zeros();
    for i in 0..3 {
        for j in 0..3 {
            d[(i, j)] = lambda;
        }
        d[(i, i)] = lambda + 2.0 * mu;
        d[(i + 3, i + 3)] = mu;
    }
    d
}

/// Gauss points of the element as `(natural coords, weight × volume)`.
pub fn gauss_points(mesh: &Tet10Mesh, element: usize) -> [(NaturalCoords, f64); 4] {
    let vol = mesh.geometry(element).volume;
    gauss4().map(|(l, w)| (NaturalCoords(l), w * vol))
}

pub fn b_at(mesh: &Tet10Mesh, element: usize, nc: &NaturalCoords) -> BMatrix {
    b_matrix(&shape_gradients(nc, &mesh.geometry(element).grad_bary))
}

/// Stiffness `Σ_gp w V Bᵀ D B` with a single constitutive matrix per Gauss point.
pub fn stiffness_with<F>(mesh: &Tet10Mesh, element: usize, mut tangent: F) -> ElementMatrix
where
    F: FnMut(usize) -> Matrix6<f64>,
{
    let mut k = SMatrix::<f64, 30, 30>::zeros();
    for (g, (nc, wv)) in gauss_points(mesh, element).iter().enumerate() {
        let b = b_at(mesh, element, nc);
        let db = tangent(g) * b;
        k += b.transpose() * db * *wv;
    }
    let mut out = [[0.0; 30]; 30];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = k[(i, j)];
        }
    }
    out
}

pub fn element_stiffness(
    mesh: &Tet10Mesh,
    element: usize,
    material: &ElementMaterial,
) -> ElementMatrix {
    let d = elasticity_matrix(material);
    stiffness_with(mesh, element, |_| d)
}

pub fn element_displacements(mesh: &Tet10Mesh, element: usize, u: &[f64]) -> SVector<f64, 30> {
    let mut ue = SVector::<f64, 30>::zeros();
    for (a, &n) in mesh.elements()[element].iter().enumerate() {
        for d in 0..3 {
            ue[3 * a + d] = u[3 * n + d];
        }
    }
    ue
}

/// Small-strain tensor at natural coordinates `nc`.
pub fn strain_at(mesh: &Tet10Mesh, element: usize, u: &[f64], nc: &NaturalCoords) -> SymTensor {
    let grads = shape_gradients(nc, &mesh.geometry(element).grad_bary);
    let mut grad = Matrix3::zeros();
    for (a, &n) in mesh.elements()[element].iter().enumerate() {
        for i in 0..3 {
            for j in 0..3 {
                grad[(i, j)] += u[3 * n + i] * grads[a][j];
            }
        }
    }
    SymTensor::sym_of(&grad)
}

pub fn voigt_from_strain(e: &SymTensor) -> Voigt {
    let [xx, yy, zz, xy, yz, xz] = e.0;
    Voigt::from([xx, yy, zz, 2.0 * xy, 2.0 * yz, 2.0 * xz])
}

pub fn stress_from_voigt(s: &Voigt) -> SymTensor {
    SymTensor([s[0], s[1], s[2], s[3], s[4], s[5]])
}

pub fn voigt_from_stress(s: &SymTensor) -> Voigt {
    Voigt::from(s.0)
}
