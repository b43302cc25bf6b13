//! Symmetric second-order tensors in 6-component form.
//!
//! Component order is `[xx, yy, zz, xy, yz, xz]`. Shear entries hold tensor
//! components (not engineering shear), so `xy = γ_xy / 2` for strains.

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SymTensor(pub [f64; 6]);

impl SymTensor {
    pub const ZERO: SymTensor = SymTensor([0.0; 6]);

    pub fn new(xx: f64, yy: f64, zz: f64, xy: f64, yz: f64, xz: f64) -> Self {
        SymTensor([xx, yy, zz, xy, yz, xz])
    }

    /// Symmetric part of a (displacement) gradient `grad[i][j] = d u_i / d x_j`.
    pub fn sym_of(grad: &Matrix3<f64>) -> Self {
        SymTensor([
            grad[(0, 0)],
            grad[(1, 1)],
            grad[(2, 2)],
            0.5 * (grad[(0, 1)] + grad[(1, 0)]),
            0.5 * (grad[(1, 2)] + grad[(2, 1)]),
            0.5 * (grad[(0, 2)] + grad[(2, 0)]),
        ])
    }

    pub fn from_matrix(m: &Matrix3<f64>) -> Self {
        Self::sym_of(m)
    }

    pub fn to_matrix(&self) -> Matrix3<f64> {
        let [xx, yy, zz, xy, yz, xz] = self.0;
        Matrix3::new(xx, xy, xz, xy, yy, yz, xz, yz, zz)
    }

    pub fn trace(&self) -> f64 {
        self.0[0] + self.0[1] + self.0[2]
    }

    /// Eigenvalues in descending order.
    pub fn principal(&self) -> [f64; 3] {
        let eig = SymmetricEigen::new(self.to_matrix());
        let mut v = [eig.eigenvalues[0], eig.eigenvalues[1], eig.eigenvalues[2]];
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }

    /// Von Mises equivalent, treating the tensor as a stress.
    pub fn von_mises(&self) -> f64 {
        let [xx, yy, zz, xy, yz, xz] = self.0;
        (0.5 * ((xx - yy).powi(2) + (yy - zz).powi(2) + (zz - xx).powi(2))
            + 3.0 * (xy * xy + yz * yz + xz * xz))
            .sqrt()
    }

    /// Mean of the absolute values of the six components.
    pub fn mean_abs(&self) -> f64 {
        self.0.iter().map(|c| c.abs()).sum::<f64>() / 6.0
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, c| m.max(c.abs()))
    }

    pub fn scale(&self, s: f64) -> Self {
        SymTensor(self.0.map(|c| c * s))
    }

    pub fn add(&self, other: &SymTensor) -> Self {
        let mut out = self.0;
        for (o, b) in out.iter_mut().zip(other.0) {
            *o += b;
        }
        SymTensor(out)
    }
}

/// Eigenvalues of a symmetric strain tensor, largest first.
pub fn principal_strains(strain: &SymTensor) -> [f64; 3] {
    strain.principal()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_principal_values_are_sorted() {
        let p = principal_strains(&SymTensor::new(0.01, 0.0, -0.02, 0.0, 0.0, 0.0));
        assert_eq!(p.map(|v| (v * 1e12).round() / 1e12), [0.01, 0.0, -0.02]);
    }

    #[test]
    fn pure_shear_follows_mohr_circle() {
        // gamma_xy = 0.02 -> tensor component 0.01; circle radius 0.01 about 0.
        let p = principal_strains(&SymTensor::new(0.0, 0.0, 0.0, 0.01, 0.0, 0.0));
        assert!((p[0] - 0.01).abs() < 1e-15);
        assert!(p[1].abs() < 1e-15);
        assert!((p[2] + 0.01).abs() < 1e-15);
    }

    #[test]
    fn zero_tensor_has_zero_principals() {
        assert_eq!(principal_strains(&SymTensor::ZERO), [0.0; 3]);
    }

    #[test]
    fn von_mises_of_uniaxial_stress_is_its_magnitude() {
        let s = SymTensor::new(0.0, 0.0, -42.0, 0.0, 0.0, 0.0);
        assert!((s.von_mises() - 42.0).abs() < 1e-12);
    }
}
