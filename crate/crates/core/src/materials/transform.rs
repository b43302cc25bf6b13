use std::path::Path;

use nalgebra::{Matrix3, Vector3};

use crate::error::{HfeError, Result};

/// Proper rigid motion `x' = R x + t` (mm).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: [f64; 3]) -> Result<Self> {
        let ortho = (rotation.transpose() * rotation - Matrix3::identity())
            .abs()
            .max();
        let det = rotation.determinant();
        if ortho > 1e-9 || (det - 1.0).abs() > 1e-9 {
            return Err(HfeError::InvalidTransform(format!(
                "rotation is not proper orthonormal (|RᵀR−I| = {ortho:.2e}, det = {det:.9})"
            )));
        }
        Ok(RigidTransform {
            rotation,
            translation: Vector3::from(translation),
        })
    }

    /// Rotation by `angle` radians about a coordinate axis through the origin.
    pub fn about_axis(axis: usize, angle: f64, translation: [f64; 3]) -> Result<Self> {
        let (s, c) = angle.sin_cos();
        let r = match axis {
            0 => Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c),
            1 => Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c),
            2 => Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
            _ => return Err(HfeError::InvalidTransform(format!("axis {axis}"))),
        };
        Self::new(r, translation)
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> [f64; 3] {
        self.translation.into()
    }

    pub fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        (self.rotation * Vector3::from(p) + self.translation).into()
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Twelve numbers, row-major 3×4 `[R | t]`.
    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let nums: Vec<f64> = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(str::split_whitespace)
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| HfeError::parse(path, "non-numeric entry"))?;
        if nums.len() != 12 {
            return Err(HfeError::parse(
                path,
                format!("expected 12 numbers, found {}", nums.len()),
            ));
        }
        let r = Matrix3::new(
            nums[0], nums[1], nums[2], nums[4], nums[5], nums[6], nums[8], nums[9], nums[10],
        );
        Self::new(r, [nums[3], nums[7], nums[11]])
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HfeError::io(path, e))?;
        Self::parse(path, &text)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for i in 0..3 {
            out.push_str(&format!(
                "{} {} {} {}\n",
                self.rotation[(i, 0)],
                self.rotation[(i, 1)],
                self.rotation[(i, 2)],
                self.translation[i]
            ));
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render()).map_err(|e| HfeError::io(path, e))
    }
}
