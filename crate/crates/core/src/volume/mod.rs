//! Voxel images, phantom-based density calibration and density sampling.
//!
//! Voxel `(i, j, k)` has its center at `origin + (i, j, k) * spacing` (mm).
//! Values are held as `f32` whatever the on-disk type.

mod calibration;
pub mod io;

pub use calibration::{fit_calibration, grey_to_density, CalibrationFit, DensityCalibration};

use crate::error::{HfeError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VolumeKind {
    Grey,
    Density,
    Mask,
}

impl VolumeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VolumeKind::Grey => "grey",
            VolumeKind::Density => "density",
            VolumeKind::Mask => "mask",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "grey" | "gray" => Some(VolumeKind::Grey),
            "density" => Some(VolumeKind::Density),
            "mask" => Some(VolumeKind::Mask),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoxelVolume {
    dims: [usize; 3],
    spacing: [f64; 3],
    origin: [f64; 3],
    values: Vec<f32>,
    kind: VolumeKind,
}

impl VoxelVolume {
    pub fn new(
        dims: [usize; 3],
        spacing: [f64; 3],
        origin: [f64; 3],
        values: Vec<f32>,
        kind: VolumeKind,
    ) -> Result<Self> {
        if dims.contains(&0) {
            return Err(HfeError::InvalidVolume(format!(
                "dims {dims:?} must be >= 1"
            )));
        }
        if spacing.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(HfeError::InvalidVolume(format!(
                "spacing {spacing:?} must be positive"
            )));
        }
        let n = dims[0] * dims[1] * dims[2];
        if values.len() != n {
            return Err(HfeError::InvalidVolume(format!(
                "{} values for dims {dims:?} ({n} expected)",
                values.len()
            )));
        }
        if kind == VolumeKind::Mask && values.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(HfeError::InvalidVolume(
                "mask volumes may only contain 0 and 1".into(),
            ));
        }
        Ok(VoxelVolume {
            dims,
            spacing,
            origin,
            values,
            kind,
        })
    }

    /// Fills a volume by evaluating `f` at every voxel center.
    pub fn from_fn(
        dims: [usize; 3],
        spacing: [f64; 3],
        origin: [f64; 3],
        kind: VolumeKind,
        mut f: impl FnMut([f64; 3]) -> f32,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(dims.iter().product());
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    values.push(f([
                        origin[0] + i as f64 * spacing[0],
                        origin[1] + j as f64 * spacing[1],
                        origin[2] + k as f64 * spacing[2],
                    ]));
                }
            }
        }
        Self::new(dims, spacing, origin, values, kind)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }
    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }
    pub fn origin(&self) -> [f64; 3] {
        self.origin
    }
    pub fn kind(&self) -> VolumeKind {
        self.kind
    }
    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f32 {
        self.values[self.index(i, j, k)]
    }

    pub fn center(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [
            self.origin[0] + i as f64 * self.spacing[0],
            self.origin[1] + j as f64 * self.spacing[1],
            self.origin[2] + k as f64 * self.spacing[2],
        ]
    }

    /// Axis-aligned box covered by the voxels themselves (centers ± half a voxel).
    pub fn extent(&self) -> ([f64; 3], [f64; 3]) {
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for a in 0..3 {
            lo[a] = self.origin[a] - 0.5 * self.spacing[a];
            hi[a] = self.origin[a] + (self.dims[a] as f64 - 0.5) * self.spacing[a];
        }
        (lo, hi)
    }

    pub(crate) fn with_values(&self, values: Vec<f32>, kind: VolumeKind) -> Result<Self> {
        Self::new(self.dims, self.spacing, self.origin, values, kind)
    }

    fn continuous_index(&self, p: [f64; 3]) -> [f64; 3] {
        [0, 1, 2].map(|a| (p[a] - self.origin[a]) / self.spacing[a])
    }

    /// Trilinear interpolation between the eight surrounding voxel centers.
    ///
    /// The domain is the box spanned by the voxel centers; axes with a single
    /// voxel accept the half-voxel slab around it.
    pub fn sample_trilinear(&self, p: [f64; 3]) -> Result<f64> {
        const TOL: f64 = 1e-9;
        let t = self.continuous_index(p);
        for a in 0..3 {
            let (lo, hi) = if self.dims[a] == 1 {
                (-0.5, 0.5)
            } else {
                (0.0, (self.dims[a] - 1) as f64)
            };
            if !(t[a] >= lo - TOL && t[a] <= hi + TOL) {
                return Err(HfeError::OutOfBounds {
                    x: p[0],
                    y: p[1],
                    z: p[2],
                });
            }
        }
        Ok(self.interpolate_clamped(t))
    }

    /// Sampling used for integration: the voxel box (including the outer
    /// half-voxel) is covered, with edge voxels held constant out to their
    /// faces; anything outside yields `None`.
    pub fn sample_in_extent(&self, p: [f64; 3]) -> Option<f64> {
        let t = self.continuous_index(p);
        for a in 0..3 {
            if !(t[a] >= -0.5 && t[a] <= self.dims[a] as f64 - 0.5) {
                return None;
            }
        }
        Some(self.interpolate_clamped(t))
    }

    /// Value of the voxel whose center is nearest to `p`, if inside the image.
    pub fn sample_nearest(&self, p: [f64; 3]) -> Option<f32> {
        let t = self.continuous_index(p);
        let mut idx = [0usize; 3];
        for a in 0..3 {
            let r = t[a].round();
            if !(r >= 0.0 && r <= (self.dims[a] - 1) as f64) {
                return None;
            }
            idx[a] = r as usize;
        }
        Some(self.get(idx[0], idx[1], idx[2]))
    }

    fn interpolate_clamped(&self, t: [f64; 3]) -> f64 {
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        let mut step = [0usize; 3];
        for a in 0..3 {
            let n = self.dims[a];
            if n == 1 {
                continue;
            }
            let tc = t[a].clamp(0.0, (n - 1) as f64);
            let i0 = (tc.floor() as usize).min(n - 2);
            base[a] = i0;
            frac[a] = tc - i0 as f64;
            step[a] = 1;
        }
        let mut acc = 0.0;
        for c in 0..8 {
            let o = [c & 1, (c >> 1) & 1, (c >> 2) & 1];
            let mut w = 1.0;
            for a in 0..3 {
                w *= if o[a] == 1 { frac[a] } else { 1.0 - frac[a] };
            }
            if w == 0.0 {
                continue;
            }
            let v = self.get(
                base[0] + o[0] * step[0],
                base[1] + o[1] * step[1],
                base[2] + o[2] * step[2],
            );
            acc += w * v as f64;
        }
        acc
    }
}
