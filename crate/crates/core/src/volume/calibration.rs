use std::path::Path;

use crate::error::{HfeError, Result};
use crate::kv::{self, KeyValues};

use super::{VolumeKind, VoxelVolume};

/// Affine grey-to-density law with an optional affine correction applied on top.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityCalibration {
    /// g/cm³ per grey unit.
    pub slope: f64,
    /// g/cm³.
    pub intercept: f64,
    pub correction_scale: f64,
    pub correction_offset: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationFit {
    pub calibration: DensityCalibration,
    /// RMS of the fit residuals (g/cm³).
    pub residual: f64,
}

impl DensityCalibration {
    pub fn new(slope: f64, intercept: f64) -> Self {
        DensityCalibration {
            slope,
            intercept,
            correction_scale: 1.0,
            correction_offset: 0.0,
        }
    }

    pub fn with_correction(mut self, scale: f64, offset: f64) -> Self {
        self.correction_scale = scale;
        self.correction_offset = offset;
        self
    }

    /// Calibrated density before clamping.
    pub fn raw_density(&self, grey: f64) -> f64 {
        self.correction_scale * (self.slope * grey + self.intercept) + self.correction_offset
    }

    pub fn density(&self, grey: f64) -> f64 {
        self.raw_density(grey).max(0.0)
    }

    /// Grey value mapping to `density` (ignores clamping).
    pub fn grey_for(&self, density: f64) -> f64 {
        ((density - self.correction_offset) / self.correction_scale - self.intercept) / self.slope
    }

    pub fn read(path: &Path) -> Result<Self> {
        let kv = KeyValues::read(path)?;
        Ok(DensityCalibration {
            slope: kv.number("slope")?,
            intercept: kv.number("intercept")?,
            correction_scale: kv.number_or("correction_scale", 1.0)?,
            correction_offset: kv.number_or("correction_offset", 0.0)?,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = kv::render(&[
            ("slope", self.slope.to_string()),
            ("intercept", self.intercept.to_string()),
            ("correction_scale", self.correction_scale.to_string()),
            ("correction_offset", self.correction_offset.to_string()),
        ]);
        std::fs::write(path, text).map_err(|e| HfeError::io(path, e))
    }
}

/// Least-squares line through `(grey, density)` phantom samples.
pub fn fit_calibration(samples: &[(f64, f64)]) -> Result<CalibrationFit> {
    if samples.len() < 2 {
        return Err(HfeError::CalibrationDegenerate(format!(
            "{} sample(s); at least 2 needed",
            samples.len()
        )));
    }
    let n = samples.len() as f64;
    let mean_g = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let mean_d = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let (mut sgg, mut sgd) = (0.0, 0.0);
    for &(g, d) in samples {
        sgg += (g - mean_g) * (g - mean_g);
        sgd += (g - mean_g) * (d - mean_d);
    }
    if sgg == 0.0 {
        return Err(HfeError::CalibrationDegenerate(
            "all grey values identical".into(),
        ));
    }
    let slope = sgd / sgg;
    let intercept = mean_d - slope * mean_g;
    let ss: f64 = samples
        .iter()
        .map(|&(g, d)| (d - (slope * g + intercept)).powi(2))
        .sum();
    Ok(CalibrationFit {
        calibration: DensityCalibration::new(slope, intercept),
        residual: (ss / n).sqrt(),
    })
}

/// Converts a grey-level image to apparent density; negative densities clamp to 0.
pub fn grey_to_density(volume: &VoxelVolume, cal: &DensityCalibration) -> Result<VoxelVolume> {
    if volume.kind() != VolumeKind::Grey {
        return Err(HfeError::KindMismatch {
            expected: VolumeKind::Grey.as_str(),
            found: volume.kind().as_str(),
        });
    }
    let values = volume
        .values()
        .iter()
        .map(|&g| cal.density(g as f64) as f32)
        .collect();
    volume.with_values(values, VolumeKind::Density)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_fit_is_exact() {
        let fit = fit_calibration(&[(0.0, 0.0), (100.0, 1.0)]).unwrap();
        assert!((fit.calibration.slope - 0.01).abs() < 1e-15);
        assert!(fit.calibration.intercept.abs() < 1e-15);
        assert!(fit.residual < 1e-15);
    }

    #[test]
    fn collinear_three_point_fit_has_zero_residual() {
        let fit = fit_calibration(&[(0.0, 0.1), (50.0, 0.6), (100.0, 1.1)]).unwrap();
        assert!((fit.calibration.slope - 0.01).abs() < 1e-14);
        assert!((fit.calibration.intercept - 0.1).abs() < 1e-14);
        assert!(fit.residual < 1e-14);
    }

    #[test]
    fn degenerate_samples_are_rejected() {
        assert!(matches!(
            fit_calibration(&[(10.0, 0.2)]),
            Err(HfeError::CalibrationDegenerate(_))
        ));
        assert!(matches!(
            fit_calibration(&[(10.0, 0.2), (10.0, 0.4)]),
            Err(HfeError::CalibrationDegenerate(_))
        ));
    }

    #[test]
    fn fitted_law_maps_samples_back_within_residual() {
        let samples = [(-10.0, 0.0), (120.0, 0.21), (400.0, 0.78), (900.0, 1.61)];
        let fit = fit_calibration(&samples).unwrap();
        let vol = VoxelVolume::new(
            [4, 1, 1],
            [1.0; 3],
            [0.0; 3],
            samples.iter().map(|s| s.0 as f32).collect(),
            VolumeKind::Grey,
        )
        .unwrap();
        let dens = grey_to_density(&vol, &fit.calibration).unwrap();
        let rms = (samples
            .iter()
            .zip(dens.values())
            .map(|(s, &d)| (s.1 - d as f64).powi(2))
            .sum::<f64>()
            / 4.0)
            .sqrt();
        assert!(rms <= fit.residual + 1e-6);
    }

    #[test]
    fn conversion_applies_law_and_clamps() {
        let cal = DensityCalibration::new(0.01, 0.0);
        let vol = VoxelVolume::new(
            [3, 1, 1],
            [1.0; 3],
            [0.0; 3],
            vec![0.0, 200.0, -50.0],
            VolumeKind::Grey,
        )
        .unwrap();
        let d = grey_to_density(&vol, &cal).unwrap();
        assert_eq!(d.kind(), VolumeKind::Density);
        assert_eq!(d.values(), &[0.0, 2.0, 0.0]);
        assert!(matches!(
            grey_to_density(&d, &cal),
            Err(HfeError::KindMismatch { .. })
        ));
    }

    #[test]
    fn correction_is_applied_after_base_law() {
        let cal = DensityCalibration::new(0.01, 0.1).with_correction(0.9, 0.05);
        assert!((cal.density(100.0) - (0.9 * 1.1 + 0.05)).abs() < 1e-15);
        assert!((cal.grey_for(cal.density(100.0)) - 100.0).abs() < 1e-9);
    }
}
