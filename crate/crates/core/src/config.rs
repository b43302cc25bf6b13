//! Pipeline configuration: TOML sections with relative paths resolved
//! against the configuration file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dvc::DEFAULT_SPACING;
use crate::error::{HfeError, Result};
use crate::materials::{
    ElasticityLaw, MappingMode, MappingOptions, DEFAULT_E_MIN, DEFAULT_POISSON,
};
use crate::solver::SolverOptions;
use crate::validate::{BcOptions, ExclusionConfig, DEFAULT_CENTRAL_FRACTION, DEFAULT_VOXEL_SIZE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    pub paths: Paths,
    #[serde(default)]
    pub materials: MaterialsConfig,
    #[serde(default)]
    pub bc: BcConfig,
    #[serde(default)]
    pub validation: ValidationConfig,
    #[serde(default)]
    pub exclusion: ExclusionConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clinical: Option<ClinicalConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    /// Grey-level μCT volume header.
    pub volume: PathBuf,
    /// Fitted calibration (`key = value`); exclusive with `calibration_samples`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<PathBuf>,
    /// Phantom rod samples CSV with columns `grey,density`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration_samples: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<PathBuf>,
    pub mesh: PathBuf,
    /// Loaded-state DVC grid.
    pub dvc: PathBuf,
    /// Two unloaded repeat scans giving the zero-strain uncertainty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub zero_strain: Vec<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MappingModeConfig {
    DensityThenLaw,
    ModulusAverage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialsConfig {
    pub law_a: f64,
    pub law_b: f64,
    pub poisson: f64,
    pub e_min: f64,
    pub mode: MappingModeConfig,
    pub subdivisions: u32,
    pub plasticity: bool,
    pub n_steps: usize,
}

impl Default for MaterialsConfig {
    fn default() -> Self {
        let law = ElasticityLaw::default();
        MaterialsConfig {
            law_a: law.a,
            law_b: law.b,
            poisson: DEFAULT_POISSON,
            e_min: DEFAULT_E_MIN,
            mode: MappingModeConfig::DensityThenLaw,
            subdivisions: 0,
            plasticity: false,
            n_steps: 10,
        }
    }
}

impl MaterialsConfig {
    pub fn mapping_options(&self) -> Result<MappingOptions> {
        Ok(MappingOptions {
            law: ElasticityLaw::new(self.law_a, self.law_b)?,
            poisson: self.poisson,
            e_min: self.e_min,
            mode: match self.mode {
                MappingModeConfig::DensityThenLaw => MappingMode::DensityThenLaw,
                MappingModeConfig::ModulusAverage => MappingMode::ModulusAverage,
            },
            subdivisions: self.subdivisions,
            plasticity: self.plasticity,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BcConfig {
    pub min_points: usize,
    pub rim_extrapolation: bool,
}

impl Default for BcConfig {
    fn default() -> Self {
        let d = BcOptions::default();
        BcConfig {
            min_points: d.min_points,
            rim_extrapolation: d.rim_extrapolation,
        }
    }
}

impl BcConfig {
    pub fn options(&self) -> BcOptions {
        BcOptions {
            min_points: self.min_points,
            rim_extrapolation: self.rim_extrapolation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationConfig {
    /// Expected DVC grid spacing (mm); the loaded grid must match it.
    pub grid_spacing: f64,
    pub central_fraction: f64,
    /// DVC image voxel size (mm) for the direction reliability check.
    pub voxel_size: f64,
    /// Restrict the comparison to grid points inside the mask.
    pub trabecular_only: bool,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            grid_spacing: DEFAULT_SPACING,
            central_fraction: DEFAULT_CENTRAL_FRACTION,
            voxel_size: DEFAULT_VOXEL_SIZE,
            trabecular_only: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub newton_tolerance: f64,
    pub max_newton_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SolverOptions::default();
        SolverConfig {
            tolerance: d.tolerance,
            max_iterations: d.max_iterations,
            newton_tolerance: d.newton_tolerance,
            max_newton_iterations: d.max_newton_iterations,
        }
    }
}

impl SolverConfig {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            newton_tolerance: self.newton_tolerance,
            max_newton_iterations: self.max_newton_iterations,
        }
    }
}

/// Second material map from a clinical scan registered to the mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClinicalConfig {
    /// Grey-level clinical volume header.
    pub volume: PathBuf,
    /// Mesh-to-clinical rigid transform; identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<PathBuf>,
    #[serde(default = "one")]
    pub correction_scale: f64,
    #[serde(default)]
    pub correction_offset: f64,
}

fn one() -> f64 {
    1.0
}

impl PipelineConfig {
    /// Reads, resolves and validates a configuration file.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HfeError::io(path, e))?;
        let mut cfg: PipelineConfig =
            toml::from_str(&text).map_err(|e| HfeError::parse(path, e.to_string()))?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| HfeError::Config(e.to_string()))
    }

    /// Makes every relative path relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let paths = &mut self.paths;
        fix(&mut paths.volume);
        fix(&mut paths.mesh);
        fix(&mut paths.dvc);
        paths.calibration.iter_mut().for_each(fix);
        paths.calibration_samples.iter_mut().for_each(fix);
        paths.mask.iter_mut().for_each(fix);
        paths.zero_strain.iter_mut().for_each(fix);
        if let Some(c) = &mut self.clinical {
            fix(&mut c.volume);
            c.transform.iter_mut().for_each(fix);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HfeError::Config(msg));
        match (&self.paths.calibration, &self.paths.calibration_samples) {
            (Some(_), Some(_)) => {
                return bad("give either `calibration` or `calibration_samples`, not both".into())
            }
            (None, None) => {
                return bad("one of `calibration` or `calibration_samples` is required".into())
            }
            _ => {}
        }
        if !matches!(self.paths.zero_strain.len(), 0 | 2) {
            return bad(format!(
                "`zero_strain` needs 0 or 2 grids, got {}",
                self.paths.zero_strain.len()
            ));
        }
        let m = &self.materials;
        self.materials.mapping_options()?;
        if !(m.poisson > -1.0 && m.poisson < 0.5) {
            return bad(format!("poisson ratio {} outside (-1, 0.5)", m.poisson));
        }
        if !(m.e_min > 0.0) {
            return bad(format!("e_min {} must be positive", m.e_min));
        }
        if m.n_steps == 0 {
            return bad("n_steps must be at least 1".into());
        }
        let v = &self.validation;
        if !(v.grid_spacing > 0.0 && v.voxel_size > 0.0) {
            return bad("grid spacing and voxel size must be positive".into());
        }
        if !(v.central_fraction > 0.0 && v.central_fraction <= 1.0) {
            return bad(format!(
                "central fraction {} outside (0, 1]",
                v.central_fraction
            ));
        }
        if v.trabecular_only && self.paths.mask.is_none() {
            return bad("`trabecular_only` requires a mask".into());
        }
        if self.bc.min_points == 0 {
            return bad("bc.min_points must be at least 1".into());
        }
        let s = &self.solver;
        if !(s.tolerance > 0.0
            && s.tolerance < 1.0
            && s.newton_tolerance > 0.0
            && s.newton_tolerance < 1.0)
        {
            return bad("solver tolerances must lie in (0, 1)".into());
        }
        if s.max_iterations == 0 || s.max_newton_iterations == 0 {
            return bad("solver iteration limits must be positive".into());
        }
        if let Some(c) = &self.clinical {
            if !(c.correction_scale > 0.0) {
                return bad("clinical correction scale must be positive".into());
            }
        }
        self.exclusion.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        seed = 3
        [paths]
        volume = "grey.hdr"
        calibration = "cal.txt"
        mesh = "mesh.txt"
        dvc = "dvc.csv"
    "#;

    fn parse(text: &str) -> Result<PipelineConfig> {
        let mut cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| HfeError::Config(e.to_string()))?;
        cfg.resolve_paths(Path::new("/data"));
        cfg.validate()?;
        Ok(cfg)
    }

    #[test]
    fn defaults_fill_missing_sections() {
        let cfg = parse(MINIMAL).unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.paths.mesh, PathBuf::from("/data/mesh.txt"));
        assert_eq!(cfg.validation.grid_spacing, 1.95);
        assert_eq!(cfg.validation.central_fraction, 0.75);
        assert_eq!(cfg.exclusion, ExclusionConfig::default());
        assert_eq!(cfg.materials.law_a, 4730.0);
        assert!(cfg.clinical.is_none());
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = parse(MINIMAL).unwrap();
        let back: PipelineConfig = toml::from_str(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn out_of_range_values_are_rejected() {
        let cases = [
            "[validation]\ncentral_fraction = 1.5",
            "[exclusion]\nstrain_limit = -0.01",
            "[materials]\npoisson = 0.5",
            "[materials]\nn_steps = 0",
            "[solver]\ntolerance = 0.0",
        ];
        for extra in cases {
            let text = format!("{MINIMAL}\n{extra}");
            assert!(
                matches!(
                    parse(&text),
                    Err(HfeError::Config(_)) | Err(HfeError::InvalidMaterial(_))
                ),
                "{extra}"
            );
        }
        assert!(parse(&MINIMAL.replace("calibration = \"cal.txt\"", "")).is_err());
        assert!(parse(&format!("{MINIMAL}\n[validation]\nunknown = 1")).is_err());
    }
}
