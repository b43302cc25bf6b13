//! Synthetic loading experiments: a phantom compressed between platens,
//! observed by a DVC grid whose axial slices coincide with mesh node layers.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{generate_phantom, PhantomField, PhantomSpec};
use crate::config::{
    BcConfig, ClinicalConfig, MaterialsConfig, Paths, PipelineConfig, SolverConfig,
    ValidationConfig,
};
use crate::dvc::io::{write_dvc, DisplacementUnits};
use crate::dvc::{synthesize_dvc, DvcGrid, GridGeometry, DEFAULT_SPACING};
use crate::error::{HfeError, Result};
use crate::materials::{MaterialField, RigidTransform};
use crate::mesh::io::{read_mesh, write_mesh};
use crate::mesh::Tet10Mesh;
use crate::pipeline::{load_calibration, map_from_grey, write_calibration_samples};
use crate::solver::export::write_displacements;
use crate::solver::{solve_elastic, DirichletSet, Solution};
use crate::validate::{extract_bc_slices, BcSlices};
use crate::volume::io::{read_volume, write_volume};
use crate::volume::{DensityCalibration, VolumeKind, VoxelVolume};

pub const CONFIG_FILE: &str = "pipeline.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub phantom: PhantomSpec,
    /// μCT voxel size (mm).
    pub voxel_size: f64,
    /// Voxel size of the simulated clinical scan (mm).
    pub clinical_voxel_size: f64,
    pub grid_spacing: f64,
    /// Mesh cells per grid spacing.
    pub mesh_refinement: usize,
    /// Axial shortening imposed by the upper platen (mm).
    pub compression: f64,
    /// In-plane platen translation (mm).
    pub shift: [f64; 2],
    /// Platen rotation about y: the upper axial displacement gains `tilt * x`.
    pub tilt: f64,
    /// DVC noise per displacement component (mm).
    pub noise: f64,
    /// Noise of the two unloaded repeat scans (mm).
    pub zero_noise: f64,
    /// Grey-to-density law used to encode the images.
    pub calibration_slope: f64,
    pub calibration_intercept: f64,
    /// Densities of the calibration phantom rods.
    pub calibration_densities: Vec<f64>,
    pub seed: u64,
    pub materials: MaterialsConfig,
    pub bc: BcConfig,
    pub solver: SolverConfig,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            phantom: PhantomSpec::default(),
            voxel_size: 0.25,
            clinical_voxel_size: 0.5,
            grid_spacing: DEFAULT_SPACING,
            mesh_refinement: 1,
            compression: 0.1,
            shift: [0.02, -0.01],
            tilt: 0.001,
            noise: 0.005,
            zero_noise: 0.005,
            calibration_slope: 0.001,
            calibration_intercept: -0.05,
            calibration_densities: vec![0.0, 0.1, 0.2, 0.4, 0.8, 1.2],
            seed: 0,
            materials: MaterialsConfig::default(),
            bc: BcConfig::default(),
            solver: SolverConfig::default(),
        }
    }
}

impl ExperimentSpec {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HfeError::io(path, e))?;
        toml::from_str(&text).map_err(|e| HfeError::parse(path, e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(HfeError::Spec(m.into()));
        if !(self.grid_spacing > 0.0) || self.mesh_refinement == 0 {
            return bad("grid spacing and mesh refinement must be positive");
        }
        if !(self.clinical_voxel_size > 0.0) {
            return bad("clinical voxel size must be positive");
        }
        if !(self.noise >= 0.0 && self.zero_noise >= 0.0) {
            return bad("noise levels must be non-negative");
        }
        if !(self.compression.is_finite()
            && self.tilt.is_finite()
            && self.shift.iter().all(|s| s.is_finite()))
        {
            return bad("platen motion must be finite");
        }
        if !(self.calibration_slope > 0.0) || self.calibration_densities.len() < 2 {
            return bad("calibration needs a positive slope and at least two rods");
        }
        Ok(())
    }

    /// Mesh edge length: the grid spacing divided by the refinement.
    pub fn mesh_edge(&self) -> f64 {
        self.grid_spacing / self.mesh_refinement as f64
    }

    fn calibration(&self) -> DensityCalibration {
        DensityCalibration::new(self.calibration_slope, self.calibration_intercept)
    }

    /// Prescribed displacement of the upper platen at `(x, y)`.
    pub fn platen(&self, p: [f64; 3]) -> [f64; 3] {
        [
            self.shift[0],
            self.shift[1],
            -self.compression + self.tilt * p[0],
        ]
    }
}

/// Everything a generated experiment wrote, plus its ground truth.
#[derive(Debug, Clone)]
pub struct Experiment {
    /// Configuration with paths resolved against the output directory.
    pub config: PipelineConfig,
    pub config_path: PathBuf,
    pub mesh: Tet10Mesh,
    pub materials: MaterialField,
    pub slices: BcSlices,
    /// Platen boundary conditions of the forward solve.
    pub platens: DirichletSet,
    pub forward: Solution,
    pub dvc: DvcGrid,
    pub zero_strain: [DvcGrid; 2],
}

fn encode_grey(density: &VoxelVolume, cal: &DensityCalibration) -> Result<VoxelVolume> {
    VoxelVolume::new(
        density.dims(),
        density.spacing(),
        density.origin(),
        density
            .values()
            .iter()
            .map(|&r| cal.grey_for(r as f64) as f32)
            .collect(),
        VolumeKind::Grey,
    )
}

/// Generates a phantom, loads it, observes it with a synthetic DVC and
/// writes every input of the validation pipeline into `out`, together with
/// `pipeline.toml` referencing them.
///
/// Materials are mapped from the written files exactly as the pipeline maps
/// them, so a noiseless experiment is reproduced by the pipeline to solver
/// precision.
pub fn generate_experiment(spec: &ExperimentSpec, out: &Path) -> Result<Experiment> {
    spec.validate()?;
    std::fs::create_dir_all(out).map_err(|e| HfeError::io(out, e))?;
    let edge = spec.mesh_edge();
    let phantom = generate_phantom(&spec.phantom, spec.voxel_size, edge, spec.seed)?;
    let cal = spec.calibration();

    write_volume(&encode_grey(&phantom.density, &cal)?, &out.join("grey.hdr"))?;
    write_volume(&phantom.mask, &out.join("mask.hdr"))?;
    let samples: Vec<(f64, f64)> = spec
        .calibration_densities
        .iter()
        .map(|&r| (cal.grey_for(r), r))
        .collect();
    write_calibration_samples(&out.join("calibration_samples.csv"), &samples)?;
    write_mesh(&phantom.mesh, &out.join("mesh.txt"))?;
    let (_, top) = phantom.mesh.axial_extent();
    let field = PhantomField::new(&spec.phantom, spec.seed);
    let (clinical, _) = field.voxelize(spec.clinical_voxel_size, top)?;
    write_volume(&encode_grey(&clinical, &cal)?, &out.join("clinical.hdr"))?;
    RigidTransform::identity().write(&out.join("transform.txt"))?;
    drop(phantom);

    let file_config = PipelineConfig {
        seed: spec.seed,
        paths: Paths {
            volume: "grey.hdr".into(),
            calibration: None,
            calibration_samples: Some("calibration_samples.csv".into()),
            mask: Some("mask.hdr".into()),
            mesh: "mesh.txt".into(),
            dvc: "dvc.csv".into(),
            zero_strain: vec!["zero_a.csv".into(), "zero_b.csv".into()],
        },
        materials: spec.materials,
        bc: spec.bc,
        validation: ValidationConfig {
            grid_spacing: spec.grid_spacing,
            ..ValidationConfig::default()
        },
        exclusion: Default::default(),
        solver: spec.solver,
        clinical: Some(ClinicalConfig {
            volume: "clinical.hdr".into(),
            transform: Some("transform.txt".into()),
            correction_scale: 1.0,
            correction_offset: 0.0,
        }),
    };
    file_config.validate()?;
    let config_path = out.join(CONFIG_FILE);
    std::fs::write(&config_path, file_config.to_toml()?)
        .map_err(|e| HfeError::io(&config_path, e))?;
    let config = PipelineConfig::from_file(&config_path)?;

    // Everything downstream works from the files just written.
    let mesh = read_mesh(&config.paths.mesh)?;
    let (cal, _) = load_calibration(&config)?;
    let grey = read_volume(&config.paths.volume)?;
    let materials = map_from_grey(&grey, &cal, &mesh, &config.materials.mapping_options()?)?;
    drop(grey);

    let geometry = grid_geometry(&mesh, spec.grid_spacing, edge)?;
    let correlates = |p: [f64; 3]| spec.phantom.lesion_factor(p) >= 0.5;
    let inside: Vec<bool> = (0..geometry.num_points())
        .map(|i| mesh.locate_point(geometry.position_of(i)).is_some())
        .collect();
    let flags = DvcGrid::new(
        geometry,
        vec![[0.0; 3]; geometry.num_points()],
        (0..geometry.num_points())
            .map(|i| inside[i] && correlates(geometry.position_of(i)))
            .collect(),
        inside,
    )?;
    let slices = extract_bc_slices(&flags, config.bc.min_points)?;
    let lower = geometry.position(0, 0, slices.lower)[2];
    let upper = geometry.position(0, 0, slices.upper)[2];
    let tol = 1e-9 * geometry.spacing;
    let mut platens = DirichletSet::new();
    for (n, p) in mesh.nodes().iter().enumerate() {
        if p[2] >= upper - tol {
            platens.insert_vector(n, spec.platen(*p))?;
        } else if p[2] <= lower + tol {
            platens.insert_vector(n, [0.0; 3])?;
        }
    }
    let forward = solve_elastic(&mesh, &materials, &platens, &config.solver.options())?;
    write_displacements(&out.join("truth_displacements.csv"), &mesh, &forward)?;

    let observe = |u: &[[f64; 3]], sigma: f64, seed: u64| -> Result<DvcGrid> {
        let mut g = synthesize_dvc(&mesh, u, geometry, sigma, seed)?;
        g.mask_correlation(|p| !correlates(p));
        Ok(g)
    };
    let dvc = observe(
        &forward.displacements,
        spec.noise,
        spec.seed.wrapping_add(1),
    )?;
    let zeros = vec![[0.0; 3]; mesh.num_nodes()];
    let zero_strain = [
        observe(&zeros, spec.zero_noise, spec.seed.wrapping_add(2))?,
        observe(&zeros, spec.zero_noise, spec.seed.wrapping_add(3))?,
    ];
    write_dvc(&config.paths.dvc, &dvc, DisplacementUnits::Millimetres)?;
    for (g, path) in zero_strain.iter().zip(&config.paths.zero_strain) {
        write_dvc(path, g, DisplacementUnits::Millimetres)?;
    }

    Ok(Experiment {
        config,
        config_path,
        mesh,
        materials,
        slices,
        platens,
        forward,
        dvc,
        zero_strain,
    })
}

/// Grid offset in-plane from the mesh corner, with its first axial slice one
/// mesh layer above the base and its last at least one layer below the top.
fn grid_geometry(mesh: &Tet10Mesh, spacing: f64, edge: f64) -> Result<GridGeometry> {
    let (lo, hi) = mesh.bounding_box();
    let origin = [lo[0] + 0.3 * spacing, lo[1] + 0.3 * spacing, lo[2] + edge];
    let count = |d: usize, end: f64| ((end - origin[d]) / spacing + 1e-9).floor() as isize + 1;
    let dims = [count(0, hi[0]), count(1, hi[1]), count(2, hi[2] - edge)];
    if dims.iter().any(|&n| n < 2) {
        return Err(HfeError::Spec("body too small for the DVC grid".into()));
    }
    GridGeometry::new(origin, spacing, dims.map(|n| n as usize))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentSpec {
        ExperimentSpec {
            phantom: PhantomSpec {
                radii: [7.0, 6.0],
                height: 10.0,
                ..PhantomSpec::default()
            },
            voxel_size: 0.5,
            clinical_voxel_size: 1.0,
            ..ExperimentSpec::default()
        }
    }

    #[test]
    fn grid_slices_sit_on_mesh_layers() {
        let dir = tempfile::tempdir().unwrap();
        let exp = generate_experiment(&small(), dir.path()).unwrap();
        let g = exp.dvc.geometry();
        for k in 0..g.dims[2] {
            let z = g.position(0, 0, k)[2];
            let layers = z / exp.config.validation.grid_spacing;
            assert!((layers - layers.round()).abs() < 1e-9);
        }
        let (_, top) = exp.mesh.axial_extent();
        assert!(g.position(0, 0, g.dims[2] - 1)[2] < top);
        for name in [
            "grey.hdr",
            "mask.hdr",
            "mesh.txt",
            "dvc.csv",
            "zero_a.csv",
            "zero_b.csv",
            "clinical.hdr",
            CONFIG_FILE,
        ] {
            assert!(dir.path().join(name).exists(), "{name}");
        }
    }

    #[test]
    fn platens_load_the_body_in_compression() {
        let dir = tempfile::tempdir().unwrap();
        let exp = generate_experiment(&small(), dir.path()).unwrap();
        let u = &exp.forward.displacements;
        let (lo, hi) = exp.mesh.axial_extent();
        let mid = 0.5 * (lo + hi);
        let n = (0..exp.mesh.num_nodes())
            .min_by(|&a, &b| {
                let d =
                    |i: usize| (exp.mesh.nodes()[i][2] - mid).abs() + exp.mesh.nodes()[i][0].abs();
                d(a).total_cmp(&d(b))
            })
            .unwrap();
        assert!(u[n][2] < 0.0 && u[n][2] > -0.1 - 1e-9);
    }
}
