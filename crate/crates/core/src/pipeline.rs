//! Stage-by-stage orchestration of the validation workflow.
//!
//! Every stage writes its artifacts into the output directory; the JSON
//! report is written last, so a failed run leaves no report behind.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::dvc::io::read_dvc;
use crate::dvc::{differentiate_strains, zero_strain_uncertainty, DvcGrid};
use crate::error::{HfeError, Result};
use crate::materials::io::{csv_err, write_materials};
use crate::materials::{
    map_materials, remap_materials, MappingOptions, MaterialField, RigidTransform,
};
use crate::mesh::io::read_mesh;
use crate::mesh::Tet10Mesh;
use crate::report::{
    BcSummary, CalibrationSummary, ComparisonSummary, MaterialSummary, MetricsOutcome,
    ModelComparison, PropagationSummary, ReactionSummary, ResidualSummary, SolveSummary,
    ValidationReport,
};
use crate::solver::export::{
    write_displacements, write_element_results, write_reactions, write_vtk,
};
use crate::solver::{
    reaction_force_axial, solve_elastic, solve_elastoplastic, Solution, SolverOptions,
};
use crate::tensor::SymTensor;
use crate::validate::{
    build_dirichlet_from_dvc, direction_reliability, exclusion_check, extract_bc_slices,
    fe_at_dvc_points, propagate_displacement_error, regression_metrics, subset_trabecular,
    BoundaryConditions, PairedSamples, AXES,
};
use crate::volume::io::read_volume;
use crate::volume::{fit_calibration, grey_to_density, DensityCalibration, VoxelVolume};

/// Axis along which the vertebra is loaded and reactions are summed.
pub const AXIAL: usize = 2;
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Calibrate,
    MapMaterials,
    BoundaryConditions,
    Solve,
    Compare,
    Exclusion,
    Propagation,
    Clinical,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Calibrate => "calibrate",
            Stage::MapMaterials => "map-materials",
            Stage::BoundaryConditions => "boundary-conditions",
            Stage::Solve => "solve",
            Stage::Compare => "compare",
            Stage::Exclusion => "exclusion",
            Stage::Propagation => "error-propagation",
            Stage::Clinical => "clinical",
        }
    }
}

fn at<T>(stage: Stage, artifact: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| HfeError::Stage {
        stage: stage.name(),
        artifact: artifact.display().to_string(),
        source: Box::new(e),
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct SampleRow {
    grey: f64,
    density: f64,
}

/// Phantom rod samples from a `grey,density` CSV.
pub fn read_calibration_samples(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.deserialize::<SampleRow>()
        .map(|row| {
            row.map(|s| (s.grey, s.density))
                .map_err(|e| csv_err(path, e))
        })
        .collect()
}

pub fn write_calibration_samples(path: &Path, samples: &[(f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for &(grey, density) in samples {
        w.serialize(SampleRow { grey, density })
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| HfeError::io(path, e))
}

/// Calibration from the configured file or fitted to the configured samples.
pub fn load_calibration(
    config: &PipelineConfig,
) -> Result<(DensityCalibration, CalibrationSummary)> {
    let (cal, residual, samples) =
        match (&config.paths.calibration, &config.paths.calibration_samples) {
            (Some(path), _) => (
                at(Stage::Calibrate, path, DensityCalibration::read(path))?,
                None,
                None,
            ),
            (None, Some(path)) => {
                let samples = at(Stage::Calibrate, path, read_calibration_samples(path))?;
                let fit = at(Stage::Calibrate, path, fit_calibration(&samples))?;
                (fit.calibration, Some(fit.residual), Some(samples.len()))
            }
            (None, None) => return Err(HfeError::Config("no calibration source".into())),
        };
    let summary = CalibrationSummary {
        slope: cal.slope,
        intercept: cal.intercept,
        correction_scale: cal.correction_scale,
        correction_offset: cal.correction_offset,
        residual,
        samples,
    };
    Ok((cal, summary))
}

/// Calibrates a grey image and maps it onto the mesh.
pub fn map_from_grey(
    grey: &VoxelVolume,
    calibration: &DensityCalibration,
    mesh: &Tet10Mesh,
    options: &MappingOptions,
) -> Result<MaterialField> {
    map_materials(&grey_to_density(grey, calibration)?, mesh, options)
}

/// Elastic or proportional elastoplastic solve, as configured.
pub fn solve_configured(
    config: &PipelineConfig,
    mesh: &Tet10Mesh,
    materials: &MaterialField,
    bcs: &BoundaryConditions,
) -> Result<Solution> {
    let opts: SolverOptions = config.solver.options();
    if config.materials.plasticity {
        solve_elastoplastic(
            mesh,
            materials,
            &bcs.dirichlet,
            config.materials.n_steps,
            &opts,
        )
    } else {
        solve_elastic(mesh, materials, &bcs.dirichlet, &opts)
    }
}

/// Nodal displacement regression of model `b` on model `a` plus the
/// relative difference of their axial reactions.
pub fn compare_models(
    a: &[[f64; 3]],
    reaction_a: f64,
    b: &[[f64; 3]],
    reaction_b: f64,
) -> Result<ModelComparison> {
    if a.len() != b.len() || a.is_empty() {
        return Err(HfeError::Contract(format!(
            "models have {} and {} nodes",
            a.len(),
            b.len()
        )));
    }
    let directions = (0..3)
        .map(|d| {
            let x: Vec<f64> = a.iter().map(|u| u[d]).collect();
            let y: Vec<f64> = b.iter().map(|u| u[d]).collect();
            (
                AXES[d],
                MetricsOutcome::from_result(regression_metrics(&x, &y)),
            )
        })
        .collect();
    let reaction_delta = if reaction_a == 0.0 {
        if reaction_b == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (reaction_b - reaction_a).abs() / reaction_a.abs()
    };
    Ok(ModelComparison {
        n_nodes: a.len(),
        directions,
        reaction_a,
        reaction_b,
        reaction_delta,
    })
}

/// Runs every stage and writes `report.json` into `out`.
pub fn run_pipeline(config: &PipelineConfig, out: &Path) -> Result<ValidationReport> {
    run_until(config, out, Stage::Clinical)
}

/// Runs the stages up to and including `last`, then writes the report.
pub fn run_until(config: &PipelineConfig, out: &Path, last: Stage) -> Result<ValidationReport> {
    std::fs::create_dir_all(out).map_err(|e| HfeError::io(out, e))?;
    let report_path = out.join(REPORT_FILE);
    if report_path.exists() {
        std::fs::remove_file(&report_path).map_err(|e| HfeError::io(&report_path, e))?;
    }
    at(Stage::Calibrate, Path::new("config"), config.validate())?;
    let mut run = Run {
        config,
        out,
        report: ValidationReport {
            seed: config.seed,
            ..ValidationReport::default()
        },
    };
    run.execute(last)?;
    run.report.write(&report_path)?;
    Ok(run.report)
}

struct Run<'a> {
    config: &'a PipelineConfig,
    out: &'a Path,
    report: ValidationReport,
}

impl Run<'_> {
    fn artifact(&mut self, name: &'static str, file: &str) -> PathBuf {
        self.report.artifacts.insert(name, file.to_string());
        self.out.join(file)
    }

    fn done(&mut self, stage: Stage, last: Stage) -> bool {
        self.report.stages.push(stage.name());
        stage >= last
    }

    fn execute(&mut self, last: Stage) -> Result<()> {
        let cfg = self.config;

        let (cal, summary) = load_calibration(cfg)?;
        let path = self.artifact("calibration", "calibration.txt");
        at(Stage::Calibrate, &path, cal.write(&path))?;
        self.report.calibration = Some(summary);
        if self.done(Stage::Calibrate, last) {
            return Ok(());
        }

        let s = Stage::MapMaterials;
        let mesh = at(s, &cfg.paths.mesh, read_mesh(&cfg.paths.mesh))?;
        let grey = at(s, &cfg.paths.volume, read_volume(&cfg.paths.volume))?;
        let options = at(s, Path::new("config"), cfg.materials.mapping_options())?;
        let materials = at(
            s,
            &cfg.paths.volume,
            map_from_grey(&grey, &cal, &mesh, &options),
        )?;
        drop(grey);
        let path = self.artifact("materials", "materials.csv");
        at(s, &path, write_materials(&mesh, &materials, &path))?;
        self.report.materials = Some(material_summary(&mesh, &materials));
        if self.done(s, last) {
            return Ok(());
        }

        let s = Stage::BoundaryConditions;
        let dvc_path = &cfg.paths.dvc;
        let dvc = at(s, dvc_path, read_dvc(dvc_path))?;
        let expected = cfg.validation.grid_spacing;
        if (dvc.spacing() - expected).abs() > 1e-6 * expected {
            return at(
                s,
                dvc_path,
                Err(HfeError::Config(format!(
                    "grid spacing {} differs from the configured {expected}",
                    dvc.spacing()
                ))),
            );
        }
        let slices = at(s, dvc_path, extract_bc_slices(&dvc, cfg.bc.min_points))?;
        let bcs = at(
            s,
            dvc_path,
            build_dirichlet_from_dvc(&mesh, &dvc, slices, &cfg.bc.options()),
        )?;
        let path = self.artifact("boundary_conditions", "bc.csv");
        at(s, &path, write_bc(&path, &mesh, &bcs))?;
        self.report.boundary_conditions = Some(BcSummary {
            slices,
            upper_plane: bcs.upper_plane,
            lower_plane: bcs.lower_plane,
            upper_nodes: bcs.upper_nodes.len(),
            lower_nodes: bcs.lower_nodes.len(),
            extrapolated_nodes: bcs.extrapolated,
            constrained_dofs: bcs.dirichlet.len(),
        });
        if self.done(s, last) {
            return Ok(());
        }

        let s = Stage::Solve;
        let solution = at(
            s,
            &cfg.paths.mesh,
            solve_configured(cfg, &mesh, &materials, &bcs),
        )?;
        self.write_solution(s, &mesh, &solution, "")?;
        self.report.solve = Some(SolveSummary {
            analysis: if cfg.materials.plasticity {
                "elastoplastic"
            } else {
                "elastic"
            },
            load_steps: if cfg.materials.plasticity {
                cfg.materials.n_steps
            } else {
                1
            },
            iterations: solution.iterations,
            residual: solution.residual,
            converged: solution.converged,
        });
        let reactions_path = self.out.join("reactions.csv");
        let lower = at(
            s,
            &reactions_path,
            reaction_force_axial(&solution, &mesh, &bcs.lower_nodes, AXIAL),
        )?;
        let upper = at(
            s,
            &reactions_path,
            reaction_force_axial(&solution, &mesh, &bcs.upper_nodes, AXIAL),
        )?;
        let scale = lower.abs().max(upper.abs());
        self.report.reactions = Some(ReactionSummary {
            lower_axial: lower,
            upper_axial: upper,
            imbalance: if scale > 0.0 {
                (lower + upper).abs() / scale
            } else {
                0.0
            },
        });
        if self.done(s, last) {
            return Ok(());
        }

        let s = Stage::Compare;
        let mut pairs = at(
            s,
            dvc_path,
            fe_at_dvc_points(
                &mesh,
                &solution.displacements,
                &dvc,
                cfg.validation.central_fraction,
            ),
        )?;
        if cfg.validation.trabecular_only {
            let mask_path = cfg.paths.mask.as_ref().expect("validated");
            let mask = at(s, mask_path, read_volume(mask_path))?;
            let keep = at(s, mask_path, subset_trabecular(&dvc, &mask))?;
            pairs.retain(|g| keep[g]);
            if pairs.is_empty() {
                return at(s, mask_path, Err(HfeError::EmptyComparison));
            }
        }
        let path = self.artifact("pairs", "pairs.csv");
        at(s, &path, write_pairs(&path, &pairs))?;
        self.report.comparison = Some(ComparisonSummary {
            n_points: pairs.len(),
            central_fraction: cfg.validation.central_fraction,
            trabecular_only: cfg.validation.trabecular_only,
            reliability: direction_reliability(&dvc, cfg.validation.voxel_size),
            directions: (0..3)
                .map(|d| (AXES[d], MetricsOutcome::from_result(pairs.metrics(d))))
                .collect(),
            pooled: MetricsOutcome::from_result(pairs.pooled_metrics()),
        });
        if self.done(s, last) {
            return Ok(());
        }

        let s = Stage::Exclusion;
        let strains = at(s, dvc_path, differentiate_strains(&dvc))?;
        let point_strains = strains.nodal_average();
        let uncertainty = match cfg.paths.zero_strain.as_slice() {
            [a, b] => {
                let ga = at(s, a, read_dvc(a))?;
                let gb = at(s, b, read_dvc(b))?;
                let u = at(s, b, zero_strain_uncertainty(&ga, &gb))?;
                if u.len() != dvc.num_points() {
                    return at(
                        s,
                        a,
                        Err(HfeError::GridMismatch(
                            "zero-strain grids do not match the loaded grid".into(),
                        )),
                    );
                }
                Some(u)
            }
            _ => None,
        };
        let exclusion = at(
            s,
            dvc_path,
            exclusion_check(
                &pairs,
                &point_strains,
                &dvc,
                uncertainty.as_deref(),
                &cfg.exclusion,
            ),
        )?;
        let path = self.artifact("point_strains", "point_strains.csv");
        at(
            s,
            &path,
            write_point_strains(&path, &dvc, &point_strains, uncertainty.as_deref()),
        )?;
        self.report.exclusion = Some(exclusion);
        if self.done(s, last) {
            return Ok(());
        }

        let s = Stage::Propagation;
        let all = at(
            s,
            dvc_path,
            fe_at_dvc_points(&mesh, &solution.displacements, &dvc, 1.0),
        )?;
        let mut errors = vec![None; dvc.num_points()];
        for (g, e) in all.grid_index.iter().zip(all.errors()) {
            errors[*g] = Some(e);
        }
        let prop = at(
            s,
            dvc_path,
            propagate_displacement_error(&dvc, &errors, uncertainty.as_deref()),
        )?;
        let path = self.artifact("error_points", "error_points.csv");
        at(
            s,
            &path,
            write_error_points(
                &path,
                &dvc,
                &errors,
                &prop.quick_estimate,
                prop.residual.as_deref(),
            ),
        )?;
        let path = self.artifact("error_cells", "error_cells.csv");
        at(
            s,
            &path,
            write_error_cells(&path, &prop.strains, &prop.cell_peak),
        )?;
        let quick: Vec<f64> = prop.quick_estimate.iter().flatten().copied().collect();
        let residual = prop.residual.as_ref().map(|r| {
            let v: Vec<f64> = r.iter().flatten().copied().collect();
            ResidualSummary {
                n_points: v.len(),
                mean: mean(&v),
                max: max(&v),
            }
        });
        self.report.error_propagation = Some(PropagationSummary {
            n_points: quick.len(),
            defined_cells: prop.strains.defined_count(),
            max_quick_estimate: max(&quick),
            mean_quick_estimate: mean(&quick),
            max_cell_strain: prop
                .strains
                .cells()
                .iter()
                .flatten()
                .map(SymTensor::max_abs)
                .fold(0.0, f64::max),
            max_cell_peak: max(&prop.cell_peak.iter().flatten().copied().collect::<Vec<_>>()),
            residual,
        });
        if self.done(s, last) {
            return Ok(());
        }

        let s = Stage::Clinical;
        if let Some(clinical) = &cfg.clinical {
            let transform = match &clinical.transform {
                Some(p) => at(s, p, RigidTransform::read(p))?,
                None => RigidTransform::identity(),
            };
            let volume = at(s, &clinical.volume, read_volume(&clinical.volume))?;
            let cal_b = cal.with_correction(clinical.correction_scale, clinical.correction_offset);
            let mats_b = at(
                s,
                &clinical.volume,
                remap_materials(&mesh, &transform, &volume, &cal_b, &options),
            )?;
            drop(volume);
            let path = self.artifact("clinical_materials", "clinical_materials.csv");
            at(s, &path, write_materials(&mesh, &mats_b, &path))?;
            let sol_b = at(
                s,
                &clinical.volume,
                solve_configured(cfg, &mesh, &mats_b, &bcs),
            )?;
            self.write_solution(s, &mesh, &sol_b, "clinical_")?;
            let path = self.out.join("clinical_reactions.csv");
            let lower_b = at(
                s,
                &path,
                reaction_force_axial(&sol_b, &mesh, &bcs.lower_nodes, AXIAL),
            )?;
            self.report.clinical = Some(at(
                s,
                &path,
                compare_models(
                    &solution.displacements,
                    lower,
                    &sol_b.displacements,
                    lower_b,
                ),
            )?);
        }
        self.done(s, last);
        Ok(())
    }

    fn write_solution(
        &mut self,
        s: Stage,
        mesh: &Tet10Mesh,
        solution: &Solution,
        prefix: &'static str,
    ) -> Result<()> {
        let files: [(&'static str, &'static str); 4] = if prefix.is_empty() {
            [
                ("displacements", "displacements.csv"),
                ("elements", "elements.csv"),
                ("reactions", "reactions.csv"),
                ("vtk", "solution.vtk"),
            ]
        } else {
            [
                ("clinical_displacements", "clinical_displacements.csv"),
                ("clinical_elements", "clinical_elements.csv"),
                ("clinical_reactions", "clinical_reactions.csv"),
                ("clinical_vtk", "clinical_solution.vtk"),
            ]
        };
        let p = self.artifact(files[0].0, files[0].1);
        at(s, &p, write_displacements(&p, mesh, solution))?;
        let p = self.artifact(files[1].0, files[1].1);
        at(s, &p, write_element_results(&p, mesh, solution))?;
        let p = self.artifact(files[2].0, files[2].1);
        at(s, &p, write_reactions(&p, mesh, solution))?;
        let p = self.artifact(files[3].0, files[3].1);
        at(s, &p, write_vtk(&p, mesh, solution))
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn max(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}

fn material_summary(mesh: &Tet10Mesh, field: &MaterialField) -> MaterialSummary {
    let els = field.elements();
    let volume: f64 = (0..mesh.num_elements())
        .map(|e| mesh.geometry(e).volume)
        .sum();
    let mass: f64 = els
        .iter()
        .enumerate()
        .map(|(e, m)| m.density * mesh.geometry(e).volume)
        .sum();
    MaterialSummary {
        nodes: mesh.num_nodes(),
        elements: mesh.num_elements(),
        mean_density: mass / volume,
        min_modulus: els.iter().map(|m| m.modulus).fold(f64::INFINITY, f64::min),
        max_modulus: els.iter().map(|m| m.modulus).fold(0.0, f64::max),
        plastic_elements: els.iter().filter(|m| m.plasticity.is_some()).count(),
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BcRow {
    pub node_id: u64,
    pub component: String,
    pub value_mm: f64,
    pub side: String,
}

/// `node_id,component,value_mm,side` for every prescribed DOF.
pub fn write_bc(path: &Path, mesh: &Tet10Mesh, bcs: &BoundaryConditions) -> Result<()> {
    let mut side = vec![""; mesh.num_nodes()];
    for &n in &bcs.upper_nodes {
        side[n] = "upper";
    }
    for &n in &bcs.lower_nodes {
        side[n] = "lower";
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for (n, c, v) in bcs.dirichlet.iter() {
        w.serialize(BcRow {
            node_id: mesh.node_ids()[n],
            component: AXES[c].to_string(),
            value_mm: v,
            side: side[n].to_string(),
        })
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| HfeError::io(path, e))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PairRow {
    pub grid_index: usize,
    pub x_mm: f64,
    pub y_mm: f64,
    pub z_mm: f64,
    pub dvc_x: f64,
    pub dvc_y: f64,
    pub dvc_z: f64,
    pub fe_x: f64,
    pub fe_y: f64,
    pub fe_z: f64,
}

pub fn write_pairs(path: &Path, pairs: &PairedSamples) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for i in 0..pairs.len() {
        let (p, d, f) = (pairs.points[i], pairs.dvc[i], pairs.fe[i]);
        w.serialize(PairRow {
            grid_index: pairs.grid_index[i],
            x_mm: p[0],
            y_mm: p[1],
            z_mm: p[2],
            dvc_x: d[0],
            dvc_y: d[1],
            dvc_z: d[2],
            fe_x: f[0],
            fe_y: f[1],
            fe_z: f[2],
        })
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| HfeError::io(path, e))
}

pub fn read_pairs(path: &Path) -> Result<PairedSamples> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut out = PairedSamples::default();
    for row in r.deserialize::<PairRow>() {
        let row = row.map_err(|e| csv_err(path, e))?;
        out.grid_index.push(row.grid_index);
        out.points.push([row.x_mm, row.y_mm, row.z_mm]);
        out.dvc.push([row.dvc_x, row.dvc_y, row.dvc_z]);
        out.fe.push([row.fe_x, row.fe_y, row.fe_z]);
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PointStrainRow {
    pub grid_index: usize,
    pub inside_bone: bool,
    pub exx: Option<f64>,
    pub eyy: Option<f64>,
    pub ezz: Option<f64>,
    pub exy: Option<f64>,
    pub eyz: Option<f64>,
    pub exz: Option<f64>,
    pub peak_principal: Option<f64>,
    pub uncertainty: Option<f64>,
}

fn write_point_strains(
    path: &Path,
    grid: &DvcGrid,
    strains: &[Option<SymTensor>],
    uncertainty: Option<&[Option<f64>]>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for (i, s) in strains.iter().enumerate() {
        let c = |m: usize| s.map(|t| t.0[m]);
        w.serialize(PointStrainRow {
            grid_index: i,
            inside_bone: grid.inside_bone()[i],
            exx: c(0),
            eyy: c(1),
            ezz: c(2),
            exy: c(3),
            eyz: c(4),
            exz: c(5),
            peak_principal: s.map(|t| {
                let p = t.principal();
                p[0].abs().max(p[2].abs())
            }),
            uncertainty: uncertainty.and_then(|u| u[i]),
        })
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| HfeError::io(path, e))
}

#[derive(Debug, Serialize, Deserialize)]
struct ErrorPointRow {
    grid_index: usize,
    error_x: Option<f64>,
    error_y: Option<f64>,
    error_z: Option<f64>,
    quick_estimate: Option<f64>,
    residual: Option<f64>,
}

fn write_error_points(
    path: &Path,
    grid: &DvcGrid,
    errors: &[Option<[f64; 3]>],
    quick: &[Option<f64>],
    residual: Option<&[Option<f64>]>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for i in 0..grid.num_points() {
        w.serialize(ErrorPointRow {
            grid_index: i,
            error_x: errors[i].map(|e| e[0]),
            error_y: errors[i].map(|e| e[1]),
            error_z: errors[i].map(|e| e[2]),
            quick_estimate: quick[i],
            residual: residual.and_then(|r| r[i]),
        })
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| HfeError::io(path, e))
}

#[derive(Debug, Serialize, Deserialize)]
struct ErrorCellRow {
    cell: usize,
    x_mm: f64,
    y_mm: f64,
    z_mm: f64,
    exx: Option<f64>,
    eyy: Option<f64>,
    ezz: Option<f64>,
    exy: Option<f64>,
    eyz: Option<f64>,
    exz: Option<f64>,
    peak: Option<f64>,
}

fn write_error_cells(
    path: &Path,
    strains: &crate::dvc::StrainGrid,
    peak: &[Option<f64>],
) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for (c, s) in strains.cells().iter().enumerate() {
        let p = strains.cell_center(c);
        let m = |i: usize| s.map(|t| t.0[i]);
        w.serialize(ErrorCellRow {
            cell: c,
            x_mm: p[0],
            y_mm: p[1],
            z_mm: p[2],
            exx: m(0),
            eyy: m(1),
            ezz: m(2),
            exy: m(3),
            eyz: m(4),
            exz: m(5),
            peak: peak[c],
        })
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| HfeError::io(path, e))
}

#[derive(Debug, Deserialize)]
struct DisplacementRow {
    node_id: u64,
    ux_mm: f64,
    uy_mm: f64,
    uz_mm: f64,
}

#[derive(Debug, Deserialize)]
struct ReactionRow {
    node_id: u64,
    component: String,
    reaction_n: f64,
}

/// Displacements and lower axial reaction of a solve output directory
/// (`displacements.csv`, `reactions.csv`, `bc.csv`).
pub fn load_solution_dir(dir: &Path) -> Result<(Vec<u64>, Vec<[f64; 3]>, f64)> {
    let path = dir.join("displacements.csv");
    let mut r = csv::Reader::from_path(&path).map_err(|e| csv_err(&path, e))?;
    let (mut ids, mut u) = (Vec::new(), Vec::new());
    for row in r.deserialize::<DisplacementRow>() {
        let row = row.map_err(|e| csv_err(&path, e))?;
        ids.push(row.node_id);
        u.push([row.ux_mm, row.uy_mm, row.uz_mm]);
    }
    let path = dir.join("bc.csv");
    let mut r = csv::Reader::from_path(&path).map_err(|e| csv_err(&path, e))?;
    let mut lower = BTreeMap::new();
    for row in r.deserialize::<BcRow>() {
        let row = row.map_err(|e| csv_err(&path, e))?;
        if row.side == "lower" {
            lower.insert(row.node_id, ());
        }
    }
    let path = dir.join("reactions.csv");
    let mut r = csv::Reader::from_path(&path).map_err(|e| csv_err(&path, e))?;
    let mut reaction = 0.0;
    for row in r.deserialize::<ReactionRow>() {
        let row = row.map_err(|e| csv_err(&path, e))?;
        if row.component == AXES[AXIAL] && lower.contains_key(&row.node_id) {
            reaction += row.reaction_n;
        }
    }
    Ok((ids, u, reaction))
}

/// [`compare_models`] on two solve output directories with matching node ids.
pub fn compare_model_dirs(a: &Path, b: &Path) -> Result<ModelComparison> {
    let (ids_a, ua, ra) = load_solution_dir(a)?;
    let (ids_b, ub, rb) = load_solution_dir(b)?;
    let index: HashMap<u64, usize> = ids_b.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    if ids_a.len() != ids_b.len() || ids_a.iter().any(|id| !index.contains_key(id)) {
        return Err(HfeError::Contract(
            "solutions were computed on different meshes".into(),
        ));
    }
    let ub: Vec<[f64; 3]> = ids_a.iter().map(|id| ub[index[id]]).collect();
    compare_models(&ua, ra, &ub, rb)
}
