//! Synthetic vertebra-like phantoms: an elliptic cylinder with a dense
//! cortical shell, a textured trabecular core and an optional spherical
//! lesion, voxelized and meshed with staircase Tet10 elements.

mod experiment;

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HfeError, Result};
use crate::mesh::build::from_hex_cells;
use crate::mesh::Tet10Mesh;
use crate::volume::{VolumeKind, VoxelVolume};

pub use experiment::{generate_experiment, Experiment, ExperimentSpec, CONFIG_FILE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lesion {
    pub center: [f64; 3],
    pub radius: f64,
    /// Density multiplier inside the sphere, 0 for a lytic void.
    pub multiplier: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomSpec {
    /// Semi-axes of the cross-section along x and y (mm).
    pub radii: [f64; 2],
    /// Axial (z) height (mm).
    pub height: f64,
    pub shell_thickness: f64,
    /// Mean trabecular apparent density (g/cm³).
    pub trabecular_density: f64,
    pub cortical_density: f64,
    /// Relative amplitude of the trabecular texture, in `[0, 1)`.
    pub texture_amplitude: f64,
    pub lesion: Option<Lesion>,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        PhantomSpec {
            radii: [18.0, 14.0],
            height: 24.0,
            shell_thickness: 1.0,
            trabecular_density: 0.25,
            cortical_density: 0.9,
            texture_amplitude: 0.3,
            lesion: None,
        }
    }
}

/// Density, mask and mesh of a generated phantom.
#[derive(Debug, Clone)]
pub struct Phantom {
    pub density: VoxelVolume,
    pub mask: VoxelVolume,
    pub mesh: Tet10Mesh,
}

/// Number of plane waves in the trabecular texture.
const TEXTURE_WAVES: usize = 8;

struct Texture {
    waves: Vec<([f64; 3], f64)>,
}

impl Texture {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let waves = (0..TEXTURE_WAVES)
            .map(|_| {
                // Wavelengths between 1.5 and 4 mm in random directions.
                let wavelength = rng.random_range(1.5..4.0);
                let z: f64 = rng.random_range(-1.0..1.0);
                let phi = rng.random_range(0.0..2.0 * PI);
                let r = (1.0 - z * z).sqrt();
                let k = 2.0 * PI / wavelength;
                (
                    [k * r * phi.cos(), k * r * phi.sin(), k * z],
                    rng.random_range(0.0..2.0 * PI),
                )
            })
            .collect();
        Texture { waves }
    }

    /// Value in `[-1, 1]`.
    fn at(&self, p: [f64; 3]) -> f64 {
        let s: f64 = self
            .waves
            .iter()
            .map(|(k, phase)| (k[0] * p[0] + k[1] * p[1] + k[2] * p[2] + phase).cos())
            .sum();
        s / self.waves.len() as f64
    }
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        let [a, b] = self.radii;
        if !(a > 0.0 && b > 0.0 && self.height > 0.0) {
            return Err(HfeError::Spec("radii and height must be positive".into()));
        }
        if !(self.shell_thickness > 0.0 && 2.0 * self.shell_thickness < a.min(b).min(self.height)) {
            return Err(HfeError::Spec(
                "shell thickness must be positive and thinner than the body".into(),
            ));
        }
        if !(self.trabecular_density >= 0.0 && self.cortical_density >= 0.0) {
            return Err(HfeError::Spec("densities must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.texture_amplitude) {
            return Err(HfeError::Spec(
                "texture amplitude must lie in [0, 1)".into(),
            ));
        }
        if let Some(l) = &self.lesion {
            if !self.contains(l.center) {
                return Err(HfeError::Spec("lesion center lies outside the body".into()));
            }
            if !(l.radius > 0.0) || !(0.0..=1.0).contains(&l.multiplier) {
                return Err(HfeError::Spec(
                    "lesion radius must be positive and multiplier in [0, 1]".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        let [a, b] = self.radii;
        (p[0] / a).powi(2) + (p[1] / b).powi(2) <= 1.0 && p[2] >= 0.0 && p[2] <= self.height
    }

    /// Approximate depth below the outer surface (mm), negative outside.
    fn depth(&self, p: [f64; 3]) -> f64 {
        let [a, b] = self.radii;
        let r = ((p[0] / a).powi(2) + (p[1] / b).powi(2)).sqrt();
        let radial = (1.0 - r) * a.min(b);
        radial.min(p[2]).min(self.height - p[2])
    }

    fn lesion_factor(&self, p: [f64; 3]) -> f64 {
        match &self.lesion {
            Some(l) if crate::mesh::dist(&p, &l.center) <= l.radius => l.multiplier,
            _ => 1.0,
        }
    }
}

/// Analytic density and mask of a phantom.
pub(crate) struct PhantomField<'a> {
    spec: &'a PhantomSpec,
    texture: Texture,
}

impl<'a> PhantomField<'a> {
    pub(crate) fn new(spec: &'a PhantomSpec, seed: u64) -> Self {
        PhantomField {
            spec,
            texture: Texture::new(seed),
        }
    }

    /// Density and mask flag at `p`.
    pub(crate) fn sample(&self, p: [f64; 3]) -> (f64, bool) {
        let spec = self.spec;
        if !spec.contains(p) {
            return (0.0, false);
        }
        let lesion = spec.lesion_factor(p);
        if spec.depth(p) < spec.shell_thickness {
            return (spec.cortical_density * lesion, lesion >= 0.5);
        }
        let t = self.texture.at(p);
        let rho = spec.trabecular_density * (1.0 + spec.texture_amplitude * t) * lesion;
        (rho, t > -0.1 && lesion >= 0.5)
    }

    /// Density and mask volumes covering the body and a mesh reaching `top`.
    pub(crate) fn voxelize(&self, voxel_size: f64, top: f64) -> Result<(VoxelVolume, VoxelVolume)> {
        let [a, b] = self.spec.radii;
        let margin = 2.0 * voxel_size;
        let lo = [-a - margin, -b - margin, -margin];
        let hi = [a + margin, b + margin, top.max(self.spec.height) + margin];
        let dims = [0, 1, 2].map(|d| ((hi[d] - lo[d]) / voxel_size).ceil() as usize + 1);
        let spacing = [voxel_size; 3];
        let density = VoxelVolume::from_fn(dims, spacing, lo, VolumeKind::Density, |p| {
            self.sample(p).0 as f32
        })?;
        let mask = VoxelVolume::from_fn(dims, spacing, lo, VolumeKind::Mask, |p| {
            f32::from(u8::from(self.sample(p).1))
        })?;
        Ok((density, mask))
    }
}

/// Voxelizes and meshes the phantom.
///
/// Mesh cells are cubes of edge `mesh_edge` anchored at `z = 0`, kept when
/// their center lies inside the body, so node layers sit at multiples of
/// `mesh_edge` along the axis.
pub fn generate_phantom(
    spec: &PhantomSpec,
    voxel_size: f64,
    mesh_edge: f64,
    seed: u64,
) -> Result<Phantom> {
    spec.validate()?;
    if !(voxel_size > 0.0 && voxel_size <= spec.shell_thickness) {
        return Err(HfeError::Spec(format!(
            "voxel size {voxel_size} must be positive and at most the shell thickness {}",
            spec.shell_thickness
        )));
    }
    if !(mesh_edge >= 2.0 * voxel_size) {
        return Err(HfeError::Spec(format!(
            "mesh edge {mesh_edge} must be at least twice the voxel size {voxel_size}"
        )));
    }
    let [a, b] = spec.radii;
    let n = [
        (a / mesh_edge).ceil() as usize,
        (b / mesh_edge).ceil() as usize,
        (spec.height / mesh_edge).round().max(1.0) as usize,
    ];
    let origin = [-(n[0] as f64) * mesh_edge, -(n[1] as f64) * mesh_edge, 0.0];
    let mut cells = Vec::new();
    for k in 0..n[2] {
        for j in 0..2 * n[1] {
            for i in 0..2 * n[0] {
                let c = [i, j, k].map(|v| v as f64 + 0.5);
                let p = [0, 1, 2].map(|d| origin[d] + c[d] * mesh_edge);
                let [x, y, _] = p;
                if (x / a).powi(2) + (y / b).powi(2) <= 1.0 {
                    cells.push([i, j, k]);
                }
            }
        }
    }
    if cells.is_empty() {
        return Err(HfeError::Spec("mesh edge too coarse for the body".into()));
    }
    let mesh = from_hex_cells(origin, [mesh_edge; 3], &cells)?;

    let field = PhantomField::new(spec, seed);
    let (density, mask) = field.voxelize(voxel_size, n[2] as f64 * mesh_edge)?;
    Ok(Phantom {
        density,
        mask,
        mesh,
    })
}
