//! Element-wise material mapping from calibrated density images.

pub mod io;
mod quadrature;
mod transform;

use rayon::prelude::*;

use crate::error::{HfeError, Result};
use crate::mesh::{NaturalCoords, Tet10Mesh};
use crate::volume::{grey_to_density, DensityCalibration, VolumeKind, VoxelVolume};

pub use quadrature::{gauss4, keast11, ElementQuadrature};
pub use transform::RigidTransform;

/// Modulus floor (MPa) keeping void elements from producing a singular system.
pub const DEFAULT_E_MIN: f64 = 0.01;
pub const DEFAULT_POISSON: f64 = 0.3;

/// Yield stress law coefficient (MPa) and exponent on apparent density.
pub const YIELD_COEFFICIENT: f64 = 21.70;
pub const YIELD_EXPONENT: f64 = 1.52;
/// Post-yield uniaxial tangent as a fraction of the elastic modulus.
pub const TANGENT_FRACTION: f64 = 0.05;

/// Power law `E = a ρ^b` (MPa, ρ in g/cm³).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticityLaw {
    pub a: f64,
    pub b: f64,
}

impl Default for ElasticityLaw {
    /// Vertebral trabecular bone coefficients.
    fn default() -> Self {
        ElasticityLaw { a: 4730.0, b: 1.56 }
    }
}

impl ElasticityLaw {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) {
            return Err(HfeError::InvalidMaterial(format!(
                "elasticity law needs a > 0 and b > 0 (a = {a}, b = {b})"
            )));
        }
        Ok(ElasticityLaw { a, b })
    }
}

pub fn density_to_modulus(density: f64, law: &ElasticityLaw, e_min: f64) -> f64 {
    (law.a * density.max(0.0).powf(law.b)).max(e_min)
}

pub fn yield_stress(density: f64) -> Result<f64> {
    if !(density > 0.0) {
        return Err(HfeError::NoYield(density));
    }
    Ok(YIELD_COEFFICIENT * density.powf(YIELD_EXPONENT))
}

/// Uniaxial post-yield tangent modulus `E_p = 0.05 E`.
pub fn hardening_modulus(modulus: f64) -> Result<f64> {
    if !(modulus > 0.0) {
        return Err(HfeError::InvalidMaterial(format!(
            "modulus {modulus} must be positive"
        )));
    }
    Ok(TANGENT_FRACTION * modulus)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plasticity {
    /// MPa.
    pub yield_stress: f64,
    /// Uniaxial post-yield tangent (MPa).
    pub tangent_modulus: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementMaterial {
    pub density: f64,
    pub modulus: f64,
    pub poisson: f64,
    pub plasticity: Option<Plasticity>,
}

impl ElementMaterial {
    pub fn elastic(modulus: f64, poisson: f64) -> Self {
        ElementMaterial {
            density: 0.0,
            modulus,
            poisson,
            plasticity: None,
        }
    }

    /// Lamé parameters `(λ, μ)`.
    pub fn lame(&self) -> (f64, f64) {
        let (e, nu) = (self.modulus, self.poisson);
        (
            e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)),
            e / (2.0 * (1.0 + nu)),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaterialField {
    elements: Vec<ElementMaterial>,
}

impl MaterialField {
    pub fn new(elements: Vec<ElementMaterial>) -> Result<Self> {
        for (e, m) in elements.iter().enumerate() {
            if !(m.density >= 0.0) {
                return Err(HfeError::InvalidMaterial(format!(
                    "element #{e}: density {}",
                    m.density
                )));
            }
            if !(m.modulus > 0.0) || !m.modulus.is_finite() {
                return Err(HfeError::InvalidMaterial(format!(
                    "element #{e}: modulus {}",
                    m.modulus
                )));
            }
            if !(m.poisson > 0.0 && m.poisson < 0.5) {
                return Err(HfeError::InvalidMaterial(format!(
                    "element #{e}: poisson {}",
                    m.poisson
                )));
            }
            if let Some(p) = m.plasticity {
                if !(p.yield_stress > 0.0)
                    || !(p.tangent_modulus >= 0.0 && p.tangent_modulus < m.modulus)
                {
                    return Err(HfeError::InvalidMaterial(format!(
                        "element #{e}: plasticity {p:?} incompatible with E = {}",
                        m.modulus
                    )));
                }
            }
        }
        Ok(MaterialField { elements })
    }

    pub fn uniform(n: usize, modulus: f64, poisson: f64) -> Result<Self> {
        Self::new(vec![ElementMaterial::elastic(modulus, poisson); n])
    }

    pub fn elements(&self) -> &[ElementMaterial] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Copy with every modulus (and plastic tangent) multiplied by `factor`.
    pub fn scaled_modulus(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.elements
                .iter()
                .map(|m| ElementMaterial {
                    modulus: m.modulus * factor,
                    plasticity: m.plasticity.map(|p| Plasticity {
                        tangent_modulus: p.tangent_modulus * factor,
                        ..p
                    }),
                    ..*m
                })
                .collect(),
        )
    }

    /// Adds yield parameters to every element with positive density.
    pub fn with_plasticity(&self) -> Result<Self> {
        let mut out = self.elements.clone();
        for m in &mut out {
            m.plasticity = match yield_stress(m.density) {
                Ok(sy) => Some(Plasticity {
                    yield_stress: sy,
                    tangent_modulus: hardening_modulus(m.modulus)?,
                }),
                Err(HfeError::NoYield(_)) => None,
                Err(e) => return Err(e),
            };
        }
        Self::new(out)
    }
}

/// Order of averaging and applying the density-modulus law inside an element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MappingMode {
    /// Average density over the element, then apply the law.
    #[default]
    DensityThenLaw,
    /// Apply the law at each quadrature point, then average the modulus.
    ModulusAverage,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MappingOptions {
    pub law: ElasticityLaw,
    pub poisson: f64,
    pub e_min: f64,
    pub mode: MappingMode,
    /// Uniform refinements of each element before applying the 11-point rule.
    pub subdivisions: u32,
    pub plasticity: bool,
}

impl Default for MappingOptions {
    fn default() -> Self {
        MappingOptions {
            law: ElasticityLaw::default(),
            poisson: DEFAULT_POISSON,
            e_min: DEFAULT_E_MIN,
            mode: MappingMode::DensityThenLaw,
            subdivisions: 0,
            plasticity: false,
        }
    }
}

fn to_world(vertices: &[[f64; 3]; 4], l: &[f64; 4]) -> [f64; 3] {
    [0, 1, 2].map(|d| (0..4).map(|i| l[i] * vertices[i][d]).sum())
}

/// Volume-averaged density over an element. Quadrature points outside the
/// image contribute zero; an element with no point inside is an error.
pub fn integrate_element_density(
    volume: &VoxelVolume,
    mesh: &Tet10Mesh,
    element: usize,
    quadrature: &ElementQuadrature,
) -> Result<f64> {
    integrate(volume, mesh, element, quadrature, |rho| rho).map(|v| v.max(0.0))
}

fn integrate(
    volume: &VoxelVolume,
    mesh: &Tet10Mesh,
    element: usize,
    quadrature: &ElementQuadrature,
    f: impl Fn(f64) -> f64,
) -> Result<f64> {
    let v = mesh.vertices(element);
    let mut acc = 0.0;
    let mut hits = 0usize;
    for (l, w) in quadrature.points() {
        if let Some(rho) = volume.sample_in_extent(to_world(&v, l)) {
            acc += w * f(rho);
            hits += 1;
        }
    }
    if hits == 0 {
        return Err(HfeError::ZeroOverlap(vec![mesh.element_ids()[element]]));
    }
    Ok(acc)
}

/// Maps a density image onto every element of the mesh.
pub fn map_materials(
    volume: &VoxelVolume,
    mesh: &Tet10Mesh,
    options: &MappingOptions,
) -> Result<MaterialField> {
    if volume.kind() != VolumeKind::Density {
        return Err(HfeError::KindMismatch {
            expected: VolumeKind::Density.as_str(),
            found: volume.kind().as_str(),
        });
    }
    if !(options.e_min > 0.0) {
        return Err(HfeError::InvalidMaterial("E_min must be positive".into()));
    }
    let quad = ElementQuadrature::new(options.subdivisions);
    let results: Vec<Result<ElementMaterial>> = (0..mesh.num_elements())
        .into_par_iter()
        .map(|e| {
            let density = integrate_element_density(volume, mesh, e, &quad)?;
            let modulus = match options.mode {
                MappingMode::DensityThenLaw => {
                    density_to_modulus(density, &options.law, options.e_min)
                }
                MappingMode::ModulusAverage => integrate(volume, mesh, e, &quad, |rho| {
                    density_to_modulus(rho, &options.law, options.e_min)
                })?
                .max(options.e_min),
            };
            Ok(ElementMaterial {
                density,
                modulus,
                poisson: options.poisson,
                plasticity: None,
            })
        })
        .collect();
    let mut missing = Vec::new();
    let mut elements = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok(m) => elements.push(m),
            Err(HfeError::ZeroOverlap(ids)) => missing.extend(ids),
            Err(e) => return Err(e),
        }
    }
    if !missing.is_empty() {
        return Err(HfeError::ZeroOverlap(missing));
    }
    let field = MaterialField::new(elements)?;
    if options.plasticity {
        field.with_plasticity()
    } else {
        Ok(field)
    }
}

/// Maps materials from a second (clinical) grey image registered to the mesh
/// by `transform`. The input mesh is never modified: the mapping runs on a
/// transformed copy, so the original coordinates stay bit-identical.
pub fn remap_materials(
    mesh: &Tet10Mesh,
    transform: &RigidTransform,
    clinical: &VoxelVolume,
    calibration: &DensityCalibration,
    options: &MappingOptions,
) -> Result<MaterialField> {
    let density = grey_to_density(clinical, calibration)?;
    let moved = mesh.map_nodes(|p| transform.apply(p))?;
    map_materials(&density, &moved, options)
}

/// Density at the element centroid via the image; handy for coarse previews.
pub fn centroid_density(volume: &VoxelVolume, mesh: &Tet10Mesh, element: usize) -> Option<f64> {
    let v = mesh.vertices(element);
    volume.sample_in_extent(to_world(&v, &NaturalCoords::CENTROID.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build::{single_tet, structured_box};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn density_volume(dims: [usize; 3], h: f64, f: impl FnMut([f64; 3]) -> f32) -> VoxelVolume {
        VoxelVolume::from_fn(dims, [h; 3], [0.0; 3], VolumeKind::Density, f).unwrap()
    }

    #[test]
    fn modulus_law_and_floor() {
        let law = ElasticityLaw::new(100.0, 2.0).unwrap();
        assert_eq!(density_to_modulus(2.0, &law, 0.01), 400.0);
        assert_eq!(density_to_modulus(0.0, &law, 0.01), 0.01);
        let e = density_to_modulus(0.5, &ElasticityLaw::default(), DEFAULT_E_MIN);
        assert!((e - 4730.0 * 0.5f64.powf(1.56)).abs() < 1e-9);
        assert!((e - 1604.0).abs() < 1.0);
        assert!(ElasticityLaw::new(0.0, 1.0).is_err());
    }

    #[test]
    fn yield_and_hardening_laws() {
        assert_eq!(yield_stress(1.0).unwrap(), 21.70);
        let s = yield_stress(0.25).unwrap();
        assert!((s - 21.70 * 0.25f64.powf(1.52)).abs() < 1e-12);
        assert!((s - 2.63).abs() < 0.01);
        assert!(matches!(yield_stress(0.0), Err(HfeError::NoYield(_))));
        assert_eq!(hardening_modulus(1000.0).unwrap(), 50.0);
        assert!((hardening_modulus(4730.0).unwrap() - 236.5).abs() < 1e-12);
        assert!(hardening_modulus(0.0).is_err());
    }

    #[test]
    fn laws_are_monotone() {
        let law = ElasticityLaw::default();
        let mut prev = (
            density_to_modulus(0.01, &law, DEFAULT_E_MIN),
            yield_stress(0.01).unwrap(),
        );
        for i in 2..200 {
            let rho = 0.01 * i as f64;
            let cur = (
                density_to_modulus(rho, &law, DEFAULT_E_MIN),
                yield_stress(rho).unwrap(),
            );
            assert!(cur.0 >= prev.0 && cur.1 > prev.1);
            prev = cur;
        }
    }

    #[test]
    fn uniform_density_is_exact() {
        let vol = density_volume([10, 10, 10], 0.5, |_| 1.2);
        let mesh = structured_box([0.5; 3], [3.5; 3], [2, 2, 2]).unwrap();
        let quad = ElementQuadrature::new(0);
        for e in 0..mesh.num_elements() {
            let rho = integrate_element_density(&vol, &mesh, e, &quad).unwrap();
            assert!((rho - 1.2).abs() < 1e-6);
        }
    }

    #[test]
    fn linear_density_averages_to_centroid_value() {
        let vol = density_volume([20, 20, 20], 0.25, |p| p[0] as f32);
        let mesh = single_tet([
            [0.5, 0.5, 0.5],
            [4.0, 0.7, 0.6],
            [0.6, 4.2, 1.0],
            [1.0, 1.1, 4.5],
        ])
        .unwrap();
        let rho = integrate_element_density(&vol, &mesh, 0, &ElementQuadrature::new(0)).unwrap();
        let cx = (0.5 + 4.0 + 0.6 + 1.0) / 4.0;
        assert!((rho - cx).abs() < 1e-6);
    }

    #[test]
    fn checkerboard_matches_monte_carlo() {
        // Voxel-scale checkerboard under a large element.
        let vol = density_volume([40, 40, 40], 0.25, |p| {
            let idx = [0, 1, 2].map(|d| (p[d] / 0.25).round() as i64);
            if (idx[0] + idx[1] + idx[2]) % 2 == 0 {
                1.0
            } else {
                0.2
            }
        });
        let verts = [
            [0.3, 0.4, 0.2],
            [9.1, 0.9, 0.5],
            [1.2, 8.8, 0.7],
            [0.8, 1.3, 9.4],
        ];
        let mesh = single_tet(verts).unwrap();
        let quad = ElementQuadrature::new(4);
        let rho = integrate_element_density(&vol, &mesh, 0, &quad).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 1_000_000;
        let mut acc = 0.0;
        for _ in 0..n {
            // Uniform point in a simplex via sorted uniforms.
            let mut u = [
                rng.random::<f64>(),
                rng.random::<f64>(),
                rng.random::<f64>(),
            ];
            u.sort_by(f64::total_cmp);
            let l = [u[0], u[1] - u[0], u[2] - u[1], 1.0 - u[2]];
            acc += vol.sample_in_extent(to_world(&verts, &l)).unwrap();
        }
        let mc = acc / n as f64;
        assert!(
            ((rho - mc) / mc).abs() < 0.02,
            "quadrature {rho} vs monte carlo {mc}"
        );
    }

    #[test]
    fn element_outside_volume_is_an_error() {
        let vol = density_volume([4, 4, 4], 1.0, |_| 1.0);
        let mesh = structured_box([100.0; 3], [101.0; 3], [1, 1, 1]).unwrap();
        let err = map_materials(&vol, &mesh, &MappingOptions::default()).unwrap_err();
        match err {
            HfeError::ZeroOverlap(ids) => assert_eq!(ids.len(), 6),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn modulus_average_mode_differs_for_heterogeneous_fields() {
        let vol = density_volume([20, 20, 20], 0.25, |p| if p[0] < 2.0 { 0.1 } else { 0.9 });
        let mesh = structured_box([0.5; 3], [4.0; 3], [1, 1, 1]).unwrap();
        let mut opts = MappingOptions {
            subdivisions: 2,
            ..Default::default()
        };
        let a = map_materials(&vol, &mesh, &opts).unwrap();
        opts.mode = MappingMode::ModulusAverage;
        let b = map_materials(&vol, &mesh, &opts).unwrap();
        // Convex law: averaging moduli gives more stiffness than the law of the mean.
        let sa: f64 = a.elements().iter().map(|m| m.modulus).sum();
        let sb: f64 = b.elements().iter().map(|m| m.modulus).sum();
        assert!(sb > sa);
        assert_eq!(a.elements()[0].density, b.elements()[0].density);
    }

    #[test]
    fn plasticity_is_added_only_where_density_is_positive() {
        let field = MaterialField::new(vec![
            ElementMaterial {
                density: 0.5,
                modulus: 1604.0,
                poisson: 0.3,
                plasticity: None,
            },
            ElementMaterial {
                density: 0.0,
                modulus: 0.01,
                poisson: 0.3,
                plasticity: None,
            },
        ])
        .unwrap()
        .with_plasticity()
        .unwrap();
        let p = field.elements()[0].plasticity.unwrap();
        assert!((p.tangent_modulus - 0.05 * 1604.0).abs() < 1e-12);
        assert!((p.yield_stress - 21.70 * 0.5f64.powf(1.52)).abs() < 1e-12);
        assert!(field.elements()[1].plasticity.is_none());
    }

    #[test]
    fn identity_remap_matches_direct_mapping() {
        let cal = DensityCalibration::new(0.001, -0.1);
        let grey = VoxelVolume::from_fn([24, 24, 24], [0.25; 3], [0.0; 3], VolumeKind::Grey, |p| {
            (300.0 + 40.0 * p[0] + 25.0 * p[1] * p[2]) as f32
        })
        .unwrap();
        let density = grey_to_density(&grey, &cal).unwrap();
        let mesh = structured_box([0.5; 3], [5.0; 3], [3, 3, 3]).unwrap();
        let opts = MappingOptions::default();
        let direct = map_materials(&density, &mesh, &opts).unwrap();
        let remapped =
            remap_materials(&mesh, &RigidTransform::identity(), &grey, &cal, &opts).unwrap();
        for (a, b) in direct.elements().iter().zip(remapped.elements()) {
            assert!(((a.modulus - b.modulus) / a.modulus).abs() <= 1e-6);
        }
    }

    #[test]
    fn translated_volume_and_mesh_keep_moduli() {
        let shift = [7.0, -3.0, 2.5];
        let f = |p: [f64; 3]| (0.3 + 0.05 * p[0] + 0.02 * p[1] - 0.01 * p[2]) as f32;
        let vol = density_volume([24, 24, 24], 0.25, f);
        let grey = VoxelVolume::from_fn([24, 24, 24], [0.25; 3], shift, VolumeKind::Grey, |p| {
            f([p[0] - shift[0], p[1] - shift[1], p[2] - shift[2]]) * 1000.0
        })
        .unwrap();
        let mesh = structured_box([0.5; 3], [5.0; 3], [2, 2, 2]).unwrap();
        let opts = MappingOptions::default();
        let direct = map_materials(&vol, &mesh, &opts).unwrap();
        let t = RigidTransform::new(nalgebra::Matrix3::identity(), shift).unwrap();
        let remapped = remap_materials(
            &mesh,
            &t,
            &grey,
            &DensityCalibration::new(0.001, 0.0),
            &opts,
        )
        .unwrap();
        for (a, b) in direct.elements().iter().zip(remapped.elements()) {
            assert!(((a.modulus - b.modulus) / a.modulus).abs() <= 1e-5);
        }
    }

    #[test]
    fn rotated_volume_keeps_moduli_within_one_percent() {
        // Smooth analytic density; the clinical image holds it rotated by 90° about z.
        let rho = |p: [f64; 3]| 0.25 + 0.15 * (0.4 * p[0]).sin() * (0.3 * p[1]).cos() + 0.01 * p[2];
        let vol = density_volume([48, 48, 48], 0.25, |p| rho(p) as f32);
        let t =
            RigidTransform::about_axis(2, std::f64::consts::FRAC_PI_2, [20.0, 0.0, 0.0]).unwrap();
        let inv = t.inverse();
        let grey = VoxelVolume::from_fn(
            [48, 48, 48],
            [0.25; 3],
            [8.0, 0.0, 0.0],
            VolumeKind::Grey,
            |p| (rho(inv.apply(p)) * 1000.0) as f32,
        )
        .unwrap();
        let mesh = structured_box([1.0; 3], [10.0; 3], [3, 3, 3]).unwrap();
        let opts = MappingOptions {
            subdivisions: 1,
            ..Default::default()
        };
        let direct = map_materials(&vol, &mesh, &opts).unwrap();
        let before = mesh.nodes().to_vec();
        let remapped = remap_materials(
            &mesh,
            &t,
            &grey,
            &DensityCalibration::new(0.001, 0.0),
            &opts,
        )
        .unwrap();
        assert_eq!(mesh.nodes(), &before[..]);
        for (a, b) in direct.elements().iter().zip(remapped.elements()) {
            assert!(((a.modulus - b.modulus) / a.modulus).abs() <= 0.01);
        }
    }
}
