#![allow(dead_code)]

use hfe_core::materials::{ElementMaterial, MaterialField, Plasticity};
use hfe_core::mesh::build::{single_tet, structured_box};
use hfe_core::mesh::Tet10Mesh;
use hfe_core::solver::DirichletSet;

pub const CUBE_MODULUS: f64 = 1000.0;

pub struct UniaxialCube {
    pub mesh: Tet10Mesh,
    pub materials: MaterialField,
    pub bc: DirichletSet,
    pub top: Vec<usize>,
    pub bottom: Vec<usize>,
}

/// 10 mm cube, top face pushed down 0.1 mm, bottom on rollers with the
/// origin corner pinned and the +x bottom corner held in y.
pub fn uniaxial_cube(cells: usize) -> UniaxialCube {
    let mesh = structured_box([0.0; 3], [10.0; 3], [cells; 3]).unwrap();
    let materials = MaterialField::uniform(mesh.num_elements(), CUBE_MODULUS, 0.3).unwrap();
    let mut bc = DirichletSet::new();
    let (mut top, mut bottom) = (Vec::new(), Vec::new());
    for (n, p) in mesh.nodes().iter().enumerate() {
        if p[2] == 10.0 {
            bc.insert(n, 2, -0.1).unwrap();
            top.push(n);
        } else if p[2] == 0.0 {
            bc.insert(n, 2, 0.0).unwrap();
            bottom.push(n);
            if p[1] == 0.0 && p[0] == 0.0 {
                bc.insert(n, 0, 0.0).unwrap();
            }
            if p[1] == 0.0 && (p[0] == 0.0 || p[0] == 10.0) {
                bc.insert(n, 1, 0.0).unwrap();
            }
        }
    }
    UniaxialCube {
        mesh,
        materials,
        bc,
        top,
        bottom,
    }
}

/// Prescribes `u = G x + t` on every boundary node of a box mesh.
pub fn affine_boundary(mesh: &Tet10Mesh, g: &[[f64; 3]; 3], t: [f64; 3]) -> DirichletSet {
    let (lo, hi) = mesh.bounding_box();
    let mut bc = DirichletSet::new();
    for (n, p) in mesh.nodes().iter().enumerate() {
        let on_face = (0..3).any(|d| p[d] == lo[d] || p[d] == hi[d]);
        if on_face {
            bc.insert_vector(n, affine(g, t, *p)).unwrap();
        }
    }
    bc
}

pub fn affine(g: &[[f64; 3]; 3], t: [f64; 3], p: [f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|i| t[i] + (0..3).map(|j| g[i][j] * p[j]).sum::<f64>())
}

pub const BAR_MODULUS: f64 = 1000.0;
pub const BAR_YIELD: f64 = 5.0;
pub const BAR_TANGENT: f64 = 0.05 * BAR_MODULUS;

/// Unit right tetrahedron with bilinear plastic material.
pub fn plastic_tet() -> (Tet10Mesh, MaterialField) {
    let mesh = single_tet([
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
    ])
    .unwrap();
    let m = ElementMaterial {
        plasticity: Some(Plasticity {
            yield_stress: BAR_YIELD,
            tangent_modulus: BAR_TANGENT,
        }),
        ..ElementMaterial::elastic(BAR_MODULUS, 0.3)
    };
    (mesh, MaterialField::new(vec![m]).unwrap())
}

/// Homogeneous uniaxial stress state: `u_z = ε z` everywhere, lateral
/// contraction free apart from rigid-body pins.
pub fn uniaxial_history_bc(mesh: &Tet10Mesh, strain: f64) -> DirichletSet {
    let mut bc = DirichletSet::new();
    for (n, p) in mesh.nodes().iter().enumerate() {
        bc.insert(n, 2, strain * p[2]).unwrap();
    }
    let origin = mesh.nodes().iter().position(|p| *p == [0.0; 3]).unwrap();
    let x_axis = mesh
        .nodes()
        .iter()
        .position(|p| *p == [1.0, 0.0, 0.0])
        .unwrap();
    bc.insert(origin, 0, 0.0).unwrap();
    bc.insert(origin, 1, 0.0).unwrap();
    bc.insert(x_axis, 1, 0.0).unwrap();
    bc
}

/// Closed-form bilinear uniaxial response along a strain path, tracking the
/// plastic strain and the current yield stress.
pub struct BilinearBar {
    pub plastic_strain: f64,
    pub yield_stress: f64,
}

impl BilinearBar {
    pub fn new() -> Self {
        BilinearBar {
            plastic_strain: 0.0,
            yield_stress: BAR_YIELD,
        }
    }

    pub fn stress(&mut self, strain: f64) -> f64 {
        let e = BAR_MODULUS;
        let h = e * BAR_TANGENT / (e - BAR_TANGENT);
        let trial = e * (strain - self.plastic_strain);
        let excess = trial.abs() - self.yield_stress;
        if excess <= 0.0 {
            return trial;
        }
        let dp = excess / (e + h);
        self.plastic_strain += dp * trial.signum();
        self.yield_stress += h * dp;
        e * (strain - self.plastic_strain)
    }
}
