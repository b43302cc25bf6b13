//! Linear-elastic and bilinear elastoplastic solution of Tet10 models under
//! prescribed displacements.
//!
//! Prescribed DOFs are eliminated (the reduced system `K_ff u_f = −K_fc u_c`
//! is solved with block-Jacobi PCG), and reactions are recovered as `K u` on
//! the constrained DOFs.

mod element;
pub mod export;
mod pcg;
mod plastic;
mod sparse;

use std::collections::BTreeMap;

use nalgebra::{Matrix6, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{HfeError, Result};
use crate::materials::MaterialField;
use crate::mesh::{NaturalCoords, Tet10Mesh};
use crate::tensor::SymTensor;

pub use element::{b_matrix, elasticity_matrix, element_stiffness, strain_at};
pub use pcg::PcgStats;
pub use plastic::{hardening_from_tangent, GaussState, J2Material, StressUpdate};
pub use sparse::{CsrMatrix, ElementMatrix};

/// Prescribed displacements keyed by `(node index, component)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DirichletSet {
    values: BTreeMap<(usize, usize), f64>,
}

impl DirichletSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, node: usize, component: usize, value: f64) -> Result<()> {
        if component > 2 {
            return Err(HfeError::Contract(format!(
                "component {component} out of range"
            )));
        }
        if self.values.insert((node, component), value).is_some() {
            return Err(HfeError::Contract(format!(
                "duplicate constraint on node #{node}, component {component}"
            )));
        }
        Ok(())
    }

    pub fn insert_vector(&mut self, node: usize, value: [f64; 3]) -> Result<()> {
        for (c, v) in value.into_iter().enumerate() {
            self.insert(node, c, v)?;
        }
        Ok(())
    }

    pub fn get(&self, node: usize, component: usize) -> Option<f64> {
        self.values.get(&(node, component)).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.values.iter().map(|(&(n, c), &v)| (n, c, v))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        DirichletSet {
            values: self.values.iter().map(|(&k, &v)| (k, v * factor)).collect(),
        }
    }

    fn validate(&self, mesh: &Tet10Mesh) -> Result<()> {
        if let Some(&(n, _)) = self.values.keys().find(|(n, _)| *n >= mesh.num_nodes()) {
            return Err(HfeError::Contract(format!(
                "constraint on missing node #{n}"
            )));
        }
        check_rigid_modes(mesh, self)
    }
}

/// Fails unless the constrained DOFs restrain all six rigid-body modes.
fn check_rigid_modes(mesh: &Tet10Mesh, bc: &DirichletSet) -> Result<()> {
    let (lo, hi) = mesh.bounding_box();
    let center = [0, 1, 2].map(|d| 0.5 * (lo[d] + hi[d]));
    let scale = (0..3)
        .map(|d| (hi[d] - lo[d]).powi(2))
        .sum::<f64>()
        .sqrt()
        .max(1e-300);
    let mut gram = Matrix6::<f64>::zeros();
    for (n, c) in bc.values.keys() {
        let p = mesh.nodes()[*n];
        let r = [0, 1, 2].map(|d| (p[d] - center[d]) / scale);
        let mut v = [0.0; 6];
        v[*c] = 1.0;
        // Component c of e_k × r.
        for k in 0..3 {
            let (a, b) = ((k + 1) % 3, (k + 2) % 3);
            v[3 + k] = if *c == a {
                -r[b]
            } else if *c == b {
                r[a]
            } else {
                0.0
            };
        }
        for i in 0..6 {
            for j in 0..6 {
                gram[(i, j)] += v[i] * v[j];
            }
        }
    }
    let eig = SymmetricEigen::new(gram).eigenvalues;
    let (min, max) = eig.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    if !(max > 0.0) || min <= 1e-10 * max {
        return Err(HfeError::Constraint(
            "boundary conditions leave a rigid-body mode unconstrained".into(),
        ));
    }
    Ok(())
}

/// Lower bound of the Newton reference force relative to the total force.
const NEWTON_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative residual target of the linear PCG solves.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Newton tolerance relative to the load-step force norm.
    pub newton_tolerance: f64,
    pub max_newton_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerance: 1e-10,
            max_iterations: 20_000,
            newton_tolerance: 1e-8,
            max_newton_iterations: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    /// Nodal displacements (mm).
    pub displacements: Vec<[f64; 3]>,
    /// Element strain at the centroid.
    pub strains: Vec<SymTensor>,
    /// Element stress (MPa): centroid value for elastic solves, Gauss-point
    /// mean for elastoplastic ones.
    pub stresses: Vec<SymTensor>,
    /// Reaction force (N) per constrained `(node, component)`.
    pub reactions: BTreeMap<(usize, usize), f64>,
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
}

impl Solution {
    pub fn displacement_vector(&self) -> Vec<f64> {
        self.displacements.iter().flatten().copied().collect()
    }

    /// Sum of reactions per component over every constrained DOF.
    pub fn total_reaction(&self) -> [f64; 3] {
        let mut t = [0.0; 3];
        for (&(_, c), &r) in &self.reactions {
            t[c] += r;
        }
        t
    }
}

pub fn assemble_stiffness(mesh: &Tet10Mesh, materials: &MaterialField) -> Result<CsrMatrix> {
    check_sizes(mesh, materials)?;
    let mut k = CsrMatrix::for_mesh(mesh);
    k.assemble(mesh, |e| {
        Ok(element_stiffness(mesh, e, &materials.elements()[e]))
    })?;
    Ok(k)
}

fn check_sizes(mesh: &Tet10Mesh, materials: &MaterialField) -> Result<()> {
    if materials.len() != mesh.num_elements() {
        return Err(HfeError::Contract(format!(
            "{} materials for {} elements",
            materials.len(),
            mesh.num_elements()
        )));
    }
    Ok(())
}

fn free_mask(n_dof: usize, bc: &DirichletSet) -> Vec<bool> {
    let mut free = vec![true; n_dof];
    for (n, c, _) in bc.iter() {
        free[3 * n + c] = false;
    }
    free
}

fn reactions_from(k: &CsrMatrix, u: &[f64], bc: &DirichletSet) -> BTreeMap<(usize, usize), f64> {
    let mut ku = vec![0.0; u.len()];
    k.matvec(u, &mut ku);
    bc.iter().map(|(n, c, _)| ((n, c), ku[3 * n + c])).collect()
}

fn centroid_strains(mesh: &Tet10Mesh, u: &[f64]) -> Vec<SymTensor> {
    (0..mesh.num_elements())
        .into_par_iter()
        .map(|e| strain_at(mesh, e, u, &NaturalCoords::CENTROID))
        .collect()
}

fn to_nodal(u: &[f64]) -> Vec<[f64; 3]> {
    u.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect()
}

pub fn solve_elastic(
    mesh: &Tet10Mesh,
    materials: &MaterialField,
    bc: &DirichletSet,
    options: &SolverOptions,
) -> Result<Solution> {
    bc.validate(mesh)?;
    let k = assemble_stiffness(mesh, materials)?;
    let n = k.dim();
    let free = free_mask(n, bc);
    let mut u = vec![0.0; n];
    for (node, c, v) in bc.iter() {
        u[3 * node + c] = v;
    }
    let mut rhs = vec![0.0; n];
    k.matvec(&u, &mut rhs);
    for (r, &f) in rhs.iter_mut().zip(&free) {
        *r = if f { -*r } else { 0.0 };
    }
    let mut du = vec![0.0; n];
    let stats = pcg::solve(
        &k,
        &rhs,
        &mut du,
        &free,
        options.tolerance,
        options.max_iterations,
    )?;
    for (ui, (d, &f)) in u.iter_mut().zip(du.iter().zip(&free)) {
        if f {
            *ui += d;
        }
    }
    let strains = centroid_strains(mesh, &u);
    let stresses = strains
        .iter()
        .zip(materials.elements())
        .map(|(e, m)| {
            let s = elasticity_matrix(m) * element::voigt_from_strain(e);
            element::stress_from_voigt(&s)
        })
        .collect();
    Ok(Solution {
        reactions: reactions_from(&k, &u, bc),
        displacements: to_nodal(&u),
        strains,
        stresses,
        converged: true,
        iterations: stats.iterations,
        residual: stats.relative_residual,
    })
}

/// Sum of reaction components along `axis` over `nodes` (node indices).
pub fn reaction_force_axial(
    solution: &Solution,
    mesh: &Tet10Mesh,
    nodes: &[usize],
    axis: usize,
) -> Result<f64> {
    let mut total = 0.0;
    for &n in nodes {
        match solution.reactions.get(&(n, axis)) {
            Some(r) => total += r,
            None => {
                return Err(HfeError::NotConstrained {
                    node: mesh.node_ids().get(n).copied().unwrap_or(n as u64),
                    axis,
                })
            }
        }
    }
    Ok(total)
}

type Linearized = (Vec<f64>, Vec<[GaussState; 4]>, Vec<SymTensor>);

/// Path-following elastoplastic solver holding committed Gauss-point history.
pub struct ElastoplasticSolver<'a> {
    mesh: &'a Tet10Mesh,
    laws: Vec<J2Material>,
    committed: Vec<[GaussState; 4]>,
    stresses: Vec<SymTensor>,
    u: Vec<f64>,
    f_int: Vec<f64>,
    k: CsrMatrix,
    options: SolverOptions,
    steps: usize,
    total_iterations: usize,
    last_residual: f64,
    last_bc: DirichletSet,
}

struct ElementResponse {
    force: [f64; 30],
    tangent: ElementMatrix,
    states: [GaussState; 4],
    stress: SymTensor,
}

impl<'a> ElastoplasticSolver<'a> {
    pub fn new(
        mesh: &'a Tet10Mesh,
        materials: &MaterialField,
        options: SolverOptions,
    ) -> Result<Self> {
        check_sizes(mesh, materials)?;
        let n = 3 * mesh.num_nodes();
        Ok(ElastoplasticSolver {
            mesh,
            laws: materials.elements().iter().map(J2Material::new).collect(),
            committed: vec![[GaussState::default(); 4]; mesh.num_elements()],
            stresses: vec![SymTensor::ZERO; mesh.num_elements()],
            u: vec![0.0; n],
            f_int: vec![0.0; n],
            k: CsrMatrix::for_mesh(mesh),
            options,
            steps: 0,
            total_iterations: 0,
            last_residual: 0.0,
            last_bc: DirichletSet::new(),
        })
    }

    fn respond(&self, e: usize, u: &[f64]) -> ElementResponse {
        let mesh = self.mesh;
        let law = &self.laws[e];
        let ue = element::element_displacements(mesh, e, u);
        let mut force = nalgebra::SVector::<f64, 30>::zeros();
        let mut tangents = [Matrix6::zeros(); 4];
        let mut states = [GaussState::default(); 4];
        let mut stress_sum = SymTensor::ZERO;
        for (g, (nc, wv)) in element::gauss_points(mesh, e).iter().enumerate() {
            let b = element::b_at(mesh, e, nc);
            let ev = b * ue;
            let strain = SymTensor([ev[0], ev[1], ev[2], 0.5 * ev[3], 0.5 * ev[4], 0.5 * ev[5]]);
            let up = law.update(&strain, &self.committed[e][g]);
            force += b.transpose() * element::voigt_from_stress(&up.stress) * *wv;
            tangents[g] = up.tangent;
            states[g] = up.state;
            stress_sum = stress_sum.add(&up.stress);
        }
        let tangent = element::stiffness_with(mesh, e, |g| tangents[g]);
        let mut f = [0.0; 30];
        f.copy_from_slice(force.as_slice());
        ElementResponse {
            force: f,
            tangent,
            states,
            stress: stress_sum.scale(0.25),
        }
    }

    /// Internal forces and tangent at `u`; returns the trial Gauss states and
    /// element stresses.
    fn linearize(&mut self, u: &[f64]) -> Result<Linearized> {
        let ne = self.mesh.num_elements();
        let responses: Vec<ElementResponse> = (0..ne)
            .into_par_iter()
            .map(|e| self.respond(e, u))
            .collect();
        let mut f = vec![0.0; u.len()];
        for (e, r) in responses.iter().enumerate() {
            for (a, &n) in self.mesh.elements()[e].iter().enumerate() {
                for d in 0..3 {
                    f[3 * n + d] += r.force[3 * a + d];
                }
            }
        }
        let tangents: Vec<&ElementMatrix> = responses.iter().map(|r| &r.tangent).collect();
        self.k.assemble(self.mesh, |e| Ok(*tangents[e]))?;
        Ok((
            f,
            responses.iter().map(|r| r.states).collect(),
            responses.iter().map(|r| r.stress).collect(),
        ))
    }

    /// Advances to the prescribed displacements `bc` in one increment.
    pub fn advance(&mut self, bc: &DirichletSet) -> Result<()> {
        bc.validate(self.mesh)?;
        self.steps += 1;
        let step = self.steps;
        let n = self.u.len();
        let free = free_mask(n, bc);
        let mut u = self.u.clone();
        for (node, c, v) in bc.iter() {
            u[3 * node + c] = v;
        }
        let mut reference = None;
        for it in 0..=self.options.max_newton_iterations {
            let (f, states, stresses) = self.linearize(&u)?;
            let load = *reference.get_or_insert_with(|| {
                let d: Vec<f64> = f.iter().zip(&self.f_int).map(|(a, b)| a - b).collect();
                // Floor for steps that repeat the previous displacements.
                sparse::norm(&d).max(NEWTON_FLOOR * sparse::norm(&f))
            });
            let residual: Vec<f64> = f
                .iter()
                .zip(&free)
                .map(|(r, &fr)| if fr { -r } else { 0.0 })
                .collect();
            let rnorm = sparse::norm(&residual);
            if rnorm <= self.options.newton_tolerance * load || load == 0.0 {
                self.u = u;
                self.f_int = f;
                self.committed = states;
                self.stresses = stresses;
                self.total_iterations += it;
                self.last_residual = if load > 0.0 { rnorm / load } else { 0.0 };
                self.last_bc = bc.clone();
                return Ok(());
            }
            if it == self.options.max_newton_iterations {
                return Err(HfeError::Convergence {
                    step: Some(step),
                    iterations: it,
                    residual: rnorm / load,
                });
            }
            let mut du = vec![0.0; n];
            pcg::solve(
                &self.k,
                &residual,
                &mut du,
                &free,
                self.options.tolerance,
                self.options.max_iterations,
            )
            .map_err(|e| match e {
                HfeError::Convergence {
                    iterations,
                    residual,
                    ..
                } => HfeError::Convergence {
                    step: Some(step),
                    iterations,
                    residual,
                },
                other => other,
            })?;
            for (ui, d) in u.iter_mut().zip(&du) {
                *ui += d;
            }
        }
        unreachable!("Newton loop returns or errors")
    }

    pub fn gauss_states(&self) -> &[[GaussState; 4]] {
        &self.committed
    }

    pub fn solution(&self) -> Solution {
        let mesh = self.mesh;
        let strains = centroid_strains(mesh, &self.u);
        let reactions = self
            .last_bc
            .iter()
            .map(|(n, c, _)| ((n, c), self.f_int[3 * n + c]))
            .collect();
        Solution {
            displacements: to_nodal(&self.u),
            strains,
            stresses: self.stresses.clone(),
            reactions,
            converged: true,
            iterations: self.total_iterations,
            residual: self.last_residual,
        }
    }
}

/// Proportional loading to `bc` in `n_steps` equal increments.
pub fn solve_elastoplastic(
    mesh: &Tet10Mesh,
    materials: &MaterialField,
    bc: &DirichletSet,
    n_steps: usize,
    options: &SolverOptions,
) -> Result<Solution> {
    if n_steps == 0 {
        return Err(HfeError::Contract("n_steps must be at least 1".into()));
    }
    let mut solver = ElastoplasticSolver::new(mesh, materials, *options)?;
    for s in 1..=n_steps {
        solver.advance(&bc.scaled(s as f64 / n_steps as f64))?;
    }
    Ok(solver.solution())
}
