//! CSV and legacy-VTK output of solutions.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::Solution;
use crate::error::{HfeError, Result};
use crate::materials::io::csv_err;
use crate::mesh::Tet10Mesh;

/// VTK cell type of the quadratic tetrahedron.
const VTK_QUADRATIC_TETRA: u8 = 24;

fn check(mesh: &Tet10Mesh, solution: &Solution) -> Result<()> {
    if solution.displacements.len() != mesh.num_nodes()
        || solution.strains.len() != mesh.num_elements()
    {
        return Err(HfeError::Contract("solution does not match mesh".into()));
    }
    Ok(())
}

/// `node_id,ux_mm,uy_mm,uz_mm`
pub fn write_displacements(path: &Path, mesh: &Tet10Mesh, solution: &Solution) -> Result<()> {
    check(mesh, solution)?;
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["node_id", "ux_mm", "uy_mm", "uz_mm"])
        .map_err(|e| csv_err(path, e))?;
    for (id, u) in mesh.node_ids().iter().zip(&solution.displacements) {
        w.write_record([id.to_string(), fmt(u[0]), fmt(u[1]), fmt(u[2])])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| HfeError::io(path, e))
}

/// Strain tensor components, principal strains and von Mises stress per element.
pub fn write_element_results(path: &Path, mesh: &Tet10Mesh, solution: &Solution) -> Result<()> {
    check(mesh, solution)?;
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record([
        "element_id",
        "exx",
        "eyy",
        "ezz",
        "exy",
        "eyz",
        "exz",
        "e1",
        "e2",
        "e3",
        "von_mises_mpa",
    ])
    .map_err(|e| csv_err(path, e))?;
    for ((id, e), s) in mesh
        .element_ids()
        .iter()
        .zip(&solution.strains)
        .zip(&solution.stresses)
    {
        let mut row = vec![id.to_string()];
        row.extend(e.0.iter().map(|v| fmt(*v)));
        row.extend(e.principal().iter().map(|v| fmt(*v)));
        row.push(fmt(s.von_mises()));
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| HfeError::io(path, e))
}

/// `node_id,component,reaction_n` for every constrained DOF.
pub fn write_reactions(path: &Path, mesh: &Tet10Mesh, solution: &Solution) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["node_id", "component", "reaction_n"])
        .map_err(|e| csv_err(path, e))?;
    for (&(n, c), r) in &solution.reactions {
        let id = mesh.node_ids()[n];
        w.write_record([id.to_string(), ["x", "y", "z"][c].to_string(), fmt(*r)])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| HfeError::io(path, e))
}

pub fn write_vtk(path: &Path, mesh: &Tet10Mesh, solution: &Solution) -> Result<()> {
    check(mesh, solution)?;
    let file = File::create(path).map_err(|e| HfeError::io(path, e))?;
    let mut w = BufWriter::new(file);
    render_vtk(&mut w, mesh, solution).map_err(|e| HfeError::io(path, e))?;
    w.flush().map_err(|e| HfeError::io(path, e))
}

fn render_vtk(w: &mut impl Write, mesh: &Tet10Mesh, s: &Solution) -> std::io::Result<()> {
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "hfe solution")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", mesh.num_nodes())?;
    for p in mesh.nodes() {
        writeln!(w, "{} {} {}", p[0], p[1], p[2])?;
    }
    let ne = mesh.num_elements();
    writeln!(w, "CELLS {} {}", ne, 11 * ne)?;
    for conn in mesh.elements() {
        let ids: Vec<String> = conn.iter().map(|n| n.to_string()).collect();
        writeln!(w, "10 {}", ids.join(" "))?;
    }
    writeln!(w, "CELL_TYPES {ne}")?;
    for _ in 0..ne {
        writeln!(w, "{VTK_QUADRATIC_TETRA}")?;
    }
    writeln!(w, "POINT_DATA {}", mesh.num_nodes())?;
    writeln!(w, "VECTORS displacement double")?;
    for u in &s.displacements {
        writeln!(w, "{} {} {}", u[0], u[1], u[2])?;
    }
    writeln!(w, "CELL_DATA {ne}")?;
    writeln!(w, "TENSORS strain double")?;
    for e in &s.strains {
        let m = e.to_matrix();
        for i in 0..3 {
            writeln!(w, "{} {} {}", m[(i, 0)], m[(i, 1)], m[(i, 2)])?;
        }
    }
    writeln!(w, "SCALARS von_mises double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for t in &s.stresses {
        writeln!(w, "{}", t.von_mises())?;
    }
    Ok(())
}

fn fmt(v: f64) -> String {
    format!("{v:.9e}")
}
