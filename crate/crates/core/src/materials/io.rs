//! Per-element material CSV: `element_id,density,E,nu,sigma_y,Ep`.
//! Empty `sigma_y`/`Ep` cells mean the element is purely elastic.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ElementMaterial, MaterialField, Plasticity};
use crate::error::{HfeError, Result};
use crate::mesh::Tet10Mesh;

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    element_id: u64,
    density: f64,
    #[serde(rename = "E")]
    modulus: f64,
    nu: f64,
    sigma_y: Option<f64>,
    #[serde(rename = "Ep")]
    tangent: Option<f64>,
}

pub fn write_materials(mesh: &Tet10Mesh, field: &MaterialField, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for (id, m) in mesh.element_ids().iter().zip(field.elements()) {
        w.serialize(Row {
            element_id: *id,
            density: m.density,
            modulus: m.modulus,
            nu: m.poisson,
            sigma_y: m.plasticity.map(|p| p.yield_stress),
            tangent: m.plasticity.map(|p| p.tangent_modulus),
        })
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| HfeError::io(path, e))
}

pub fn read_materials(mesh: &Tet10Mesh, path: &Path) -> Result<MaterialField> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut by_id = HashMap::new();
    for row in r.deserialize::<Row>() {
        let row = row.map_err(|e| csv_err(path, e))?;
        let plasticity = match (row.sigma_y, row.tangent) {
            (Some(yield_stress), Some(tangent_modulus)) => Some(Plasticity {
                yield_stress,
                tangent_modulus,
            }),
            _ => None,
        };
        by_id.insert(
            row.element_id,
            ElementMaterial {
                density: row.density,
                modulus: row.modulus,
                poisson: row.nu,
                plasticity,
            },
        );
    }
    let elements = mesh
        .element_ids()
        .iter()
        .map(|id| {
            by_id
                .get(id)
                .copied()
                .ok_or_else(|| HfeError::parse(path, format!("no material for element {id}")))
        })
        .collect::<Result<Vec<_>>>()?;
    MaterialField::new(elements)
}

pub(crate) fn csv_err(path: &Path, e: csv::Error) -> HfeError {
    HfeError::parse(path, e.to_string())
}
