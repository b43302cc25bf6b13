//! DVC grid files: a CSV of grid points plus a key=value sidecar header
//! (`<name>.hdr`) carrying origin, spacing, dims and displacement units.

use std::path::{Path, PathBuf};

use super::{DvcGrid, GridGeometry};
use crate::error::{HfeError, Result};
use crate::kv::{render, triple_str, KeyValues};
use crate::materials::io::csv_err;

const COLUMNS: [&str; 11] = [
    "i",
    "j",
    "k",
    "x_mm",
    "y_mm",
    "z_mm",
    "ux",
    "uy",
    "uz",
    "correlate",
    "inside_bone",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DisplacementUnits {
    #[default]
    Millimetres,
    Micrometres,
}

impl DisplacementUnits {
    pub fn as_str(self) -> &'static str {
        match self {
            DisplacementUnits::Millimetres => "mm",
            DisplacementUnits::Micrometres => "um",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "mm" => Some(DisplacementUnits::Millimetres),
            "um" | "μm" | "µm" => Some(DisplacementUnits::Micrometres),
            _ => None,
        }
    }

    /// Millimetres per file unit.
    fn to_mm(self) -> f64 {
        match self {
            DisplacementUnits::Millimetres => 1.0,
            DisplacementUnits::Micrometres => 1e-3,
        }
    }
}

pub fn header_path(path: &Path) -> PathBuf {
    path.with_extension("hdr")
}

pub fn write_dvc(path: &Path, grid: &DvcGrid, units: DisplacementUnits) -> Result<()> {
    let g = grid.geometry();
    let header = render(&[
        ("origin_mm", triple_str(&g.origin)),
        ("spacing_mm", g.spacing.to_string()),
        ("dims", triple_str(&g.dims)),
        ("units", units.as_str().to_string()),
    ]);
    let hdr = header_path(path);
    std::fs::write(&hdr, header).map_err(|e| HfeError::io(&hdr, e))?;
    let scale = 1.0 / units.to_mm();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(COLUMNS).map_err(|e| csv_err(path, e))?;
    for idx in 0..grid.num_points() {
        let [i, j, k] = g.ijk(idx);
        let p = g.position(i, j, k);
        let mut row = vec![i.to_string(), j.to_string(), k.to_string()];
        row.extend(p.iter().map(|v| v.to_string()));
        match grid.displacement(idx) {
            Some(u) => row.extend(u.iter().map(|v| (v * scale).to_string())),
            None => row.extend(["", "", ""].map(String::from)),
        }
        row.push(u8::from(grid.correlate()[idx]).to_string());
        row.push(u8::from(grid.inside_bone()[idx]).to_string());
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| HfeError::io(path, e))
}

pub fn read_dvc(path: &Path) -> Result<DvcGrid> {
    let hdr = header_path(path);
    let kv = KeyValues::read(&hdr)?;
    let geometry = GridGeometry::new(
        kv.triple("origin_mm")?,
        kv.number("spacing_mm")?,
        kv.triple("dims")?,
    )
    .map_err(|e| HfeError::parse(&hdr, e.to_string()))?;
    let units_str = kv.get("units").unwrap_or("mm");
    let units = DisplacementUnits::parse(units_str)
        .ok_or_else(|| HfeError::parse(&hdr, format!("unknown units `{units_str}`")))?;
    let n = geometry.num_points();
    let mut displacements = vec![[0.0; 3]; n];
    let mut correlate = vec![false; n];
    let mut inside = vec![false; n];
    let mut seen = vec![false; n];
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let headers = r.headers().map_err(|e| csv_err(path, e))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| HfeError::parse(path, format!("missing column `{name}`")))
    };
    let cols: Vec<usize> = COLUMNS.iter().map(|c| col(c)).collect::<Result<_>>()?;
    for (line, row) in r.records().enumerate() {
        let row = row.map_err(|e| csv_err(path, e))?;
        let field = |c: usize| row.get(cols[c]).unwrap_or("").trim();
        let bad = |what: &str| HfeError::parse(path, format!("row {}: {what}", line + 2));
        let index = |c: usize| field(c).parse::<usize>().map_err(|_| bad("bad grid index"));
        let (i, j, k) = (index(0)?, index(1)?, index(2)?);
        if i >= geometry.dims[0] || j >= geometry.dims[1] || k >= geometry.dims[2] {
            return Err(bad("grid index outside dims"));
        }
        let idx = geometry.index(i, j, k);
        if std::mem::replace(&mut seen[idx], true) {
            return Err(bad("duplicate grid point"));
        }
        let flag = |c: usize| match field(c) {
            "1" | "true" => Ok(true),
            "0" | "false" => Ok(false),
            _ => Err(bad("flag must be 0 or 1")),
        };
        correlate[idx] = flag(9)?;
        inside[idx] = flag(10)?;
        if correlate[idx] {
            for d in 0..3 {
                let v: f64 = field(6 + d).parse().map_err(|_| bad("bad displacement"))?;
                displacements[idx][d] = v * units.to_mm();
            }
        }
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(HfeError::parse(
            path,
            format!("grid point {:?} missing", geometry.ijk(missing)),
        ));
    }
    DvcGrid::new(geometry, displacements, correlate, inside)
}
