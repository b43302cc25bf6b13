//! Plain-text Tet10 mesh files.
//!
//! ```text
//! # comment
//! AXIAL 0 0 1            (optional)
//! NODES <count>
//! <id> <x> <y> <z>
//! ELEMENTS <count>
//! <id> <n1> ... <n10>
//! ATTRIBUTE <name> <count>   (optional, repeatable)
//! <element id> <value>
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::Tet10Mesh;
use crate::error::{HfeError, Result};

pub fn read_mesh(path: &Path) -> Result<Tet10Mesh> {
    let text = std::fs::read_to_string(path).map_err(|e| HfeError::io(path, e))?;
    parse_mesh(path, &text)
}

pub fn parse_mesh(path: &Path, text: &str) -> Result<Tet10Mesh> {
    let err = |line: usize, msg: &str| HfeError::parse(path, format!("line {line}: {msg}"));
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let mut axial = [0.0, 0.0, 1.0];
    let mut node_ids = Vec::new();
    let mut nodes = Vec::new();
    let mut element_ids = Vec::new();
    let mut raw_elements: Vec<[u64; 10]> = Vec::new();
    let mut attributes: Vec<(String, Vec<(u64, f64)>)> = Vec::new();

    while let Some((ln, line)) = lines.next() {
        let mut head = line.split_whitespace();
        let keyword = head.next().unwrap_or("").to_ascii_uppercase();
        let parse_count = |s: Option<&str>| -> Result<usize> {
            s.and_then(|v| v.parse().ok())
                .ok_or_else(|| err(ln, "expected a count"))
        };
        match keyword.as_str() {
            "AXIAL" => {
                let v: Vec<f64> = head.filter_map(|s| s.parse().ok()).collect();
                if v.len() != 3 {
                    return Err(err(ln, "AXIAL needs three numbers"));
                }
                axial = [v[0], v[1], v[2]];
            }
            "NODES" => {
                let n = parse_count(head.next())?;
                for _ in 0..n {
                    let (l, row) = lines
                        .next()
                        .ok_or_else(|| err(ln, "truncated node block"))?;
                    let f: Vec<&str> = row.split_whitespace().collect();
                    if f.len() != 4 {
                        return Err(err(l, "node line needs `id x y z`"));
                    }
                    node_ids.push(f[0].parse().map_err(|_| err(l, "bad node id"))?);
                    let mut p = [0.0; 3];
                    for d in 0..3 {
                        p[d] = f[d + 1].parse().map_err(|_| err(l, "bad coordinate"))?;
                    }
                    nodes.push(p);
                }
            }
            "ELEMENTS" => {
                let n = parse_count(head.next())?;
                for _ in 0..n {
                    let (l, row) = lines
                        .next()
                        .ok_or_else(|| err(ln, "truncated element block"))?;
                    let f: Vec<u64> = row
                        .split_whitespace()
                        .map(|s| s.parse())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| err(l, "bad element line"))?;
                    if f.len() != 11 {
                        return Err(err(l, "element line needs an id and 10 node ids"));
                    }
                    element_ids.push(f[0]);
                    let mut conn = [0u64; 10];
                    conn.copy_from_slice(&f[1..]);
                    raw_elements.push(conn);
                }
            }
            "ATTRIBUTE" => {
                let name = head
                    .next()
                    .ok_or_else(|| err(ln, "ATTRIBUTE needs a name"))?
                    .to_string();
                let n = parse_count(head.next())?;
                let mut vals = Vec::with_capacity(n);
                for _ in 0..n {
                    let (l, row) = lines
                        .next()
                        .ok_or_else(|| err(ln, "truncated attribute block"))?;
                    let f: Vec<&str> = row.split_whitespace().collect();
                    if f.len() != 2 {
                        return Err(err(l, "attribute line needs `id value`"));
                    }
                    vals.push((
                        f[0].parse().map_err(|_| err(l, "bad element id"))?,
                        f[1].parse().map_err(|_| err(l, "bad value"))?,
                    ));
                }
                attributes.push((name, vals));
            }
            other => return Err(err(ln, &format!("unexpected `{other}`"))),
        }
    }

    let index: HashMap<u64, usize> = node_ids
        .iter()
        .enumerate()
        .map(|(i, &id)| (id, i))
        .collect();
    let mut elements = Vec::with_capacity(raw_elements.len());
    for (e, conn) in raw_elements.iter().enumerate() {
        let mut c = [0usize; 10];
        for (slot, id) in c.iter_mut().zip(conn) {
            *slot = *index.get(id).ok_or_else(|| {
                HfeError::InvalidMesh(format!(
                    "element {} references missing node {id}",
                    element_ids[e]
                ))
            })?;
        }
        elements.push(c);
    }
    let mut mesh = Tet10Mesh::with_ids(nodes, node_ids, elements, element_ids.clone())?
        .with_axial_direction(axial)?;
    let eindex: HashMap<u64, usize> = element_ids
        .iter()
        .enumerate()
        .map(|(i, &id)| (id, i))
        .collect();
    for (name, vals) in attributes {
        let mut column = vec![f64::NAN; mesh.num_elements()];
        for (id, v) in vals {
            let e = *eindex.get(&id).ok_or_else(|| {
                HfeError::parse(path, format!("attribute `{name}`: unknown element {id}"))
            })?;
            column[e] = v;
        }
        if column.iter().any(|v| v.is_nan()) {
            return Err(HfeError::parse(
                path,
                format!("attribute `{name}` does not cover every element"),
            ));
        }
        mesh.set_attribute(&name, column)?;
    }
    Ok(mesh)
}

pub fn render_mesh(mesh: &Tet10Mesh) -> String {
    let mut out = String::new();
    let a = mesh.axial_direction();
    let _ = writeln!(out, "# tet10 mesh");
    let _ = writeln!(out, "AXIAL {} {} {}", a[0], a[1], a[2]);
    let _ = writeln!(out, "NODES {}", mesh.num_nodes());
    for (id, p) in mesh.node_ids().iter().zip(mesh.nodes()) {
        let _ = writeln!(out, "{id} {} {} {}", p[0], p[1], p[2]);
    }
    let _ = writeln!(out, "ELEMENTS {}", mesh.num_elements());
    let nid = mesh.node_ids();
    for (id, conn) in mesh.element_ids().iter().zip(mesh.elements()) {
        let _ = write!(out, "{id}");
        for &n in conn {
            let _ = write!(out, " {}", nid[n]);
        }
        out.push('\n');
    }
    for (name, vals) in mesh.attributes() {
        let _ = writeln!(out, "ATTRIBUTE {name} {}", vals.len());
        for (id, v) in mesh.element_ids().iter().zip(vals) {
            let _ = writeln!(out, "{id} {v}");
        }
    }
    out
}

pub fn write_mesh(mesh: &Tet10Mesh, path: &Path) -> Result<()> {
    std::fs::write(path, render_mesh(mesh)).map_err(|e| HfeError::io(path, e))
}
