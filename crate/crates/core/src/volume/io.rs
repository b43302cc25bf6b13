//! Raw little-endian voxel data with a `key = value` sidecar header.
//!
//! ```text
//! dims = 64 64 32
//! spacing_mm = 0.25 0.25 0.25
//! origin_mm = 0 0 0
//! dtype = f32
//! kind = density
//! data_file = volume.raw
//! ```
//!
//! `data_file` is optional and defaults to the header path with a `.raw`
//! extension. Supported dtypes: `u8`, `i16`, `u16`, `i32`, `f32`, `f64`.

use std::path::{Path, PathBuf};

use crate::error::{HfeError, Result};
use crate::kv::{self, KeyValues};

use super::{VolumeKind, VoxelVolume};

fn data_path(header: &Path, kv: &KeyValues) -> PathBuf {
    match kv.get("data_file") {
        Some(name) => header.parent().unwrap_or(Path::new(".")).join(name),
        None => header.with_extension("raw"),
    }
}

pub fn read_volume(header: &Path) -> Result<VoxelVolume> {
    let kv = KeyValues::read(header)?;
    let dims: [usize; 3] = kv.triple("dims")?;
    let spacing: [f64; 3] = kv.triple("spacing_mm")?;
    let origin: [f64; 3] = kv.triple("origin_mm")?;
    let kind_raw = kv.require("kind")?;
    let kind = VolumeKind::parse(kind_raw)
        .ok_or_else(|| HfeError::parse(header, format!("unknown kind `{kind_raw}`")))?;
    let dtype = kv.get("dtype").unwrap_or("f32");
    let raw_path = data_path(header, &kv);
    let bytes = std::fs::read(&raw_path).map_err(|e| HfeError::io(&raw_path, e))?;
    let values = decode(&bytes, dtype)
        .ok_or_else(|| HfeError::parse(&raw_path, format!("cannot decode data as `{dtype}`")))?;
    VoxelVolume::new(dims, spacing, origin, values, kind)
}

fn decode(bytes: &[u8], dtype: &str) -> Option<Vec<f32>> {
    macro_rules! chunks {
        ($t:ty, $n:expr) => {{
            if bytes.len() % $n != 0 {
                return None;
            }
            bytes
                .chunks_exact($n)
                .map(|c| <$t>::from_le_bytes(c.try_into().unwrap()) as f32)
                .collect()
        }};
    }
    Some(match dtype {
        "u8" => bytes.iter().map(|&b| b as f32).collect(),
        "i16" => chunks!(i16, 2),
        "u16" => chunks!(u16, 2),
        "i32" => chunks!(i32, 4),
        "f32" => chunks!(f32, 4),
        "f64" => chunks!(f64, 8),
        _ => return None,
    })
}

/// Writes `header` plus its `.raw` sibling as `f32`.
pub fn write_volume(volume: &VoxelVolume, header: &Path) -> Result<()> {
    let raw_path = header.with_extension("raw");
    let file_name = raw_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let text = kv::render(&[
        ("dims", kv::triple_str(&volume.dims())),
        ("spacing_mm", kv::triple_str(&volume.spacing())),
        ("origin_mm", kv::triple_str(&volume.origin())),
        ("dtype", "f32".into()),
        ("kind", volume.kind().as_str().into()),
        ("data_file", file_name),
    ]);
    std::fs::write(header, text).map_err(|e| HfeError::io(header, e))?;
    let mut bytes = Vec::with_capacity(volume.values().len() * 4);
    for v in volume.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(&raw_path, bytes).map_err(|e| HfeError::io(&raw_path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_volume() {
        let dir = tempfile::tempdir().unwrap();
        let vol = VoxelVolume::from_fn(
            [3, 2, 2],
            [0.5, 0.5, 1.0],
            [1.0, -2.0, 0.25],
            VolumeKind::Grey,
            |p| (p[0] * 10.0 - p[2]) as f32,
        )
        .unwrap();
        let path = dir.path().join("grey.hdr");
        write_volume(&vol, &path).unwrap();
        assert_eq!(read_volume(&path).unwrap(), vol);
    }

    #[test]
    fn reads_integer_dtypes() {
        let dir = tempfile::tempdir().unwrap();
        let hdr = dir.path().join("ct.hdr");
        std::fs::write(
            &hdr,
            "dims = 2 1 1\nspacing_mm = 1 1 1\norigin_mm = 0 0 0\ndtype = i16\nkind = grey\n",
        )
        .unwrap();
        let mut raw = Vec::new();
        raw.extend_from_slice(&(-1000i16).to_le_bytes());
        raw.extend_from_slice(&(1200i16).to_le_bytes());
        std::fs::write(dir.path().join("ct.raw"), raw).unwrap();
        let vol = read_volume(&hdr).unwrap();
        assert_eq!(vol.values(), &[-1000.0, 1200.0]);
    }

    #[test]
    fn size_mismatch_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let hdr = dir.path().join("v.hdr");
        std::fs::write(
            &hdr,
            "dims = 2 2 1\nspacing_mm = 1 1 1\norigin_mm = 0 0 0\ndtype = u8\nkind = mask\n",
        )
        .unwrap();
        std::fs::write(dir.path().join("v.raw"), [1u8, 0, 1]).unwrap();
        assert!(matches!(read_volume(&hdr), Err(HfeError::InvalidVolume(_))));
    }
}
