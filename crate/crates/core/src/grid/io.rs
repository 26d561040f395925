//! Grid file container.
//!
//! Binary layout (all little-endian), 64-byte header then payload:
//!
//! | offset | size | field                          |
//! |--------|------|--------------------------------|
//! | 0      | 4    | magic `CSDF`                   |
//! | 4      | 4    | version `u32` (= 1)            |
//! | 8      | 12   | dims `3 x u32`                 |
//! | 20     | 24   | origin `3 x f64`               |
//! | 44     | 8    | spacing `f64`                  |
//! | 52     | 4    | value kind tag `u32`           |
//! | 56     | 8    | reserved, zero                 |
//! | 64     | 4·n  | values `f32`, x-fastest order  |
//!
//! The text variant starts with the line `CSDF-TEXT 1` followed by `dims`, `origin`, `spacing`,
//! `kind` lines, a `values` line and one value per line.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::Point3;

use super::{FieldKind, GridLayout, VoxelGrid};
use crate::error::{Error, Result};

pub const GRID_MAGIC: &[u8; 4] = b"CSDF";
pub const GRID_VERSION: u32 = 1;
pub const GRID_HEADER_LEN: usize = 64;
const TEXT_MAGIC: &str = "CSDF-TEXT";

/// Encodes a grid in the binary container.
pub fn encode_grid(grid: &VoxelGrid) -> Vec<u8> {
    let layout = grid.layout();
    let mut buf = Vec::with_capacity(GRID_HEADER_LEN + 4 * grid.len());
    buf.extend_from_slice(GRID_MAGIC);
    buf.extend_from_slice(&GRID_VERSION.to_le_bytes());
    for d in layout.dims {
        buf.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for c in layout.origin.coords.iter() {
        buf.extend_from_slice(&c.to_le_bytes());
    }
    buf.extend_from_slice(&layout.spacing.to_le_bytes());
    buf.extend_from_slice(&grid.kind().tag().to_le_bytes());
    buf.extend_from_slice(&[0u8; 8]);
    debug_assert_eq!(buf.len(), GRID_HEADER_LEN);
    for &v in grid.values() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    buf
}

/// Decodes either container variant; `path` is only used for error messages.
pub fn decode_grid(bytes: &[u8], path: &Path) -> Result<VoxelGrid> {
    if bytes.starts_with(TEXT_MAGIC.as_bytes()) {
        let text = std::str::from_utf8(bytes)
            .map_err(|_| Error::format(path, "text grid is not valid UTF-8"))?;
        return decode_text(text, path);
    }
    if bytes.len() < GRID_HEADER_LEN || &bytes[0..4] != GRID_MAGIC {
        return Err(Error::format(path, "missing CSDF magic"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32_at(4);
    if version != GRID_VERSION {
        return Err(Error::format(path, format!("unsupported version {version}")));
    }
    let dims = [u32_at(8) as usize, u32_at(12) as usize, u32_at(16) as usize];
    let origin = Point3::new(f64_at(20), f64_at(28), f64_at(36));
    let spacing = f64_at(44);
    let kind = FieldKind::from_tag(u32_at(52))
        .ok_or_else(|| Error::format(path, format!("unknown value kind {}", u32_at(52))))?;
    let layout = GridLayout::new(dims, origin, spacing)
        .map_err(|e| Error::format(path, e.to_string()))?;
    let payload = &bytes[GRID_HEADER_LEN..];
    if payload.len() != 4 * layout.len() {
        return Err(Error::format(
            path,
            format!(
                "expected {} payload bytes, found {}",
                4 * layout.len(),
                payload.len()
            ),
        ));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    VoxelGrid::new(layout, kind, values).map_err(|e| Error::format(path, e.to_string()))
}

fn decode_text(text: &str, path: &Path) -> Result<VoxelGrid> {
    let bad = |m: String| Error::format(path, m);
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let magic = lines.next().unwrap_or_default();
    if magic != format!("{TEXT_MAGIC} {GRID_VERSION}") {
        return Err(bad(format!("unexpected text header `{magic}`")));
    }
    let mut dims = None;
    let mut origin = None;
    let mut spacing = None;
    let mut kind = FieldKind::Scalar;
    for line in lines.by_ref() {
        let mut parts = line.split_whitespace();
        let key = parts.next().unwrap_or_default();
        let nums = |parts: std::str::SplitWhitespace<'_>| -> Result<Vec<f64>> {
            parts
                .map(|s| s.parse::<f64>().map_err(|_| bad(format!("bad number `{s}`"))))
                .collect()
        };
        match key {
            "dims" => {
                let v = nums(parts)?;
                if v.len() != 3 || v.iter().any(|x| x.fract() != 0.0 || *x < 0.0) {
                    return Err(bad("dims needs three non-negative integers".into()));
                }
                dims = Some([v[0] as usize, v[1] as usize, v[2] as usize]);
            }
            "origin" => {
                let v = nums(parts)?;
                if v.len() != 3 {
                    return Err(bad("origin needs three numbers".into()));
                }
                origin = Some(Point3::new(v[0], v[1], v[2]));
            }
            "spacing" => {
                let v = nums(parts)?;
                if v.len() != 1 {
                    return Err(bad("spacing needs one number".into()));
                }
                spacing = Some(v[0]);
            }
            "kind" => {
                let name = parts.next().unwrap_or_default();
                kind = FieldKind::from_name(name)
                    .ok_or_else(|| bad(format!("unknown kind `{name}`")))?;
            }
            "values" => break,
            other => return Err(bad(format!("unknown header key `{other}`"))),
        }
    }
    let layout = GridLayout::new(
        dims.ok_or_else(|| bad("missing dims".into()))?,
        origin.ok_or_else(|| bad("missing origin".into()))?,
        spacing.ok_or_else(|| bad("missing spacing".into()))?,
    )
    .map_err(|e| bad(e.to_string()))?;
    let values = lines
        .flat_map(str::split_whitespace)
        .map(|s| {
            s.parse::<f32>()
                .map(f64::from)
                .map_err(|_| bad(format!("bad value `{s}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    VoxelGrid::new(layout, kind, values).map_err(|e| bad(e.to_string()))
}

/// Text variant; values are written with f32 precision so both variants hold the same data.
pub fn encode_grid_text(grid: &VoxelGrid) -> String {
    use std::fmt::Write as _;
    let l = grid.layout();
    let mut s = String::new();
    let _ = writeln!(s, "{TEXT_MAGIC} {GRID_VERSION}");
    let _ = writeln!(s, "dims {} {} {}", l.dims[0], l.dims[1], l.dims[2]);
    let _ = writeln!(s, "origin {} {} {}", l.origin.x, l.origin.y, l.origin.z);
    let _ = writeln!(s, "spacing {}", l.spacing);
    let _ = writeln!(s, "kind {}", grid.kind().name());
    s.push_str("values\n");
    for &v in grid.values() {
        let _ = writeln!(s, "{}", v as f32);
    }
    s
}

pub fn write_grid(grid: &VoxelGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_bytes(path, &encode_grid(grid))
}

pub fn write_grid_text(grid: &VoxelGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_bytes(path, encode_grid_text(grid).as_bytes())
}

/// Reads a grid file, detecting the binary or text variant from its first bytes.
pub fn read_grid(path: impl AsRef<Path>) -> Result<VoxelGrid> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_grid(&bytes, path)
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}
