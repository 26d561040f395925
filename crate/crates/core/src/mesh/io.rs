//! OBJ (ASCII) and PLY (binary little-endian) mesh files.
//!
//! Coordinates are written as `f32`, so a mesh read back from either format re-encodes to the
//! same bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::Point3;

use super::TriangleMesh;
use crate::error::{Error, Result};
use crate::grid::write_bytes;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Ply,
}

impl MeshFormat {
    pub fn from_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "obj" => Some(MeshFormat::Obj),
            "ply" => Some(MeshFormat::Ply),
            _ => None,
        }
    }

    pub fn from_path(path: &Path) -> Option<Self> {
        path.extension().and_then(|e| e.to_str()).and_then(Self::from_name)
    }

    pub fn extension(self) -> &'static str {
        match self {
            MeshFormat::Obj => "obj",
            MeshFormat::Ply => "ply",
        }
    }
}

pub fn encode_obj(mesh: &TriangleMesh) -> String {
    let mut out = String::new();
    for v in &mesh.vertices {
        let _ = writeln!(out, "v {} {} {}", v.x as f32, v.y as f32, v.z as f32);
    }
    for t in &mesh.triangles {
        let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    out
}

/// Reads `v` and `f` records; polygons are fan-triangulated and `f a/b/c` index forms accepted.
pub fn decode_obj(text: &str, path: &Path) -> Result<TriangleMesh> {
    let mut mesh = TriangleMesh::default();
    for (lineno, line) in text.lines().enumerate() {
        let bad = |m: &str| Error::format(path, format!("line {}: {m}", lineno + 1));
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("v") => {
                let c: Vec<f32> = parts
                    .take(3)
                    .map(|s| s.parse::<f32>().map_err(|_| bad("bad vertex coordinate")))
                    .collect::<Result<_>>()?;
                if c.len() != 3 {
                    return Err(bad("vertex needs three coordinates"));
                }
                mesh.vertices.push(Point3::new(c[0] as f64, c[1] as f64, c[2] as f64));
            }
            Some("f") => {
                let idx: Vec<usize> = parts
                    .map(|s| {
                        let first = s.split('/').next().unwrap_or("");
                        match first.parse::<usize>() {
                            Ok(i) if i >= 1 => Ok(i - 1),
                            _ => Err(bad("face indices must be positive integers")),
                        }
                    })
                    .collect::<Result<_>>()?;
                if idx.len() < 3 {
                    return Err(bad("face needs at least three vertices"));
                }
                for w in 1..idx.len() - 1 {
                    mesh.triangles.push([idx[0], idx[w], idx[w + 1]]);
                }
            }
            _ => {}
        }
    }
    mesh.validate()
        .map_err(|e| Error::format(path, e.to_string()))?;
    Ok(mesh)
}

const PLY_HEADER_END: &str = "end_header\n";

pub fn encode_ply(mesh: &TriangleMesh) -> Vec<u8> {
    let header = format!(
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty float x\n\
         property float y\nproperty float z\nelement face {}\n\
         property list uchar int vertex_indices\n{PLY_HEADER_END}",
        mesh.vertices.len(),
        mesh.triangles.len()
    );
    let mut out = header.into_bytes();
    out.reserve(12 * mesh.vertices.len() + 13 * mesh.triangles.len());
    for v in &mesh.vertices {
        for c in [v.x, v.y, v.z] {
            out.extend((c as f32).to_le_bytes());
        }
    }
    for t in &mesh.triangles {
        out.push(3);
        for &i in t {
            out.extend((i as i32).to_le_bytes());
        }
    }
    out
}

/// Reads the layout produced by [`encode_ply`]: float xyz vertices and `uchar`/`int` index lists.
pub fn decode_ply(bytes: &[u8], path: &Path) -> Result<TriangleMesh> {
    let bad = |m: &str| Error::format(path, m.to_string());
    let end = bytes
        .windows(PLY_HEADER_END.len())
        .position(|w| w == PLY_HEADER_END.as_bytes())
        .ok_or_else(|| bad("missing end_header"))?;
    let header = std::str::from_utf8(&bytes[..end]).map_err(|_| bad("header is not text"))?;
    let mut lines = header.lines();
    if lines.next() != Some("ply") {
        return Err(bad("missing ply magic"));
    }
    let (mut n_vertices, mut n_faces) = (None, None);
    let mut vertex_props = Vec::new();
    let mut current = "";
    for line in lines {
        let parts: Vec<&str> = line.split_whitespace().collect();
        match parts.as_slice() {
            ["format", "binary_little_endian", _] => {}
            ["format", ..] => return Err(bad("only binary_little_endian PLY is supported")),
            ["comment", ..] | ["obj_info", ..] => {}
            ["element", name, count] => {
                let count = count.parse::<usize>().map_err(|_| bad("bad element count"))?;
                current = name;
                match *name {
                    "vertex" => n_vertices = Some(count),
                    "face" => n_faces = Some(count),
                    _ => return Err(bad("unsupported element")),
                }
            }
            ["property", "float", name] if current == "vertex" => vertex_props.push(*name),
            ["property", "list", "uchar", "int" | "uint", _] if current == "face" => {}
            [] => {}
            _ => return Err(bad(&format!("unsupported header line: {line}"))),
        }
    }
    if vertex_props != ["x", "y", "z"] {
        return Err(bad("vertices must have exactly float x, y, z"));
    }
    let nv = n_vertices.ok_or_else(|| bad("missing vertex element"))?;
    let nf = n_faces.unwrap_or(0);

    let mut pos = end + PLY_HEADER_END.len();
    let mut take = |n: usize| -> Result<&[u8]> {
        let s = bytes.get(pos..pos + n).ok_or_else(|| bad("truncated PLY body"))?;
        pos += n;
        Ok(s)
    };
    let f32_at = |s: &[u8], i: usize| f32::from_le_bytes(s[4 * i..4 * i + 4].try_into().unwrap());
    let mut mesh = TriangleMesh::default();
    for _ in 0..nv {
        let s = take(12)?;
        mesh.vertices.push(Point3::new(
            f32_at(s, 0) as f64,
            f32_at(s, 1) as f64,
            f32_at(s, 2) as f64,
        ));
    }
    for _ in 0..nf {
        if take(1)?[0] != 3 {
            return Err(bad("only triangle faces are supported"));
        }
        let s = take(12)?;
        let idx = [0, 1, 2].map(|i| i32::from_le_bytes(s[4 * i..4 * i + 4].try_into().unwrap()));
        if idx.iter().any(|&i| i < 0) {
            return Err(bad("negative vertex index"));
        }
        mesh.triangles.push(idx.map(|i| i as usize));
    }
    if pos != bytes.len() {
        return Err(bad("trailing bytes after PLY body"));
    }
    mesh.validate()
        .map_err(|e| Error::format(path, e.to_string()))?;
    Ok(mesh)
}

pub fn write_mesh(mesh: &TriangleMesh, format: MeshFormat, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    match format {
        MeshFormat::Obj => write_bytes(path, encode_obj(mesh).as_bytes()),
        MeshFormat::Ply => write_bytes(path, &encode_ply(mesh)),
    }
}

/// Reads an OBJ or PLY file, chosen by extension.
pub fn read_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let format = MeshFormat::from_path(path)
        .ok_or_else(|| Error::format(path, "mesh extension must be .obj or .ply"))?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    match format {
        MeshFormat::Obj => {
            let text = std::str::from_utf8(&bytes)
                .map_err(|_| Error::format(path, "OBJ file is not UTF-8"))?;
            decode_obj(text, path)
        }
        MeshFormat::Ply => decode_ply(&bytes, path),
    }
}
