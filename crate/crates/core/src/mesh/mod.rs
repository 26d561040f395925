//! Marching-cubes isosurfaces and triangle meshes.

mod io;
mod tables;

pub use io::{
    decode_obj, decode_ply, encode_obj, encode_ply, read_mesh, write_mesh, MeshFormat,
};

use std::collections::HashMap;

use nalgebra::Point3;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{GridLayout, VoxelGrid, WorldPoint};
use tables::{CORNERS, EDGES, TRIANGLES};

/// Isovalue used for extraction unless overridden: slightly outside the zero level set.
pub const DEFAULT_ISOVALUE: f64 = -0.1;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<WorldPoint>,
    pub triangles: Vec<[usize; 3]>,
}

impl TriangleMesh {
    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(v) = self.vertices.iter().find(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidShape(format!("non-finite vertex {v}")));
        }
        let n = self.vertices.len();
        for (i, t) in self.triangles.iter().enumerate() {
            if t.iter().any(|&v| v >= n) {
                return Err(Error::InvalidShape(format!(
                    "triangle {i} references a vertex out of range ({n} vertices): {t:?}"
                )));
            }
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(Error::InvalidShape(format!("triangle {i} is degenerate: {t:?}")));
            }
        }
        Ok(())
    }

    /// Area of every triangle.
    pub fn triangle_areas(&self) -> Vec<f64> {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| self.vertices[i]);
                0.5 * (b - a).cross(&(c - a)).norm()
            })
            .collect()
    }

    pub fn area(&self) -> f64 {
        self.triangle_areas().iter().sum()
    }

    /// Signed enclosed volume; positive when triangle normals point outward.
    pub fn signed_volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| self.vertices[i].coords);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    /// How many triangles use each undirected edge.
    pub fn edge_counts(&self) -> HashMap<(usize, usize), usize> {
        let mut counts = HashMap::new();
        for t in &self.triangles {
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                *counts.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        counts
    }

    /// Every edge is shared by exactly two triangles.
    pub fn is_closed(&self) -> bool {
        !self.triangles.is_empty() && self.edge_counts().values().all(|&c| c == 2)
    }

    /// `V − E + F`, counting only vertices referenced by a triangle.
    pub fn euler_characteristic(&self) -> i64 {
        let mut used = vec![false; self.vertices.len()];
        for t in &self.triangles {
            for &v in t {
                used[v] = true;
            }
        }
        let v = used.iter().filter(|&&u| u).count() as i64;
        v - self.edge_counts().len() as i64 + self.triangles.len() as i64
    }
}

/// Identifies the lattice edge from voxel `index` toward `+axis`.
type EdgeKey = usize;

fn edge_key(layout: &GridLayout, corner: [usize; 3], axis: usize) -> EdgeKey {
    3 * layout.index(corner[0], corner[1], corner[2]) + axis
}

/// Lower corner offset and axis of each local cell edge.
fn local_edges() -> [([usize; 3], usize); 12] {
    EDGES.map(|[a, b]| {
        let (ca, cb) = (CORNERS[a], CORNERS[b]);
        let axis = (0..3).find(|&i| ca[i] != cb[i]).expect("cell edges are axis aligned");
        let lower = [0, 1, 2].map(|i| ca[i].min(cb[i]));
        (lower, axis)
    })
}

/// Triangulates `{field = isovalue}` with the inside (`field > isovalue`) enclosed by outward
/// facing triangles.
///
/// Vertices are welded per lattice edge and numbered in order of first use while scanning cells
/// x-fastest, so the output is deterministic.
pub fn marching_cubes(field: &VoxelGrid, isovalue: f64) -> Result<TriangleMesh> {
    if !isovalue.is_finite() {
        return Err(Error::InvalidConfig(format!("isovalue must be finite, got {isovalue}")));
    }
    let layout = *field.layout();
    let [nx, ny, nz] = layout.dims;
    let values = field.values();
    let edges = local_edges();

    let slabs: Vec<Vec<[EdgeKey; 3]>> = (0..nz - 1)
        .into_par_iter()
        .map(|k| {
            let mut tris = Vec::new();
            for j in 0..ny - 1 {
                for i in 0..nx - 1 {
                    let mut case = 0usize;
                    for (c, off) in CORNERS.iter().enumerate() {
                        let v = values[layout.index(i + off[0], j + off[1], k + off[2])];
                        if v <= isovalue {
                            case |= 1 << c;
                        }
                    }
                    let row = &TRIANGLES[case];
                    for tri in row.chunks_exact(3).take_while(|t| t[0] >= 0) {
                        let key = |e: i8| {
                            let (lower, axis) = edges[e as usize];
                            edge_key(&layout, [i + lower[0], j + lower[1], k + lower[2]], axis)
                        };
                        // table winding faces away from the corners above the isovalue
                        tris.push([key(tri[0]), key(tri[1]), key(tri[2])]);
                    }
                }
            }
            tris
        })
        .collect();

    let mut ids: HashMap<EdgeKey, usize> = HashMap::new();
    let mut mesh = TriangleMesh::default();
    for tri in slabs.into_iter().flatten() {
        let t = tri.map(|key| {
            *ids.entry(key).or_insert_with(|| {
                mesh.vertices.push(edge_vertex(&layout, values, key, isovalue));
                mesh.vertices.len() - 1
            })
        });
        mesh.triangles.push(t);
    }
    Ok(mesh)
}

fn edge_vertex(layout: &GridLayout, values: &[f64], key: EdgeKey, isovalue: f64) -> WorldPoint {
    let (idx, axis) = (key / 3, key % 3);
    let a = layout.coords(idx);
    let mut b = a;
    b[axis] += 1;
    let (va, vb) = (values[idx], values[layout.index(b[0], b[1], b[2])]);
    let t = if va == vb { 0.5 } else { ((isovalue - va) / (vb - va)).clamp(0.0, 1.0) };
    let pa = layout.voxel_center(a[0], a[1], a[2]);
    let pb = layout.voxel_center(b[0], b[1], b[2]);
    Point3::from(pa.coords + (pb.coords - pa.coords) * t)
}
