//! Exact Euclidean distance transform of binary grids.
//!
//! Squared distances are computed with the separable lower-envelope algorithm (one pass of
//! 1D parabola envelopes per axis), which is exact for the Euclidean metric on a lattice.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{FieldKind, GridLayout, VoxelGrid};

/// Signed distances plus whether any side had no opposite-class voxel at all.
#[derive(Debug, Clone)]
pub struct DistanceTransform {
    pub grid: VoxelGrid,
    /// Set when the grid holds a single class; distances then saturate at the grid diagonal.
    pub saturated: bool,
}

/// Signed distance from each voxel center to the nearest voxel center of the opposite class,
/// in world units, positive on occupied voxels.
pub fn exact_distance_transform(grid: &VoxelGrid) -> Result<DistanceTransform> {
    require_binary(grid)?;
    let layout = *grid.layout();
    let occupied: Vec<bool> = grid.values().iter().map(|&v| v == 1.0).collect();

    let to_empty = squared_edt(&layout, |i| !occupied[i]);
    let to_occupied = squared_edt(&layout, |i| occupied[i]);

    let diag = diagonal(&layout);
    let mut saturated = false;
    let values = occupied
        .iter()
        .enumerate()
        .map(|(i, &occ)| {
            let d2 = if occ { to_empty[i] } else { to_occupied[i] };
            let d = if d2.is_finite() {
                d2.sqrt() * layout.spacing
            } else {
                saturated = true;
                diag
            };
            if occ {
                d
            } else {
                -d
            }
        })
        .collect();
    Ok(DistanceTransform {
        grid: VoxelGrid::new(layout, FieldKind::Distance, values)?,
        saturated,
    })
}

/// O(n²) reference for [`exact_distance_transform`]; only meant for small grids.
pub fn brute_force_distance_transform(grid: &VoxelGrid) -> Result<DistanceTransform> {
    require_binary(grid)?;
    let layout = *grid.layout();
    let vals = grid.values();
    let diag = diagonal(&layout);
    let mut saturated = false;
    let values = (0..layout.len())
        .map(|i| {
            let a = layout.coords(i);
            let occ = vals[i] == 1.0;
            let best = (0..layout.len())
                .filter(|&j| (vals[j] == 1.0) != occ)
                .map(|j| {
                    let b = layout.coords(j);
                    (0..3)
                        .map(|k| {
                            let d = a[k] as f64 - b[k] as f64;
                            d * d
                        })
                        .sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min);
            let d = if best.is_finite() {
                best.sqrt() * layout.spacing
            } else {
                saturated = true;
                diag
            };
            if occ {
                d
            } else {
                -d
            }
        })
        .collect();
    Ok(DistanceTransform {
        grid: VoxelGrid::new(layout, FieldKind::Distance, values)?,
        saturated,
    })
}

fn require_binary(grid: &VoxelGrid) -> Result<()> {
    if grid.is_binary() {
        Ok(())
    } else {
        Err(Error::InvalidGrid(
            "distance transform needs a binary grid (values 0 or 1)".into(),
        ))
    }
}

fn diagonal(layout: &GridLayout) -> f64 {
    layout
        .dims
        .iter()
        .map(|&n| ((n - 1) as f64).powi(2))
        .sum::<f64>()
        .sqrt()
        * layout.spacing
}

/// Squared voxel-unit distance to the nearest voxel where `is_feature` holds.
fn squared_edt(layout: &GridLayout, is_feature: impl Fn(usize) -> bool + Sync) -> Vec<f64> {
    let mut f: Vec<f64> = (0..layout.len())
        .into_par_iter()
        .map(|i| if is_feature(i) { 0.0 } else { f64::INFINITY })
        .collect();
    let [nx, ny, _] = layout.dims;
    let strides = [1, nx, nx * ny];
    for axis in 0..3 {
        let n = layout.dims[axis];
        let stride = strides[axis];
        // line starts: every voxel whose coordinate along `axis` is zero
        let starts: Vec<usize> = (0..layout.len())
            .filter(|&i| layout.coords(i)[axis] == 0)
            .collect();
        let lines: Vec<(usize, Vec<f64>)> = starts
            .par_iter()
            .map(|&s| {
                let line: Vec<f64> = (0..n).map(|t| f[s + t * stride]).collect();
                (s, lower_envelope(&line))
            })
            .collect();
        for (s, line) in lines {
            for (t, v) in line.into_iter().enumerate() {
                f[s + t * stride] = v;
            }
        }
    }
    f
}

/// 1D squared distance transform of a sampled function (lower envelope of parabolas).
fn lower_envelope(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let sites: Vec<usize> = (0..n).filter(|&q| f[q].is_finite()).collect();
    if sites.is_empty() {
        return vec![f64::INFINITY; n];
    }
    let mut v: Vec<usize> = Vec::with_capacity(sites.len());
    let mut z: Vec<f64> = Vec::with_capacity(sites.len() + 1);
    let intersect = |p: usize, q: usize| -> f64 {
        let (pf, qf) = (p as f64, q as f64);
        ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * (qf - pf))
    };
    for &q in &sites {
        loop {
            match v.last() {
                None => {
                    v.push(q);
                    z.clear();
                    z.push(f64::NEG_INFINITY);
                    break;
                }
                Some(&p) => {
                    let s = intersect(p, q);
                    if s <= *z.last().unwrap() {
                        v.pop();
                        z.pop();
                        if v.is_empty() {
                            continue;
                        }
                    } else {
                        v.push(q);
                        z.push(s);
                        break;
                    }
                }
            }
        }
    }
    z.push(f64::INFINITY);
    let mut out = vec![0.0; n];
    let mut k = 0;
    for (q, slot) in out.iter_mut().enumerate() {
        let qf = q as f64;
        while z[k + 1] < qf {
            k += 1;
        }
        let p = v[k];
        let d = qf - p as f64;
        *slot = d * d + f[p];
    }
    out
}
