//! Voxel grids over an axis-aligned box with trilinear evaluation.
//!
//! Voxel `(i, j, k)` has its center at `origin + spacing * (i, j, k)`, and values are stored
//! x-fastest: `index = i + nx * (j + ny * k)`. Everything outside the stored voxels reads as
//! empty space (value 0).

mod io;

pub(crate) use io::write_bytes;
pub use io::{
    decode_grid, encode_grid, encode_grid_text, read_grid, write_grid, write_grid_text,
    GRID_HEADER_LEN, GRID_MAGIC, GRID_VERSION,
};

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};
use crate::oracle::AnalyticShape;

/// A point in world coordinates.
pub type WorldPoint = Point3<f64>;

/// What the values of a grid mean. Stored in the grid file as a `u32` tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FieldKind {
    /// Occupancy probabilities, clamped to `[0, 1]`.
    Occupancy,
    /// Gaussian-smoothed occupancy, also in `[0, 1]`.
    Smoothed,
    /// Weak signed distance in world units, positive inside.
    WeakSdf,
    /// Exact signed distance in world units, positive inside.
    Distance,
    /// Any other scalar field.
    Scalar,
}

impl FieldKind {
    pub fn tag(self) -> u32 {
        match self {
            FieldKind::Occupancy => 0,
            FieldKind::Smoothed => 1,
            FieldKind::WeakSdf => 2,
            FieldKind::Distance => 3,
            FieldKind::Scalar => 4,
        }
    }

    pub fn from_tag(tag: u32) -> Option<Self> {
        Some(match tag {
            0 => FieldKind::Occupancy,
            1 => FieldKind::Smoothed,
            2 => FieldKind::WeakSdf,
            3 => FieldKind::Distance,
            4 => FieldKind::Scalar,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            FieldKind::Occupancy => "occupancy",
            FieldKind::Smoothed => "smoothed",
            FieldKind::WeakSdf => "weak-sdf",
            FieldKind::Distance => "distance",
            FieldKind::Scalar => "scalar",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [
            FieldKind::Occupancy,
            FieldKind::Smoothed,
            FieldKind::WeakSdf,
            FieldKind::Distance,
            FieldKind::Scalar,
        ]
        .into_iter()
        .find(|k| k.name() == name)
    }

    /// Whether values of this kind live in `[0, 1]` and are clamped on write.
    pub fn is_probability(self) -> bool {
        matches!(self, FieldKind::Occupancy | FieldKind::Smoothed)
    }
}

/// Placement of a voxel lattice in world space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridLayout {
    pub dims: [usize; 3],
    /// Center of voxel `(0, 0, 0)`.
    pub origin: WorldPoint,
    /// Edge length of a (cubic) voxel.
    pub spacing: f64,
}

impl GridLayout {
    pub fn new(dims: [usize; 3], origin: WorldPoint, spacing: f64) -> Result<Self> {
        let layout = GridLayout {
            dims,
            origin,
            spacing,
        };
        layout.validate()?;
        Ok(layout)
    }

    /// `n` voxels per axis tiling the cube `[min, max]^3` exactly.
    pub fn cube(n: usize, min: f64, max: f64) -> Result<Self> {
        if !(max > min) {
            return Err(Error::InvalidGrid(format!("empty cube [{min}, {max}]")));
        }
        let spacing = (max - min) / n as f64;
        let c = min + 0.5 * spacing;
        Self::new([n, n, n], Point3::new(c, c, c), spacing)
    }

    /// `n` voxels per axis tiling the unit cube centered at the origin.
    pub fn unit_cube(n: usize) -> Result<Self> {
        Self::cube(n, -0.5, 0.5)
    }

    fn validate(&self) -> Result<()> {
        if self.dims.iter().any(|&d| d < 2) {
            return Err(Error::InvalidGrid(format!(
                "every dimension must be at least 2, got {:?}",
                self.dims
            )));
        }
        if !(self.spacing.is_finite() && self.spacing > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "spacing must be positive, got {}",
                self.spacing
            )));
        }
        if !self.origin.coords.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let [nx, ny, _] = self.dims;
        [index % nx, (index / nx) % ny, index / (nx * ny)]
    }

    #[inline]
    pub fn voxel_center(&self, i: usize, j: usize, k: usize) -> WorldPoint {
        self.origin + Vector3::new(i as f64, j as f64, k as f64) * self.spacing
    }

    pub fn center_of(&self, index: usize) -> WorldPoint {
        let [i, j, k] = self.coords(index);
        self.voxel_center(i, j, k)
    }

    /// World-space box covered by the voxels (voxel centers plus half a voxel).
    pub fn bounds(&self) -> (WorldPoint, WorldPoint) {
        let half = Vector3::repeat(0.5 * self.spacing);
        let extent = Vector3::new(
            (self.dims[0] - 1) as f64,
            (self.dims[1] - 1) as f64,
            (self.dims[2] - 1) as f64,
        ) * self.spacing;
        (self.origin - half, self.origin + extent + half)
    }

    /// Continuous voxel coordinates of `p` (voxel centers sit at integers).
    #[inline]
    pub fn to_voxel(&self, p: &WorldPoint) -> Vector3<f64> {
        (p - self.origin) / self.spacing
    }

    /// The eight trilinear neighbors of `p` with their weights.
    ///
    /// Neighbors outside the lattice are reported with `None`; they read as the fill value 0.
    /// Returns `None` when `p` lies outside [`GridLayout::bounds`].
    #[inline]
    pub fn trilinear_stencil(&self, p: &WorldPoint) -> Option<[(Option<usize>, f64); 8]> {
        let mut g = self.to_voxel(p);
        // snap rounding noise so voxel centers reproduce stored values exactly
        for a in 0..3 {
            let r = g[a].round();
            if (g[a] - r).abs() < 1e-9 {
                g[a] = r;
            }
        }
        let mut base = [0isize; 3];
        let mut frac = [0.0f64; 3];
        for a in 0..3 {
            let n = self.dims[a] as f64;
            if !(g[a] >= -0.5 && g[a] <= n - 0.5) {
                return None;
            }
            let f = g[a].floor();
            base[a] = f as isize;
            frac[a] = g[a] - f;
        }
        let mut out = [(None, 0.0); 8];
        for (corner, slot) in out.iter_mut().enumerate() {
            let mut idx = [0usize; 3];
            let mut weight = 1.0;
            let mut inside = true;
            for a in 0..3 {
                let bit = (corner >> a) & 1;
                let c = base[a] + bit as isize;
                weight *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
                if c < 0 || c >= self.dims[a] as isize {
                    inside = false;
                } else {
                    idx[a] = c as usize;
                }
            }
            *slot = (
                inside.then(|| self.index(idx[0], idx[1], idx[2])),
                weight,
            );
        }
        Some(out)
    }
}

/// A scalar field sampled on a regular lattice of cubic voxels.
///
/// Grids are immutable once built, apart from the clamping mutators used by the optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    layout: GridLayout,
    kind: FieldKind,
    values: Vec<f64>,
}

impl VoxelGrid {
    /// Builds a grid, clamping values to `[0, 1]` for probability kinds.
    pub fn new(layout: GridLayout, kind: FieldKind, mut values: Vec<f64>) -> Result<Self> {
        layout.validate()?;
        if values.len() != layout.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values for dims {:?}, got {}",
                layout.len(),
                layout.dims,
                values.len()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "non-finite value at index {bad}"
            )));
        }
        if kind.is_probability() {
            for v in &mut values {
                *v = clamp_unit(*v);
            }
        }
        Ok(VoxelGrid {
            layout,
            kind,
            values,
        })
    }

    pub fn filled(layout: GridLayout, kind: FieldKind, value: f64) -> Result<Self> {
        Self::new(layout, kind, vec![value; layout.len()])
    }

    pub fn from_fn(
        layout: GridLayout,
        kind: FieldKind,
        f: impl Fn(WorldPoint) -> f64,
    ) -> Result<Self> {
        let values = (0..layout.len()).map(|i| f(layout.center_of(i))).collect();
        Self::new(layout, kind, values)
    }

    pub fn layout(&self) -> &GridLayout {
        &self.layout
    }

    pub fn dims(&self) -> [usize; 3] {
        self.layout.dims
    }

    pub fn spacing(&self) -> f64 {
        self.layout.spacing
    }

    pub fn origin(&self) -> WorldPoint {
        self.layout.origin
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.layout.index(i, j, k)]
    }

    /// Writes one voxel; probability kinds store `min(max(v, 0), 1)`.
    pub fn set(&mut self, i: usize, j: usize, k: usize, value: f64) {
        let idx = self.layout.index(i, j, k);
        self.values[idx] = if self.kind.is_probability() {
            clamp_unit(value)
        } else {
            value
        };
    }

    /// Applies `f(index, value)` to every voxel, clamping like [`VoxelGrid::set`].
    pub fn update(&mut self, f: impl Fn(usize, f64) -> f64) {
        let clamp = self.kind.is_probability();
        for (i, v) in self.values.iter_mut().enumerate() {
            let nv = f(i, *v);
            *v = if clamp { clamp_unit(nv) } else { nv };
        }
    }

    /// Same lattice, new values and kind.
    pub fn with_values(&self, kind: FieldKind, values: Vec<f64>) -> Result<Self> {
        Self::new(self.layout, kind, values)
    }

    pub fn with_kind(mut self, kind: FieldKind) -> Result<Self> {
        if kind.is_probability() && !self.kind.is_probability() {
            return Self::new(self.layout, kind, self.values);
        }
        self.kind = kind;
        Ok(self)
    }

    /// Trilinear interpolation of the stored values; 0 outside the grid's bounding box.
    #[inline]
    pub fn sample_trilinear(&self, p: &WorldPoint) -> f64 {
        match self.layout.trilinear_stencil(p) {
            None => 0.0,
            Some(stencil) => stencil
                .iter()
                .map(|&(idx, w)| idx.map_or(0.0, |i| w * self.values[i]))
                .sum(),
        }
    }

    /// Binary occupancy decision: 1 when the interpolated value is at least 1/2.
    #[inline]
    pub fn hard_classify(&self, p: &WorldPoint) -> u8 {
        u8::from(self.sample_trilinear(p) >= 0.5)
    }

    /// True when every value is exactly 0 or 1.
    pub fn is_binary(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    /// Thresholds at 1/2 (ties occupied) into a binary occupancy grid.
    pub fn binarize(&self) -> VoxelGrid {
        VoxelGrid {
            layout: self.layout,
            kind: FieldKind::Occupancy,
            values: self
                .values
                .iter()
                .map(|&v| if v >= 0.5 { 1.0 } else { 0.0 })
                .collect(),
        }
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

#[inline]
fn clamp_unit(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

/// Binary occupancy grid of an analytic shape: 1 where the voxel center is inside.
pub fn make_analytic_grid(shape: &AnalyticShape, layout: GridLayout) -> Result<VoxelGrid> {
    shape.validate()?;
    VoxelGrid::from_fn(layout, FieldKind::Occupancy, |p| {
        if shape.contains(&p) {
            1.0
        } else {
            0.0
        }
    })
}
