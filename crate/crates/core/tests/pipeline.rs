use std::f64::consts::PI;

use csdf_core::certify::{weak_sdf, DEFAULT_EPS_P};
use csdf_core::grid::{make_analytic_grid, read_grid, write_grid, FieldKind, GridLayout, VoxelGrid};
use csdf_core::mesh::marching_cubes;
use csdf_core::oracle::AnalyticShape;
use csdf_core::smoothing::{smooth, SmoothingConfig, DEFAULT_TRUNCATION};
use nalgebra::Point3;
use proptest::prelude::*;

#[test]
fn sphere_survives_the_full_chain() {
    let layout = GridLayout::unit_cube(48).unwrap();
    let h = layout.spacing;
    let shape = AnalyticShape::sphere(Point3::origin(), 0.3).unwrap();
    let occupancy = make_analytic_grid(&shape, layout).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.grid");
    write_grid(&occupancy, &path).unwrap();
    let loaded = read_grid(&path).unwrap();
    assert_eq!(loaded.values(), occupancy.values());

    let cfg = SmoothingConfig::from_voxels(1.1, h, DEFAULT_TRUNCATION).unwrap();
    let sdf = weak_sdf(&smooth(&loaded, &cfg).unwrap(), DEFAULT_EPS_P).unwrap();
    assert_eq!(sdf.grid.kind(), FieldKind::WeakSdf);

    let mesh = marching_cubes(&sdf.grid, 0.0).unwrap();
    assert!(mesh.is_closed());
    assert_eq!(mesh.euler_characteristic(), 2);
    let expected = 4.0 / 3.0 * PI * 0.3f64.powi(3);
    let volume = mesh.signed_volume().abs();
    assert!((volume - expected).abs() / expected < 0.05, "{volume} vs {expected}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn binary_files_round_trip(
        n in 2usize..6,
        m in 2usize..6,
        values in proptest::collection::vec(0.0f64..=1.0, 216),
    ) {
        let layout = GridLayout::new([n, m, 6], Point3::new(-0.5, 0.25, 1.0), 0.125).unwrap();
        let values = values[..layout.len()].to_vec();
        let grid = VoxelGrid::new(layout, FieldKind::Smoothed, values).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.grid");
        write_grid(&grid, &path).unwrap();
        let back = read_grid(&path).unwrap();
        prop_assert_eq!(back.dims(), grid.dims());
        prop_assert_eq!(back.kind(), grid.kind());
        prop_assert_eq!(back.spacing(), grid.spacing());
        // values are stored as f32
        let rounded: Vec<f64> = grid.values().iter().map(|&v| v as f32 as f64).collect();
        prop_assert_eq!(back.values(), &rounded[..]);
    }
}
