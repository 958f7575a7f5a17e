//! Depth frames from the generator pushed through back-projection and rasterization.

use std::collections::BTreeSet;

use wirewatch_core::geometry::{backproject, rasterize_obstacles, voxel_downsample, GridSpec, VoxelSpec};
use wirewatch_core::io::ply;
use wirewatch_core::synth::{generate, DepthConfig, SynthConfig};
use wirewatch_core::{BinaryMask, PointCloudF64};

fn cells(mask: &BinaryMask, depth: &wirewatch_core::geometry::DepthFrame, d: &DepthConfig) -> BTreeSet<(usize, usize)> {
    let cloud = backproject(depth, &d.intrinsics, mask).unwrap();
    let cloud = voxel_downsample(&cloud, VoxelSpec::new(0.01).unwrap());
    rasterize_obstacles(&cloud, &GridSpec::default(), &d.extrinsics())
        .unwrap()
        .grid
        .occupied_cells()
        .into_iter()
        .collect()
}

#[test]
fn noise_objects_reach_cells_the_cable_does_not() {
    let cfg = SynthConfig {
        frames: 3,
        depth: Some(DepthConfig::default()),
        ..SynthConfig::default()
    };
    let seq = generate(&cfg).unwrap();
    let d = cfg.depth.unwrap();
    let depth = &seq.depth.as_ref().unwrap()[2];
    let cable = cells(&seq.ground_truth[2], depth, &d);
    assert!(!cable.is_empty());
    for n in &seq.noise {
        let noise = cells(&n.footprint, depth, &d);
        assert!(!noise.is_empty(), "noise objects sit inside the obstacle band");
        // pixel margins are finer than a cell, so shared cells are possible
        assert!(!noise.is_subset(&cable));
    }
    // the bare floor is below the band
    let floor = seq.ground_truth[2].union(&seq.noise_union().unwrap()).complement();
    assert!(cells(&floor, depth, &d).is_empty());
}

#[test]
fn cloud_survives_ply_round_trip_cellwise() {
    let cfg = SynthConfig {
        frames: 1,
        depth: Some(DepthConfig::default()),
        ..SynthConfig::default()
    };
    let seq = generate(&cfg).unwrap();
    let d = cfg.depth.unwrap();
    let cloud = backproject(&seq.depth.as_ref().unwrap()[0], &d.intrinsics, &seq.ground_truth[0]).unwrap();
    let back: PointCloudF64 = ply::decode(&ply::encode(&cloud)).unwrap();
    assert_eq!(back.len(), cloud.len());
    let spec = GridSpec::default();
    let a = rasterize_obstacles(&cloud, &spec, &d.extrinsics()).unwrap().grid;
    let b = rasterize_obstacles(&back, &spec, &d.extrinsics()).unwrap().grid;
    assert_eq!(a.occupied_cells(), b.occupied_cells());
}
