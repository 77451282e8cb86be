#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use lode::camera::{orthogonal_pair_fixture, save_calibration, CalibratedCamera, CameraPose, Intrinsics};
use lode::eval::{Configuration, DepthPaths, Manifest};
use lode::mask::Mask;
use lode::synth::{perturb_mask, render_depth, render_mask, NoiseParams, RevolutionShape};
use nalgebra::{Point3, Vector3};

pub fn cylinder() -> RevolutionShape {
    RevolutionShape::cylinder(Point3::origin(), 40.0, 120.0).unwrap()
}

pub fn fixture_masks(shape: &RevolutionShape) -> (CalibratedCamera, CalibratedCamera, Mask, Mask) {
    let (c1, c2) = orthogonal_pair_fixture();
    let m1 = render_mask(&c1, shape);
    let m2 = render_mask(&c2, shape);
    (c1, c2, m1, m2)
}

/// Half-resolution version of the orthogonal fixture (640×360, f = 300).
pub fn small_pair() -> (CalibratedCamera, CalibratedCamera) {
    let k = Intrinsics::new(300.0, 300.0, 320.0, 180.0, 640, 360).unwrap();
    let up = Vector3::z();
    let o = Point3::origin();
    (
        CalibratedCamera::new("left", k, CameraPose::look_at(Point3::new(400.0, 0.0, 0.0), o, up).unwrap()).unwrap(),
        CalibratedCamera::new("right", k, CameraPose::look_at(Point3::new(0.0, 400.0, 0.0), o, up).unwrap()).unwrap(),
    )
}

pub fn suite_shapes() -> Vec<(&'static str, RevolutionShape)> {
    let o = Point3::origin();
    vec![
        ("cylinder", cylinder()),
        ("cup", RevolutionShape::new(o, vec![(0.0, 28.0), (95.0, 42.0)]).unwrap()),
        (
            "wineglass",
            RevolutionShape::new(
                Point3::new(5.0, -5.0, 0.0),
                vec![(0.0, 30.0), (4.0, 30.0), (6.0, 4.0), (70.0, 4.0), (80.0, 30.0), (140.0, 38.0)],
            )
            .unwrap(),
        ),
    ]
}

pub fn suite_noise() -> Vec<(&'static str, NoiseParams)> {
    vec![
        ("clean", NoiseParams::none()),
        ("flips", NoiseParams::new(0.3, 0, 11).unwrap()),
        ("dilated", NoiseParams::new(0.2, 2, 23).unwrap()),
    ]
}

/// Writes the 3 shapes × 3 noise levels suite under `dir` and returns the
/// manifest path. Depth maps carry a 1 m backdrop.
pub fn write_suite(dir: &Path) -> PathBuf {
    let (c1, c2) = small_pair();
    save_calibration(dir.join("calib.json"), &[c1.clone(), c2.clone()]).unwrap();
    let mut configurations = Vec::new();
    for (shape_name, shape) in suite_shapes() {
        let clean = [render_mask(&c1, &shape), render_mask(&c2, &shape)];
        let depth = [
            render_depth(&c1, &shape).with_background(1000.0),
            render_depth(&c2, &shape).with_background(1000.0),
        ];
        for (noise_name, noise) in suite_noise() {
            let id = format!("{shape_name}-{noise_name}");
            let mut masks = Vec::new();
            let mut depths = Vec::new();
            for (i, cam) in [&c1, &c2].into_iter().enumerate() {
                let cam_noise = NoiseParams { seed: noise.seed + i as u64, ..noise };
                let m = perturb_mask(&clean[i], &cam_noise);
                let mask_name = format!("{id}_mask_{}.pgm", cam.id);
                let depth_name = format!("{id}_depth_{}.pgm", cam.id);
                m.save(dir.join(&mask_name)).unwrap();
                depth[i].save(dir.join(&depth_name)).unwrap();
                masks.push(PathBuf::from(mask_name));
                depths.push(PathBuf::from(depth_name));
            }
            configurations.push(Configuration {
                id,
                calib: "calib.json".into(),
                masks: [masks[0].clone(), masks[1].clone()],
                depth: Some(DepthPaths::PerCamera(depths)),
                gt_w_mm: shape.true_width(),
                gt_h_mm: shape.true_height(),
                tags: vec![shape_name.to_string(), noise_name.to_string()],
            });
        }
    }
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&Manifest { configurations }).unwrap()).unwrap();
    path
}

/// Percentile with 1-based closest ranks: rank `1 + p(n-1)`, interpolated
/// between the two neighbouring order statistics.
pub fn oracle_percentile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = 1.0 + p * (v.len() as f64 - 1.0);
    let below = rank.floor() as usize;
    let frac = rank - below as f64;
    if below >= v.len() {
        return v[v.len() - 1];
    }
    v[below - 1] * (1.0 - frac) + v[below] * frac
}
