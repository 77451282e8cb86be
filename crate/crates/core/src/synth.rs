//! Ground-truth rendering of solids of revolution about a vertical axis, plus
//! controlled silhouette noise.

use std::fs;
use std::path::Path;

use nalgebra::{Point2, Point3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::{CalibratedCamera, Ray};
use crate::error::{Error, Result};
use crate::mask::Mask;
use crate::pnm;

/// Hits closer than this (mm) along a ray are ignored.
const MIN_HIT_DISTANCE: f64 = 1e-9;
/// Slack on the height and radius range checks (mm).
const RANGE_EPS: f64 = 1e-9;

/// Solid bounded by conical frusta between consecutive profile points and by
/// the bottom and top disks.
#[derive(Debug, Clone, PartialEq)]
pub struct RevolutionShape {
    axis_base: Point3<f64>,
    profile: Vec<(f64, f64)>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ShapeFile {
    axis_base: [f64; 3],
    profile: Vec<[f64; 2]>,
}

impl RevolutionShape {
    /// `profile` holds `(height offset, radius)` pairs, heights strictly
    /// increasing from 0.
    pub fn new(axis_base: Point3<f64>, profile: Vec<(f64, f64)>) -> Result<Self> {
        if profile.len() < 2 {
            return Err(Error::InvalidShape("need at least two profile points".into()));
        }
        if profile[0].0 != 0.0 {
            return Err(Error::InvalidShape("profile must start at height 0".into()));
        }
        if profile.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidShape("profile heights must increase".into()));
        }
        if profile
            .iter()
            .any(|&(h, r)| !h.is_finite() || !r.is_finite() || r < 0.0)
            || !axis_base.iter().all(|v| v.is_finite())
        {
            return Err(Error::InvalidShape("radii must be finite and non-negative".into()));
        }
        Ok(Self { axis_base, profile })
    }

    pub fn cylinder(axis_base: Point3<f64>, radius: f64, height: f64) -> Result<Self> {
        Self::new(axis_base, vec![(0.0, radius), (height, radius)])
    }

    pub fn axis_base(&self) -> Point3<f64> {
        self.axis_base
    }

    pub fn profile(&self) -> &[(f64, f64)] {
        &self.profile
    }

    pub fn true_width(&self) -> f64 {
        2.0 * self.max_radius()
    }

    pub fn true_height(&self) -> f64 {
        self.profile.last().unwrap().0
    }

    pub fn max_radius(&self) -> f64 {
        self.profile.iter().map(|p| p.1).fold(0.0, f64::max)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file: ShapeFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("shape: {e}")))?;
        Self::new(
            Point3::from(file.axis_base),
            file.profile.into_iter().map(|[h, r]| (h, r)).collect(),
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ShapeFile {
            axis_base: self.axis_base.coords.into(),
            profile: self.profile.iter().map(|&(h, r)| [h, r]).collect(),
        })
        .expect("shape serializes")
    }

    /// Nearest positive distance along `ray` at which it meets the surface.
    pub fn intersect(&self, ray: &Ray) -> Option<f64> {
        let o = ray.origin;
        let d = ray.direction.as_ref();
        let ax = o.x - self.axis_base.x;
        let ay = o.y - self.axis_base.y;
        let mut best: Option<f64> = None;
        let mut consider = |t: f64| {
            if t > MIN_HIT_DISTANCE && best.is_none_or(|b| t < b) {
                best = Some(t);
            }
        };

        for seg in self.profile.windows(2) {
            let ((h0, r0), (h1, r1)) = (seg[0], seg[1]);
            if r0 == 0.0 && r1 == 0.0 {
                continue;
            }
            let z0 = self.axis_base.z + h0;
            let z1 = self.axis_base.z + h1;
            let slope = (r1 - r0) / (h1 - h0);
            // radius along the ray: s(t) = s0 + s1·t
            let s0 = r0 + slope * (o.z - z0);
            let s1 = slope * d.z;
            let a = d.x * d.x + d.y * d.y - s1 * s1;
            let b = 2.0 * (ax * d.x + ay * d.y - s0 * s1);
            let c = ax * ax + ay * ay - s0 * s0;

            let mut check = |t: f64| {
                let z = o.z + t * d.z;
                let radius = s0 + s1 * t;
                if z >= z0 - RANGE_EPS && z <= z1 + RANGE_EPS && radius >= 0.0 {
                    consider(t);
                }
            };
            if a.abs() < 1e-14 {
                if b.abs() > 1e-14 {
                    check(-c / b);
                }
                continue;
            }
            let disc = b * b - 4.0 * a * c;
            if disc < 0.0 {
                continue;
            }
            let sq = disc.sqrt();
            // numerically stable root pair
            let q = -0.5 * (b + b.signum() * sq);
            check(q / a);
            if q != 0.0 {
                check(c / q);
            }
        }

        let caps = [
            (self.axis_base.z, self.profile[0].1),
            (self.axis_base.z + self.true_height(), self.profile.last().unwrap().1),
        ];
        for (zc, radius) in caps {
            if radius == 0.0 || d.z == 0.0 {
                continue;
            }
            let t = (zc - o.z) / d.z;
            let px = ax + t * d.x;
            let py = ay + t * d.y;
            if px * px + py * py <= radius * radius + RANGE_EPS {
                consider(t);
            }
        }
        best
    }
}

pub fn ray_shape_intersect(ray: &Ray, shape: &RevolutionShape) -> Option<f64> {
    shape.intersect(ray)
}

/// Per-pixel camera-frame depth (mm), 0 where no surface was hit.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: u32,
    height: u32,
    data: Vec<f64>,
}

impl DepthMap {
    pub fn new(width: u32, height: u32, data: Vec<f64>) -> Result<Self> {
        if data.len() != width as usize * height as usize {
            return Err(Error::InvalidParams(format!(
                "depth data length {} != {width}x{height}",
                data.len()
            )));
        }
        if data.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParams("depth values must be finite and >= 0".into()));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, u: u32, v: u32) -> f64 {
        self.data[v as usize * self.width as usize + u as usize]
    }

    /// Fills every empty pixel with a constant depth, standing in for a
    /// fronto-parallel backdrop behind the object.
    pub fn with_background(mut self, depth_mm: f64) -> Self {
        for v in self.data.iter_mut().filter(|v| **v == 0.0) {
            *v = depth_mm;
        }
        self
    }

    /// 16-bit big-endian P5, millimetres rounded and saturated at 65535.
    pub fn to_pgm_bytes(&self) -> Vec<u8> {
        let samples: Vec<u16> = self
            .data
            .iter()
            .map(|&z| z.round().min(65535.0) as u16)
            .collect();
        pnm::encode_pgm16(self.width, self.height, &samples)
    }

    pub fn from_pgm_bytes(bytes: &[u8]) -> Result<Self> {
        let g = pnm::decode_pgm(bytes)?;
        if g.maxval != 65535 {
            return Err(Error::UnsupportedMaxval(g.maxval));
        }
        Ok(Self {
            width: g.width,
            height: g.height,
            data: g.samples.into_iter().map(f64::from).collect(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        pnm::write_bytes(path, &self.to_pgm_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_pgm_bytes(&bytes)
    }
}

/// Camera-frame depth of the first hit through every pixel centre.
fn cast_pixels(camera: &CalibratedCamera, shape: &RevolutionShape) -> Vec<f64> {
    let w = camera.width();
    let h = camera.height();
    let forward = camera.pose.rotation().row(2).transpose();
    (0..h)
        .into_par_iter()
        .flat_map_iter(|v| {
            let forward = forward;
            (0..w).map(move |u| {
                let ray = camera.backproject_ray(&Point2::new(u as f64, v as f64));
                shape
                    .intersect(&ray)
                    .map_or(0.0, |t| t * ray.direction.dot(&forward))
            })
        })
        .collect()
}

pub fn render_mask(camera: &CalibratedCamera, shape: &RevolutionShape) -> Mask {
    let data = cast_pixels(camera, shape)
        .into_iter()
        .map(|z| (z > 0.0) as u8)
        .collect();
    Mask::new(camera.width(), camera.height(), data).expect("binary data of image size")
}

pub fn render_depth(camera: &CalibratedCamera, shape: &RevolutionShape) -> DepthMap {
    DepthMap {
        width: camera.width(),
        height: camera.height(),
        data: cast_pixels(camera, shape),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub boundary_flip_prob: f64,
    /// Positive dilates, negative erodes, by this many 3×3 steps.
    pub dilation_px: i32,
    pub seed: u64,
}

impl NoiseParams {
    pub fn new(boundary_flip_prob: f64, dilation_px: i32, seed: u64) -> Result<Self> {
        let noise = Self {
            boundary_flip_prob,
            dilation_px,
            seed,
        };
        noise.validate()?;
        Ok(noise)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.boundary_flip_prob) {
            return Err(Error::InvalidParams(format!(
                "flip probability {} outside [0, 1]",
                self.boundary_flip_prob
            )));
        }
        Ok(())
    }

    pub fn none() -> Self {
        Self {
            boundary_flip_prob: 0.0,
            dilation_px: 0,
            seed: 0,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let noise: Self =
            serde_json::from_str(&text).map_err(|e| Error::Parse(format!("noise: {e}")))?;
        noise.validate()?;
        Ok(noise)
    }
}

/// One 3×3 morphological step. Pixels outside the image are ignored.
fn morph_step(mask: &Mask, dilate: bool) -> Mask {
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    Mask::from_fn(mask.width(), mask.height(), |u, v| {
        let mut neighbours = (-1..=1)
            .flat_map(|dv| (-1..=1).map(move |du| (u as i64 + du, v as i64 + dv)))
            .filter(|&(x, y)| x >= 0 && y >= 0 && x < w && y < h)
            .map(|(x, y)| mask.get(x as u32, y as u32));
        if dilate {
            neighbours.any(|b| b)
        } else {
            neighbours.all(|b| b)
        }
    })
}

/// Pixels with a differently-valued pixel in their 8-neighbourhood.
fn boundary(mask: &Mask) -> Vec<bool> {
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    let mut out = Vec::with_capacity(mask.data().len());
    for v in 0..h {
        for u in 0..w {
            let here = mask.get(u as u32, v as u32);
            let edge = (-1..=1).any(|dv| {
                (-1..=1).any(|du| {
                    let (x, y) = (u + du, v + dv);
                    x >= 0 && y >= 0 && x < w && y < h && mask.get(x as u32, y as u32) != here
                })
            });
            out.push(edge);
        }
    }
    out
}

/// Signed dilation followed by random flips of boundary pixels. Noise is
/// drawn from ChaCha8 seeded with `noise.seed`, one draw per boundary pixel
/// in row-major order.
pub fn perturb_mask(mask: &Mask, noise: &NoiseParams) -> Mask {
    let mut out = mask.clone();
    for _ in 0..noise.dilation_px.unsigned_abs() {
        out = morph_step(&out, noise.dilation_px > 0);
    }
    if noise.boundary_flip_prob > 0.0 {
        let edges = boundary(&out);
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        let data = out
            .data()
            .iter()
            .zip(&edges)
            .map(|(&b, &edge)| {
                if edge && rng.random_bool(noise.boundary_flip_prob) {
                    1 - b
                } else {
                    b
                }
            })
            .collect();
        out = Mask::new(mask.width(), mask.height(), data).expect("binary data");
    }
    out
}
