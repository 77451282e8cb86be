//! Pinhole camera model: calibration ingestion, projection, ray
//! back-projection and two-view midpoint triangulation.
//!
//! Extrinsics are stored world→camera (`x_cam = R·X + t`). The camera frame is
//! x right, y down, z forward. World units are millimetres with `+z` up.

use std::fs;
use std::path::Path;

use nalgebra::{Matrix3, Point2, Point3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Points at or closer than this camera-frame depth (mm) cannot be projected.
pub const MIN_DEPTH_MM: f64 = 1e-6;

/// Tolerance on `RᵀR = I` and `det R = 1`.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// Rays closer to parallel than this angle cannot be triangulated.
pub const MIN_TRIANGULATION_ANGLE_DEG: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        let intrinsics = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        intrinsics.validate()?;
        Ok(intrinsics)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.fx, self.fy, self.cx, self.cy]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidIntrinsics("non-finite value".into()));
        }
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(Error::InvalidIntrinsics(format!(
                "focal lengths must be positive (fx={}, fy={})",
                self.fx, self.fy
            )));
        }
        if !(0.0..self.width as f64).contains(&self.cx)
            || !(0.0..self.height as f64).contains(&self.cy)
        {
            return Err(Error::InvalidIntrinsics(format!(
                "principal point ({}, {}) outside {}x{} image",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }
}

/// Rigid world→camera transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl CameraPose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        if !rotation.iter().chain(translation.iter()).all(|v| v.is_finite()) {
            return Err(Error::InvalidRotation("non-finite entry".into()));
        }
        let gram = rotation.transpose() * rotation - Matrix3::identity();
        let worst = gram.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        if worst > ROTATION_TOLERANCE {
            return Err(Error::InvalidRotation(format!(
                "not orthonormal (max |RᵀR - I| = {worst:e})"
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > ROTATION_TOLERANCE {
            return Err(Error::InvalidRotation(format!("determinant {det}")));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Pose of a camera at `eye` looking at `target`, with image "up" as close
    /// as possible to `up`.
    pub fn look_at(eye: Point3<f64>, target: Point3<f64>, up: Vector3<f64>) -> Result<Self> {
        let forward = target - eye;
        let right = forward.cross(&up);
        if forward.norm() == 0.0 || right.norm() < 1e-12 * forward.norm() * up.norm() {
            return Err(Error::InvalidRotation(
                "look-at direction parallel to up vector".into(),
            ));
        }
        let forward = forward.normalize();
        let right = right.normalize();
        let down = forward.cross(&right);
        let rotation = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let translation = -(rotation * eye.coords);
        Self::new(rotation, translation)
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// Camera centre in world coordinates, `-Rᵀ·t`.
    pub fn center(&self) -> Point3<f64> {
        Point3::from(-(self.rotation.transpose() * self.translation))
    }

    pub fn world_to_camera(&self, point: &Point3<f64>) -> Vector3<f64> {
        self.rotation * point.coords + self.translation
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ray {
    pub origin: Point3<f64>,
    pub direction: Unit<Vector3<f64>>,
}

impl Ray {
    pub fn new(origin: Point3<f64>, direction: Vector3<f64>) -> Self {
        Self {
            origin,
            direction: Unit::new_normalize(direction),
        }
    }

    pub fn at(&self, t: f64) -> Point3<f64> {
        self.origin + self.direction.as_ref() * t
    }

    pub fn distance_to(&self, point: &Point3<f64>) -> f64 {
        let offset = point - self.origin;
        let along = offset.dot(&self.direction);
        (offset - self.direction.as_ref() * along).norm()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibratedCamera {
    pub id: String,
    pub intrinsics: Intrinsics,
    pub pose: CameraPose,
}

impl CalibratedCamera {
    pub fn new(id: impl Into<String>, intrinsics: Intrinsics, pose: CameraPose) -> Result<Self> {
        intrinsics.validate()?;
        Ok(Self {
            id: id.into(),
            intrinsics,
            pose,
        })
    }

    pub fn width(&self) -> u32 {
        self.intrinsics.width
    }

    pub fn height(&self) -> u32 {
        self.intrinsics.height
    }

    pub fn center(&self) -> Point3<f64> {
        self.pose.center()
    }

    /// Pinhole projection of a world point to pixel coordinates. The result
    /// may fall outside the image.
    pub fn project(&self, point: &Point3<f64>) -> Result<Point2<f64>> {
        let cam = self.pose.world_to_camera(point);
        if !(cam.z > MIN_DEPTH_MM) {
            return Err(Error::BehindCamera);
        }
        let k = &self.intrinsics;
        Ok(Point2::new(
            k.fx * cam.x / cam.z + k.cx,
            k.fy * cam.y / cam.z + k.cy,
        ))
    }

    /// Viewing ray through a (possibly fractional) pixel.
    pub fn backproject_ray(&self, pixel: &Point2<f64>) -> Ray {
        let k = &self.intrinsics;
        let dir_cam = Vector3::new((pixel.x - k.cx) / k.fx, (pixel.y - k.cy) / k.fy, 1.0);
        Ray::new(self.center(), self.pose.rotation.transpose() * dir_cam)
    }
}

/// Midpoint of the common perpendicular between the viewing rays of `px1` in
/// `cam1` and `px2` in `cam2`.
pub fn triangulate(
    cam1: &CalibratedCamera,
    cam2: &CalibratedCamera,
    px1: &Point2<f64>,
    px2: &Point2<f64>,
) -> Result<Point3<f64>> {
    let r1 = cam1.backproject_ray(px1);
    let r2 = cam2.backproject_ray(px2);
    let d1 = r1.direction.as_ref();
    let d2 = r2.direction.as_ref();

    let sin_angle = d1.cross(d2).norm();
    if sin_angle < MIN_TRIANGULATION_ANGLE_DEG.to_radians().sin() {
        return Err(Error::DegenerateBaseline);
    }

    let w0 = r1.origin - r2.origin;
    let b = d1.dot(d2);
    let d = d1.dot(&w0);
    let e = d2.dot(&w0);
    let denom = 1.0 - b * b;
    let s = (b * e - d) / denom;
    let t = (e - b * d) / denom;

    let p1 = r1.at(s);
    let p2 = r2.at(t);
    Ok(nalgebra::center(&p1, &p2))
}

#[derive(Debug, Serialize, Deserialize)]
struct CalibrationFile {
    cameras: Vec<CameraEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CameraEntry {
    id: String,
    intrinsics: Intrinsics,
    rotation: [f64; 9],
    translation: [f64; 3],
}

impl TryFrom<CameraEntry> for CalibratedCamera {
    type Error = Error;

    fn try_from(entry: CameraEntry) -> Result<Self> {
        let rotation = Matrix3::from_row_slice(&entry.rotation);
        let translation = Vector3::from(entry.translation);
        let pose = CameraPose::new(rotation, translation)
            .map_err(|e| match e {
                Error::InvalidRotation(msg) => {
                    Error::InvalidRotation(format!("camera {:?}: {msg}", entry.id))
                }
                other => other,
            })?;
        CalibratedCamera::new(entry.id, entry.intrinsics, pose)
    }
}

impl From<&CalibratedCamera> for CameraEntry {
    fn from(cam: &CalibratedCamera) -> Self {
        let r = cam.pose.rotation();
        let t = cam.pose.translation();
        Self {
            id: cam.id.clone(),
            intrinsics: cam.intrinsics,
            rotation: [
                r[(0, 0)], r[(0, 1)], r[(0, 2)],
                r[(1, 0)], r[(1, 1)], r[(1, 2)],
                r[(2, 0)], r[(2, 1)], r[(2, 2)],
            ],
            translation: [t.x, t.y, t.z],
        }
    }
}

pub fn parse_calibration(text: &str) -> Result<Vec<CalibratedCamera>> {
    let file: CalibrationFile =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("calibration: {e}")))?;
    file.cameras.into_iter().map(CalibratedCamera::try_from).collect()
}

pub fn load_calibration(path: impl AsRef<Path>) -> Result<Vec<CalibratedCamera>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_calibration(&text)
}

/// Loads a calibration file and returns its first two cameras.
pub fn load_camera_pair(path: impl AsRef<Path>) -> Result<(CalibratedCamera, CalibratedCamera)> {
    let cameras = load_calibration(path)?;
    if cameras.len() < 2 {
        return Err(Error::TooFewCameras {
            required: 2,
            found: cameras.len(),
        });
    }
    let mut it = cameras.into_iter();
    Ok((it.next().unwrap(), it.next().unwrap()))
}

pub fn calibration_to_json(cameras: &[CalibratedCamera]) -> String {
    let file = CalibrationFile {
        cameras: cameras.iter().map(CameraEntry::from).collect(),
    };
    serde_json::to_string_pretty(&file).expect("calibration serializes")
}

pub fn save_calibration(path: impl AsRef<Path>, cameras: &[CalibratedCamera]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, calibration_to_json(cameras)).map_err(|e| Error::io(path, e))
}

/// Two 1280×720 cameras (fx = fy = 600) with orthogonal horizontal viewing
/// directions, each 400 mm from the world origin and looking at it.
pub fn orthogonal_pair_fixture() -> (CalibratedCamera, CalibratedCamera) {
    let intrinsics = Intrinsics::new(600.0, 600.0, 640.0, 360.0, 1280, 720).unwrap();
    let up = Vector3::z();
    let origin = Point3::origin();
    let pose1 = CameraPose::look_at(Point3::new(400.0, 0.0, 0.0), origin, up).unwrap();
    let pose2 = CameraPose::look_at(Point3::new(0.0, 400.0, 0.0), origin, up).unwrap();
    (
        CalibratedCamera::new("cam1", intrinsics, pose1).unwrap(),
        CalibratedCamera::new("cam2", intrinsics, pose2).unwrap(),
    )
}
