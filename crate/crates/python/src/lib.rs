//! Python bindings for `lode`.
//!
//! Exposes cameras, masks, the circumference fit, the synthetic renderer and
//! the evaluation helpers as the `pylode` extension module.

use std::path::PathBuf;

use nalgebra::{Point2, Point3};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use lode::camera;
use lode::eval;
use lode::fitting;
use lode::synth;

create_exception!(pylode, LodeError, PyException);
create_exception!(pylode, NoObjectError, LodeError);
create_exception!(pylode, NoConvergedCircumferenceError, LodeError);
create_exception!(pylode, DegenerateBaselineError, LodeError);
create_exception!(pylode, BehindCameraError, LodeError);

fn to_py(err: lode::Error) -> PyErr {
    let msg = err.to_string();
    match err {
        lode::Error::NoObject => NoObjectError::new_err(msg),
        lode::Error::NoConvergedCircumference => NoConvergedCircumferenceError::new_err(msg),
        lode::Error::DegenerateBaseline => DegenerateBaselineError::new_err(msg),
        lode::Error::BehindCamera => BehindCameraError::new_err(msg),
        lode::Error::Io { .. } => PyIOError::new_err(msg),
        _ => PyValueError::new_err(msg),
    }
}

#[pyclass(name = "Camera", module = "pylode", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyCamera(camera::CalibratedCamera);

#[pymethods]
impl PyCamera {
    /// Camera from intrinsics and a row-major world→camera rotation and
    /// translation (mm).
    #[new]
    #[pyo3(signature = (id, fx, fy, cx, cy, width, height, rotation, translation))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        id: String,
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
        rotation: [f64; 9],
        translation: [f64; 3],
    ) -> PyResult<Self> {
        let k = camera::Intrinsics::new(fx, fy, cx, cy, width, height).map_err(to_py)?;
        let pose = camera::CameraPose::new(
            nalgebra::Matrix3::from_row_slice(&rotation),
            nalgebra::Vector3::from(translation),
        )
        .map_err(to_py)?;
        camera::CalibratedCamera::new(id, k, pose).map(Self).map_err(to_py)
    }

    #[getter]
    fn id(&self) -> &str {
        &self.0.id
    }

    #[getter]
    fn width(&self) -> u32 {
        self.0.width()
    }

    #[getter]
    fn height(&self) -> u32 {
        self.0.height()
    }

    #[getter]
    fn center(&self) -> (f64, f64, f64) {
        let c = self.0.center();
        (c.x, c.y, c.z)
    }

    fn project(&self, point: (f64, f64, f64)) -> PyResult<(f64, f64)> {
        let px = self.0.project(&Point3::new(point.0, point.1, point.2)).map_err(to_py)?;
        Ok((px.x, px.y))
    }

    /// Returns `(origin, unit_direction)`.
    fn backproject_ray(&self, pixel: (f64, f64)) -> ((f64, f64, f64), (f64, f64, f64)) {
        let ray = self.0.backproject_ray(&Point2::new(pixel.0, pixel.1));
        let (o, d) = (ray.origin, ray.direction);
        ((o.x, o.y, o.z), (d.x, d.y, d.z))
    }

    fn __repr__(&self) -> String {
        format!("Camera(id={:?}, {}x{})", self.0.id, self.0.width(), self.0.height())
    }
}

#[pyclass(name = "Mask", module = "pylode", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyMask(lode::Mask);

#[pymethods]
impl PyMask {
    /// `data` is row-major, one byte per pixel, values 0 or 1.
    #[new]
    fn new(width: u32, height: u32, data: Vec<u8>) -> PyResult<Self> {
        lode::Mask::new(width, height, data).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        lode::mask::load_mask(path).map(Self).map_err(to_py)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(path).map_err(to_py)
    }

    #[getter]
    fn width(&self) -> u32 {
        self.0.width()
    }

    #[getter]
    fn height(&self) -> u32 {
        self.0.height()
    }

    fn count_ones(&self) -> u64 {
        self.0.count_ones()
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, self.0.data())
    }

    /// `(u, v, mass)`; raises `NoObjectError` on an empty mask.
    fn centroid(&self) -> PyResult<(f64, f64, u64)> {
        let c = self.0.centroid().map_err(to_py)?;
        Ok((c.u, c.v, c.mass))
    }

    fn contains(&self, point: (f64, f64)) -> bool {
        self.0.contains(&Point2::new(point.0, point.1))
    }

    fn perturb(&self, boundary_flip_prob: f64, dilation_px: i32, seed: u64) -> PyResult<Self> {
        let noise = synth::NoiseParams::new(boundary_flip_prob, dilation_px, seed).map_err(to_py)?;
        Ok(Self(synth::perturb_mask(&self.0, &noise)))
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.0 == other.0
    }
}

#[pyclass(name = "FitParams", module = "pylode", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyFitParams(fitting::FitParams);

#[pymethods]
impl PyFitParams {
    #[new]
    #[pyo3(signature = (num_circumferences=500, dz_mm=1.0, points=20, r_start_mm=150.0, r_step_mm=0.5, rho_mm=1.0))]
    fn new(
        num_circumferences: usize,
        dz_mm: f64,
        points: usize,
        r_start_mm: f64,
        r_step_mm: f64,
        rho_mm: f64,
    ) -> PyResult<Self> {
        fitting::FitParams::from_linear_schedule(num_circumferences, dz_mm, points, r_start_mm, r_step_mm, rho_mm)
            .map(Self)
            .map_err(to_py)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        fitting::FitParams::load_override(path).map(Self).map_err(to_py)
    }

    #[getter]
    fn num_circumferences(&self) -> usize {
        self.0.num_circumferences()
    }

    #[getter]
    fn height_step_mm(&self) -> f64 {
        self.0.height_step_mm()
    }

    #[getter]
    fn points_per_circumference(&self) -> usize {
        self.0.points_per_circumference()
    }

    #[getter]
    fn radius_schedule(&self) -> Vec<f64> {
        self.0.radius_schedule().to_vec()
    }

    #[getter]
    fn min_radius_mm(&self) -> f64 {
        self.0.min_radius_mm()
    }
}

#[pyclass(name = "ObjectEstimate", module = "pylode", frozen, get_all)]
pub struct PyObjectEstimate {
    centroid_mm: (f64, f64, f64),
    width_mm: f64,
    height_mm: f64,
    converged: usize,
    iterations: usize,
}

#[pymethods]
impl PyObjectEstimate {
    fn __repr__(&self) -> String {
        format!(
            "ObjectEstimate(centroid_mm={:?}, width_mm={}, height_mm={}, converged={}, iterations={})",
            self.centroid_mm, self.width_mm, self.height_mm, self.converged, self.iterations
        )
    }
}

impl From<fitting::ObjectEstimate> for PyObjectEstimate {
    fn from(e: fitting::ObjectEstimate) -> Self {
        Self {
            centroid_mm: (e.centroid.x, e.centroid.y, e.centroid.z),
            width_mm: e.width_mm,
            height_mm: e.height_mm,
            converged: e.converged_count,
            iterations: e.iterations,
        }
    }
}

#[pyclass(name = "RevolutionShape", module = "pylode", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyShape(synth::RevolutionShape);

#[pymethods]
impl PyShape {
    /// `profile` is a list of `(height_offset_mm, radius_mm)` pairs.
    #[new]
    fn new(axis_base: (f64, f64, f64), profile: Vec<(f64, f64)>) -> PyResult<Self> {
        synth::RevolutionShape::new(Point3::new(axis_base.0, axis_base.1, axis_base.2), profile)
            .map(Self)
            .map_err(to_py)
    }

    #[staticmethod]
    fn cylinder(axis_base: (f64, f64, f64), radius: f64, height: f64) -> PyResult<Self> {
        synth::RevolutionShape::cylinder(Point3::new(axis_base.0, axis_base.1, axis_base.2), radius, height)
            .map(Self)
            .map_err(to_py)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        synth::RevolutionShape::load(path).map(Self).map_err(to_py)
    }

    #[getter]
    fn true_width(&self) -> f64 {
        self.0.true_width()
    }

    #[getter]
    fn true_height(&self) -> f64 {
        self.0.true_height()
    }

    /// Distance along the ray to the first surface hit, or `None`.
    fn intersect(&self, origin: (f64, f64, f64), direction: (f64, f64, f64)) -> Option<f64> {
        let ray = camera::Ray::new(
            Point3::new(origin.0, origin.1, origin.2),
            nalgebra::Vector3::new(direction.0, direction.1, direction.2),
        );
        self.0.intersect(&ray)
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }
}

#[pyclass(name = "DepthMap", module = "pylode", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyDepthMap(synth::DepthMap);

#[pymethods]
impl PyDepthMap {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        synth::DepthMap::load(path).map(Self).map_err(to_py)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(path).map_err(to_py)
    }

    #[getter]
    fn width(&self) -> u32 {
        self.0.width()
    }

    #[getter]
    fn height(&self) -> u32 {
        self.0.height()
    }

    /// Row-major camera-frame depths in mm, 0 where empty.
    fn values(&self) -> Vec<f64> {
        self.0.data().to_vec()
    }

    fn with_background(&self, depth_mm: f64) -> Self {
        Self(self.0.clone().with_background(depth_mm))
    }
}

#[pyfunction]
fn load_calibration(path: PathBuf) -> PyResult<Vec<PyCamera>> {
    camera::load_calibration(path)
        .map(|cams| cams.into_iter().map(PyCamera).collect())
        .map_err(to_py)
}

#[pyfunction]
fn save_calibration(path: PathBuf, cameras: Vec<PyCamera>) -> PyResult<()> {
    let cams: Vec<_> = cameras.into_iter().map(|c| c.0).collect();
    camera::save_calibration(path, &cams).map_err(to_py)
}

/// The two-camera test rig: 1280×720, f = 600 px, orthogonal horizontal
/// views 400 mm from the origin.
#[pyfunction]
fn orthogonal_pair_fixture() -> (PyCamera, PyCamera) {
    let (a, b) = camera::orthogonal_pair_fixture();
    (PyCamera(a), PyCamera(b))
}

#[pyfunction]
fn triangulate(cam1: &PyCamera, cam2: &PyCamera, px1: (f64, f64), px2: (f64, f64)) -> PyResult<(f64, f64, f64)> {
    let p = camera::triangulate(&cam1.0, &cam2.0, &Point2::new(px1.0, px1.1), &Point2::new(px2.0, px2.1))
        .map_err(to_py)?;
    Ok((p.x, p.y, p.z))
}

#[pyfunction]
fn default_params() -> PyFitParams {
    PyFitParams(fitting::FitParams::default_params())
}

#[pyfunction]
#[pyo3(signature = (cam1, cam2, mask1, mask2, params=None))]
fn fit(
    py: Python<'_>,
    cam1: &PyCamera,
    cam2: &PyCamera,
    mask1: &PyMask,
    mask2: &PyMask,
    params: Option<&PyFitParams>,
) -> PyResult<PyObjectEstimate> {
    let params = params.map_or_else(fitting::FitParams::default_params, |p| p.0.clone());
    py.detach(|| fitting::fit(&cam1.0, &cam2.0, &mask1.0, &mask2.0, &params))
        .map(PyObjectEstimate::from)
        .map_err(to_py)
}

#[pyfunction]
fn render_mask(py: Python<'_>, camera: &PyCamera, shape: &PyShape) -> PyMask {
    PyMask(py.detach(|| synth::render_mask(&camera.0, &shape.0)))
}

#[pyfunction]
fn render_depth(py: Python<'_>, camera: &PyCamera, shape: &PyShape) -> PyDepthMap {
    PyDepthMap(py.detach(|| synth::render_depth(&camera.0, &shape.0)))
}

#[pyfunction]
fn lsr(successes: usize, total: usize) -> PyResult<f64> {
    eval::lsr(successes, total).map_err(to_py)
}

/// `{"median", "min", "max", "q25", "q75"}` with linear interpolation
/// between closest ranks.
#[pyfunction]
fn error_stats(py: Python<'_>, values: Vec<f64>) -> PyResult<Py<PyAny>> {
    let stats = eval::error_stats(&values).map_err(to_py)?;
    json_to_py(py, &serde_json::to_string(&stats).expect("stats serialize"))
}

#[pyfunction]
fn segdd_estimate(mask: &PyMask, depth: &PyDepthMap, camera: &PyCamera) -> PyResult<(f64, f64)> {
    eval::segdd_estimate(&mask.0, &depth.0, &camera.0).map_err(to_py)
}

/// Evaluates a manifest and returns the summary as a dict. When `report` is
/// given, the CSV report and its sidecars are written there.
#[pyfunction]
#[pyo3(signature = (manifest, report=None, params=None))]
fn run_manifest(
    py: Python<'_>,
    manifest: PathBuf,
    report: Option<PathBuf>,
    params: Option<&PyFitParams>,
) -> PyResult<Py<PyAny>> {
    let params = params.map_or_else(fitting::FitParams::default_params, |p| p.0.clone());
    let result = py.detach(|| {
        let r = eval::run_manifest(&manifest, &params)?;
        if let Some(path) = &report {
            eval::write_report(&r, path)?;
        }
        Ok::<_, lode::Error>(r)
    });
    let r = result.map_err(to_py)?;
    json_to_py(py, &serde_json::to_string(&r.summary).expect("summary serializes"))
}

fn json_to_py(py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

#[pymodule]
fn pylode(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("LodeError", py.get_type::<LodeError>())?;
    m.add("NoObjectError", py.get_type::<NoObjectError>())?;
    m.add("NoConvergedCircumferenceError", py.get_type::<NoConvergedCircumferenceError>())?;
    m.add("DegenerateBaselineError", py.get_type::<DegenerateBaselineError>())?;
    m.add("BehindCameraError", py.get_type::<BehindCameraError>())?;
    m.add_class::<PyCamera>()?;
    m.add_class::<PyMask>()?;
    m.add_class::<PyFitParams>()?;
    m.add_class::<PyObjectEstimate>()?;
    m.add_class::<PyShape>()?;
    m.add_class::<PyDepthMap>()?;
    m.add_function(wrap_pyfunction!(load_calibration, m)?)?;
    m.add_function(wrap_pyfunction!(save_calibration, m)?)?;
    m.add_function(wrap_pyfunction!(orthogonal_pair_fixture, m)?)?;
    m.add_function(wrap_pyfunction!(triangulate, m)?)?;
    m.add_function(wrap_pyfunction!(default_params, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(render_mask, m)?)?;
    m.add_function(wrap_pyfunction!(render_depth, m)?)?;
    m.add_function(wrap_pyfunction!(lsr, m)?)?;
    m.add_function(wrap_pyfunction!(error_stats, m)?)?;
    m.add_function(wrap_pyfunction!(segdd_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(run_manifest, m)?)?;
    Ok(())
}
