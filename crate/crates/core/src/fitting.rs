//! Iterative 3D-2D shape fitting with a stack of horizontal circumferences.
//!
//! The object is localised by triangulating the two silhouette centroids. A
//! band of `L` circumferences, `Δz` apart and centred on that point, starts at
//! the first radius of the schedule. Each pass samples `N` points on every
//! unconverged circumference and projects them into both views; a
//! circumference whose points all land inside both masks is frozen, the rest
//! move to the next schedule entry. The loop stops once every circumference is
//! frozen or the schedule runs out.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use nalgebra::{Point2, Point3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::{triangulate, CalibratedCamera};
use crate::error::{Error, Result};
use crate::mask::{Mask, PixelCentroid};

const SCHEDULE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct FitParams {
    num_circumferences: usize,
    height_step_mm: f64,
    points_per_circumference: usize,
    radius_schedule: Vec<f64>,
    min_radius_mm: f64,
}

impl FitParams {
    /// Validates and builds parameters. The schedule must be strictly
    /// decreasing and end at `min_radius_mm`.
    pub fn new(
        num_circumferences: usize,
        height_step_mm: f64,
        points_per_circumference: usize,
        radius_schedule: Vec<f64>,
        min_radius_mm: f64,
    ) -> Result<Self> {
        if num_circumferences < 1 {
            return Err(Error::InvalidParams("need at least one circumference".into()));
        }
        if points_per_circumference < 3 {
            return Err(Error::InvalidParams(
                "need at least three points per circumference".into(),
            ));
        }
        if !(height_step_mm > 0.0 && height_step_mm.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "height step must be positive, got {height_step_mm}"
            )));
        }
        if !(min_radius_mm > 0.0 && min_radius_mm.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "minimum radius must be positive, got {min_radius_mm}"
            )));
        }
        if radius_schedule.is_empty() {
            return Err(Error::InvalidParams("empty radius schedule".into()));
        }
        if radius_schedule.iter().any(|r| !r.is_finite())
            || radius_schedule.windows(2).any(|w| w[1] >= w[0])
        {
            return Err(Error::InvalidParams(
                "radius schedule must be finite and strictly decreasing".into(),
            ));
        }
        if *radius_schedule.last().unwrap() != min_radius_mm {
            return Err(Error::InvalidParams(
                "radius schedule must end at the minimum radius".into(),
            ));
        }
        Ok(Self {
            num_circumferences,
            height_step_mm,
            points_per_circumference,
            radius_schedule,
            min_radius_mm,
        })
    }

    /// `L = 500` circumferences 1 mm apart, `N = 20` points each, radii
    /// 150.0, 149.5, …, 1.5 and finally ρ = 1.0 mm.
    pub fn default_params() -> Self {
        Self::from_linear_schedule(500, 1.0, 20, 150.0, 0.5, 1.0).expect("default params are valid")
    }

    /// Schedule `r_start, r_start - step, …` down to the smallest value not
    /// below `rho + step`, followed by `rho`.
    pub fn from_linear_schedule(
        num_circumferences: usize,
        height_step_mm: f64,
        points_per_circumference: usize,
        r_start_mm: f64,
        r_step_mm: f64,
        rho_mm: f64,
    ) -> Result<Self> {
        if !(r_step_mm > 0.0 && r_step_mm.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "radius step must be positive, got {r_step_mm}"
            )));
        }
        if !(r_start_mm >= rho_mm && r_start_mm.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "start radius {r_start_mm} below minimum radius {rho_mm}"
            )));
        }
        let floor = rho_mm + r_step_mm - SCHEDULE_EPS;
        let mut schedule: Vec<f64> = (0..)
            .map(|k| r_start_mm - k as f64 * r_step_mm)
            .take_while(|&r| r >= floor)
            .collect();
        schedule.push(rho_mm);
        Self::new(
            num_circumferences,
            height_step_mm,
            points_per_circumference,
            schedule,
            rho_mm,
        )
    }

    pub fn num_circumferences(&self) -> usize {
        self.num_circumferences
    }

    pub fn height_step_mm(&self) -> f64 {
        self.height_step_mm
    }

    pub fn points_per_circumference(&self) -> usize {
        self.points_per_circumference
    }

    pub fn radius_schedule(&self) -> &[f64] {
        &self.radius_schedule
    }

    pub fn min_radius_mm(&self) -> f64 {
        self.min_radius_mm
    }

    pub fn parse_override(text: &str) -> Result<Self> {
        let file: ParamsFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("fit params: {e}")))?;
        Self::from_linear_schedule(
            file.num_circumferences,
            file.dz_mm,
            file.points_per_circumference,
            file.r_start_mm,
            file.r_step_mm,
            file.rho_mm,
        )
    }

    pub fn load_override(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_override(&text)
    }
}

impl Default for FitParams {
    fn default() -> Self {
        Self::default_params()
    }
}

/// On-disk parameter override.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    #[serde(rename = "L")]
    pub num_circumferences: usize,
    pub dz_mm: f64,
    #[serde(rename = "N")]
    pub points_per_circumference: usize,
    pub r_start_mm: f64,
    pub r_step_mm: f64,
    pub rho_mm: f64,
}

pub fn default_params() -> FitParams {
    FitParams::default_params()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circumference {
    pub radius: f64,
    pub height: f64,
    pub converged: bool,
    /// Set once the circumference failed at the last schedule entry.
    pub exhausted: bool,
    pub schedule_index: usize,
}

impl Circumference {
    fn is_active(&self) -> bool {
        !self.converged && !self.exhausted
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircumferenceSet {
    pub circumferences: Vec<Circumference>,
    pub center: Point3<f64>,
}

impl CircumferenceSet {
    pub fn converged(&self) -> impl Iterator<Item = &Circumference> {
        self.circumferences.iter().filter(|c| c.converged)
    }

    pub fn converged_count(&self) -> usize {
        self.converged().count()
    }

    pub fn center_xy(&self) -> Point2<f64> {
        Point2::new(self.center.x, self.center.y)
    }
}

/// Fitted object: centroid, largest width and height.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectEstimate {
    pub centroid: Point3<f64>,
    pub width_mm: f64,
    pub height_mm: f64,
    pub converged_count: usize,
    pub iterations: usize,
}

/// State of the model when the loop stops; kept around for overlays and
/// diagnostics even when no circumference converged.
#[derive(Debug, Clone, PartialEq)]
pub struct FitState {
    pub centroids_2d: [PixelCentroid; 2],
    pub model: CircumferenceSet,
    pub iterations: usize,
}

impl FitState {
    pub fn estimate(&self) -> Result<ObjectEstimate> {
        let (width_mm, height_mm) = extract_dimensions(&self.model)?;
        Ok(ObjectEstimate {
            centroid: self.model.center,
            width_mm,
            height_mm,
            converged_count: self.model.converged_count(),
            iterations: self.iterations,
        })
    }
}

pub fn init_model(centroid: Point3<f64>, params: &FitParams) -> CircumferenceSet {
    let l = params.num_circumferences;
    let mid = (l as f64 - 1.0) / 2.0;
    let r0 = params.radius_schedule[0];
    let circumferences = (0..l)
        .map(|i| Circumference {
            radius: r0,
            height: centroid.z + (i as f64 - mid) * params.height_step_mm,
            converged: false,
            exhausted: false,
            schedule_index: 0,
        })
        .collect();
    CircumferenceSet {
        circumferences,
        center: centroid,
    }
}

/// `n` points evenly spaced on the circumference, starting at angle 0.
pub fn sample_circumference(circ: &Circumference, center_xy: Point2<f64>, n: usize) -> Vec<Point3<f64>> {
    (0..n)
        .map(|k| {
            let angle = 2.0 * PI * k as f64 / n as f64;
            Point3::new(
                center_xy.x + circ.radius * angle.cos(),
                center_xy.y + circ.radius * angle.sin(),
                circ.height,
            )
        })
        .collect()
}

/// Number of (point, view) pairs whose projection falls inside the view's
/// mask. Points behind a camera count as outside.
pub fn verify_circumference(
    points: &[Point3<f64>],
    cam1: &CalibratedCamera,
    cam2: &CalibratedCamera,
    mask1: &Mask,
    mask2: &Mask,
) -> usize {
    let inside = |cam: &CalibratedCamera, mask: &Mask, p: &Point3<f64>| {
        cam.project(p).is_ok_and(|px| mask.contains(&px))
    };
    points
        .iter()
        .map(|p| inside(cam1, mask1, p) as usize + inside(cam2, mask2, p) as usize)
        .sum()
}

pub fn extract_dimensions(set: &CircumferenceSet) -> Result<(f64, f64)> {
    let mut converged = set.converged();
    let first = converged.next().ok_or(Error::NoConvergedCircumference)?;
    let (mut r_max, mut z_max, mut z_min) = (first.radius, first.height, first.height);
    for c in converged {
        r_max = r_max.max(c.radius);
        z_max = z_max.max(c.height);
        z_min = z_min.min(c.height);
    }
    Ok((2.0 * r_max, z_max - z_min))
}

/// Localises the object and runs the shrink loop. `observer` is called after
/// every pass with the pass number (from 1) and the current model.
pub fn fit_state_with_observer(
    cam1: &CalibratedCamera,
    cam2: &CalibratedCamera,
    mask1: &Mask,
    mask2: &Mask,
    params: &FitParams,
    mut observer: impl FnMut(usize, &CircumferenceSet),
) -> Result<FitState> {
    let c1 = mask1.centroid()?;
    let c2 = mask2.centroid()?;
    let centroid = triangulate(cam1, cam2, &Point2::new(c1.u, c1.v), &Point2::new(c2.u, c2.v))?;

    let mut model = init_model(centroid, params);
    let center_xy = model.center_xy();
    let schedule = params.radius_schedule();
    let n = params.points_per_circumference;
    let mut iterations = 0;

    while model.circumferences.iter().any(Circumference::is_active) {
        model.circumferences.par_iter_mut().for_each(|circ| {
            if !circ.is_active() {
                return;
            }
            let points = sample_circumference(circ, center_xy, n);
            if verify_circumference(&points, cam1, cam2, mask1, mask2) == 2 * n {
                circ.converged = true;
            } else if circ.schedule_index + 1 < schedule.len() {
                circ.schedule_index += 1;
                circ.radius = schedule[circ.schedule_index];
            } else {
                circ.exhausted = true;
            }
        });
        iterations += 1;
        observer(iterations, &model);
    }

    Ok(FitState {
        centroids_2d: [c1, c2],
        model,
        iterations,
    })
}

pub fn fit_state(
    cam1: &CalibratedCamera,
    cam2: &CalibratedCamera,
    mask1: &Mask,
    mask2: &Mask,
    params: &FitParams,
) -> Result<FitState> {
    fit_state_with_observer(cam1, cam2, mask1, mask2, params, |_, _| {})
}

pub fn fit(
    cam1: &CalibratedCamera,
    cam2: &CalibratedCamera,
    mask1: &Mask,
    mask2: &Mask,
    params: &FitParams,
) -> Result<ObjectEstimate> {
    fit_state(cam1, cam2, mask1, mask2, params)?.estimate()
}
