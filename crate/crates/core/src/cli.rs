//! `lode` command line: estimate, synth, eval and overlay subcommands.
//!
//! JSON goes to stdout, diagnostics to stderr. Exit codes: 0 success,
//! 1 I/O / parse / other errors, 2 no object, 3 no converged circumference.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::Point2;
use serde::Serialize;

use crate::camera::{load_calibration, load_camera_pair, CalibratedCamera};
use crate::error::{Error, Result};
use crate::eval::{run_manifest, write_report};
use crate::fitting::{fit_state, sample_circumference, FitParams, FitState, ObjectEstimate};
use crate::mask::{load_mask, Mask};
use crate::pnm;
use crate::synth::{perturb_mask, render_depth, render_mask, NoiseParams, RevolutionShape};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NO_OBJECT: i32 = 2;
pub const EXIT_NO_CONVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "lode", version, about = "Localise and measure symmetric containers from two calibrated views")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate centroid, width and height from two masks.
    Estimate(EstimateArgs),
    /// Render masks and depth maps of a solid of revolution.
    Synth(SynthArgs),
    /// Evaluate a manifest of configurations.
    Eval(EvalArgs),
    /// Draw the fitted circumference points over each mask.
    Overlay(OverlayArgs),
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub calib: PathBuf,
    #[arg(long)]
    pub mask1: PathBuf,
    #[arg(long)]
    pub mask2: PathBuf,
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Also write the JSON result here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub calib: PathBuf,
    #[arg(long)]
    pub shape: PathBuf,
    #[arg(long)]
    pub outdir: PathBuf,
    /// Mask noise JSON: {"boundary_flip_prob", "dilation_px", "seed"}.
    #[arg(long)]
    pub noise: Option<PathBuf>,
    /// Overrides the noise seed. Camera `i` uses `seed + i`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Depth (mm) written where no surface is hit, instead of 0.
    #[arg(long)]
    pub depth_background_mm: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Report CSV path; the JSON summary goes next to it.
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long)]
    pub params: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OverlayArgs {
    #[arg(long)]
    pub calib: PathBuf,
    #[arg(long)]
    pub mask1: PathBuf,
    #[arg(long)]
    pub mask2: PathBuf,
    #[arg(long)]
    pub out_prefix: PathBuf,
    #[arg(long)]
    pub params: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct EstimateJson {
    pub centroid_mm: [f64; 3],
    pub width_mm: f64,
    pub height_mm: f64,
    pub converged: usize,
    pub iterations: usize,
}

impl From<&ObjectEstimate> for EstimateJson {
    fn from(est: &ObjectEstimate) -> Self {
        Self {
            centroid_mm: est.centroid.coords.into(),
            width_mm: est.width_mm,
            height_mm: est.height_mm,
            converged: est.converged_count,
            iterations: est.iterations,
        }
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NoObject => EXIT_NO_OBJECT,
        Error::NoConvergedCircumference => EXIT_NO_CONVERGED,
        _ => EXIT_ERROR,
    }
}

fn load_params(path: Option<&Path>) -> Result<FitParams> {
    path.map_or_else(|| Ok(FitParams::default_params()), FitParams::load_override)
}

fn load_inputs(
    calib: &Path,
    mask1: &Path,
    mask2: &Path,
) -> Result<(CalibratedCamera, CalibratedCamera, Mask, Mask)> {
    let (cam1, cam2) = load_camera_pair(calib)?;
    Ok((cam1, cam2, load_mask(mask1)?, load_mask(mask2)?))
}

pub fn cmd_estimate(args: &EstimateArgs, stdout: &mut dyn Write) -> Result<ObjectEstimate> {
    let params = load_params(args.params.as_deref())?;
    let (cam1, cam2, mask1, mask2) = load_inputs(&args.calib, &args.mask1, &args.mask2)?;
    let estimate = fit_state(&cam1, &cam2, &mask1, &mask2, &params)?.estimate()?;
    let json = serde_json::to_string(&EstimateJson::from(&estimate)).expect("estimate serializes");
    writeln!(stdout, "{json}").map_err(|e| Error::io("<stdout>", e))?;
    if let Some(out) = &args.out {
        fs::write(out, format!("{json}\n")).map_err(|e| Error::io(out, e))?;
    }
    Ok(estimate)
}

/// Files written for one camera: `mask_<id>.pgm` and `depth_<id>.pgm`.
pub fn cmd_synth(args: &SynthArgs) -> Result<Vec<PathBuf>> {
    let cameras = load_calibration(&args.calib)?;
    let shape = RevolutionShape::load(&args.shape)?;
    let mut noise = match &args.noise {
        Some(p) => NoiseParams::load(p)?,
        None => NoiseParams::none(),
    };
    if let Some(seed) = args.seed {
        noise.seed = seed;
    }
    fs::create_dir_all(&args.outdir).map_err(|e| Error::io(&args.outdir, e))?;

    let mut written = Vec::new();
    for (i, cam) in cameras.iter().enumerate() {
        let cam_noise = NoiseParams {
            seed: noise.seed.wrapping_add(i as u64),
            ..noise
        };
        let mask = perturb_mask(&render_mask(cam, &shape), &cam_noise);
        let mut depth = render_depth(cam, &shape);
        if let Some(bg) = args.depth_background_mm {
            depth = depth.with_background(bg);
        }
        let mask_path = args.outdir.join(format!("mask_{}.pgm", cam.id));
        let depth_path = args.outdir.join(format!("depth_{}.pgm", cam.id));
        mask.save(&mask_path)?;
        depth.save(&depth_path)?;
        written.push(mask_path);
        written.push(depth_path);
    }
    Ok(written)
}

pub fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let params = load_params(args.params.as_deref())?;
    let report = run_manifest(&args.manifest, &params)?;
    write_report(&report, &args.report)
}

pub const GREEN: [u8; 3] = [0, 255, 0];
pub const BLUE: [u8; 3] = [0, 0, 255];
pub const RED: [u8; 3] = [255, 0, 0];
const OBJECT_GRAY: u8 = 160;
const BACKGROUND_GRAY: u8 = 32;

/// RGB overlay of the final model on one view: converged circumference
/// points in green, others blue inside the mask and red outside.
pub fn render_overlay(state: &FitState, params: &FitParams, cam: &CalibratedCamera, mask: &Mask) -> Vec<u8> {
    let (w, h) = (mask.width(), mask.height());
    let mut rgb: Vec<u8> = mask
        .data()
        .iter()
        .flat_map(|&b| [if b == 1 { OBJECT_GRAY } else { BACKGROUND_GRAY }; 3])
        .collect();
    let center = state.model.center_xy();
    let n = params.points_per_circumference();
    let mut plot = |px: Point2<f64>, color: [u8; 3]| {
        let (u, v) = (px.x.round(), px.y.round());
        if u >= 0.0 && v >= 0.0 && u < w as f64 && v < h as f64 {
            let i = 3 * (v as usize * w as usize + u as usize);
            rgb[i..i + 3].copy_from_slice(&color);
        }
    };
    // green last so converged points stay visible
    for converged_pass in [false, true] {
        for circ in state.model.circumferences.iter().filter(|c| c.converged == converged_pass) {
            for p in sample_circumference(circ, center, n) {
                let Ok(px) = cam.project(&p) else { continue };
                let color = if circ.converged {
                    GREEN
                } else if mask.contains(&px) {
                    BLUE
                } else {
                    RED
                };
                plot(px, color);
            }
        }
    }
    rgb
}

pub fn overlay_paths(prefix: &Path, cam1: &CalibratedCamera, cam2: &CalibratedCamera) -> [PathBuf; 2] {
    let base = prefix.to_string_lossy();
    [
        PathBuf::from(format!("{base}_{}.ppm", cam1.id)),
        PathBuf::from(format!("{base}_{}.ppm", cam2.id)),
    ]
}

/// Writes one PPM per view, then reports the fit outcome (images are written
/// even when no circumference converged).
pub fn cmd_overlay(args: &OverlayArgs) -> Result<[PathBuf; 2]> {
    let params = load_params(args.params.as_deref())?;
    let (cam1, cam2, mask1, mask2) = load_inputs(&args.calib, &args.mask1, &args.mask2)?;
    let state = fit_state(&cam1, &cam2, &mask1, &mask2, &params)?;
    let paths = overlay_paths(&args.out_prefix, &cam1, &cam2);
    for (path, (cam, mask)) in paths.iter().zip([(&cam1, &mask1), (&cam2, &mask2)]) {
        let rgb = render_overlay(&state, &params, cam, mask);
        pnm::write_bytes(path, &pnm::encode_ppm(mask.width(), mask.height(), &rgb))?;
    }
    state.estimate()?;
    Ok(paths)
}

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match &cli.command {
        Command::Estimate(a) => cmd_estimate(a, &mut std::io::stdout()).map(|_| ()),
        Command::Synth(a) => cmd_synth(a).map(|_| ()),
        Command::Eval(a) => cmd_eval(a),
        Command::Overlay(a) => cmd_overlay(a).map(|_| ()),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("lode: {e}");
            match cli.command {
                Command::Estimate(_) | Command::Overlay(_) => exit_code(&e),
                Command::Synth(_) | Command::Eval(_) => EXIT_ERROR,
            }
        }
    }
}
