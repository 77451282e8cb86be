//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

use std::fs;
use std::time::{Duration, Instant};

use common::*;
use lode::camera::{orthogonal_pair_fixture, triangulate, CalibratedCamera};
use lode::cli::{cmd_eval, EvalArgs};
use lode::eval::{lsr, segdd_estimate};
use lode::fitting::{fit, fit_state_with_observer, init_model, Circumference, FitParams};
use lode::mask::Mask;
use lode::synth::{perturb_mask, render_depth, render_mask, NoiseParams, RevolutionShape};
use nalgebra::{Point2, Point3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(f)
}

fn in_image(cam: &CalibratedCamera, px: &Point2<f64>) -> bool {
    px.x >= 0.0 && px.y >= 0.0 && px.x < cam.width() as f64 && px.y < cam.height() as f64
}

/// 1. Geometry exactness: 1000 random visible points round-trip through
///    projection and triangulation within 1e-6 mm in under a second.
fn geometry_exactness() -> Outcome {
    let (c1, c2) = orthogonal_pair_fixture();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut points = Vec::new();
    while points.len() < 1000 {
        let p = Point3::new(
            rng.random_range(-200.0..200.0),
            rng.random_range(-200.0..200.0),
            rng.random_range(-200.0..200.0),
        );
        let visible = [&c1, &c2]
            .iter()
            .all(|c| c.project(&p).is_ok_and(|px| in_image(c, &px)));
        if visible {
            points.push(p);
        }
    }
    let start = Instant::now();
    let mut worst = 0.0f64;
    for p in &points {
        let q = triangulate(&c1, &c2, &c1.project(p).unwrap(), &c2.project(p).unwrap())
            .map_err(|e| e.to_string())?;
        worst = worst.max((q - p).norm());
    }
    let elapsed = start.elapsed();
    check(
        worst < 1e-6 && elapsed < Duration::from_secs(1),
        format!("max error {worst:.3e} mm over 1000 points in {elapsed:.2?}"),
    )
}

/// 2. Default radius schedule: 150.0 down by 0.5 to 1.5, then ρ = 1.0.
fn schedule_fidelity() -> Outcome {
    let p = FitParams::default_params();
    let s = p.radius_schedule();
    let steps_ok = s[..s.len() - 1].windows(2).all(|w| w[0] - w[1] == 0.5);
    check(
        s.len() == 299
            && s[0] == 150.0
            && steps_ok
            && s[297] == 1.5
            && s[298] == 1.0
            && p.min_radius_mm() == 1.0
            && p.num_circumferences() == 500
            && p.points_per_circumference() == 20
            && p.height_step_mm() == 1.0,
        format!(
            "len {} first {} last-but-one {} last {} rho {}",
            s.len(),
            s[0],
            s[s.len() - 2],
            s[s.len() - 1],
            p.min_radius_mm()
        ),
    )
}

/// 3. Noiseless cylinder (r 40, h 120) from two orthogonal 1280×720 views at
///    400 mm: width within ±2 mm, height within ±15 mm, under 5 s on one thread.
fn cylinder_recovery() -> Outcome {
    let (c1, c2, m1, m2) = fixture_masks(&cylinder());
    let params = FitParams::default_params();
    let start = Instant::now();
    let est = single_threaded(|| fit(&c1, &c2, &m1, &m2, &params)).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    check(
        (est.width_mm - 80.0).abs() <= 2.0
            && (est.height_mm - 120.0).abs() <= 15.0
            && elapsed < Duration::from_secs(5),
        format!(
            "w {:.2} mm, h {:.2} mm, {} converged, {} passes, {elapsed:.2?}",
            est.width_mm, est.height_mm, est.converged_count, est.iterations
        ),
    )
}

/// Mask lookup with its own pinhole projection and rounding.
fn oracle_inside(cam: &CalibratedCamera, mask: &Mask, p: &Point3<f64>) -> bool {
    let r = cam.pose.rotation();
    let t = cam.pose.translation();
    let xc = r[(0, 0)] * p.x + r[(0, 1)] * p.y + r[(0, 2)] * p.z + t.x;
    let yc = r[(1, 0)] * p.x + r[(1, 1)] * p.y + r[(1, 2)] * p.z + t.y;
    let zc = r[(2, 0)] * p.x + r[(2, 1)] * p.y + r[(2, 2)] * p.z + t.z;
    if zc <= 1e-6 {
        return false;
    }
    let k = &cam.intrinsics;
    let u = (k.fx * xc / zc + k.cx).round();
    let v = (k.fy * yc / zc + k.cy).round();
    if u < 0.0 || v < 0.0 || u >= mask.width() as f64 || v >= mask.height() as f64 {
        return false;
    }
    mask.data()[v as usize * mask.width() as usize + u as usize] == 1
}

/// 4. Small instance: converged radii equal an exhaustive scan of every
///    (circumference, schedule entry) pair.
fn oracle_equivalence() -> Outcome {
    let (c1, c2) = orthogonal_pair_fixture();
    let params = FitParams::from_linear_schedule(3, 35.0, 20, 50.0, 5.0, 5.0).map_err(|e| e.to_string())?;
    if params.radius_schedule().len() != 10 {
        return Err(format!("schedule {:?}", params.radius_schedule()));
    }
    let shapes = [
        RevolutionShape::new(Point3::origin(), vec![(0.0, 20.0), (40.0, 45.0), (80.0, 25.0), (120.0, 35.0)]).unwrap(),
        RevolutionShape::new(Point3::new(8.0, -4.0, 0.0), vec![(0.0, 42.0), (110.0, 12.0)]).unwrap(),
        RevolutionShape::new(Point3::origin(), vec![(0.0, 30.0), (5.0, 3.0), (70.0, 3.0), (130.0, 40.0)]).unwrap(),
    ];
    let mut summary = Vec::new();
    for shape in &shapes {
        let m1 = render_mask(&c1, shape);
        let m2 = render_mask(&c2, shape);
        let state = fit_state_with_observer(&c1, &c2, &m1, &m2, &params, |_, _| {}).map_err(|e| e.to_string())?;
        let model = init_model(state.model.center, &params);
        let mut radii = Vec::new();
        for (circ, fitted) in model.circumferences.iter().zip(&state.model.circumferences) {
            let brute = params.radius_schedule().iter().copied().find(|&r| {
                (0..20).all(|n| {
                    let a = 2.0 * std::f64::consts::PI * n as f64 / 20.0;
                    let p = Point3::new(
                        state.model.center.x + r * a.cos(),
                        state.model.center.y + r * a.sin(),
                        circ.height,
                    );
                    oracle_inside(&c1, &m1, &p) && oracle_inside(&c2, &m2, &p)
                })
            });
            let got = fitted.converged.then_some(fitted.radius);
            if brute != got {
                return Err(format!("circumference at z={:.1}: fit {got:?} vs scan {brute:?}", circ.height));
            }
            radii.push(got);
        }
        summary.push(format!("{radii:?}"));
    }
    Ok(format!("converged radii {}", summary.join(" ")))
}

fn random_shape(rng: &mut ChaCha8Rng) -> RevolutionShape {
    let n = rng.random_range(2..=5);
    let mut h = 0.0;
    let mut profile = Vec::new();
    for i in 0..n {
        if i > 0 {
            h += rng.random_range(10.0..60.0);
        }
        profile.push((h, rng.random_range(5.0..60.0)));
    }
    let base = Point3::new(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0), rng.random_range(-40.0..0.0));
    RevolutionShape::new(base, profile).unwrap()
}

/// 5. Across 50 randomized runs no radius increases and frozen
///    circumferences never change.
fn monotone_shrink() -> Outcome {
    let (c1, c2) = small_pair();
    let params = FitParams::default_params();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut passes = 0usize;
    for run in 0..50 {
        let shape = random_shape(&mut rng);
        let noise = NoiseParams::new(rng.random_range(0.0..0.3), rng.random_range(-1..=2), run).unwrap();
        let m1 = perturb_mask(&render_mask(&c1, &shape), &noise);
        let m2 = perturb_mask(&render_mask(&c2, &shape), &NoiseParams { seed: run + 1000, ..noise });
        let mut prev: Option<Vec<Circumference>> = None;
        let mut violation: Option<String> = None;
        let result = fit_state_with_observer(&c1, &c2, &m1, &m2, &params, |pass, set| {
            passes += 1;
            if let Some(prev) = &prev {
                for (a, b) in prev.iter().zip(&set.circumferences) {
                    let bad = b.radius > a.radius
                        || (a.converged && a != b)
                        || !params.radius_schedule().contains(&b.radius);
                    if bad && violation.is_none() {
                        violation = Some(format!("run {run} pass {pass}: {a:?} -> {b:?}"));
                    }
                }
            }
            prev = Some(set.circumferences.clone());
        });
        if let Some(v) = violation {
            return Err(v);
        }
        result.map_err(|e| format!("run {run}: {e}"))?;
    }
    Ok(format!("50 runs, {passes} passes observed, no violation"))
}

/// 6. Centroid equals brute-force moments on 100 random masks.
fn centroid_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for i in 0..100 {
        let (w, h) = (rng.random_range(1..80u32), rng.random_range(1..60u32));
        let density = rng.random_range(0.01..1.0);
        let mut mask = Mask::from_fn(w, h, |_, _| rng.random_bool(density));
        if mask.is_empty() {
            mask = Mask::ones(w, h);
        }
        let (mut m00, mut m10, mut m01) = (0u64, 0u64, 0u64);
        for v in 0..h {
            for u in 0..w {
                if mask.get(u, v) {
                    m00 += 1;
                    m10 += u as u64;
                    m01 += v as u64;
                }
            }
        }
        let c = mask.centroid().map_err(|e| e.to_string())?;
        if c.mass != m00 || c.u != m10 as f64 / m00 as f64 || c.v != m01 as f64 / m00 as f64 {
            return Err(format!("mask {i}: {c:?} vs ({m10}/{m00}, {m01}/{m00})"));
        }
    }
    Ok("100 random masks match exactly".into())
}

/// 7. 180 successes over 207 configurations reports 86.96%.
fn lsr_arithmetic() -> Outcome {
    let value = lsr(180, 207).map_err(|e| e.to_string())?;
    let shown = format!("{value:.2}");
    check(shown == "86.96", format!("LSR {shown}%"))
}

/// 8. `eval` on the 9-configuration suite is bitwise repeatable across runs
///    and thread counts.
fn eval_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let manifest = write_suite(dir.path());
    let mut outputs = Vec::new();
    for (run, threads) in [1usize, 1, 4, 4].into_iter().enumerate() {
        let report = dir.path().join(format!("run{run}.csv"));
        let args = EvalArgs {
            manifest: manifest.clone(),
            report: report.clone(),
            params: None,
        };
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| cmd_eval(&args))
            .map_err(|e| e.to_string())?;
        let read = |p: std::path::PathBuf| fs::read(p).map_err(|e| e.to_string());
        outputs.push((
            read(report.clone())?,
            read(report.with_extension("json"))?,
            read(dir.path().join(format!("run{run}.segdd.csv")))?,
        ));
    }
    let rows = String::from_utf8_lossy(&outputs[0].0).lines().count() - 1;
    check(
        rows == 9 && outputs.iter().all(|o| *o == outputs[0]),
        format!("{rows} rows; CSV, JSON and baseline CSV identical over 4 runs (1 and 4 threads)"),
    )
}

/// 9. Baseline width within ±2 mm on the noiseless cylinder, and strictly
///    worse after a 3 px dilation.
fn segdd_sanity() -> Outcome {
    let shape = cylinder();
    let (c1, _, m1, _) = fixture_masks(&shape);
    let depth = render_depth(&c1, &shape).with_background(1000.0);
    let (w_clean, _) = segdd_estimate(&m1, &depth, &c1).map_err(|e| e.to_string())?;
    let dilated = perturb_mask(&m1, &NoiseParams::new(0.0, 3, 0).unwrap());
    let (w_noisy, _) = segdd_estimate(&dilated, &depth, &c1).map_err(|e| e.to_string())?;
    let (e_clean, e_noisy) = ((w_clean - 80.0).abs(), (w_noisy - 80.0).abs());
    check(
        e_clean <= 2.0 && e_noisy > e_clean,
        format!("clean w {w_clean:.2} mm (err {e_clean:.2}), dilated w {w_noisy:.2} mm (err {e_noisy:.2})"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("1 geometry exactness", geometry_exactness),
        ("2 schedule fidelity", schedule_fidelity),
        ("3 synthetic cylinder recovery", cylinder_recovery),
        ("4 oracle equivalence", oracle_equivalence),
        ("5 monotone shrink", monotone_shrink),
        ("6 centroid oracle", centroid_oracle),
        ("7 LSR arithmetic", lsr_arithmetic),
        ("8 eval determinism", eval_determinism),
        ("9 SegDD baseline sanity", segdd_sanity),
    ];
    let mut failed = 0;
    for (name, criterion) in criteria {
        let outcome = std::panic::catch_unwind(criterion).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("[PASS] {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
