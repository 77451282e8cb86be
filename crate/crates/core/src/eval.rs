//! Batch evaluation: localisation success ratio, dimension-error percentiles
//! and the depth back-projection (SegDD) baseline.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::{load_camera_pair, CalibratedCamera};
use crate::error::{Error, Result};
use crate::fitting::{fit_state, FitParams};
use crate::mask::{load_mask, Mask};
use crate::synth::DepthMap;

pub const PERCENTILE_RULE: &str =
    "linear interpolation between closest ranks: p-th percentile at sorted position p*(n-1)";

pub const CSV_HEADER: [&str; 8] = [
    "id", "success", "w_mm", "h_mm", "err_w_mm", "err_h_mm", "iterations", "reason",
];

pub const SEGDD_CSV_HEADER: [&str; 8] = [
    "id", "camera", "success", "w_mm", "h_mm", "err_w_mm", "err_h_mm", "reason",
];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub configurations: Vec<Configuration>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DepthPaths {
    Single(PathBuf),
    PerCamera(Vec<PathBuf>),
}

impl DepthPaths {
    fn paths(&self) -> Vec<&Path> {
        match self {
            DepthPaths::Single(p) => vec![p.as_path()],
            DepthPaths::PerCamera(ps) => ps.iter().map(PathBuf::as_path).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Configuration {
    pub id: String,
    pub calib: PathBuf,
    pub masks: [PathBuf; 2],
    /// Depth maps for the baseline, in camera order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<DepthPaths>,
    pub gt_w_mm: f64,
    pub gt_h_mm: f64,
    #[serde(default)]
    pub tags: Vec<String>,
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Self> {
        let manifest: Manifest =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("manifest: {e}")))?;
        if manifest.configurations.is_empty() {
            return Err(Error::EmptyManifest);
        }
        for c in &manifest.configurations {
            if !(c.gt_w_mm > 0.0 && c.gt_h_mm > 0.0) {
                return Err(Error::Parse(format!(
                    "manifest: configuration {:?} has non-positive ground truth",
                    c.id
                )));
            }
        }
        Ok(manifest)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

/// Outcome of one configuration. Errors are filled only on success with
/// dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub id: String,
    pub success: bool,
    pub w_mm: Option<f64>,
    pub h_mm: Option<f64>,
    pub err_w_mm: Option<f64>,
    pub err_h_mm: Option<f64>,
    pub iterations: Option<usize>,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegddRow {
    pub id: String,
    pub camera: String,
    pub success: bool,
    pub w_mm: Option<f64>,
    pub h_mm: Option<f64>,
    pub err_w_mm: Option<f64>,
    pub err_h_mm: Option<f64>,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub q25: f64,
    pub q75: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub configurations: usize,
    pub successes: usize,
    pub lsr_percent: f64,
    pub with_dimensions: usize,
    pub width_error: Option<ErrorStats>,
    pub height_error: Option<ErrorStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub percentile_rule: String,
    pub overall: GroupSummary,
    pub by_tag: BTreeMap<String, GroupSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segdd: Option<GroupSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub rows: Vec<Row>,
    pub segdd_rows: Vec<SegddRow>,
    pub summary: Summary,
}

/// Localisation success ratio in percent.
pub fn lsr(successes: usize, total: usize) -> Result<f64> {
    if total == 0 {
        return Err(Error::EmptyInput);
    }
    Ok(100.0 * successes as f64 / total as f64)
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn error_stats(values: &[f64]) -> Result<ErrorStats> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(ErrorStats {
        median: percentile(&sorted, 0.5),
        min: sorted[0],
        max: *sorted.last().unwrap(),
        q25: percentile(&sorted, 0.25),
        q75: percentile(&sorted, 0.75),
    })
}

/// Width and height from the extremal camera-frame x and y of back-projected
/// object pixels with valid depth.
pub fn segdd_estimate(mask: &Mask, depth: &DepthMap, camera: &CalibratedCamera) -> Result<(f64, f64)> {
    if mask.width() != depth.width() || mask.height() != depth.height() {
        return Err(Error::InvalidMask(format!(
            "mask {}x{} does not match depth {}x{}",
            mask.width(),
            mask.height(),
            depth.width(),
            depth.height()
        )));
    }
    let k = &camera.intrinsics;
    let mut extent: Option<[f64; 4]> = None;
    let w = mask.width() as usize;
    for (i, (&m, &z)) in mask.data().iter().zip(depth.data()).enumerate() {
        if m == 0 || z <= 0.0 {
            continue;
        }
        let u = (i % w) as f64;
        let v = (i / w) as f64;
        let x = (u - k.cx) * z / k.fx;
        let y = (v - k.cy) * z / k.fy;
        extent = Some(match extent {
            None => [x, x, y, y],
            Some([x0, x1, y0, y1]) => [x0.min(x), x1.max(x), y0.min(y), y1.max(y)],
        });
    }
    let [x0, x1, y0, y1] = extent.ok_or(Error::NoObject)?;
    Ok((x1 - x0, y1 - y0))
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn failure_reason(err: &Error) -> String {
    err.to_string()
}

fn evaluate_configuration(
    base: &Path,
    config: &Configuration,
    params: &FitParams,
) -> (Row, Vec<SegddRow>) {
    let mut row = Row {
        id: config.id.clone(),
        success: false,
        w_mm: None,
        h_mm: None,
        err_w_mm: None,
        err_h_mm: None,
        iterations: None,
        reason: None,
    };
    let inputs = (|| -> Result<_> {
        let (cam1, cam2) = load_camera_pair(resolve(base, &config.calib))?;
        let mask1 = load_mask(resolve(base, &config.masks[0]))?;
        let mask2 = load_mask(resolve(base, &config.masks[1]))?;
        Ok((cam1, cam2, mask1, mask2))
    })();
    let (cam1, cam2, mask1, mask2) = match inputs {
        Ok(v) => v,
        Err(e) => {
            row.reason = Some(failure_reason(&e));
            return (row, Vec::new());
        }
    };

    match fit_state(&cam1, &cam2, &mask1, &mask2, params) {
        Ok(state) => {
            row.success = true;
            row.iterations = Some(state.iterations);
            match state.estimate() {
                Ok(est) => {
                    row.w_mm = Some(est.width_mm);
                    row.h_mm = Some(est.height_mm);
                    row.err_w_mm = Some((est.width_mm - config.gt_w_mm).abs());
                    row.err_h_mm = Some((est.height_mm - config.gt_h_mm).abs());
                }
                Err(e) => row.reason = Some(failure_reason(&e)),
            }
        }
        Err(e) => row.reason = Some(failure_reason(&e)),
    }

    let segdd = match &config.depth {
        None => Vec::new(),
        Some(depths) => depths
            .paths()
            .into_iter()
            .zip([(&cam1, &mask1), (&cam2, &mask2)])
            .map(|(path, (cam, mask))| {
                let result = DepthMap::load(resolve(base, path))
                    .and_then(|depth| segdd_estimate(mask, &depth, cam));
                let mut r = SegddRow {
                    id: config.id.clone(),
                    camera: cam.id.clone(),
                    success: false,
                    w_mm: None,
                    h_mm: None,
                    err_w_mm: None,
                    err_h_mm: None,
                    reason: None,
                };
                match result {
                    Ok((w, h)) => {
                        r.success = true;
                        r.w_mm = Some(w);
                        r.h_mm = Some(h);
                        r.err_w_mm = Some((w - config.gt_w_mm).abs());
                        r.err_h_mm = Some((h - config.gt_h_mm).abs());
                    }
                    Err(e) => r.reason = Some(failure_reason(&e)),
                }
                r
            })
            .collect(),
    };
    (row, segdd)
}

/// Outcome fields shared by fitted and baseline rows.
trait Outcome {
    fn success(&self) -> bool;
    fn errors(&self) -> Option<(f64, f64)>;
}

impl Outcome for Row {
    fn success(&self) -> bool {
        self.success
    }
    fn errors(&self) -> Option<(f64, f64)> {
        self.err_w_mm.zip(self.err_h_mm)
    }
}

impl Outcome for SegddRow {
    fn success(&self) -> bool {
        self.success
    }
    fn errors(&self) -> Option<(f64, f64)> {
        self.err_w_mm.zip(self.err_h_mm)
    }
}

fn summarize_group<'a, T: Outcome + 'a>(rows: impl IntoIterator<Item = &'a T>) -> Result<GroupSummary> {
    let rows: Vec<&T> = rows.into_iter().collect();
    let successes = rows.iter().filter(|r| r.success()).count();
    let (ew, eh): (Vec<f64>, Vec<f64>) = rows.iter().filter_map(|r| r.errors()).unzip();
    Ok(GroupSummary {
        configurations: rows.len(),
        successes,
        lsr_percent: round2(lsr(successes, rows.len())?),
        with_dimensions: ew.len(),
        width_error: error_stats(&ew).ok(),
        height_error: error_stats(&eh).ok(),
    })
}

/// Aggregates rows overall and per tag. `tags[i]` belongs to `rows[i]`.
pub fn summarize(rows: &[Row], tags: &[Vec<String>], segdd_rows: &[SegddRow]) -> Result<Summary> {
    let overall = summarize_group(rows)?;
    let mut groups: BTreeMap<String, Vec<&Row>> = BTreeMap::new();
    for (row, row_tags) in rows.iter().zip(tags) {
        for tag in row_tags {
            groups.entry(tag.clone()).or_default().push(row);
        }
    }
    let by_tag = groups
        .into_iter()
        .map(|(tag, rows)| Ok((tag, summarize_group(rows)?)))
        .collect::<Result<_>>()?;
    let segdd = if segdd_rows.is_empty() {
        None
    } else {
        Some(summarize_group(segdd_rows)?)
    };
    Ok(Summary {
        percentile_rule: PERCENTILE_RULE.to_string(),
        overall,
        by_tag,
        segdd,
    })
}

pub fn run_manifest_parsed(manifest: &Manifest, base_dir: &Path, params: &FitParams) -> Result<Report> {
    if manifest.configurations.is_empty() {
        return Err(Error::EmptyManifest);
    }
    let outcomes: Vec<(Row, Vec<SegddRow>)> = manifest
        .configurations
        .par_iter()
        .map(|c| evaluate_configuration(base_dir, c, params))
        .collect();
    let mut rows = Vec::with_capacity(outcomes.len());
    let mut segdd_rows = Vec::new();
    for (row, seg) in outcomes {
        rows.push(row);
        segdd_rows.extend(seg);
    }
    let tags: Vec<Vec<String>> = manifest.configurations.iter().map(|c| c.tags.clone()).collect();
    let summary = summarize(&rows, &tags, &segdd_rows)?;
    Ok(Report {
        rows,
        segdd_rows,
        summary,
    })
}

/// Runs the fit on every configuration. Paths inside the manifest are
/// relative to the manifest's directory.
pub fn run_manifest(path: impl AsRef<Path>, params: &FitParams) -> Result<Report> {
    let path = path.as_ref();
    let manifest = Manifest::load(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    run_manifest_parsed(&manifest, base, params)
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(String::new, T::to_string)
}

pub fn rows_to_csv(rows: &[Row]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).unwrap();
    for r in rows {
        w.write_record([
            r.id.clone(),
            r.success.to_string(),
            opt(&r.w_mm),
            opt(&r.h_mm),
            opt(&r.err_w_mm),
            opt(&r.err_h_mm),
            opt(&r.iterations),
            r.reason.clone().unwrap_or_default(),
        ])
        .unwrap();
    }
    w.into_inner().unwrap()
}

pub fn segdd_rows_to_csv(rows: &[SegddRow]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SEGDD_CSV_HEADER).unwrap();
    for r in rows {
        w.write_record([
            r.id.clone(),
            r.camera.clone(),
            r.success.to_string(),
            opt(&r.w_mm),
            opt(&r.h_mm),
            opt(&r.err_w_mm),
            opt(&r.err_h_mm),
            r.reason.clone().unwrap_or_default(),
        ])
        .unwrap();
    }
    w.into_inner().unwrap()
}

fn parse_field<T: std::str::FromStr>(field: &str) -> Result<Option<T>> {
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse()
        .map(Some)
        .map_err(|_| Error::Parse(format!("report field {field:?}")))
}

/// Reads rows back from a report CSV.
pub fn rows_from_csv(bytes: &[u8]) -> Result<Vec<Row>> {
    let mut reader = csv::Reader::from_reader(bytes);
    let header = reader
        .headers()
        .map_err(|e| Error::Parse(format!("report header: {e}")))?;
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Parse(format!("unexpected report header {header:?}")));
    }
    reader
        .records()
        .map(|rec| {
            let rec = rec.map_err(|e| Error::Parse(format!("report row: {e}")))?;
            Ok(Row {
                id: rec[0].to_string(),
                success: parse_field(&rec[1])?.unwrap_or(false),
                w_mm: parse_field(&rec[2])?,
                h_mm: parse_field(&rec[3])?,
                err_w_mm: parse_field(&rec[4])?,
                err_h_mm: parse_field(&rec[5])?,
                iterations: parse_field(&rec[6])?,
                reason: Some(rec[7].to_string()).filter(|s| !s.is_empty()),
            })
        })
        .collect()
}

/// Sidecar paths for a report written to `csv_path`: the JSON summary and the
/// per-camera baseline CSV.
pub fn sidecar_paths(csv_path: &Path) -> (PathBuf, PathBuf) {
    let stem = csv_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "report".into());
    (
        csv_path.with_extension("json"),
        csv_path.with_file_name(format!("{stem}.segdd.csv")),
    )
}

/// Writes the report CSV, the JSON summary and, when baseline rows exist, the
/// baseline CSV.
pub fn write_report(report: &Report, csv_path: impl AsRef<Path>) -> Result<()> {
    let csv_path = csv_path.as_ref();
    let (json_path, segdd_path) = sidecar_paths(csv_path);
    fs::write(csv_path, rows_to_csv(&report.rows)).map_err(|e| Error::io(csv_path, e))?;
    let mut json = serde_json::to_string_pretty(&report.summary).expect("summary serializes");
    json.push('\n');
    fs::write(&json_path, json).map_err(|e| Error::io(&json_path, e))?;
    if !report.segdd_rows.is_empty() {
        fs::write(&segdd_path, segdd_rows_to_csv(&report.segdd_rows))
            .map_err(|e| Error::io(&segdd_path, e))?;
    }
    Ok(())
}

pub fn read_rows(path: impl AsRef<Path>) -> Result<Vec<Row>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    rows_from_csv(&bytes).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}
