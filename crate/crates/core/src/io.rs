//! File formats: curve JSON, trajectory JSON-lines, statistics CSV, grid
//! exports, SVG snapshots and run manifests.
//!
//! Every float is written with 17 significant digits so that reading a file
//! back reproduces the values bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::brownian::{EnsembleStats, Quantiles, TrajectoryRecord};
use crate::curve::DiscreteCurve;
use crate::error::{Error, Result};
use crate::triangle::{ConformalGrid, TriangleTrajectory};

pub const CODE_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// A float with 17 significant digits, valid as a JSON number.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn push_vertices(out: &mut String, c: &DiscreteCurve) {
    out.push('[');
    for (i, v) in c.vertices().enumerate() {
        if i > 0 {
            out.push(',');
        }
        push_point(out, v);
    }
    out.push(']');
}

fn push_point(out: &mut String, v: &[f64]) {
    out.push('[');
    for (a, x) in v.iter().enumerate() {
        if a > 0 {
            out.push(',');
        }
        out.push_str(&fmt_f64(*x));
    }
    out.push(']');
}

#[derive(Deserialize)]
struct CurveFile {
    d: usize,
    n: usize,
    vertices: Vec<Vec<f64>>,
}

/// `{"d": .., "n": .., "vertices": [[..], ..]}`.
pub fn curve_to_json(c: &DiscreteCurve) -> String {
    let mut s = format!("{{\"d\":{},\"n\":{},\"vertices\":", c.d(), c.n());
    push_vertices(&mut s, c);
    s.push_str("}\n");
    s
}

pub fn curve_from_json(text: &str) -> Result<DiscreteCurve> {
    let f: CurveFile = serde_json::from_str(text)?;
    if f.vertices.len() != f.n {
        return Err(Error::BadShape(format!("header says n = {} but {} vertices given", f.n, f.vertices.len())));
    }
    if let Some(v) = f.vertices.iter().find(|v| v.len() != f.d) {
        return Err(Error::DimensionMismatch { expected: f.d, found: v.len() });
    }
    DiscreteCurve::from_points(&f.vertices)
}

/// Plain point list: one vertex per line, coordinates separated by commas or
/// whitespace; blank lines and lines starting with `#` are skipped.
pub fn curve_from_point_list(text: &str) -> Result<DiscreteCurve> {
    let mut points = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let p = line
            .split(|ch: char| ch == ',' || ch.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::BadShape(format!("line {}: {e}", k + 1)))?;
        points.push(p);
    }
    DiscreteCurve::from_points(&points)
}

/// Reads a curve, as JSON if the file name ends in `.json` and as a point list
/// otherwise.
pub fn read_curve(path: &Path) -> Result<DiscreteCurve> {
    let text = fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        curve_from_json(&text)
    } else {
        curve_from_point_list(&text)
    }
}

/// One line per recorded state: `{"step":k,"t":..,"vertices":[..]}`.
pub fn trajectory_jsonl(rec: &TrajectoryRecord) -> String {
    let mut s = String::new();
    for ((step, t), c) in rec.steps.iter().zip(&rec.times).zip(&rec.curves) {
        let _ = write!(s, "{{\"step\":{step},\"t\":{},\"vertices\":", fmt_f64(*t));
        push_vertices(&mut s, c);
        s.push_str("}\n");
    }
    s
}

/// Apex trajectories use the same schema with a single vertex plus the
/// running minimum distance to the excluded points.
pub fn triangle_trajectory_jsonl(tr: &TriangleTrajectory) -> String {
    let mut s = String::new();
    for i in 0..tr.steps.len() {
        let _ = write!(s, "{{\"step\":{},\"t\":{},\"vertices\":[", tr.steps[i], fmt_f64(tr.times[i]));
        push_point(&mut s, &tr.points[i]);
        let _ = writeln!(s, "],\"min_singularity_distance\":{}}}", fmt_f64(tr.min_singularity_distance[i]));
    }
    s
}

#[derive(Debug, Deserialize, PartialEq)]
pub struct TrajectoryLine {
    pub step: usize,
    pub t: f64,
    pub vertices: Vec<Vec<f64>>,
    #[serde(default)]
    pub min_singularity_distance: Option<f64>,
}

pub fn parse_trajectory_jsonl(text: &str) -> Result<Vec<TrajectoryLine>> {
    text.lines().filter(|l| !l.trim().is_empty()).map(|l| Ok(serde_json::from_str(l)?)).collect()
}

/// `step,t,min_edge,length,centroid_0,…,centroid_{d-1}`.
pub fn stats_csv(rec: &TrajectoryRecord) -> String {
    let mut s = String::from("step,t,min_edge,length");
    for a in 0..rec.d {
        let _ = write!(s, ",centroid_{a}");
    }
    s.push('\n');
    for i in 0..rec.steps.len() {
        let _ = write!(
            s,
            "{},{},{},{}",
            rec.steps[i],
            fmt_f64(rec.times[i]),
            fmt_f64(rec.min_edge_series[i]),
            fmt_f64(rec.length_series[i])
        );
        for x in &rec.centroid_series[i] {
            let _ = write!(s, ",{}", fmt_f64(*x));
        }
        s.push('\n');
    }
    s
}

/// Per-time ensemble quantiles, one column per observable and order statistic.
pub fn ensemble_csv(stats: &EnsembleStats) -> String {
    let groups = ["min_edge", "length", "centroid_displacement"];
    let mut s = String::from("step,t,alive");
    for g in groups {
        for q in ["min", "q10", "q50", "q90", "max"] {
            let _ = write!(s, ",{g}_{q}");
        }
    }
    s.push('\n');
    for i in 0..stats.steps.len() {
        let _ = write!(s, "{},{},{}", stats.steps[i], fmt_f64(stats.times[i]), stats.alive[i]);
        for q in [&stats.min_edge[i], &stats.length[i], &stats.centroid_displacement[i]] {
            push_quantiles(&mut s, q);
        }
        s.push('\n');
    }
    s
}

fn push_quantiles(s: &mut String, q: &Quantiles) {
    for x in [q.min, q.q10, q.q50, q.q90, q.max] {
        let _ = write!(s, ",{}", fmt_f64(x));
    }
}

/// `x,y,f` rows of a conformal-factor grid.
pub fn grid_csv(grid: &ConformalGrid) -> String {
    let mut s = String::with_capacity(grid.rows.len() * 72);
    s.push_str("x,y,f\n");
    for r in &grid.rows {
        let _ = writeln!(s, "{},{},{}", fmt_f64(r[0]), fmt_f64(r[1]), fmt_f64(r[2]));
    }
    s
}

/// Closed polylines for each curve in a viewport fitted to their common
/// bounding box. Only the first two coordinates are drawn.
pub fn svg_polylines(curves: &[DiscreteCurve]) -> String {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for v in curves.iter().flat_map(|c| c.vertices()) {
        for a in 0..2 {
            let x = v.get(a).copied().unwrap_or(0.0);
            lo[a] = lo[a].min(x);
            hi[a] = hi[a].max(x);
        }
    }
    if curves.is_empty() {
        (lo, hi) = ([0.0; 2], [1.0; 2]);
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12);
    let pad = 0.05 * span;
    let (x0, y0, w) = (lo[0] - pad, lo[1] - pad, span + 2.0 * pad);
    let stroke = w / 400.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"800\" viewBox=\"{} {} {} {}\">",
        fmt_svg(x0),
        fmt_svg(-(y0 + w)),
        fmt_svg(w),
        fmt_svg(w)
    );
    let count = curves.len().max(1) as f64;
    for (k, c) in curves.iter().enumerate() {
        let shade = (200.0 * (1.0 - k as f64 / count)) as u8;
        let _ = write!(
            s,
            "<polygon fill=\"none\" stroke=\"rgb({shade},{shade},255)\" stroke-width=\"{}\" points=\"",
            fmt_svg(stroke)
        );
        for (i, v) in c.vertices().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            // flip y so the picture has the usual orientation
            let _ = write!(s, "{},{}", fmt_svg(v[0]), fmt_svg(-v.get(1).copied().unwrap_or(0.0)));
        }
        s.push_str("\"/>\n");
    }
    s.push_str("</svg>\n");
    s
}

fn fmt_svg(x: f64) -> String {
    format!("{x:.6}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn unix_millis() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    CheckFailed,
    ConfigError,
    NumericalFailure,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Ok => 0,
            RunStatus::CheckFailed => 1,
            RunStatus::ConfigError => 2,
            RunStatus::NumericalFailure => 3,
        }
    }
}

/// Record of one invocation of the command-line tool.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub command: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub generator: String,
    pub code_version: String,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub status: RunStatus,
    pub exit_code: i32,
    pub message: Option<String>,
    pub events: Vec<serde_json::Value>,
    pub files: Vec<FileEntry>,
}

impl RunManifest {
    pub fn new(command_line: Vec<String>, command: &str) -> Self {
        Self {
            command_line,
            command: command.to_string(),
            config: serde_json::Value::Null,
            seed: None,
            generator: crate::rng::GENERATOR_ID.to_string(),
            code_version: CODE_VERSION.to_string(),
            started_unix_ms: unix_millis(),
            finished_unix_ms: 0,
            status: RunStatus::Ok,
            exit_code: 0,
            message: None,
            events: Vec::new(),
            files: Vec::new(),
        }
    }

    pub fn finish(&mut self, status: RunStatus, message: Option<String>) {
        self.status = status;
        self.exit_code = status.exit_code();
        self.message = message;
        self.finished_unix_ms = unix_millis();
    }
}

/// Output directory that hashes everything written through it.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    files: Vec<FileEntry>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
        let bytes = contents.as_ref();
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes)?;
        self.files.retain(|f| f.path != name);
        self.files.push(FileEntry { path: name.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 });
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text)
    }

    pub fn files(&self) -> &[FileEntry] {
        &self.files
    }

    /// Writes `manifest.json` listing every file written so far.
    pub fn write_manifest(&self, manifest: &mut RunManifest) -> Result<PathBuf> {
        manifest.files = self.files.clone();
        let mut text = serde_json::to_string_pretty(manifest)?;
        text.push('\n');
        let path = self.root.join("manifest.json");
        fs::write(&path, text)?;
        Ok(path)
    }
}

/// Checks that every file listed in a manifest exists with the recorded hash.
pub fn verify_manifest(root: &Path, manifest: &RunManifest) -> Result<()> {
    for f in &manifest.files {
        let bytes = fs::read(root.join(&f.path))?;
        if sha256_hex(&bytes) != f.sha256 || bytes.len() as u64 != f.bytes {
            return Err(Error::InvalidConfig(format!("{} does not match its manifest entry", f.path)));
        }
    }
    Ok(())
}
