//! File formats and ingestion: detections, ground truth, P5 graymap
//! frames, key=value configs, tracking results and metric reports. Every
//! writer is the exact inverse of its reader, and all file writes go
//! through a temp-file-then-rename so failures leave no partial output.

pub mod config;
pub mod formats;
pub mod pgm;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::{Point, Quad};
use crate::localization::GrayFrame;
use crate::metrics::{GroundTruth, MetricsReport};
use crate::tracker::{Detection, TrackerConfig, TrajectoryPool, TrajectoryState};

pub use config::{load_config, load_scenario, save_config};
pub use formats::{import_icdar_xml, parse_detections, parse_ground_truth};
pub use pgm::{read_frame, write_frame};

/// Whole-file atomic write: the content lands under a temporary name in
/// the target directory and is renamed into place.
pub fn write_atomic(path: &Path, content: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, content).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Error::io(path, e)
    })?;
    Ok(())
}

/// One identity-stamped box of a tracking result.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceRecord {
    pub frame: u64,
    pub trajectory_id: u64,
    pub quad: Quad,
    pub confidence: f64,
}

/// Final state summary of one trajectory, including archived ones.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySummary {
    pub id: u64,
    pub birth_frame: u64,
    pub last_frame: u64,
    /// "active", "lost:k" or "removed".
    pub state: String,
}

/// A complete tracking run: per-frame instance records sorted by
/// (frame, trajectory_id), the resolved config snapshot that produced
/// them, and the final trajectory summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingResult {
    pub records: Vec<InstanceRecord>,
    pub config: Vec<(String, String)>,
    pub seed: Option<u64>,
    pub trajectories: Vec<TrajectorySummary>,
}

impl TrackingResult {
    /// Boxes per frame as (trajectory id, quad) pairs.
    pub fn boxes_by_frame(&self) -> BTreeMap<u64, Vec<(u64, &Quad)>> {
        let mut frames: BTreeMap<u64, Vec<(u64, &Quad)>> = BTreeMap::new();
        for rec in &self.records {
            frames
                .entry(rec.frame)
                .or_default()
                .push((rec.trajectory_id, &rec.quad));
        }
        frames
    }

    /// Plain per-frame box lists (identity dropped).
    pub fn boxes_by_frame_owned(&self) -> BTreeMap<u64, Vec<Quad>> {
        let mut frames: BTreeMap<u64, Vec<Quad>> = BTreeMap::new();
        for rec in &self.records {
            frames.entry(rec.frame).or_default().push(rec.quad.clone());
        }
        frames
    }

    /// Frame-ordered (frame, quad) sequences per trajectory id.
    pub fn trajectories_by_id(&self) -> BTreeMap<u64, Vec<(u64, Quad)>> {
        let mut out: BTreeMap<u64, Vec<(u64, Quad)>> = BTreeMap::new();
        for rec in &self.records {
            out.entry(rec.trajectory_id)
                .or_default()
                .push((rec.frame, rec.quad.clone()));
        }
        out
    }
}

/// Assemble a result from run records and the final pool state.
pub fn build_result(
    mut records: Vec<InstanceRecord>,
    pool: &TrajectoryPool,
    cfg: &TrackerConfig,
    seed: Option<u64>,
) -> TrackingResult {
    records.sort_by_key(|r| (r.frame, r.trajectory_id));
    let mut trajectories: Vec<TrajectorySummary> = pool
        .heads()
        .iter()
        .map(|traj| TrajectorySummary {
            id: traj.id,
            birth_frame: traj.birth_frame,
            last_frame: traj.last_frame,
            state: match traj.state {
                TrajectoryState::Active => "active".to_string(),
                TrajectoryState::Lost { lost_for } => format!("lost:{lost_for}"),
            },
        })
        .collect();
    for traj in pool.removed() {
        trajectories.push(TrajectorySummary {
            id: traj.id,
            birth_frame: traj.birth_frame,
            last_frame: traj.last_frame,
            state: "removed".to_string(),
        });
    }
    trajectories.sort_by_key(|t| t.id);
    TrackingResult {
        records,
        config: config::config_pairs(cfg),
        seed,
        trajectories,
    }
}

/// Canonical text rendering of a tracking result.
pub fn write_result_string(result: &TrackingResult) -> String {
    let mut out = String::from("# textrack result v1\n");
    if let Some(seed) = result.seed {
        let _ = writeln!(out, "# seed = {seed}");
    }
    for (k, v) in &result.config {
        let _ = writeln!(out, "#cfg {k} = {v}");
    }
    for t in &result.trajectories {
        let _ = writeln!(
            out,
            "#traj {} {} {} {}",
            t.id, t.birth_frame, t.last_frame, t.state
        );
    }
    for rec in &result.records {
        let _ = write!(out, "{} {}", rec.frame, rec.trajectory_id);
        for v in rec.quad.vertices() {
            let _ = write!(out, " {} {}", v.x, v.y);
        }
        let _ = writeln!(out, " {}", rec.confidence);
    }
    out
}

pub fn write_result(path: &Path, result: &TrackingResult) -> Result<()> {
    write_atomic(path, write_result_string(result).as_bytes())
}

/// Parse a result file written by [`write_result`].
pub fn parse_result(path: &Path, content: &str) -> Result<TrackingResult> {
    let mut result = TrackingResult {
        records: Vec::new(),
        config: Vec::new(),
        seed: None,
        trajectories: Vec::new(),
    };
    for (lineno, raw) in content.lines().enumerate() {
        let line = raw.trim();
        let bad = |reason: String| Error::parse(path, lineno + 1, reason);
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("#cfg ") {
            let (k, v) = rest
                .split_once('=')
                .ok_or_else(|| bad("expected '#cfg key = value'".into()))?;
            result
                .config
                .push((k.trim().to_string(), v.trim().to_string()));
            continue;
        }
        if let Some(rest) = line.strip_prefix("#traj ") {
            let parts: Vec<&str> = rest.split_whitespace().collect();
            if parts.len() != 4 {
                return Err(bad("expected '#traj id birth last state'".into()));
            }
            result.trajectories.push(TrajectorySummary {
                id: parts[0]
                    .parse()
                    .map_err(|_| bad(format!("bad trajectory id '{}'", parts[0])))?,
                birth_frame: parts[1]
                    .parse()
                    .map_err(|_| bad(format!("bad birth frame '{}'", parts[1])))?,
                last_frame: parts[2]
                    .parse()
                    .map_err(|_| bad(format!("bad last frame '{}'", parts[2])))?,
                state: parts[3].to_string(),
            });
            continue;
        }
        if let Some(rest) = line.strip_prefix("# seed = ") {
            result.seed = Some(
                rest.trim()
                    .parse()
                    .map_err(|_| bad(format!("bad seed '{rest}'")))?,
            );
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 11 {
            return Err(bad(format!(
                "record needs 11 fields, found {}",
                parts.len()
            )));
        }
        let mut nums = [0.0f64; 9];
        for (k, p) in parts[2..].iter().enumerate() {
            nums[k] = p
                .parse()
                .map_err(|_| bad(format!("bad numeric field '{p}'")))?;
        }
        let quad = Quad::new([
            Point::new(nums[0], nums[1]),
            Point::new(nums[2], nums[3]),
            Point::new(nums[4], nums[5]),
            Point::new(nums[6], nums[7]),
        ])
        .map_err(|e| bad(e.to_string()))?;
        result.records.push(InstanceRecord {
            frame: parts[0]
                .parse()
                .map_err(|_| bad(format!("bad frame '{}'", parts[0])))?,
            trajectory_id: parts[1]
                .parse()
                .map_err(|_| bad(format!("bad trajectory id '{}'", parts[1])))?,
            quad,
            confidence: nums[8],
        });
    }
    Ok(result)
}

pub fn read_result(path: &Path) -> Result<TrackingResult> {
    let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_result(path, &content)
}

/// Write the metric report as flat key=value text.
pub fn write_report(path: &Path, report: &MetricsReport) -> Result<()> {
    write_atomic(path, report.to_text().as_bytes())
}

/// Write the metric report as JSON.
pub fn write_report_json(path: &Path, report: &MetricsReport) -> Result<()> {
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| Error::Validation(format!("report serialization: {e}")))?;
    write_atomic(path, json.as_bytes())
}

/// Frame filename convention inside a frames directory.
pub fn frame_file_name(index: u64) -> String {
    format!("{index:06}.pgm")
}

/// On-disk inputs of one tracking run.
#[derive(Debug, Clone)]
pub struct VideoInput {
    pub detections: PathBuf,
    pub frames_dir: Option<PathBuf>,
    pub ground_truth: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl VideoInput {
    pub fn new(detections: impl Into<PathBuf>) -> Self {
        VideoInput {
            detections: detections.into(),
            frames_dir: None,
            ground_truth: None,
            seed: None,
        }
    }

    pub fn load_detections(&self) -> Result<Vec<Vec<Detection>>> {
        let content =
            std::fs::read_to_string(&self.detections).map_err(|e| Error::io(&self.detections, e))?;
        parse_detections(&self.detections, &content)
    }

    /// Load frames 0..count from the frames directory; indices must be
    /// contiguous from 0 and dimensions consistent.
    pub fn load_frames(&self, count: u64) -> Result<Vec<GrayFrame>> {
        let dir = self.frames_dir.as_ref().ok_or_else(|| {
            Error::Validation("this run needs frames but no frames directory was given".into())
        })?;
        let mut frames = Vec::with_capacity(count as usize);
        for index in 0..count {
            let path = dir.join(frame_file_name(index));
            let frame = read_frame(&path)?;
            if let Some(first) = frames.first() {
                let first: &GrayFrame = first;
                if frame.width() != first.width() || frame.height() != first.height() {
                    return Err(Error::Validation(format!(
                        "frame {index} is {}x{}, expected {}x{}",
                        frame.width(),
                        frame.height(),
                        first.width(),
                        first.height()
                    )));
                }
            }
            frames.push(frame);
        }
        Ok(frames)
    }

    pub fn load_ground_truth(&self) -> Result<GroundTruth> {
        let path = self.ground_truth.as_ref().ok_or_else(|| {
            Error::Validation("no ground-truth path configured".into())
        })?;
        load_ground_truth(path)
    }
}

/// Load ground truth, dispatching on extension: `.xml` uses the ICDAR
/// importer, everything else the canonical format.
pub fn load_ground_truth(path: &Path) -> Result<GroundTruth> {
    let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("xml")) {
        import_icdar_xml(path, &content)
    } else {
        parse_ground_truth(path, &content)
    }
}

pub fn save_detections(path: &Path, per_frame: &[Vec<Detection>]) -> Result<()> {
    write_atomic(path, formats::write_detections_string(per_frame).as_bytes())
}

pub fn save_ground_truth(path: &Path, gt: &GroundTruth) -> Result<()> {
    write_atomic(path, formats::write_ground_truth_string(gt).as_bytes())
}
