//! Tracking and detection evaluation: CLEAR-MOT accuracy and precision,
//! identity-level F1, per-trajectory coverage classes and detection P/R/F.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::association::{solve_assignment, DistanceMatrix};
use crate::error::{Error, Result};
use crate::geometry::{iou, Quad};
use crate::io::TrackingResult;

/// One annotated box of a ground-truth trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct GtEntry {
    pub frame: u64,
    pub quad: Quad,
    pub transcription: Option<String>,
}

/// Ground-truth trajectories keyed by id; frames strictly increase per id.
#[derive(Debug, Clone, Default)]
pub struct GroundTruth {
    trajectories: BTreeMap<u64, Vec<GtEntry>>,
}

impl GroundTruth {
    pub fn new() -> Self {
        GroundTruth::default()
    }

    /// Add one box. Rejects duplicate (id, frame) pairs; entries are kept
    /// frame-sorted.
    pub fn insert(
        &mut self,
        id: u64,
        frame: u64,
        quad: Quad,
        transcription: Option<String>,
    ) -> Result<()> {
        let entries = self.trajectories.entry(id).or_default();
        let pos = entries.partition_point(|e| e.frame < frame);
        if entries.get(pos).is_some_and(|e| e.frame == frame) {
            return Err(Error::Validation(format!(
                "duplicate ground-truth box for id {id} at frame {frame}"
            )));
        }
        entries.insert(
            pos,
            GtEntry {
                frame,
                quad,
                transcription,
            },
        );
        Ok(())
    }

    pub fn trajectories(&self) -> &BTreeMap<u64, Vec<GtEntry>> {
        &self.trajectories
    }

    pub fn trajectory_count(&self) -> usize {
        self.trajectories.len()
    }

    pub fn total_boxes(&self) -> usize {
        self.trajectories.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    /// Boxes grouped per frame as (id, quad) lists, ids ascending.
    pub fn boxes_by_frame(&self) -> BTreeMap<u64, Vec<(u64, &Quad)>> {
        let mut frames: BTreeMap<u64, Vec<(u64, &Quad)>> = BTreeMap::new();
        for (&id, entries) in &self.trajectories {
            for e in entries {
                frames.entry(e.frame).or_default().push((id, &e.quad));
            }
        }
        frames
    }
}

/// Evaluation summary. `mm + pm + ml` equals the ground-truth trajectory
/// count on every evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub mota: f64,
    pub motp: f64,
    pub idf1: f64,
    #[serde(rename = "fp")]
    pub false_positives: usize,
    #[serde(rename = "fn")]
    pub false_negatives: usize,
    #[serde(rename = "idsw")]
    pub id_switches: usize,
    pub mm: usize,
    pub pm: usize,
    pub ml: usize,
    pub precision: f64,
    pub recall: f64,
    pub fmeasure: f64,
}

impl MetricsReport {
    /// Flat key-value text rendering, one metric per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("mota = {}\n", self.mota));
        s.push_str(&format!("motp = {}\n", self.motp));
        s.push_str(&format!("idf1 = {}\n", self.idf1));
        s.push_str(&format!("fp = {}\n", self.false_positives));
        s.push_str(&format!("fn = {}\n", self.false_negatives));
        s.push_str(&format!("idsw = {}\n", self.id_switches));
        s.push_str(&format!("mm = {}\n", self.mm));
        s.push_str(&format!("pm = {}\n", self.pm));
        s.push_str(&format!("ml = {}\n", self.ml));
        s.push_str(&format!("precision = {}\n", self.precision));
        s.push_str(&format!("recall = {}\n", self.recall));
        s.push_str(&format!("fmeasure = {}\n", self.fmeasure));
        s
    }
}

/// Match one frame's boxes, preferring continuity: matches carried in
/// `prev_matches` are kept while still above the IOU threshold, the rest
/// are matched by minimum (1 - IOU) assignment gated at the threshold.
/// Returns (gt_id, pred_id, iou) triples.
pub fn match_frame(
    gt_boxes: &[(u64, &Quad)],
    pred_boxes: &[(u64, &Quad)],
    prev_matches: &BTreeMap<u64, u64>,
    iou_threshold: f64,
) -> Result<Vec<(u64, u64, f64)>> {
    if !(0.0 < iou_threshold && iou_threshold < 1.0) {
        return Err(Error::Contract("iou threshold must lie in (0, 1)".into()));
    }
    let mut matches: Vec<(u64, u64, f64)> = Vec::new();
    let mut gt_used = vec![false; gt_boxes.len()];
    let mut pred_used = vec![false; pred_boxes.len()];

    for (gi, &(gt_id, gt_quad)) in gt_boxes.iter().enumerate() {
        if let Some(&prev_pred) = prev_matches.get(&gt_id) {
            if let Some(pi) = pred_boxes
                .iter()
                .position(|&(pid, _)| pid == prev_pred)
                .filter(|&pi| !pred_used[pi])
            {
                let overlap = iou(gt_quad, pred_boxes[pi].1)?;
                if overlap >= iou_threshold {
                    matches.push((gt_id, prev_pred, overlap));
                    gt_used[gi] = true;
                    pred_used[pi] = true;
                }
            }
        }
    }

    let free_gt: Vec<usize> = (0..gt_boxes.len()).filter(|&i| !gt_used[i]).collect();
    let free_pred: Vec<usize> = (0..pred_boxes.len()).filter(|&i| !pred_used[i]).collect();
    if !free_gt.is_empty() && !free_pred.is_empty() {
        let mut costs = Vec::with_capacity(free_gt.len() * free_pred.len());
        let mut overlaps = Vec::with_capacity(costs.capacity());
        for &gi in &free_gt {
            for &pi in &free_pred {
                let overlap = iou(gt_boxes[gi].1, pred_boxes[pi].1)?;
                overlaps.push(overlap);
                costs.push(1.0 - overlap);
            }
        }
        let matrix = DistanceMatrix::from_rows(free_gt.len(), free_pred.len(), costs)?;
        let assignment = solve_assignment(&matrix, 1.0 - iou_threshold);
        for &(row, col) in &assignment.pairs {
            let overlap = overlaps[row * free_pred.len() + col];
            if overlap >= iou_threshold {
                matches.push((
                    gt_boxes[free_gt[row]].0,
                    pred_boxes[free_pred[col]].0,
                    overlap,
                ));
            }
        }
    }
    matches.sort_by_key(|&(gt_id, _, _)| gt_id);
    Ok(matches)
}

/// Per-frame matching trace shared by the CLEAR-MOT and coverage metrics.
struct MatchTrace {
    /// (frame, gt_id, pred_id, iou) for every matched pair.
    matched: Vec<(u64, u64, u64, f64)>,
    gt_total: usize,
    pred_total: usize,
}

fn trace_matches(
    gt: &GroundTruth,
    result: &TrackingResult,
    iou_threshold: f64,
) -> Result<MatchTrace> {
    let gt_frames = gt.boxes_by_frame();
    let pred_frames = result.boxes_by_frame();
    let mut all_frames: Vec<u64> = gt_frames.keys().chain(pred_frames.keys()).copied().collect();
    all_frames.sort_unstable();
    all_frames.dedup();

    let empty_gt: Vec<(u64, &Quad)> = Vec::new();
    let empty_pred: Vec<(u64, &Quad)> = Vec::new();
    let mut carried: BTreeMap<u64, u64> = BTreeMap::new();
    let mut matched = Vec::new();
    let mut pred_total = 0usize;
    for &frame in &all_frames {
        let gt_boxes = gt_frames.get(&frame).unwrap_or(&empty_gt);
        let pred_boxes = pred_frames.get(&frame).unwrap_or(&empty_pred);
        pred_total += pred_boxes.len();
        let matches = match_frame(gt_boxes, pred_boxes, &carried, iou_threshold)?;
        carried = matches.iter().map(|&(g, p, _)| (g, p)).collect();
        for (g, p, overlap) in matches {
            matched.push((frame, g, p, overlap));
        }
    }
    Ok(MatchTrace {
        matched,
        gt_total: gt.total_boxes(),
        pred_total,
    })
}

/// CLEAR-MOT outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClearMot {
    pub mota: f64,
    pub motp: f64,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub id_switches: usize,
}

/// Multiple-object tracking accuracy and precision.
///
/// An id switch is counted whenever a ground-truth id's matched prediction
/// id differs from its most recent previously matched prediction id.
pub fn clear_mot(
    gt: &GroundTruth,
    result: &TrackingResult,
    iou_threshold: f64,
) -> Result<ClearMot> {
    if gt.total_boxes() == 0 {
        return Err(Error::UndefinedMetric(
            "clear-mot requires at least one ground-truth box".into(),
        ));
    }
    let trace = trace_matches(gt, result, iou_threshold)?;
    let matched = trace.matched.len();
    let false_negatives = trace.gt_total - matched;
    let false_positives = trace.pred_total - matched;

    let mut id_switches = 0usize;
    let mut last_matched: BTreeMap<u64, u64> = BTreeMap::new();
    let mut iou_sum = 0.0;
    for &(_, gt_id, pred_id, overlap) in &trace.matched {
        if let Some(&prev) = last_matched.get(&gt_id) {
            if prev != pred_id {
                id_switches += 1;
            }
        }
        last_matched.insert(gt_id, pred_id);
        iou_sum += overlap;
    }

    let mota = 1.0
        - (false_negatives + false_positives + id_switches) as f64 / trace.gt_total as f64;
    let motp = if matched > 0 {
        iou_sum / matched as f64
    } else {
        0.0
    };
    Ok(ClearMot {
        mota,
        motp,
        false_positives,
        false_negatives,
        id_switches,
    })
}

/// Identity-level F1: a global one-to-one matching between ground-truth
/// and predicted trajectories maximizing whole-sequence overlap counts.
/// Returns (idf1, idtp, idfp, idfn).
pub fn idf1(
    gt: &GroundTruth,
    result: &TrackingResult,
    iou_threshold: f64,
) -> Result<(f64, usize, usize, usize)> {
    if gt.total_boxes() == 0 {
        return Err(Error::UndefinedMetric(
            "idf1 requires at least one ground-truth box".into(),
        ));
    }
    let pred_trajs = result.trajectories_by_id();
    let gt_ids: Vec<u64> = gt.trajectories.keys().copied().collect();
    let pred_ids: Vec<u64> = pred_trajs.keys().copied().collect();
    let pred_total: usize = pred_trajs.values().map(Vec::len).sum();

    // Whole-sequence overlap counts per (gt, pred) trajectory pair.
    let rows = gt_ids.len();
    let cols = pred_ids.len();
    let mut overlaps = vec![0usize; rows * cols];
    for (ri, gt_id) in gt_ids.iter().enumerate() {
        let entries = &gt.trajectories[gt_id];
        for (ci, pred_id) in pred_ids.iter().enumerate() {
            let boxes = &pred_trajs[pred_id];
            let mut count = 0usize;
            let mut bi = 0usize;
            for e in entries {
                while bi < boxes.len() && boxes[bi].0 < e.frame {
                    bi += 1;
                }
                if bi < boxes.len() && boxes[bi].0 == e.frame {
                    let overlap = iou(&e.quad, &boxes[bi].1)?;
                    if overlap >= iou_threshold {
                        count += 1;
                    }
                }
            }
            overlaps[ri * cols + ci] = count;
        }
    }

    let idtp = if rows > 0 && cols > 0 {
        let max_overlap = *overlaps.iter().max().unwrap() as f64;
        let costs: Vec<f64> = overlaps.iter().map(|&c| max_overlap - c as f64).collect();
        let matrix = DistanceMatrix::from_rows(rows, cols, costs)?;
        let assignment = solve_assignment(&matrix, f64::INFINITY);
        assignment
            .pairs
            .iter()
            .map(|&(r, c)| overlaps[r * cols + c])
            .sum()
    } else {
        0
    };

    let idfn = gt.total_boxes() - idtp;
    let idfp = pred_total - idtp;
    let denom = 2 * idtp + idfp + idfn;
    let score = if denom > 0 {
        2.0 * idtp as f64 / denom as f64
    } else {
        0.0
    };
    Ok((score, idtp, idfp, idfn))
}

/// Classify every ground-truth trajectory by tracked coverage:
/// mostly-matched at >= `mm_threshold`, mostly-lost at <= `ml_threshold`,
/// partial in between. Returns (mm, pm, ml).
pub fn match_classes_with_thresholds(
    gt: &GroundTruth,
    result: &TrackingResult,
    iou_threshold: f64,
    mm_threshold: f64,
    ml_threshold: f64,
) -> Result<(usize, usize, usize)> {
    let trace = trace_matches(gt, result, iou_threshold)?;
    let mut matched_per_gt: BTreeMap<u64, usize> = BTreeMap::new();
    for &(_, gt_id, _, _) in &trace.matched {
        *matched_per_gt.entry(gt_id).or_insert(0) += 1;
    }
    let mut mm = 0usize;
    let mut pm = 0usize;
    let mut ml = 0usize;
    for (id, entries) in &gt.trajectories {
        let coverage =
            matched_per_gt.get(id).copied().unwrap_or(0) as f64 / entries.len() as f64;
        if coverage >= mm_threshold {
            mm += 1;
        } else if coverage <= ml_threshold {
            ml += 1;
        } else {
            pm += 1;
        }
    }
    Ok((mm, pm, ml))
}

pub fn match_classes(
    gt: &GroundTruth,
    result: &TrackingResult,
    iou_threshold: f64,
) -> Result<(usize, usize, usize)> {
    match_classes_with_thresholds(gt, result, iou_threshold, 0.8, 0.2)
}

/// Detection precision/recall/F-measure under per-frame gated optimal
/// matching (no continuity). Zero detections report (0, 0, 0).
pub fn detection_prf(
    gt: &GroundTruth,
    detections: &BTreeMap<u64, Vec<Quad>>,
    iou_threshold: f64,
) -> Result<(f64, f64, f64)> {
    let gt_frames = gt.boxes_by_frame();
    let mut frames: Vec<u64> = gt_frames.keys().chain(detections.keys()).copied().collect();
    frames.sort_unstable();
    frames.dedup();

    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    let empty_matches: BTreeMap<u64, u64> = BTreeMap::new();
    for frame in frames {
        let gt_boxes = gt_frames.get(&frame).cloned().unwrap_or_default();
        let det_quads = detections.get(&frame).map(|v| v.as_slice()).unwrap_or(&[]);
        let det_boxes: Vec<(u64, &Quad)> = det_quads
            .iter()
            .enumerate()
            .map(|(k, q)| (k as u64, q))
            .collect();
        let matches = match_frame(&gt_boxes, &det_boxes, &empty_matches, iou_threshold)?;
        tp += matches.len();
        fn_ += gt_boxes.len() - matches.len();
        fp += det_boxes.len() - matches.len();
    }

    let precision = if tp + fp > 0 {
        tp as f64 / (tp + fp) as f64
    } else {
        0.0
    };
    let recall = if tp + fn_ > 0 {
        tp as f64 / (tp + fn_) as f64
    } else {
        0.0
    };
    let fmeasure = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok((precision, recall, fmeasure))
}

/// Run the full evaluation at one IOU threshold.
pub fn evaluate(
    gt: &GroundTruth,
    result: &TrackingResult,
    iou_threshold: f64,
) -> Result<MetricsReport> {
    let cm = clear_mot(gt, result, iou_threshold)?;
    let (idf1_score, _, _, _) = idf1(gt, result, iou_threshold)?;
    let (mm, pm, ml) = match_classes(gt, result, iou_threshold)?;
    let boxes = result.boxes_by_frame_owned();
    let (precision, recall, fmeasure) = detection_prf(gt, &boxes, iou_threshold)?;
    Ok(MetricsReport {
        mota: cm.mota,
        motp: cm.motp,
        idf1: idf1_score,
        false_positives: cm.false_positives,
        false_negatives: cm.false_negatives,
        id_switches: cm.id_switches,
        mm,
        pm,
        ml,
        precision,
        recall,
        fmeasure,
    })
}
