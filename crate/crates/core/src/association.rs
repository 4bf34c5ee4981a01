//! Pairwise distances between trajectory heads and detections, the adjacent
//! distance matrix, and the gated minimum-cost assignment.

use crate::error::{Error, Result};
use crate::geometry::{self, Quad, RotatedRect};
use crate::tracker::{Detection, TrajectoryPool};

/// Fixed-dimension feature vector attached to a text instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Contract("embedding entries must be finite".into()));
        }
        Ok(Embedding(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Weighting factors: alpha/beta/gamma blend the three distances, the
/// sigmas balance the three morphological terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub sigma3: f64,
}

impl Default for DistanceWeights {
    fn default() -> Self {
        DistanceWeights {
            alpha: 0.6,
            beta: 0.2,
            gamma: 0.2,
            sigma1: 0.3,
            sigma2: 0.3,
            sigma3: 0.7,
        }
    }
}

impl DistanceWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.alpha,
            self.beta,
            self.gamma,
            self.sigma1,
            self.sigma2,
            self.sigma3,
        ];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Contract(
                "distance weights must be finite and non-negative".into(),
            ));
        }
        if self.alpha + self.beta + self.gamma <= 0.0 {
            return Err(Error::Contract(
                "alpha + beta + gamma must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// M x N matrix of fused distances (trajectories x detections).
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Contract(format!(
                "distance matrix data length {} does not match {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        if data.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Contract(
                "distance matrix entries must be finite and non-negative".into(),
            ));
        }
        Ok(DistanceMatrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }
}

/// Outcome of the gated assignment: matched index pairs plus the leftovers
/// on both sides. Every index appears exactly once across the three sets.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_trajectories: Vec<usize>,
    pub unmatched_detections: Vec<usize>,
}

/// L2 Euclidean distance between two embeddings of equal dimension.
pub fn embedding_distance(e1: &Embedding, e2: &Embedding) -> Result<f64> {
    if e1.dim() != e2.dim() {
        return Err(Error::Contract(format!(
            "embedding dimension mismatch: {} vs {}",
            e1.dim(),
            e2.dim()
        )));
    }
    let mut acc = 0.0;
    for (a, b) in e1.values().iter().zip(e2.values()) {
        let d = a - b;
        acc += d * d;
    }
    Ok(acc.sqrt())
}

/// IOU distance: 1 - IOU, in [0, 1].
pub fn iou_distance(a: &Quad, b: &Quad) -> Result<f64> {
    Ok(1.0 - geometry::iou(a, b)?)
}

/// Orientation difference folded into [0, pi/2]: a rectangle at theta and
/// theta + pi is the same shape, so the raw difference is reduced modulo pi
/// and reflected.
fn angle_difference(ti: f64, tj: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let mut d = (ti - tj).abs() % pi;
    if d > pi / 2.0 {
        d = pi - d;
    }
    d
}

/// Shape-and-position dissimilarity of two rotated rectangles.
///
/// The center/size term is scaled by the reciprocal of the frame interval;
/// the aspect-ratio and orientation terms are interval-free.
pub fn morphological_distance(
    ri: &RotatedRect,
    rj: &RotatedRect,
    delta_f: u64,
    w: &DistanceWeights,
) -> Result<f64> {
    if delta_f == 0 {
        return Err(Error::Contract(
            "frame interval must be at least 1".into(),
        ));
    }
    let positional = (ri.cx - rj.cx).abs()
        + (ri.cy - rj.cy).abs()
        + (ri.h - rj.h).abs()
        + (ri.w - rj.w).abs();
    let ratio = (ri.aspect_ratio() - rj.aspect_ratio()).abs();
    let angle = angle_difference(ri.theta, rj.theta);
    Ok(w.sigma1 * positional / delta_f as f64 + w.sigma2 * ratio + w.sigma3 * angle)
}

/// Weighted blend of the three distances.
pub fn fused_distance(d_e: f64, d_p: f64, d_m: f64, w: &DistanceWeights) -> f64 {
    w.alpha * d_e + w.beta * d_p + w.gamma * d_m
}

/// Build the adjacent distance matrix between every trajectory head in the
/// pool (active and lost, in ascending-id order) and every detection.
///
/// With `use_embeddings` false, or whenever either side lacks an embedding,
/// the embedding term contributes exactly 0.
pub fn build_distance_matrix(
    pool: &TrajectoryPool,
    detections: &[Detection],
    frame_index: u64,
    w: &DistanceWeights,
    use_embeddings: bool,
) -> Result<DistanceMatrix> {
    let heads = pool.heads();
    let rows = heads.len();
    let cols = detections.len();
    let mut data = Vec::with_capacity(rows * cols);
    let det_rects: Vec<RotatedRect> = detections
        .iter()
        .map(|d| geometry::quad_to_rotated_rect(&d.quad))
        .collect::<Result<_>>()?;
    for traj in &heads {
        let head = traj.latest();
        if head.frame >= frame_index {
            return Err(Error::Contract(format!(
                "trajectory {} head frame {} is not before frame {}",
                traj.id, head.frame, frame_index
            )));
        }
        let delta_f = frame_index - head.frame;
        let head_rect = geometry::quad_to_rotated_rect(&head.quad)?;
        for (det, det_rect) in detections.iter().zip(&det_rects) {
            let d_e = if use_embeddings {
                match (&head.embedding, &det.embedding) {
                    (Some(a), Some(b)) => embedding_distance(a, b)?,
                    _ => 0.0,
                }
            } else {
                0.0
            };
            let d_p = iou_distance(&head.quad, &det.quad)?;
            let d_m = morphological_distance(&head_rect, &det_rect, delta_f, w)?;
            data.push(fused_distance(d_e, d_p, d_m, w));
        }
    }
    DistanceMatrix::from_rows(rows, cols, data)
}

/// Minimum-cost assignment on a square cost matrix (shortest augmenting
/// path form of the Hungarian algorithm). Returns col index per row.
/// Scan order is fixed, so results are deterministic.
fn solve_square(n: usize, cost: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    let inf = f64::INFINITY;
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Optimal one-to-one partial matching of size min(M, N), with any pair
/// whose distance exceeds `gate` removed afterwards.
///
/// Rectangular matrices are padded to square with zero-cost virtual
/// entries; virtual pairs never surface in the result.
pub fn solve_assignment(m: &DistanceMatrix, gate: f64) -> Assignment {
    let rows = m.rows();
    let cols = m.cols();
    if rows == 0 || cols == 0 {
        return Assignment {
            pairs: Vec::new(),
            unmatched_trajectories: (0..rows).collect(),
            unmatched_detections: (0..cols).collect(),
        };
    }
    let n = rows.max(cols);
    let row_to_col = solve_square(n, |i, j| {
        if i < rows && j < cols {
            m.get(i, j)
        } else {
            0.0
        }
    });

    let mut pairs = Vec::new();
    let mut matched_rows = vec![false; rows];
    let mut matched_cols = vec![false; cols];
    for (i, &j) in row_to_col.iter().enumerate() {
        if i < rows && j < cols && m.get(i, j) <= gate {
            pairs.push((i, j));
            matched_rows[i] = true;
            matched_cols[j] = true;
        }
    }
    pairs.sort_unstable();
    Assignment {
        pairs,
        unmatched_trajectories: (0..rows).filter(|&i| !matched_rows[i]).collect(),
        unmatched_detections: (0..cols).filter(|&j| !matched_cols[j]).collect(),
    }
}
