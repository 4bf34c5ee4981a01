//! Deterministic synthetic scenario generator: textured boxes moving
//! through grayscale frames, exact ground truth, and detections derived
//! from the ground truth by dropout, jitter and distractor corruption.
//!
//! Randomness comes from one ChaCha8 generator per named stream, all
//! derived from the scenario seed, so changing one corruption knob never
//! shifts the draws of another.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::embeddings::fnv1a;
use crate::error::{Error, Result};
use crate::geometry::{Point, Quad, RotatedRect};
use crate::localization::GrayFrame;
use crate::metrics::GroundTruth;
use crate::tracker::Detection;

/// Motion pattern applied to the generated tracks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MotionKind {
    /// Constant velocity with wall bounces.
    Linear,
    /// Tracks in shared lanes moving in opposite directions so that
    /// distinct-texture tracks pass through each other.
    Crossing,
    /// Orbit around a per-track center.
    Circular,
}

impl MotionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MotionKind::Linear => "linear",
            MotionKind::Crossing => "crossing",
            MotionKind::Circular => "circular",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(MotionKind::Linear),
            "crossing" => Ok(MotionKind::Crossing),
            "circular" => Ok(MotionKind::Circular),
            other => Err(Error::Validation(format!("unknown motion kind '{other}'"))),
        }
    }
}

/// Parameters of one synthetic scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub width: usize,
    pub height: usize,
    pub frames: u64,
    pub tracks: usize,
    pub motion: MotionKind,
    /// Pixels per frame.
    pub speed: f64,
    /// Per-box independent miss probability.
    pub dropout_p: f64,
    /// Standard deviation of the per-vertex coordinate jitter; draws are
    /// clipped at 2.5 sigma so jittered quads stay convex.
    pub jitter_sigma: f64,
    /// Expected number of false boxes per frame.
    pub distractor_rate: f64,
    /// Leading track pairs (0,1), (2,3), ... that share texture, size and
    /// transcription exactly.
    pub twin_pairs: usize,
    /// Number of tracks that additionally lose their detections for one
    /// contiguous window, emulating sustained misses.
    pub blackout_tracks: usize,
    /// Length of that window in frames.
    pub blackout_len: u64,
    pub seed: u64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec {
            width: 512,
            height: 384,
            frames: 200,
            tracks: 20,
            motion: MotionKind::Linear,
            speed: 2.0,
            dropout_p: 0.3,
            jitter_sigma: 0.5,
            distractor_rate: 0.0,
            twin_pairs: 0,
            blackout_tracks: 3,
            blackout_len: 170,
            seed: 1,
        }
    }
}

impl ScenarioSpec {
    /// The crossing-twins stress scenario: same-sized tracks in opposing
    /// lanes, three twin pairs sharing texture and transcription.
    pub fn crossing_twins(seed: u64) -> Self {
        ScenarioSpec {
            width: 512,
            height: 384,
            frames: 150,
            tracks: 8,
            motion: MotionKind::Crossing,
            speed: 2.5,
            dropout_p: 0.0,
            jitter_sigma: 0.5,
            distractor_rate: 0.0,
            twin_pairs: 3,
            blackout_tracks: 0,
            blackout_len: 0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 64 || self.height < 64 {
            return Err(Error::InvalidScenario(
                "frame must be at least 64x64".into(),
            ));
        }
        if self.frames == 0 || self.tracks == 0 {
            return Err(Error::InvalidScenario(
                "need at least one frame and one track".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.dropout_p) {
            return Err(Error::InvalidScenario("dropout_p must lie in [0, 1]".into()));
        }
        if self.jitter_sigma < 0.0 || self.jitter_sigma > 2.0 {
            return Err(Error::InvalidScenario(
                "jitter_sigma must lie in [0, 2]".into(),
            ));
        }
        if self.distractor_rate < 0.0 {
            return Err(Error::InvalidScenario(
                "distractor_rate must be non-negative".into(),
            ));
        }
        if self.speed < 0.0 {
            return Err(Error::InvalidScenario("speed must be non-negative".into()));
        }
        if self.twin_pairs * 2 > self.tracks {
            return Err(Error::InvalidScenario(format!(
                "{} twin pairs need {} tracks, have {}",
                self.twin_pairs,
                self.twin_pairs * 2,
                self.tracks
            )));
        }
        if self.blackout_tracks > self.tracks {
            return Err(Error::InvalidScenario(
                "more blackout tracks than tracks".into(),
            ));
        }
        if self.blackout_tracks > 0 && self.blackout_len + 10 > self.frames {
            return Err(Error::InvalidScenario(format!(
                "blackout of {} frames does not fit into {} frames",
                self.blackout_len, self.frames
            )));
        }
        Ok(())
    }
}

/// A generated scenario: rendered frames, exact ground truth, and the
/// corrupted detections. `detection_sources[t][k]` names the source track
/// id of detections[t][k], or `None` for a distractor.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub frames: Vec<GrayFrame>,
    pub gt: GroundTruth,
    pub detections: Vec<Vec<Detection>>,
    pub detection_sources: Vec<Vec<Option<u64>>>,
}

/// Transcriptions are drawn from this fixed list.
pub const WORDS: [&str; 64] = [
    "STOP", "EXIT", "OPEN", "SALE", "CAFE", "HOTEL", "PIZZA", "BOOKS", "METRO", "TAXI",
    "PARK", "NORTH", "SOUTH", "EAST", "WEST", "BREAD", "MILK", "SHOES", "MUSIC", "RADIO",
    "PHONE", "WATER", "JUICE", "PLAZA", "TOWER", "RIVER", "TRAIN", "PLANE", "FERRY", "GATE",
    "SEVEN", "NINTH", "FIRST", "GRAND", "ROYAL", "UNION", "CEDAR", "MAPLE", "OLIVE", "PEARL",
    "AMBER", "CORAL", "DELTA", "ECHO", "FLINT", "GROVE", "HAVEN", "IVORY", "JETTY", "KIOSK",
    "LEMON", "MANOR", "NOBLE", "ORBIT", "PRIME", "QUAY", "RIDGE", "STONE", "TRACK", "ULTRA",
    "VISTA", "WHARF", "YIELD", "ZEBRA",
];

const MARGIN: f64 = 4.0;

mod stream {
    pub const LAYOUT: u64 = 0;
    pub const TEXTURE: u64 = 1;
    pub const DROPOUT: u64 = 2;
    pub const JITTER: u64 = 3;
    pub const DISTRACTOR: u64 = 4;
    pub const WORDS: u64 = 5;
    pub const CONFIDENCE: u64 = 6;
    pub const BLACKOUT: u64 = 7;
}

fn rng_stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Seeded per-cell texture value.
fn texture_value(texture_seed: u64, lx: i64, ly: i64) -> u8 {
    let mut bytes = [0u8; 24];
    bytes[..8].copy_from_slice(&texture_seed.to_le_bytes());
    bytes[8..16].copy_from_slice(&lx.to_le_bytes());
    bytes[16..24].copy_from_slice(&ly.to_le_bytes());
    (fnv1a(&bytes) % 256) as u8
}

/// Static background noise; a function of position only so consecutive
/// frames share their background exactly.
fn background_value(seed: u64, x: usize, y: usize) -> u8 {
    let mut bytes = [0u8; 24];
    bytes[..8].copy_from_slice(&(seed ^ 0x6261636b).to_le_bytes());
    bytes[8..16].copy_from_slice(&(x as u64).to_le_bytes());
    bytes[16..24].copy_from_slice(&(y as u64).to_le_bytes());
    (96 + fnv1a(&bytes) % 64) as u8
}

/// Replace the interior pixels of `rect` with the seeded texture pattern.
/// The pattern is anchored in the rectangle's local coordinates, so the
/// same seed at a translated position produces the same pixels shifted.
pub fn render_box(frame: &mut GrayFrame, rect: &RotatedRect, texture_seed: u64) {
    let quad = rect.to_quad();
    let (bx0, by0, bx1, by1) = quad.bounding_box();
    let x0 = bx0.floor().max(0.0) as usize;
    let y0 = by0.floor().max(0.0) as usize;
    let x1 = (bx1.ceil() as i64).clamp(0, frame.width() as i64) as usize;
    let y1 = (by1.ceil() as i64).clamp(0, frame.height() as i64) as usize;
    let (sin_t, cos_t) = rect.theta.sin_cos();
    for y in y0..y1 {
        for x in x0..x1 {
            let cx = x as f64 + 0.5;
            let cy = y as f64 + 0.5;
            if !quad.contains(Point::new(cx, cy)) {
                continue;
            }
            let dx = cx - rect.cx;
            let dy = cy - rect.cy;
            let lx = dx * cos_t + dy * sin_t + rect.w / 2.0;
            let ly = -dx * sin_t + dy * cos_t + rect.h / 2.0;
            frame.set(x, y, texture_value(texture_seed, lx.floor() as i64, ly.floor() as i64));
        }
    }
}

struct TrackPlan {
    texture_seed: u64,
    word: String,
    w: f64,
    h: f64,
    /// Center position per frame.
    centers: Vec<(f64, f64)>,
    /// Detections suppressed in [start, start + len).
    blackout: Option<(u64, u64)>,
}

/// Reflect `p` into [lo, hi] by folding.
fn bounce(p: f64, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return lo;
    }
    let span = hi - lo;
    let mut q = (p - lo) % (2.0 * span);
    if q < 0.0 {
        q += 2.0 * span;
    }
    if q > span {
        q = 2.0 * span - q;
    }
    lo + q
}

fn plan_tracks(spec: &ScenarioSpec) -> Result<Vec<TrackPlan>> {
    let mut layout = rng_stream(spec.seed, stream::LAYOUT);
    let mut texture = rng_stream(spec.seed, stream::TEXTURE);
    let mut words = rng_stream(spec.seed, stream::WORDS);
    let mut blackout = rng_stream(spec.seed, stream::BLACKOUT);

    let n = spec.tracks;
    // Crossing lanes share one box size so crossings are shape-ambiguous.
    let shared_w = layout.gen_range(44.0..60.0);
    let shared_h = layout.gen_range(14.0..19.0);

    // Linear motion confines each track to its own horizontal lane, like
    // scrolling caption lines; lanes must leave a clearance gap so masks
    // of adjacent lanes never touch.
    let linear_lane_height = (spec.height as f64 - 2.0 * MARGIN) / n as f64;
    if spec.motion == MotionKind::Linear && linear_lane_height < 14.0 {
        return Err(Error::InvalidScenario(format!(
            "{n} lanes do not fit a {}px tall frame",
            spec.height
        )));
    }

    let mut plans: Vec<TrackPlan> = Vec::with_capacity(n);
    for i in 0..n {
        let (w, h) = match spec.motion {
            MotionKind::Crossing => (shared_w, shared_h),
            MotionKind::Linear => (
                layout.gen_range(36.0..60.0),
                layout.gen_range(9.0..(linear_lane_height - 5.0).min(13.0)),
            ),
            MotionKind::Circular => {
                (layout.gen_range(40.0..68.0), layout.gen_range(14.0..20.0))
            }
        };
        let twin_of = if i < spec.twin_pairs * 2 && i % 2 == 1 {
            Some(i - 1)
        } else {
            None
        };
        let (texture_seed, word, w, h) = if let Some(j) = twin_of {
            let prev = &plans[j];
            (prev.texture_seed, prev.word.clone(), prev.w, prev.h)
        } else {
            (
                texture.gen::<u64>(),
                WORDS[words.gen_range(0..WORDS.len())].to_string(),
                w,
                h,
            )
        };

        if w + 2.0 * MARGIN >= spec.width as f64 || h + 2.0 * MARGIN >= spec.height as f64 {
            return Err(Error::InvalidScenario(format!(
                "track {i} box {w:.0}x{h:.0} cannot fit a {}x{} frame",
                spec.width, spec.height
            )));
        }

        let min_x = MARGIN + w / 2.0;
        let max_x = spec.width as f64 - MARGIN - w / 2.0;
        let min_y = MARGIN + h / 2.0;
        let max_y = spec.height as f64 - MARGIN - h / 2.0;

        let centers: Vec<(f64, f64)> = match spec.motion {
            MotionKind::Linear => {
                let x0 = layout.gen_range(min_x..max_x);
                let y = (MARGIN + linear_lane_height * (i as f64 + 0.5)).round();
                let direction = if layout.gen_bool(0.5) { 1.0 } else { -1.0 };
                let vx = spec.speed * direction;
                (0..spec.frames)
                    .map(|t| (bounce(x0 + vx * t as f64, min_x, max_x), y))
                    .collect()
            }
            MotionKind::Crossing => {
                // Track i and its partner i +- n/2 share lane (i mod n/2);
                // the first half moves rightward, the second leftward.
                // Positions snap to integers so same-direction twins stay
                // integer translates of each other and render identically.
                let lanes = (n + 1) / 2;
                let lane = i % lanes;
                let lane_gap = (spec.height as f64 - 2.0 * MARGIN - h) / lanes.max(1) as f64;
                if lane_gap < h + 6.0 {
                    return Err(Error::InvalidScenario(format!(
                        "{lanes} crossing lanes of {h:.0}px boxes do not fit {}px height",
                        spec.height
                    )));
                }
                let y = (MARGIN + h / 2.0 + lane_gap * (lane as f64 + 0.5)).round();
                let stagger = layout.gen_range(0..30) as f64;
                let rightward = i < lanes;
                let x0 = if rightward {
                    min_x.ceil() + stagger
                } else {
                    max_x.floor() - stagger
                };
                let v = if rightward { spec.speed } else { -spec.speed };
                (0..spec.frames)
                    .map(|t| (bounce(x0 + v * t as f64, min_x, max_x), y))
                    .collect()
            }
            MotionKind::Circular => {
                let max_r = ((max_x - min_x).min(max_y - min_y) / 2.0).max(1.0);
                let r = layout.gen_range((max_r * 0.3).min(max_r - 0.5)..max_r);
                let cx = layout.gen_range((min_x + r)..(max_x - r).max(min_x + r + 1e-9));
                let cy = layout.gen_range((min_y + r)..(max_y - r).max(min_y + r + 1e-9));
                let phase = layout.gen_range(0.0..std::f64::consts::TAU);
                let omega = if r > 0.0 { spec.speed / r } else { 0.0 };
                (0..spec.frames)
                    .map(|t| {
                        let a = phase + omega * t as f64;
                        (cx + r * a.cos(), cy + r * a.sin())
                    })
                    .collect()
            }
        };
        plans.push(TrackPlan {
            texture_seed,
            word,
            w,
            h,
            centers,
            blackout: None,
        });
    }

    // Assign contiguous miss windows to a deterministic random subset.
    if spec.blackout_tracks > 0 {
        let mut candidates: Vec<usize> = (0..n).collect();
        for _ in 0..spec.blackout_tracks.min(n) {
            let pick = blackout.gen_range(0..candidates.len());
            let track = candidates.swap_remove(pick);
            let latest = spec.frames - spec.blackout_len;
            let start = blackout.gen_range(5..latest.max(6));
            plans[track].blackout = Some((start, spec.blackout_len));
        }
    }
    Ok(plans)
}

/// Generate the full scenario. Bitwise reproducible for a given spec.
pub fn generate(spec: &ScenarioSpec) -> Result<Scenario> {
    spec.validate()?;
    let plans = plan_tracks(spec)?;

    let mut dropout = rng_stream(spec.seed, stream::DROPOUT);
    let mut jitter = rng_stream(spec.seed, stream::JITTER);
    let mut distractor = rng_stream(spec.seed, stream::DISTRACTOR);
    let mut confidence = rng_stream(spec.seed, stream::CONFIDENCE);
    let unit_normal = Normal::new(0.0, 1.0).expect("valid normal");

    let mut background = GrayFrame::new(spec.width, spec.height)?;
    for y in 0..spec.height {
        for x in 0..spec.width {
            background.set(x, y, background_value(spec.seed, x, y));
        }
    }

    let mut frames = Vec::with_capacity(spec.frames as usize);
    let mut gt = GroundTruth::new();
    let mut detections: Vec<Vec<Detection>> = Vec::with_capacity(spec.frames as usize);
    let mut sources: Vec<Vec<Option<u64>>> = Vec::with_capacity(spec.frames as usize);

    for t in 0..spec.frames {
        let mut frame = background.clone();
        let mut frame_dets: Vec<Detection> = Vec::new();
        let mut frame_sources: Vec<Option<u64>> = Vec::new();

        for (i, plan) in plans.iter().enumerate() {
            let (cx, cy) = plan.centers[t as usize];
            let rect = RotatedRect::new(cx, cy, plan.w, plan.h, 0.0)?;
            render_box(&mut frame, &rect, plan.texture_seed);
            let quad = rect.to_quad();
            gt.insert(i as u64 + 1, t, quad.clone(), Some(plan.word.clone()))?;

            // Streams are consumed for every (track, frame) pair so that
            // one knob cannot shift another stream's draws.
            let dropped = dropout.gen_range(0.0..1.0) < spec.dropout_p;
            let mut offsets = [0.0f64; 8];
            for o in offsets.iter_mut() {
                let z: f64 = unit_normal.sample(&mut jitter);
                *o = spec.jitter_sigma * z.clamp(-2.5, 2.5);
            }
            let conf = 0.55 + 0.4 * confidence.gen_range(0.0..1.0);

            let in_blackout = plan
                .blackout
                .is_some_and(|(start, len)| t >= start && t < start + len);
            if dropped || in_blackout {
                continue;
            }

            let v = quad.vertices();
            let jittered = Quad::new([
                Point::new(v[0].x + offsets[0], v[0].y + offsets[1]),
                Point::new(v[1].x + offsets[2], v[1].y + offsets[3]),
                Point::new(v[2].x + offsets[4], v[2].y + offsets[5]),
                Point::new(v[3].x + offsets[6], v[3].y + offsets[7]),
            ])?;
            let mut det = Detection::new(jittered, conf)?;
            det.transcription = Some(plan.word.clone());
            frame_dets.push(det);
            frame_sources.push(Some(i as u64 + 1));
        }

        if spec.distractor_rate > 0.0 {
            let poisson = Poisson::new(spec.distractor_rate)
                .map_err(|e| Error::InvalidScenario(format!("distractor rate: {e}")))?;
            let count = poisson.sample(&mut distractor) as usize;
            for _ in 0..count {
                let w = distractor.gen_range(30.0..70.0);
                let h = distractor.gen_range(10.0..22.0);
                let cx = distractor.gen_range(MARGIN + w / 2.0..spec.width as f64 - MARGIN - w / 2.0);
                let cy =
                    distractor.gen_range(MARGIN + h / 2.0..spec.height as f64 - MARGIN - h / 2.0);
                let conf = 0.45 + 0.5 * distractor.gen_range(0.0..1.0);
                let word = WORDS[distractor.gen_range(0..WORDS.len())];
                let rect = RotatedRect::new(cx, cy, w, h, 0.0)?;
                let mut det = Detection::new(rect.to_quad(), conf)?;
                det.transcription = Some(word.to_string());
                frame_dets.push(det);
                frame_sources.push(None);
            }
        }

        frames.push(frame);
        detections.push(frame_dets);
        sources.push(frame_sources);
    }

    Ok(Scenario {
        spec: spec.clone(),
        frames,
        gt,
        detections,
        detection_sources: sources,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::patch_descriptor;
    use crate::geometry::iou;

    fn small_spec(seed: u64) -> ScenarioSpec {
        ScenarioSpec {
            width: 256,
            height: 192,
            frames: 40,
            tracks: 5,
            blackout_tracks: 0,
            blackout_len: 0,
            seed,
            ..ScenarioSpec::default()
        }
    }

    #[test]
    fn no_corruption_reproduces_ground_truth() {
        let spec = ScenarioSpec {
            dropout_p: 0.0,
            jitter_sigma: 0.0,
            distractor_rate: 0.0,
            ..small_spec(3)
        };
        let scenario = generate(&spec).unwrap();
        let gt_frames = scenario.gt.boxes_by_frame();
        for (t, dets) in scenario.detections.iter().enumerate() {
            let boxes = &gt_frames[&(t as u64)];
            assert_eq!(dets.len(), boxes.len());
            for (det, src) in dets.iter().zip(&scenario.detection_sources[t]) {
                let gt_quad = boxes
                    .iter()
                    .find(|&&(id, _)| Some(id) == *src)
                    .map(|&(_, q)| q)
                    .unwrap();
                assert!((iou(&det.quad, gt_quad).unwrap() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn total_dropout_gives_empty_detections() {
        let spec = ScenarioSpec {
            dropout_p: 1.0,
            ..small_spec(4)
        };
        let scenario = generate(&spec).unwrap();
        assert!(scenario.detections.iter().all(Vec::is_empty));
    }

    #[test]
    fn dropout_count_is_binomial_and_reproducible() {
        let spec = ScenarioSpec {
            width: 512,
            height: 384,
            frames: 100,
            tracks: 10,
            dropout_p: 0.3,
            jitter_sigma: 0.0,
            distractor_rate: 0.0,
            twin_pairs: 0,
            blackout_tracks: 0,
            blackout_len: 0,
            seed: 12,
            motion: MotionKind::Linear,
            speed: 2.0,
        };
        let scenario = generate(&spec).unwrap();
        let kept: usize = scenario.detections.iter().map(Vec::len).sum();
        let dropped = 1000 - kept;
        // binomial(1000, 0.3): mean 300, sigma ~14.5; allow 3 sigma.
        assert!(
            (dropped as f64 - 300.0).abs() < 3.0 * 14.5,
            "dropped {dropped}"
        );
        let again = generate(&spec).unwrap();
        assert_eq!(scenario.detections.len(), again.detections.len());
        for (a, b) in scenario.detections.iter().zip(&again.detections) {
            assert_eq!(a, b);
        }
        for (a, b) in scenario.frames.iter().zip(&again.frames) {
            assert_eq!(a.data(), b.data());
        }
    }

    #[test]
    fn render_is_deterministic_and_translates() {
        let rect_a = RotatedRect::new(40.5, 30.5, 24.0, 10.0, 0.0).unwrap();
        let mut f1 = GrayFrame::new(128, 64).unwrap();
        let mut f2 = GrayFrame::new(128, 64).unwrap();
        render_box(&mut f1, &rect_a, 77);
        render_box(&mut f2, &rect_a, 77);
        assert_eq!(f1.data(), f2.data());

        // Same seed at an integer offset: identical pattern, shifted.
        let rect_b = RotatedRect::new(40.5 + 30.0, 30.5 + 10.0, 24.0, 10.0, 0.0).unwrap();
        let mut f3 = GrayFrame::new(128, 64).unwrap();
        render_box(&mut f3, &rect_b, 77);
        for y in 26..35 {
            for x in 29..52 {
                assert_eq!(f1.get(x, y), f3.get(x + 30, y + 10));
            }
        }
    }

    #[test]
    fn textures_always_carry_variance() {
        for seed in 0..1000u64 {
            let rect = RotatedRect::new(20.0, 10.0, 24.0, 12.0, 0.0).unwrap();
            let mut frame = GrayFrame::new(48, 24).unwrap();
            render_box(&mut frame, &rect, seed);
            let patch = frame.crop_clamped(8.0, 4.0, 32.0, 16.0).unwrap();
            let n = patch.data().len() as f64;
            let mean = patch.data().iter().map(|&v| v as f64).sum::<f64>() / n;
            let var = patch
                .data()
                .iter()
                .map(|&v| (v as f64 - mean).powi(2))
                .sum::<f64>()
                / n;
            assert!(var > 0.0, "seed {seed} rendered a flat texture");
        }
    }

    #[test]
    fn jittered_detections_keep_half_iou() {
        let spec = ScenarioSpec {
            dropout_p: 0.0,
            jitter_sigma: 1.0,
            ..small_spec(9)
        };
        let scenario = generate(&spec).unwrap();
        let gt_frames = scenario.gt.boxes_by_frame();
        for (t, dets) in scenario.detections.iter().enumerate() {
            for (det, src) in dets.iter().zip(&scenario.detection_sources[t]) {
                let id = src.unwrap();
                let gt_quad = gt_frames[&(t as u64)]
                    .iter()
                    .find(|&&(gid, _)| gid == id)
                    .map(|&(_, q)| q)
                    .unwrap();
                let overlap = iou(&det.quad, gt_quad).unwrap();
                assert!(overlap >= 0.5, "frame {t} id {id}: iou {overlap}");
            }
        }
    }

    #[test]
    fn every_gt_box_stays_inside_the_frame() {
        for motion in [MotionKind::Linear, MotionKind::Crossing, MotionKind::Circular] {
            let spec = ScenarioSpec {
                motion,
                tracks: 6,
                ..small_spec(21)
            };
            let scenario = generate(&spec).unwrap();
            for entries in scenario.gt.trajectories().values() {
                for e in entries {
                    let (x0, y0, x1, y1) = e.quad.bounding_box();
                    assert!(x0 >= 0.0 && y0 >= 0.0);
                    assert!(x1 <= spec.width as f64 && y1 <= spec.height as f64);
                }
            }
        }
    }

    #[test]
    fn twins_share_appearance_but_not_position() {
        let scenario = generate(&ScenarioSpec::crossing_twins(5)).unwrap();
        let frame = &scenario.frames[0];
        let gt_frames = scenario.gt.boxes_by_frame();
        let boxes = &gt_frames[&0];
        let crop = |id: u64| {
            let quad = boxes.iter().find(|&&(g, _)| g == id).map(|&(_, q)| q).unwrap();
            let (x0, y0, x1, y1) = quad.bounding_box();
            // Sample strictly inside to avoid boundary pixels.
            frame
                .crop_clamped(x0 + 2.0, y0 + 2.0, x1 - 2.0, y1 - 2.0)
                .unwrap()
        };
        // Tracks 1 and 2 are the first twin pair.
        let d1 = patch_descriptor(&crop(1), 256);
        let d2 = patch_descriptor(&crop(2), 256);
        let dist = crate::association::embedding_distance(&d1, &d2).unwrap();
        assert!(dist < 0.05, "twin descriptor distance {dist}");

        // Geometrically distinct: zero overlap at frame 0.
        let q1 = boxes.iter().find(|&&(g, _)| g == 1).map(|&(_, q)| q).unwrap();
        let q2 = boxes.iter().find(|&&(g, _)| g == 2).map(|&(_, q)| q).unwrap();
        assert_eq!(iou(q1, q2).unwrap(), 0.0);

        // A non-twin pair has visibly different texture.
        let d7 = patch_descriptor(&crop(7), 256);
        let dist17 = crate::association::embedding_distance(&d1, &d7).unwrap();
        assert!(dist17 > 0.5, "non-twin descriptor distance {dist17}");
    }

    #[test]
    fn blackout_suppresses_a_contiguous_window() {
        let spec = ScenarioSpec {
            frames: 60,
            blackout_tracks: 2,
            blackout_len: 40,
            dropout_p: 0.0,
            ..small_spec(33)
        };
        let scenario = generate(&spec).unwrap();
        // Count per-track presence; blacked-out tracks lose exactly 40.
        let mut present = vec![0u64; spec.tracks];
        for sources in &scenario.detection_sources {
            for src in sources.iter().flatten() {
                present[(*src - 1) as usize] += 1;
            }
        }
        let short: Vec<u64> = present.iter().copied().filter(|&c| c < 60).collect();
        assert_eq!(short.len(), 2, "presence: {present:?}");
        for c in short {
            assert_eq!(c, 20);
        }
    }

    #[test]
    fn unfittable_tracks_are_rejected() {
        // 12 crossing lanes cannot fit a 64 px tall frame.
        let spec = ScenarioSpec {
            width: 256,
            height: 64,
            tracks: 24,
            motion: MotionKind::Crossing,
            ..small_spec(2)
        };
        assert!(matches!(generate(&spec), Err(Error::InvalidScenario(_))));
    }
}
