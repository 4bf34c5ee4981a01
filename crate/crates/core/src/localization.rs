//! Spatio-temporal text localization: synthesize a probability map from
//! detections, recover missed instances by correlating previous-frame
//! patches against the current frame, fuse the two signals and re-extract
//! candidate boxes from the binarized result.

use crate::error::{Error, Result};
use crate::geometry::{min_area_rect, Point};
use crate::tracker::{Detection, TextInstance};

/// 8-bit grayscale frame, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayFrame {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayFrame {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Contract("frame dimensions must be positive".into()));
        }
        Ok(GrayFrame {
            width,
            height,
            data: vec![0; width * height],
        })
    }

    pub fn from_data(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(Error::Contract(format!(
                "frame data length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(GrayFrame {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }

    /// Bilinear sample at continuous coordinates (clamped to the frame).
    pub fn bilinear(&self, x: f64, y: f64) -> f64 {
        let x = x.clamp(0.0, (self.width - 1) as f64);
        let y = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let v00 = self.get(x0, y0) as f64;
        let v10 = self.get(x1, y0) as f64;
        let v01 = self.get(x0, y1) as f64;
        let v11 = self.get(x1, y1) as f64;
        v00 * (1.0 - fx) * (1.0 - fy)
            + v10 * fx * (1.0 - fy)
            + v01 * (1.0 - fx) * fy
            + v11 * fx * fy
    }

    /// Copy out the integer pixel rectangle covering the continuous box,
    /// clamped to the frame. Returns `None` when nothing remains.
    pub fn crop_clamped(&self, x0: f64, y0: f64, x1: f64, y1: f64) -> Option<GrayFrame> {
        let cx0 = x0.floor().max(0.0) as usize;
        let cy0 = y0.floor().max(0.0) as usize;
        let cx1 = (x1.ceil() as i64).clamp(0, self.width as i64) as usize;
        let cy1 = (y1.ceil() as i64).clamp(0, self.height as i64) as usize;
        if cx1 <= cx0 || cy1 <= cy0 {
            return None;
        }
        let w = cx1 - cx0;
        let h = cy1 - cy0;
        let mut data = Vec::with_capacity(w * h);
        for y in cy0..cy1 {
            data.extend_from_slice(&self.data[y * self.width + cx0..y * self.width + cx1]);
        }
        Some(GrayFrame {
            width: w,
            height: h,
            data,
        })
    }
}

/// Per-pixel text probability in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ProbabilityMap {
    pub fn zeros(width: usize, height: usize) -> Self {
        ProbabilityMap {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn from_data(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Contract("probability map size mismatch".into()));
        }
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Contract(
                "probability values must lie in [0, 1]".into(),
            ));
        }
        Ok(ProbabilityMap {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

/// Per-pixel {0, 1} mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl BinaryMask {
    pub fn zeros(width: usize, height: usize) -> Self {
        BinaryMask {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x] != 0
    }

    pub fn set(&mut self, x: usize, y: usize) {
        self.data[y * self.width + x] = 1;
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    /// Stamp an axis-aligned pixel rectangle, clamped to the mask.
    pub fn stamp_rect(&mut self, x0: usize, y0: usize, w: usize, h: usize) {
        let x1 = (x0 + w).min(self.width);
        let y1 = (y0 + h).min(self.height);
        for y in y0.min(self.height)..y1 {
            for x in x0.min(self.width)..x1 {
                self.set(x, y);
            }
        }
    }
}

/// Fused probability values; may exceed 1 because boosting is applied
/// before any clamping.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl FusedMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

/// How the complement mask boosts the probability map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoostMode {
    /// Add the mask value only at pixels whose probability already exceeds
    /// h1 (the published fusion rule).
    #[default]
    MaskedByProbability,
    /// Add the mask value wherever the mask is set, regardless of the
    /// probability underneath. Not the published rule; this variant is the
    /// one that can rescue detections the detector missed entirely.
    Unconditional,
}

/// Correlation recovery parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplementConfig {
    /// Search region size as a multiple of the template size.
    pub search_scale: f64,
    /// Minimum correlation peak for accepting a recovered location.
    pub ncc_accept: f64,
    /// Upper bound on the number of templates correlated per frame.
    pub max_templates: usize,
}

impl Default for ComplementConfig {
    fn default() -> Self {
        ComplementConfig {
            search_scale: 2.0,
            ncc_accept: 0.6,
            max_templates: 256,
        }
    }
}

impl ComplementConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.search_scale > 1.0) {
            return Err(Error::Contract("search_scale must exceed 1".into()));
        }
        if !(self.ncc_accept > -1.0 && self.ncc_accept <= 1.0) {
            return Err(Error::Contract("ncc_accept must lie in (-1, 1]".into()));
        }
        Ok(())
    }
}

/// Stamp every detection's quad interior with its confidence; overlaps
/// keep the pixel-wise maximum. Pixels are covered when their center lies
/// inside the quad.
pub fn synthesize_probability_map(
    detections: &[Detection],
    width: usize,
    height: usize,
) -> ProbabilityMap {
    let mut map = ProbabilityMap::zeros(width, height);
    for det in detections {
        let (bx0, by0, bx1, by1) = det.quad.bounding_box();
        let x0 = bx0.floor().max(0.0) as usize;
        let y0 = by0.floor().max(0.0) as usize;
        let x1 = (bx1.ceil() as i64).clamp(0, width as i64) as usize;
        let y1 = (by1.ceil() as i64).clamp(0, height as i64) as usize;
        for y in y0..y1 {
            for x in x0..x1 {
                let center = Point::new(x as f64 + 0.5, y as f64 + 0.5);
                if det.quad.contains(center) {
                    let idx = y * width + x;
                    if det.confidence > map.data[idx] {
                        map.data[idx] = det.confidence;
                    }
                }
            }
        }
    }
    map
}

/// Peak of the zero-mean normalized cross-correlation of `template` over
/// every valid placement inside `search`. Returns (row, col, score); score
/// is 1.0 for an exact copy. Window statistics come from integer integral
/// images so the result is exact and placement order independent; ties
/// keep the first (row-major) peak.
pub fn ncc_correlate(template: &GrayFrame, search: &GrayFrame) -> Result<(usize, usize, f64)> {
    let tw = template.width;
    let th = template.height;
    let sw = search.width;
    let sh = search.height;
    if tw >= sw || th >= sh {
        return Err(Error::Contract(format!(
            "template {}x{} must be strictly smaller than search {}x{}",
            tw, th, sw, sh
        )));
    }
    let n = (tw * th) as f64;
    let t_sum: u64 = template.data.iter().map(|&v| v as u64).sum();
    let t_mean = t_sum as f64 / n;
    let centered: Vec<f64> = template.data.iter().map(|&v| v as f64 - t_mean).collect();
    let t_norm_sq: f64 = centered.iter().map(|v| v * v).sum();
    if t_norm_sq <= 1e-12 {
        return Err(Error::NoSignal(
            "template has zero intensity variance".into(),
        ));
    }
    let t_norm = t_norm_sq.sqrt();

    // Integral images over the search region: sums and squared sums.
    let iw = sw + 1;
    let mut integral = vec![0u64; iw * (sh + 1)];
    let mut integral_sq = vec![0u64; iw * (sh + 1)];
    for y in 0..sh {
        let mut row_sum = 0u64;
        let mut row_sq = 0u64;
        for x in 0..sw {
            let v = search.data[y * sw + x] as u64;
            row_sum += v;
            row_sq += v * v;
            integral[(y + 1) * iw + x + 1] = integral[y * iw + x + 1] + row_sum;
            integral_sq[(y + 1) * iw + x + 1] = integral_sq[y * iw + x + 1] + row_sq;
        }
    }
    let window = |tbl: &[u64], r: usize, c: usize| -> u64 {
        tbl[(r + th) * iw + c + tw] + tbl[r * iw + c]
            - tbl[r * iw + c + tw]
            - tbl[(r + th) * iw + c]
    };

    let mut best: Option<(usize, usize, f64)> = None;
    for r in 0..=(sh - th) {
        for c in 0..=(sw - tw) {
            let w_sum = window(&integral, r, c) as f64;
            let w_sq = window(&integral_sq, r, c) as f64;
            let w_var = w_sq - w_sum * w_sum / n;
            if w_var <= 1e-12 {
                continue;
            }
            let mut num = 0.0;
            for ty in 0..th {
                let srow = (r + ty) * sw + c;
                let trow = ty * tw;
                for tx in 0..tw {
                    num += centered[trow + tx] * search.data[srow + tx] as f64;
                }
            }
            let score = num / (t_norm * w_var.sqrt());
            if best.map_or(true, |(_, _, s)| score > s) {
                best = Some((r, c, score));
            }
        }
    }
    best.ok_or_else(|| Error::NoSignal("search region has no textured window".into()))
}

/// Recover likely locations of previous-frame instances in the current
/// frame. Each instance's axis-aligned patch is cropped from the previous
/// frame as a template and correlated over a search region of
/// `search_scale` times the template size centered at the old location;
/// accepted peaks stamp a template-sized box. All stamps are OR-combined.
pub fn build_complement_mask(
    prev_instances: &[TextInstance],
    prev_frame: &GrayFrame,
    cur_frame: &GrayFrame,
    cfg: &ComplementConfig,
) -> Result<BinaryMask> {
    if prev_frame.width != cur_frame.width || prev_frame.height != cur_frame.height {
        return Err(Error::Contract(
            "previous and current frames must share dimensions".into(),
        ));
    }
    cfg.validate()?;
    let fw = cur_frame.width;
    let fh = cur_frame.height;
    let mut mask = BinaryMask::zeros(fw, fh);
    for inst in prev_instances.iter().take(cfg.max_templates) {
        let (bx0, by0, bx1, by1) = inst.quad.bounding_box();
        let template = match prev_frame.crop_clamped(bx0, by0, bx1, by1) {
            Some(t) if t.width >= 2 && t.height >= 2 => t,
            _ => continue,
        };
        let tw = template.width;
        let th = template.height;
        let tx0 = bx0.floor().max(0.0) as usize;
        let ty0 = by0.floor().max(0.0) as usize;

        // Search window: scaled template box centered on the old location.
        let sw = ((tw as f64 * cfg.search_scale).ceil() as usize).min(fw);
        let sh = ((th as f64 * cfg.search_scale).ceil() as usize).min(fh);
        if sw <= tw || sh <= th {
            continue;
        }
        let cx = tx0 as i64 + tw as i64 / 2;
        let cy = ty0 as i64 + th as i64 / 2;
        let sx0 = (cx - sw as i64 / 2).clamp(0, (fw - sw) as i64) as usize;
        let sy0 = (cy - sh as i64 / 2).clamp(0, (fh - sh) as i64) as usize;
        let search = cur_frame
            .crop_clamped(sx0 as f64, sy0 as f64, (sx0 + sw) as f64, (sy0 + sh) as f64)
            .expect("search window within frame");

        match ncc_correlate(&template, &search) {
            Ok((peak_r, peak_c, score)) if score >= cfg.ncc_accept => {
                mask.stamp_rect(sx0 + peak_c, sy0 + peak_r, tw, th);
            }
            Ok(_) => {}
            Err(Error::NoSignal(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(mask)
}

/// Boost the probability map with the complement mask and binarize.
///
/// Under the default mode, a set mask pixel adds 1 only where the
/// probability already exceeds `h1`; the boosted map is then thresholded
/// at `h2` without clamping. See [`BoostMode::Unconditional`] for the
/// variant that boosts wherever the mask is set.
pub fn fuse_and_binarize(
    b: &ProbabilityMap,
    m: &BinaryMask,
    h1: f64,
    h2: f64,
) -> Result<(FusedMap, BinaryMask)> {
    fuse_and_binarize_with_mode(b, m, h1, h2, BoostMode::MaskedByProbability)
}

pub fn fuse_and_binarize_with_mode(
    b: &ProbabilityMap,
    m: &BinaryMask,
    h1: f64,
    h2: f64,
    mode: BoostMode,
) -> Result<(FusedMap, BinaryMask)> {
    if b.width != m.width || b.height != m.height {
        return Err(Error::Contract(
            "probability map and mask dimensions differ".into(),
        ));
    }
    if !(0.0 <= h2 && h2 <= h1 && h1 <= 1.0) {
        return Err(Error::Contract(format!(
            "thresholds must satisfy 0 <= h2 <= h1 <= 1, got h1={h1} h2={h2}"
        )));
    }
    let mut fused = FusedMap {
        width: b.width,
        height: b.height,
        data: Vec::with_capacity(b.data.len()),
    };
    let mut out = BinaryMask::zeros(b.width, b.height);
    for (idx, (&p, &mv)) in b.data.iter().zip(&m.data).enumerate() {
        let boosted = match mode {
            BoostMode::MaskedByProbability => {
                if p > h1 {
                    p + mv as f64
                } else {
                    p
                }
            }
            BoostMode::Unconditional => p + mv as f64,
        };
        fused.data.push(boosted);
        if boosted > h2 {
            out.data[idx] = 1;
        }
    }
    Ok((fused, out))
}

pub const DEFAULT_MIN_COMPONENT_AREA: usize = 9;

/// Extract one detection per 8-connected component of the mask. The quad
/// is the minimum-area rotated rectangle over the component's pixel
/// corners; the confidence is the mean of the fused values clamped to
/// [0, 1]. Components below `min_area` pixels are dropped; output is
/// ordered by the (top, left) corner of the component bounding box.
pub fn extract_boxes(
    mask: &BinaryMask,
    fused: &FusedMap,
    min_area: usize,
) -> Result<Vec<Detection>> {
    if mask.width != fused.width || mask.height != fused.height {
        return Err(Error::Contract(
            "mask and fused map dimensions differ".into(),
        ));
    }
    let w = mask.width;
    let h = mask.height;
    let mut visited = vec![false; w * h];
    let mut components: Vec<(usize, usize, Detection)> = Vec::new();
    let mut stack: Vec<(usize, usize)> = Vec::new();

    for start_y in 0..h {
        for start_x in 0..w {
            let idx = start_y * w + start_x;
            if visited[idx] || mask.data[idx] == 0 {
                continue;
            }
            visited[idx] = true;
            stack.push((start_x, start_y));
            let mut pixels: Vec<(usize, usize)> = Vec::new();
            while let Some((x, y)) = stack.pop() {
                pixels.push((x, y));
                let x0 = x.saturating_sub(1);
                let y0 = y.saturating_sub(1);
                for ny in y0..=(y + 1).min(h - 1) {
                    for nx in x0..=(x + 1).min(w - 1) {
                        let nidx = ny * w + nx;
                        if !visited[nidx] && mask.data[nidx] != 0 {
                            visited[nidx] = true;
                            stack.push((nx, ny));
                        }
                    }
                }
            }
            if pixels.len() < min_area {
                continue;
            }
            let top = pixels.iter().map(|&(_, y)| y).min().unwrap();
            let left = pixels.iter().map(|&(x, _)| x).min().unwrap();
            let mut conf_sum = 0.0;
            let mut corners: Vec<Point> = Vec::with_capacity(pixels.len() * 4);
            for &(x, y) in &pixels {
                conf_sum += fused.get(x, y).clamp(0.0, 1.0);
                let (fx, fy) = (x as f64, y as f64);
                corners.push(Point::new(fx, fy));
                corners.push(Point::new(fx + 1.0, fy));
                corners.push(Point::new(fx, fy + 1.0));
                corners.push(Point::new(fx + 1.0, fy + 1.0));
            }
            let rect = min_area_rect(&corners)?;
            let quad = rect.to_quad();
            let confidence = conf_sum / pixels.len() as f64;
            components.push((top, left, Detection::new(quad, confidence)?));
        }
    }
    components.sort_by_key(|&(top, left, _)| (top, left));
    Ok(components.into_iter().map(|(_, _, det)| det).collect())
}
