//! Per-detection embedding providers and triplet-loss utilities.
//!
//! The visual and semantic branches are deterministic handcrafted
//! descriptors with the same shape contract as a learned extractor:
//! two fixed-dimension parts concatenated into one instance embedding.
//! The `FromFile` provider lets callers plug externally computed vectors.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::association::{embedding_distance, Embedding};
use crate::error::{Error, Result};
use crate::localization::GrayFrame;
use crate::tracker::Detection;

pub const DEFAULT_VISUAL_DIM: usize = 256;
pub const DEFAULT_SEMANTIC_DIM: usize = 256;

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

/// FNV-1a over a byte slice; the stable hash behind the bigram histogram
/// and the synthetic provider.
pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// Which signal an embedding is derived from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProviderKind {
    /// Use the embedding carried by the detection (loaded from file).
    FromFile,
    /// Visual descriptor of the detection's image patch.
    Patch,
    /// Semantic descriptor of the detection's transcription.
    Transcription,
    /// Concatenation of patch and transcription descriptors.
    PatchPlusTranscription,
    /// Deterministic pseudo-random vector keyed by transcription; test aid.
    Synthetic(u64),
}

/// Embedding source with its configured part dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmbeddingProvider {
    pub kind: ProviderKind,
    pub dim_visual: usize,
    pub dim_semantic: usize,
}

impl EmbeddingProvider {
    pub fn new(kind: ProviderKind) -> Self {
        EmbeddingProvider {
            kind,
            dim_visual: DEFAULT_VISUAL_DIM,
            dim_semantic: DEFAULT_SEMANTIC_DIM,
        }
    }

    pub fn requires_frames(&self) -> bool {
        matches!(
            self.kind,
            ProviderKind::Patch | ProviderKind::PatchPlusTranscription
        )
    }

    /// Compute the embedding for one detection. Returns `None` when the
    /// required signal is absent (no stored vector for `FromFile`, patch
    /// fully outside the frame for visual kinds).
    pub fn embed(&self, det: &Detection, frame: Option<&GrayFrame>) -> Result<Option<Embedding>> {
        match self.kind {
            ProviderKind::FromFile => Ok(det.embedding.clone()),
            ProviderKind::Patch => Ok(self.visual_part(det, frame)?),
            ProviderKind::Transcription => {
                let text = det.transcription.as_deref().unwrap_or("");
                Ok(Some(transcription_descriptor(text, self.dim_semantic)))
            }
            ProviderKind::PatchPlusTranscription => {
                let visual = match self.visual_part(det, frame)? {
                    Some(v) => v,
                    None => Embedding::new(vec![0.0; self.dim_visual])?,
                };
                let text = det.transcription.as_deref().unwrap_or("");
                let semantic = transcription_descriptor(text, self.dim_semantic);
                Ok(Some(self.concat(&visual, &semantic)?))
            }
            ProviderKind::Synthetic(seed) => {
                let dim = self.dim_visual + self.dim_semantic;
                match &det.transcription {
                    Some(text) => Ok(Some(synthetic_embedding(seed, text, dim))),
                    None => Ok(Some(Embedding::new(vec![0.0; dim])?)),
                }
            }
        }
    }

    fn visual_part(&self, det: &Detection, frame: Option<&GrayFrame>) -> Result<Option<Embedding>> {
        let frame = frame.ok_or_else(|| {
            Error::Contract("patch embedding provider requires the current frame".into())
        })?;
        let (x0, y0, x1, y1) = det.quad.bounding_box();
        match frame.crop_clamped(x0, y0, x1, y1) {
            Some(patch) => Ok(Some(patch_descriptor(&patch, self.dim_visual))),
            None => Ok(None),
        }
    }

    /// Concatenate the visual and semantic parts (visual first) after
    /// checking both against the configured dimensions.
    pub fn concat(&self, visual: &Embedding, semantic: &Embedding) -> Result<Embedding> {
        concat_embedding(visual, semantic, self.dim_visual, self.dim_semantic)
    }
}

/// Concatenation of the two embedding parts, visual first.
pub fn concat_embedding(
    visual: &Embedding,
    semantic: &Embedding,
    dim_visual: usize,
    dim_semantic: usize,
) -> Result<Embedding> {
    if visual.dim() != dim_visual || semantic.dim() != dim_semantic {
        return Err(Error::Contract(format!(
            "embedding part dimensions {}+{} do not match configured {}+{}",
            visual.dim(),
            semantic.dim(),
            dim_visual,
            dim_semantic
        )));
    }
    let mut values = Vec::with_capacity(dim_visual + dim_semantic);
    values.extend_from_slice(visual.values());
    values.extend_from_slice(semantic.values());
    Embedding::new(values)
}

/// Holistic visual descriptor of a grayscale patch.
///
/// The patch is resampled to a fixed grid by bilinear interpolation,
/// flattened row-major, mean-subtracted and scaled to unit norm. A flat
/// patch (zero variance) yields the zero vector. `dim` must be a perfect
/// square (default 256 = 16x16).
pub fn patch_descriptor(patch: &GrayFrame, dim: usize) -> Embedding {
    let side = (dim as f64).sqrt().round() as usize;
    assert_eq!(side * side, dim, "visual dimension must be a perfect square");
    let w = patch.width() as f64;
    let h = patch.height() as f64;
    let mut values = Vec::with_capacity(dim);
    for row in 0..side {
        for col in 0..side {
            let sx = ((col as f64 + 0.5) * w / side as f64 - 0.5).clamp(0.0, w - 1.0);
            let sy = ((row as f64 + 0.5) * h / side as f64 - 0.5).clamp(0.0, h - 1.0);
            values.push(patch.bilinear(sx, sy));
        }
    }
    let mean = values.iter().sum::<f64>() / dim as f64;
    for v in values.iter_mut() {
        *v -= mean;
    }
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 1e-12 {
        for v in values.iter_mut() {
            *v /= norm;
        }
    } else {
        values.iter_mut().for_each(|v| *v = 0.0);
    }
    Embedding::new(values).expect("descriptor values are finite")
}

/// Order-sensitive semantic descriptor: a character-bigram histogram.
///
/// The character sequence is wrapped in 0x02/0x03 start/end sentinels and
/// every adjacent pair is hashed with FNV-1a into one of `dim` buckets;
/// the histogram is scaled to unit norm. The empty string maps to the
/// zero vector.
pub fn transcription_descriptor(text: &str, dim: usize) -> Embedding {
    if text.is_empty() {
        return Embedding::new(vec![0.0; dim]).expect("zeros are finite");
    }
    let mut chars: Vec<char> = Vec::with_capacity(text.chars().count() + 2);
    chars.push('\u{2}');
    chars.extend(text.chars());
    chars.push('\u{3}');
    let mut hist = vec![0.0f64; dim];
    let mut buf = [0u8; 8];
    for pair in chars.windows(2) {
        let a = pair[0].encode_utf8(&mut buf).len();
        let mut bytes = buf[..a].to_vec();
        let b = pair[1].encode_utf8(&mut buf).len();
        bytes.extend_from_slice(&buf[..b]);
        let bucket = (fnv1a(&bytes) % dim as u64) as usize;
        hist[bucket] += 1.0;
    }
    let norm = hist.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in hist.iter_mut() {
            *v /= norm;
        }
    }
    Embedding::new(hist).expect("histogram values are finite")
}

/// Unit-norm pseudo-random vector keyed by (seed, transcription).
fn synthetic_embedding(seed: u64, text: &str, dim: usize) -> Embedding {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(text.as_bytes()));
    let mut values: Vec<f64> = (0..dim)
        .map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
        .collect();
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 1e-12 {
        for v in values.iter_mut() {
            *v /= norm;
        }
    }
    Embedding::new(values).expect("samples are finite")
}

/// An (anchor, positive, negative) triple with its trajectory identities.
#[derive(Debug, Clone)]
pub struct Triplet {
    pub anchor: Embedding,
    pub positive: Embedding,
    pub negative: Embedding,
    pub anchor_id: u64,
    pub positive_id: u64,
    pub negative_id: u64,
    /// Batch indices of (anchor, positive, negative).
    pub indices: (usize, usize, usize),
}

/// Margin ranking loss over one triplet:
/// max(0, -(|a-n| - |a-p|) + margin).
pub fn triplet_loss(a: &Embedding, p: &Embedding, n: &Embedding, margin: f64) -> Result<f64> {
    if margin < 0.0 {
        return Err(Error::Contract("margin must be non-negative".into()));
    }
    let d_an = embedding_distance(a, n)?;
    let d_ap = embedding_distance(a, p)?;
    Ok((-(d_an - d_ap) + margin).max(0.0))
}

/// Batch-hard mining: for each anchor pick the farthest same-identity
/// positive and the nearest different-identity negative. Ties break on the
/// smaller sample index; anchors without a valid positive or negative are
/// skipped.
pub fn hard_mine(batch: &[(Embedding, u64)]) -> Result<Vec<Triplet>> {
    let n = batch.len();
    let mut dist = vec![0.0f64; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = embedding_distance(&batch[i].0, &batch[j].0)?;
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    let mut triplets = Vec::new();
    for a in 0..n {
        let id = batch[a].1;
        let mut pos: Option<(usize, f64)> = None;
        let mut neg: Option<(usize, f64)> = None;
        for k in 0..n {
            if k == a {
                continue;
            }
            let d = dist[a * n + k];
            if batch[k].1 == id {
                if pos.map_or(true, |(_, pd)| d > pd) {
                    pos = Some((k, d));
                }
            } else if neg.map_or(true, |(_, nd)| d < nd) {
                neg = Some((k, d));
            }
        }
        if let (Some((p, _)), Some((g, _))) = (pos, neg) {
            triplets.push(Triplet {
                anchor: batch[a].0.clone(),
                positive: batch[p].0.clone(),
                negative: batch[g].0.clone(),
                anchor_id: id,
                positive_id: batch[p].1,
                negative_id: batch[g].1,
                indices: (a, p, g),
            });
        }
    }
    Ok(triplets)
}
