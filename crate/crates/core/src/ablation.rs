//! Ablation harness: named tracker configurations compared against each
//! other on synthetic scenarios, mirroring the published ablation tables
//! (complementer on/off, embedding variants, distance-term subsets).

use crate::embeddings::{EmbeddingProvider, ProviderKind};
use crate::error::Result;
use crate::io::TrackingResult;
use crate::localization::BoostMode;
use crate::metrics::{self, MetricsReport};
use crate::synth::Scenario;
use crate::tracker::{self, TrackerConfig};

/// Which table structure the benchmark reproduces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblationMode {
    /// Complementer off vs on.
    Scm,
    /// Geometry-only vs visual / semantic / combined embeddings.
    Embedding,
    /// Embedding distance alone, then adding IOU and morphology terms.
    Distances,
}

impl AblationMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "scm" => Some(AblationMode::Scm),
            "embedding" => Some(AblationMode::Embedding),
            "distances" => Some(AblationMode::Distances),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            AblationMode::Scm => "scm",
            AblationMode::Embedding => "embedding",
            AblationMode::Distances => "distances",
        }
    }
}

/// One configuration cell of an ablation table.
#[derive(Debug, Clone)]
pub struct AblationCell {
    pub name: &'static str,
    pub config: TrackerConfig,
}

/// Tracker configuration with the correlation complementer enabled.
///
/// Recovery runs with the unconditional boost: the published masked rule
/// cannot raise pixels the detector missed outright (their probability is
/// zero, below h1), so recovered boxes would never survive binarization.
pub fn scm_config() -> TrackerConfig {
    TrackerConfig {
        complement_enabled: true,
        boost_mode: BoostMode::Unconditional,
        ..TrackerConfig::default()
    }
}

fn embedding_config(kind: ProviderKind) -> TrackerConfig {
    TrackerConfig {
        embedding_enabled: true,
        provider: EmbeddingProvider::new(kind),
        ..TrackerConfig::default()
    }
}

fn distance_config(use_iou: bool, use_morph: bool) -> TrackerConfig {
    let mut cfg = embedding_config(ProviderKind::PatchPlusTranscription);
    if !use_iou {
        cfg.weights.beta = 0.0;
    }
    if !use_morph {
        cfg.weights.gamma = 0.0;
    }
    cfg
}

/// The configuration cells of one ablation mode, in table row order.
pub fn cells(mode: AblationMode) -> Vec<AblationCell> {
    match mode {
        AblationMode::Scm => vec![
            AblationCell {
                name: "off",
                config: TrackerConfig::default(),
            },
            AblationCell {
                name: "on",
                config: scm_config(),
            },
        ],
        AblationMode::Embedding => vec![
            AblationCell {
                name: "geometry",
                config: TrackerConfig::default(),
            },
            AblationCell {
                name: "ve",
                config: embedding_config(ProviderKind::Patch),
            },
            AblationCell {
                name: "se",
                config: embedding_config(ProviderKind::Transcription),
            },
            AblationCell {
                name: "ve+se",
                config: embedding_config(ProviderKind::PatchPlusTranscription),
            },
        ],
        AblationMode::Distances => vec![
            AblationCell {
                name: "de",
                config: distance_config(false, false),
            },
            AblationCell {
                name: "de+dm",
                config: distance_config(false, true),
            },
            AblationCell {
                name: "de+dp",
                config: distance_config(true, false),
            },
            AblationCell {
                name: "de+dp+dm",
                config: distance_config(true, true),
            },
        ],
    }
}

/// Track one scenario under one configuration and evaluate against its
/// ground truth at the CLEAR-MOT IOU threshold of 0.5.
pub fn run_cell(
    scenario: &Scenario,
    cfg: &TrackerConfig,
) -> Result<(TrackingResult, MetricsReport)> {
    let needs_frames =
        cfg.complement_enabled || (cfg.embedding_enabled && cfg.provider.requires_frames());
    let frames = needs_frames.then_some(scenario.frames.as_slice());
    let result = tracker::run_frames(&scenario.detections, frames, cfg, Some(scenario.spec.seed))?;
    let report = metrics::evaluate(&scenario.gt, &result, 0.5)?;
    Ok((result, report))
}
