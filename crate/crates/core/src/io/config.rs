//! Flat key=value configuration files for the tracker and the scenario
//! generator. Unknown keys are rejected so typos fail loudly; omitted
//! keys keep their defaults. `#` starts a comment.

use std::path::Path;

use crate::embeddings::ProviderKind;
use crate::error::{Error, Result};
use crate::localization::BoostMode;
use crate::synth::{MotionKind, ScenarioSpec};
use crate::tracker::TrackerConfig;

fn parse_pairs(path: &Path, content: &str) -> Result<Vec<(usize, String, String)>> {
    let mut pairs = Vec::new();
    for (lineno, raw) in content.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::parse(path, lineno + 1, "expected 'key = value'".to_string())
        })?;
        pairs.push((
            lineno + 1,
            key.trim().to_string(),
            value.trim().to_string(),
        ));
    }
    Ok(pairs)
}

fn parse_value<T: std::str::FromStr>(
    path: &Path,
    line: usize,
    key: &str,
    value: &str,
) -> Result<T> {
    value
        .parse::<T>()
        .map_err(|_| Error::parse(path, line, format!("invalid value '{value}' for {key}")))
}

fn parse_bool(path: &Path, line: usize, key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        _ => Err(Error::parse(
            path,
            line,
            format!("invalid boolean '{value}' for {key}"),
        )),
    }
}

fn provider_name(kind: ProviderKind) -> &'static str {
    match kind {
        ProviderKind::FromFile => "fromfile",
        ProviderKind::Patch => "patch",
        ProviderKind::Transcription => "transcription",
        ProviderKind::PatchPlusTranscription => "patch+transcription",
        ProviderKind::Synthetic(_) => "synthetic",
    }
}

/// The canonical key/value snapshot of a tracker config; this order is
/// the on-disk order.
pub fn config_pairs(cfg: &TrackerConfig) -> Vec<(String, String)> {
    let synthetic_seed = match cfg.provider.kind {
        ProviderKind::Synthetic(seed) => seed,
        _ => 0,
    };
    vec![
        ("alpha".into(), cfg.weights.alpha.to_string()),
        ("beta".into(), cfg.weights.beta.to_string()),
        ("gamma".into(), cfg.weights.gamma.to_string()),
        ("sigma1".into(), cfg.weights.sigma1.to_string()),
        ("sigma2".into(), cfg.weights.sigma2.to_string()),
        ("sigma3".into(), cfg.weights.sigma3.to_string()),
        ("gate".into(), cfg.gate.to_string()),
        ("h1".into(), cfg.h1.to_string()),
        ("h2".into(), cfg.h2.to_string()),
        ("max_lost".into(), cfg.max_lost.to_string()),
        ("complement_enabled".into(), cfg.complement_enabled.to_string()),
        (
            "complement_only_lost".into(),
            cfg.complement_only_lost.to_string(),
        ),
        ("search_scale".into(), cfg.complement.search_scale.to_string()),
        ("ncc_accept".into(), cfg.complement.ncc_accept.to_string()),
        ("max_templates".into(), cfg.complement.max_templates.to_string()),
        (
            "min_component_area".into(),
            cfg.min_component_area.to_string(),
        ),
        (
            "new_track_min_confidence".into(),
            cfg.new_track_min_confidence.to_string(),
        ),
        (
            "boost_unconditional".into(),
            (cfg.boost_mode == BoostMode::Unconditional).to_string(),
        ),
        ("embedding_enabled".into(), cfg.embedding_enabled.to_string()),
        (
            "embedding_provider".into(),
            provider_name(cfg.provider.kind).to_string(),
        ),
        ("synthetic_seed".into(), synthetic_seed.to_string()),
        ("dim_visual".into(), cfg.provider.dim_visual.to_string()),
        ("dim_semantic".into(), cfg.provider.dim_semantic.to_string()),
        ("triplet_margin".into(), cfg.triplet_margin.to_string()),
    ]
}

pub fn write_config_string(cfg: &TrackerConfig) -> String {
    let mut out = String::new();
    for (k, v) in config_pairs(cfg) {
        out.push_str(&k);
        out.push_str(" = ");
        out.push_str(&v);
        out.push('\n');
    }
    out
}

/// Parse a tracker config, starting from defaults.
pub fn parse_config(path: &Path, content: &str) -> Result<TrackerConfig> {
    let mut cfg = TrackerConfig::default();
    let mut provider_kind: Option<String> = None;
    let mut synthetic_seed = 0u64;
    for (line, key, value) in parse_pairs(path, content)? {
        match key.as_str() {
            "alpha" => cfg.weights.alpha = parse_value(path, line, &key, &value)?,
            "beta" => cfg.weights.beta = parse_value(path, line, &key, &value)?,
            "gamma" => cfg.weights.gamma = parse_value(path, line, &key, &value)?,
            "sigma1" => cfg.weights.sigma1 = parse_value(path, line, &key, &value)?,
            "sigma2" => cfg.weights.sigma2 = parse_value(path, line, &key, &value)?,
            "sigma3" => cfg.weights.sigma3 = parse_value(path, line, &key, &value)?,
            "gate" => cfg.gate = parse_value(path, line, &key, &value)?,
            "h1" => cfg.h1 = parse_value(path, line, &key, &value)?,
            "h2" => cfg.h2 = parse_value(path, line, &key, &value)?,
            "max_lost" => cfg.max_lost = parse_value(path, line, &key, &value)?,
            "complement_enabled" => {
                cfg.complement_enabled = parse_bool(path, line, &key, &value)?
            }
            "complement_only_lost" => {
                cfg.complement_only_lost = parse_bool(path, line, &key, &value)?
            }
            "search_scale" => {
                cfg.complement.search_scale = parse_value(path, line, &key, &value)?
            }
            "ncc_accept" => cfg.complement.ncc_accept = parse_value(path, line, &key, &value)?,
            "max_templates" => {
                cfg.complement.max_templates = parse_value(path, line, &key, &value)?
            }
            "min_component_area" => {
                cfg.min_component_area = parse_value(path, line, &key, &value)?
            }
            "new_track_min_confidence" => {
                cfg.new_track_min_confidence = parse_value(path, line, &key, &value)?
            }
            "boost_unconditional" => {
                cfg.boost_mode = if parse_bool(path, line, &key, &value)? {
                    BoostMode::Unconditional
                } else {
                    BoostMode::MaskedByProbability
                }
            }
            "embedding_enabled" => {
                cfg.embedding_enabled = parse_bool(path, line, &key, &value)?
            }
            "embedding_provider" => provider_kind = Some(value),
            "synthetic_seed" => synthetic_seed = parse_value(path, line, &key, &value)?,
            "dim_visual" => cfg.provider.dim_visual = parse_value(path, line, &key, &value)?,
            "dim_semantic" => cfg.provider.dim_semantic = parse_value(path, line, &key, &value)?,
            "triplet_margin" => cfg.triplet_margin = parse_value(path, line, &key, &value)?,
            other => {
                return Err(Error::parse(
                    path,
                    line,
                    format!("unknown configuration key '{other}'"),
                ))
            }
        }
    }
    if let Some(name) = provider_kind {
        cfg.provider.kind = match name.as_str() {
            "fromfile" => ProviderKind::FromFile,
            "patch" => ProviderKind::Patch,
            "transcription" => ProviderKind::Transcription,
            "patch+transcription" => ProviderKind::PatchPlusTranscription,
            "synthetic" => ProviderKind::Synthetic(synthetic_seed),
            other => {
                return Err(Error::Validation(format!(
                    "unknown embedding provider '{other}'"
                )))
            }
        };
    } else if synthetic_seed != 0 {
        if let ProviderKind::Synthetic(_) = cfg.provider.kind {
            cfg.provider.kind = ProviderKind::Synthetic(synthetic_seed);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<TrackerConfig> {
    let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(path, &content)
}

pub fn save_config(path: &Path, cfg: &TrackerConfig) -> Result<()> {
    super::write_atomic(path, write_config_string(cfg).as_bytes())
}

pub fn write_scenario_string(spec: &ScenarioSpec) -> String {
    let mut out = String::new();
    let pairs = [
        ("width", spec.width.to_string()),
        ("height", spec.height.to_string()),
        ("frames", spec.frames.to_string()),
        ("tracks", spec.tracks.to_string()),
        ("motion", spec.motion.as_str().to_string()),
        ("speed", spec.speed.to_string()),
        ("dropout_p", spec.dropout_p.to_string()),
        ("jitter_sigma", spec.jitter_sigma.to_string()),
        ("distractor_rate", spec.distractor_rate.to_string()),
        ("twin_pairs", spec.twin_pairs.to_string()),
        ("blackout_tracks", spec.blackout_tracks.to_string()),
        ("blackout_len", spec.blackout_len.to_string()),
        ("seed", spec.seed.to_string()),
    ];
    for (k, v) in pairs {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(&v);
        out.push('\n');
    }
    out
}

/// Parse a scenario spec, starting from defaults.
pub fn parse_scenario(path: &Path, content: &str) -> Result<ScenarioSpec> {
    let mut spec = ScenarioSpec::default();
    for (line, key, value) in parse_pairs(path, content)? {
        match key.as_str() {
            "width" => spec.width = parse_value(path, line, &key, &value)?,
            "height" => spec.height = parse_value(path, line, &key, &value)?,
            "frames" => spec.frames = parse_value(path, line, &key, &value)?,
            "tracks" => spec.tracks = parse_value(path, line, &key, &value)?,
            "motion" => spec.motion = MotionKind::parse(&value)?,
            "speed" => spec.speed = parse_value(path, line, &key, &value)?,
            "dropout_p" => spec.dropout_p = parse_value(path, line, &key, &value)?,
            "jitter_sigma" => spec.jitter_sigma = parse_value(path, line, &key, &value)?,
            "distractor_rate" => spec.distractor_rate = parse_value(path, line, &key, &value)?,
            "twin_pairs" => spec.twin_pairs = parse_value(path, line, &key, &value)?,
            "blackout_tracks" => spec.blackout_tracks = parse_value(path, line, &key, &value)?,
            "blackout_len" => spec.blackout_len = parse_value(path, line, &key, &value)?,
            "seed" => spec.seed = parse_value(path, line, &key, &value)?,
            other => {
                return Err(Error::parse(
                    path,
                    line,
                    format!("unknown scenario key '{other}'"),
                ))
            }
        }
    }
    spec.validate()?;
    Ok(spec)
}

pub fn load_scenario(path: &Path) -> Result<ScenarioSpec> {
    let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scenario(path, &content)
}
