//! Line-oriented detection and ground-truth formats, plus the best-effort
//! importer for ICDAR VideoText-style XML annotations.
//!
//! Detection record, one per line, space separated:
//!
//! ```text
//! frame hint x1 y1 x2 y2 x3 y3 x4 y4 confidence ["transcription"] [embedding: dim v1 ... vdim]
//! ```
//!
//! `hint` is a trajectory hint (-1 when absent) and is accepted but not
//! interpreted by the tracker. Transcriptions are double-quoted with
//! backslash escapes. Ground-truth records drop the hint/confidence and
//! carry the trajectory id instead:
//!
//! ```text
//! frame id x1 y1 x2 y2 x3 y3 x4 y4 ["transcription"]
//! ```

use std::fmt::Write as _;
use std::path::Path;

use crate::association::Embedding;
use crate::error::{Error, Result};
use crate::geometry::{Point, Quad};
use crate::metrics::GroundTruth;
use crate::tracker::Detection;

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Word(String),
    Quoted(String),
}

fn tokenize(line: &str) -> std::result::Result<Vec<Token>, String> {
    let mut tokens = Vec::new();
    let mut chars = line.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
        } else if c == '"' {
            chars.next();
            let mut s = String::new();
            loop {
                match chars.next() {
                    Some('"') => break,
                    Some('\\') => match chars.next() {
                        Some(e @ ('"' | '\\')) => s.push(e),
                        Some(other) => return Err(format!("bad escape '\\{other}'")),
                        None => return Err("unterminated escape".into()),
                    },
                    Some(other) => s.push(other),
                    None => return Err("unterminated quoted string".into()),
                }
            }
            tokens.push(Token::Quoted(s));
        } else {
            let mut s = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_whitespace() {
                    break;
                }
                s.push(c);
                chars.next();
            }
            tokens.push(Token::Word(s));
        }
    }
    Ok(tokens)
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

fn parse_f64(tok: &Token, what: &str) -> std::result::Result<f64, String> {
    match tok {
        Token::Word(w) => w
            .parse::<f64>()
            .map_err(|_| format!("expected {what}, got '{w}'")),
        Token::Quoted(_) => Err(format!("expected {what}, got a quoted string")),
    }
}

fn parse_u64(tok: &Token, what: &str) -> std::result::Result<u64, String> {
    match tok {
        Token::Word(w) => w
            .parse::<u64>()
            .map_err(|_| format!("expected {what}, got '{w}'")),
        Token::Quoted(_) => Err(format!("expected {what}, got a quoted string")),
    }
}

fn parse_quad(tokens: &[Token]) -> std::result::Result<Quad, String> {
    let mut coords = [0.0f64; 8];
    for (k, tok) in tokens.iter().enumerate() {
        coords[k] = parse_f64(tok, "a coordinate")?;
    }
    Quad::new([
        Point::new(coords[0], coords[1]),
        Point::new(coords[2], coords[3]),
        Point::new(coords[4], coords[5]),
        Point::new(coords[6], coords[7]),
    ])
    .map_err(|e| e.to_string())
}

fn format_quad(out: &mut String, quad: &Quad) {
    for v in quad.vertices() {
        let _ = write!(out, " {} {}", v.x, v.y);
    }
}

/// Parse a detections file into per-frame lists; frames without records
/// come back as empty lists.
pub fn parse_detections(path: &Path, content: &str) -> Result<Vec<Vec<Detection>>> {
    let mut per_frame: Vec<Vec<Detection>> = Vec::new();
    for (lineno, raw) in content.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (frame, det) = parse_detection_line(line)
            .map_err(|reason| Error::parse(path, lineno + 1, reason))?;
        let frame = frame as usize;
        if per_frame.len() <= frame {
            per_frame.resize_with(frame + 1, Vec::new);
        }
        per_frame[frame].push(det);
    }
    Ok(per_frame)
}

fn parse_detection_line(line: &str) -> std::result::Result<(u64, Detection), String> {
    let tokens = tokenize(line)?;
    if tokens.len() < 11 {
        return Err(format!(
            "detection record needs at least 11 fields, found {}",
            tokens.len()
        ));
    }
    let frame = parse_u64(&tokens[0], "a frame index")?;
    // Trajectory hint: validated syntactically, otherwise ignored.
    match &tokens[1] {
        Token::Word(w) if w.parse::<i64>().is_ok() => {}
        _ => return Err("expected an integer trajectory hint".into()),
    }
    let quad = parse_quad(&tokens[2..10])?;
    let confidence = parse_f64(&tokens[10], "a confidence")?;
    let mut det = Detection::new(quad, confidence).map_err(|e| e.to_string())?;

    let mut rest = &tokens[11..];
    if let Some(Token::Quoted(text)) = rest.first() {
        det.transcription = Some(text.clone());
        rest = &rest[1..];
    }
    if let Some(Token::Word(w)) = rest.first() {
        if w != "embedding:" {
            return Err(format!("unexpected trailing token '{w}'"));
        }
        let dim = parse_u64(&rest[1], "the embedding dimension")? as usize;
        if rest.len() != 2 + dim {
            return Err(format!(
                "embedding declares {dim} values but {} follow",
                rest.len() - 2
            ));
        }
        let mut values = Vec::with_capacity(dim);
        for tok in &rest[2..] {
            values.push(parse_f64(tok, "an embedding value")?);
        }
        det.embedding = Some(Embedding::new(values).map_err(|e| e.to_string())?);
    } else if let Some(Token::Quoted(_)) = rest.first() {
        return Err("unexpected second quoted string".into());
    }
    Ok((frame, det))
}

/// Render per-frame detections in the line format; inverse of
/// [`parse_detections`].
pub fn write_detections_string(per_frame: &[Vec<Detection>]) -> String {
    let mut out = String::new();
    for (frame, dets) in per_frame.iter().enumerate() {
        for det in dets {
            let _ = write!(out, "{frame} -1");
            format_quad(&mut out, &det.quad);
            let _ = write!(out, " {}", det.confidence);
            if let Some(text) = &det.transcription {
                let _ = write!(out, " {}", quote(text));
            }
            if let Some(emb) = &det.embedding {
                let _ = write!(out, " embedding: {}", emb.dim());
                for v in emb.values() {
                    let _ = write!(out, " {v}");
                }
            }
            out.push('\n');
        }
    }
    out
}

/// Parse the canonical ground-truth format.
pub fn parse_ground_truth(path: &Path, content: &str) -> Result<GroundTruth> {
    let mut gt = GroundTruth::new();
    for (lineno, raw) in content.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parsed: std::result::Result<(u64, u64, Quad, Option<String>), String> = (|| {
            let tokens = tokenize(line)?;
            if tokens.len() < 10 {
                return Err(format!(
                    "ground-truth record needs at least 10 fields, found {}",
                    tokens.len()
                ));
            }
            let frame = parse_u64(&tokens[0], "a frame index")?;
            let id = parse_u64(&tokens[1], "a trajectory id")?;
            if id == 0 {
                return Err("trajectory ids start at 1".into());
            }
            let quad = parse_quad(&tokens[2..10])?;
            let transcription = match tokens.get(10) {
                Some(Token::Quoted(text)) => Some(text.clone()),
                Some(Token::Word(w)) => return Err(format!("unexpected trailing token '{w}'")),
                None => None,
            };
            Ok((frame, id, quad, transcription))
        })();
        let (frame, id, quad, transcription) =
            parsed.map_err(|reason| Error::parse(path, lineno + 1, reason))?;
        gt.insert(id, frame, quad, transcription)
            .map_err(|e| Error::parse(path, lineno + 1, e.to_string()))?;
    }
    Ok(gt)
}

/// Render ground truth in canonical (frame, id) order; inverse of
/// [`parse_ground_truth`].
pub fn write_ground_truth_string(gt: &GroundTruth) -> String {
    let mut records: Vec<(u64, u64, &Quad, Option<&str>)> = Vec::new();
    for (&id, entries) in gt.trajectories() {
        for e in entries {
            records.push((e.frame, id, &e.quad, e.transcription.as_deref()));
        }
    }
    records.sort_by_key(|&(frame, id, _, _)| (frame, id));
    let mut out = String::new();
    for (frame, id, quad, transcription) in records {
        let _ = write!(out, "{frame} {id}");
        format_quad(&mut out, quad);
        if let Some(text) = transcription {
            let _ = write!(out, " {}", quote(text));
        }
        out.push('\n');
    }
    out
}

/// Best-effort importer for ICDAR VideoText-style XML ground truth.
///
/// Reads only: `<frame ID="..">` elements, their `<object ID=".."
/// Transcription="..">` children and each object's four `<Point x=".."
/// y=".."/>` children (element and attribute names matched
/// case-insensitively). Frame numbers are kept exactly as annotated.
/// Anything structurally different fails with a parse error.
pub fn import_icdar_xml(path: &Path, content: &str) -> Result<GroundTruth> {
    let mut gt = GroundTruth::new();
    let mut pos = 0usize;
    let bytes = content.as_bytes();
    let mut frame: Option<u64> = None;
    let mut object: Option<(u64, Option<String>, Vec<Point>)> = None;
    let line_of = |pos: usize| content[..pos].matches('\n').count() + 1;

    while let Some(start) = content[pos..].find('<').map(|k| pos + k) {
        let end = content[start..]
            .find('>')
            .map(|k| start + k)
            .ok_or_else(|| Error::parse(path, line_of(start), "unterminated tag"))?;
        let tag = &content[start + 1..end];
        pos = end + 1;
        if tag.starts_with('?') || tag.starts_with('!') {
            continue;
        }
        let closing = tag.starts_with('/');
        let body = tag.trim_start_matches('/').trim_end_matches('/').trim();
        let name = body.split_whitespace().next().unwrap_or("").to_lowercase();
        match (name.as_str(), closing) {
            ("frames" | "video", _) => {}
            ("frame", false) => {
                let id = attr(body, "id")
                    .and_then(|v| v.parse::<u64>().ok())
                    .ok_or_else(|| {
                        Error::parse(path, line_of(start), "frame element without numeric ID")
                    })?;
                frame = Some(id);
            }
            ("frame", true) => frame = None,
            ("object", false) => {
                let id = attr(body, "id")
                    .and_then(|v| v.parse::<u64>().ok())
                    .ok_or_else(|| {
                        Error::parse(path, line_of(start), "object element without numeric ID")
                    })?;
                let transcription = attr(body, "transcription");
                object = Some((id, transcription, Vec::new()));
            }
            ("object", true) => {
                let (id, transcription, points) = object.take().ok_or_else(|| {
                    Error::parse(path, line_of(start), "</object> without <object>")
                })?;
                let frame = frame.ok_or_else(|| {
                    Error::parse(path, line_of(start), "object outside a frame element")
                })?;
                if points.len() != 4 {
                    return Err(Error::parse(
                        path,
                        line_of(start),
                        format!("object {id} has {} points, need 4", points.len()),
                    ));
                }
                let quad = Quad::new([points[0], points[1], points[2], points[3]])
                    .map_err(|e| Error::parse(path, line_of(start), e.to_string()))?;
                gt.insert(id, frame, quad, transcription)
                    .map_err(|e| Error::parse(path, line_of(start), e.to_string()))?;
            }
            ("point", false) => {
                let (x, y) = match (
                    attr(body, "x").and_then(|v| v.parse::<f64>().ok()),
                    attr(body, "y").and_then(|v| v.parse::<f64>().ok()),
                ) {
                    (Some(x), Some(y)) => (x, y),
                    _ => {
                        return Err(Error::parse(
                            path,
                            line_of(start),
                            "Point element without numeric x/y",
                        ))
                    }
                };
                match object.as_mut() {
                    Some((_, _, points)) => points.push(Point::new(x, y)),
                    None => {
                        return Err(Error::parse(
                            path,
                            line_of(start),
                            "Point outside an object element",
                        ))
                    }
                }
            }
            (other, _) => {
                return Err(Error::parse(
                    path,
                    line_of(start),
                    format!("unsupported element <{other}>"),
                ));
            }
        }
    }
    let _ = bytes;
    Ok(gt)
}

/// Case-insensitive attribute lookup inside a tag body.
fn attr(tag_body: &str, name: &str) -> Option<String> {
    let lower = tag_body.to_lowercase();
    let needle = format!("{name}=\"");
    let start = lower.find(&needle)? + needle.len();
    let end = tag_body[start..].find('"')? + start;
    Some(tag_body[start..end].to_string())
}
