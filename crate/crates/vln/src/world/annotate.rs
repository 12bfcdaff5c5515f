//! Semantic annotation of a world: marker captions and viewpoint summaries.
//!
//! Runs before evaluation, single-writer. The captioner receives a node's
//! four cardinal views and must answer with a JSON object mapping each
//! marker index to one descriptive sentence; the summarizer is seeded with
//! "This is a scene of" and consolidates the views into a single sentence.

use std::collections::BTreeMap;

use super::{WorldError, WorldGraph};
use crate::models::{ModelBackend, ModelRequest};

#[derive(Debug, Clone, Default)]
pub struct AnnotateOptions {
    /// Re-annotate nodes that already carry captions or a summary.
    pub overwrite: bool,
}

/// A node whose caption payload could not be used.
#[derive(Debug, Clone)]
pub struct SkippedNode {
    pub viewpoint: String,
    pub reason: String,
}

/// Result of an annotation pass.
#[derive(Debug)]
pub struct AnnotationRun {
    pub graph: WorldGraph,
    pub annotated: usize,
    pub skipped: Vec<SkippedNode>,
}

/// Annotates every navigable node with marker captions and a summary.
///
/// A response that does not parse as an index-to-caption mapping skips the
/// node (logged, collected in [`AnnotationRun::skipped`]); a failing model
/// call is fatal.
pub fn annotate_world(
    graph: &WorldGraph,
    captioner: &dyn ModelBackend,
    summarizer: &dyn ModelBackend,
    options: &AnnotateOptions,
) -> Result<AnnotationRun, WorldError> {
    let mut out = graph.clone();
    let mut annotated = 0usize;
    let mut skipped = Vec::new();

    let ids: Vec<String> = graph
        .nodes()
        .iter()
        .filter(|(_, n)| n.navigable)
        .map(|(id, _)| id.clone())
        .collect();

    for id in ids {
        let node = graph.node(&id)?;
        let has_existing = node.summary.is_some() || node.marker_captions.is_some();
        if has_existing && !options.overwrite {
            continue;
        }
        let images: Vec<String> = node.view_assets.values().cloned().collect();
        let markers = graph.marker_order(&id)?;

        let caption_req = ModelRequest {
            system_text: "You annotate indoor panoramas for a navigation dataset.".to_string(),
            task_text: format!(
                "The panorama contains {} numbered markers on navigable directions. \
                 Generate a JSON object mapping each marker index to a descriptive sentence.",
                markers.len()
            ),
            images: images.clone(),
            params: Default::default(),
        };
        let caption_resp = captioner
            .generate(&caption_req)
            .map_err(|e| WorldError::ModelUnavailable(e.to_string()))?;
        let captions = match parse_caption_payload(&caption_resp.text, markers.len()) {
            Ok(c) => c,
            Err(reason) => {
                log::warn!("skipping caption payload for {id}: {reason}");
                skipped.push(SkippedNode {
                    viewpoint: id.clone(),
                    reason,
                });
                continue;
            }
        };

        let summary_req = ModelRequest {
            system_text: "You summarize indoor scenes in one sentence.".to_string(),
            task_text: "This is a scene of".to_string(),
            images,
            params: Default::default(),
        };
        let summary_resp = summarizer
            .generate(&summary_req)
            .map_err(|e| WorldError::ModelUnavailable(e.to_string()))?;
        let summary = summary_resp.text.trim().to_string();

        out.set_annotation(&id, Some(summary), Some(captions));
        annotated += 1;
    }

    Ok(AnnotationRun {
        graph: out,
        annotated,
        skipped,
    })
}

/// Parses a caption payload: a JSON object whose keys are marker indices.
/// Tolerates a fenced code block around the object.
fn parse_caption_payload(text: &str, marker_count: usize) -> Result<BTreeMap<u32, String>, String> {
    let trimmed = strip_code_fence(text);
    let value: serde_json::Value =
        serde_json::from_str(trimmed).map_err(|e| format!("not a JSON object: {e}"))?;
    let object = value
        .as_object()
        .ok_or_else(|| "payload is not an index-to-caption mapping".to_string())?;
    let mut captions = BTreeMap::new();
    for (key, caption) in object {
        let index: u32 = key
            .parse()
            .map_err(|_| format!("non-integer marker index {key:?}"))?;
        if index == 0 || index as usize > marker_count {
            return Err(format!("marker index {index} outside 1..={marker_count}"));
        }
        let caption = caption
            .as_str()
            .ok_or_else(|| format!("caption for marker {index} is not a string"))?;
        captions.insert(index, caption.to_string());
    }
    if captions.is_empty() {
        return Err("payload mapped no markers".to_string());
    }
    Ok(captions)
}

fn strip_code_fence(text: &str) -> &str {
    let t = text.trim();
    if let Some(rest) = t.strip_prefix("```") {
        let rest = rest.trim_start_matches(|c: char| c.is_ascii_alphabetic());
        if let Some(end) = rest.rfind("```") {
            return rest[..end].trim();
        }
    }
    t
}
