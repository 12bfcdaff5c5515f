//! Static per-episode replay reports: one self-contained HTML document with
//! an inline SVG of the graph (executed walk vs ground truth) and every
//! prompt and raw model output verbatim.

use std::fmt::Write as _;

use super::{diagnose, EpisodeDiagnosis};
use crate::runner::{Termination, TrajectoryRecord};
use crate::tasks::EpisodeSpec;
use crate::world::WorldGraph;
use crate::{Real, ViewpointId};

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

struct SvgFrame {
    min_x: Real,
    min_y: Real,
    scale: Real,
    height: Real,
}

impl SvgFrame {
    fn fit(world: &WorldGraph, size: Real) -> SvgFrame {
        let mut min_x = Real::INFINITY;
        let mut max_x = Real::NEG_INFINITY;
        let mut min_y = Real::INFINITY;
        let mut max_y = Real::NEG_INFINITY;
        for node in world.nodes().values() {
            min_x = min_x.min(node.position[0]);
            max_x = max_x.max(node.position[0]);
            min_y = min_y.min(node.position[1]);
            max_y = max_y.max(node.position[1]);
        }
        let span = (max_x - min_x).max(max_y - min_y).max(1e-6);
        SvgFrame {
            min_x,
            min_y,
            scale: size / span,
            height: size,
        }
    }

    fn project(&self, position: [Real; 3]) -> (Real, Real) {
        let x = 20.0 + (position[0] - self.min_x) * self.scale;
        // Flip y so north points up.
        let y = 20.0 + self.height - (position[1] - self.min_y) * self.scale;
        (x, y)
    }
}

fn path_points(world: &WorldGraph, frame: &SvgFrame, path: &[ViewpointId]) -> String {
    path.iter()
        .filter_map(|id| world.node(id).ok())
        .map(|node| {
            let (x, y) = frame.project(node.position);
            format!("{x:.1},{y:.1}")
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn render_svg(world: &WorldGraph, record: &TrajectoryRecord, episode: &EpisodeSpec) -> String {
    let frame = SvgFrame::fit(world, 360.0);
    let mut svg = String::new();
    let width = 400.0;
    let height = frame.height + 40.0;
    let _ = write!(
        svg,
        r#"<svg viewBox="0 0 {width:.0} {height:.0}" width="{width:.0}" height="{height:.0}" xmlns="http://www.w3.org/2000/svg">"#
    );
    for (a, b, _) in world.edges() {
        let (ax, ay) = frame.project(world.node(a).expect("edge endpoint").position);
        let (bx, by) = frame.project(world.node(b).expect("edge endpoint").position);
        let _ = write!(
            svg,
            r##"<line x1="{ax:.1}" y1="{ay:.1}" x2="{bx:.1}" y2="{by:.1}" stroke="#ccc" stroke-width="1"/>"##
        );
    }
    let gt = path_points(world, &frame, &episode.gt_path);
    let _ = write!(
        svg,
        r##"<polyline points="{gt}" fill="none" stroke="#2a9d2a" stroke-width="4" stroke-opacity="0.55"/>"##
    );
    let walked = path_points(world, &frame, &record.executed);
    let _ = write!(
        svg,
        r##"<polyline points="{walked}" fill="none" stroke="#d43f3f" stroke-width="2" stroke-dasharray="6 3"/>"##
    );
    for (id, node) in world.nodes() {
        let (x, y) = frame.project(node.position);
        let class = if episode.goals.contains(id) {
            "goal"
        } else if id == &episode.start.viewpoint {
            "start"
        } else {
            "node"
        };
        let fill = match class {
            "goal" => "#2a9d2a",
            "start" => "#1f6fd4",
            _ => "#888",
        };
        let _ = write!(
            svg,
            r#"<circle data-viewpoint="{id}" class="{class}" cx="{x:.1}" cy="{y:.1}" r="5" fill="{fill}"><title>{id}</title></circle>"#,
            id = escape(id)
        );
    }
    svg.push_str("</svg>");
    svg
}

fn termination_text(t: Termination) -> &'static str {
    match t {
        Termination::Stopped => "stopped",
        Termination::StepLimit => "step limit reached",
        Termination::GenerationError => "generation error",
    }
}

/// Renders one self-contained HTML replay document for an episode. No
/// scripts required; viewpoints named in the walk carry `data-viewpoint`
/// attributes for tooling.
pub fn replay_episode(
    record: &TrajectoryRecord,
    episode: &EpisodeSpec,
    world: &WorldGraph,
) -> String {
    let diagnosis: EpisodeDiagnosis = diagnose(record, episode, world);
    let mut html = String::new();
    let _ = write!(
        html,
        "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>Episode {id}</title>\n\
         <style>\n\
         body {{ font-family: sans-serif; margin: 2em; max-width: 70em; }}\n\
         pre {{ background: #f6f6f6; padding: 0.8em; white-space: pre-wrap; border-radius: 4px; }}\n\
         .step {{ border: 1px solid #ddd; border-radius: 6px; padding: 1em; margin: 1em 0; }}\n\
         .step.deviation {{ border-color: #d43f3f; background: #fff5f5; }}\n\
         .badge {{ display: inline-block; padding: 0.1em 0.6em; border-radius: 1em; background: #eee; margin-right: 0.4em; }}\n\
         details summary {{ cursor: pointer; color: #555; }}\n\
         </style>\n</head>\n<body>\n",
        id = escape(&record.episode_id)
    );
    let _ = write!(
        html,
        "<h1>Episode {id}</h1>\n<p><span class=\"badge\">scan {scan}</span>\
         <span class=\"badge\">termination: {term}</span>\
         <span class=\"badge\">outcome: {outcome:?}</span>\
         {loops}{deviation}</p>\n",
        id = escape(&record.episode_id),
        scan = escape(&record.scan_id),
        term = termination_text(record.termination),
        outcome = diagnosis.outcome,
        loops = if diagnosis.looping {
            "<span class=\"badge\">looping</span>"
        } else {
            ""
        },
        deviation = match diagnosis.deviation_step {
            Some(step) => format!("<span class=\"badge\">deviated at step {step}</span>"),
            None => String::new(),
        },
    );
    let _ = writeln!(
        html,
        "<p><strong>Instruction:</strong> {}</p>",
        escape(&episode.instruction.text)
    );
    let _ = write!(
        html,
        "<p><strong>Ground truth:</strong> {}</p>\n<p><strong>Executed:</strong> {}</p>\n",
        escape(&episode.gt_path.join(" → ")),
        escape(&record.executed.join(" → "))
    );
    html.push_str(&render_svg(world, record, episode));

    let m = &record.metrics;
    let _ = write!(
        html,
        "<h2>Metrics</h2>\n<p>TL {tl:.2} m · NE {ne:.2} m · SR {sr} · OSR {osr} · \
         SPL {spl:.4} · nDTW {ndtw:.4} · SDTW {sdtw:.4} · CLS {cls:.4}</p>\n",
        tl = m.tl,
        ne = m.ne,
        sr = u8::from(m.sr),
        osr = u8::from(m.osr),
        spl = m.spl,
        ndtw = m.ndtw,
        sdtw = m.sdtw,
        cls = m.cls,
    );

    html.push_str("<h2>Steps</h2>\n");
    for step in &record.steps {
        // Deviation indexes the executed node list; executed[i] is reached
        // by step i, so step i is the one that introduced it.
        let deviated = diagnosis.deviation_step == Some(step.step);
        let _ = write!(
            html,
            "<div class=\"step{extra}\">\n<h3>Step {n}{flag}</h3>\n\
             <p>at <code data-viewpoint=\"{vp}\">{vp}</code>, heading {heading:.0}°</p>\n",
            extra = if deviated { " deviation" } else { "" },
            n = step.step,
            flag = if deviated {
                " — first deviation from ground truth"
            } else {
                ""
            },
            vp = escape(&step.pose_before.viewpoint),
            heading = step.pose_before.heading,
        );
        if let Some(guidance) = &step.guidance {
            let _ = writeln!(
                html,
                "<p><strong>Oracle guidance:</strong> {}</p>",
                escape(guidance)
            );
        }
        let _ = writeln!(
            html,
            "<details><summary>System prompt</summary><pre>{}</pre></details>",
            escape(&step.system_text)
        );
        for (i, attempt) in step.attempts.iter().enumerate() {
            let _ = writeln!(
                html,
                "<details><summary>Attempt {} task prompt</summary><pre>{}</pre></details>",
                i + 1,
                escape(&attempt.request.task_text)
            );
            match &attempt.response {
                Some(response) => {
                    let _ = write!(
                        html,
                        "<p><strong>Model output {}:</strong></p>\n<pre>{}</pre>\n",
                        i + 1,
                        escape(response)
                    );
                }
                None => html.push_str("<p><em>model call failed</em></p>\n"),
            }
            if let Some(note) = &attempt.note {
                let _ = writeln!(html, "<p><em>{}</em></p>", escape(note));
            }
        }
        match &step.executed_action {
            Some(action) => {
                let _ = writeln!(
                    html,
                    "<p><strong>Executed:</strong> {} → <code data-viewpoint=\"{}\">{}</code></p>",
                    escape(&format!("{action:?}")),
                    escape(&step.pose_after.viewpoint),
                    escape(&step.pose_after.viewpoint),
                );
            }
            None => html.push_str("<p><strong>Executed:</strong> none (generation error)</p>\n"),
        }
        html.push_str("</div>\n");
    }
    html.push_str("</body>\n</html>\n");
    html
}
