//! Deterministic SVG drawings of scenes and plans.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::scene::{Category, Plan, Point, SceneState};

const PX: f64 = 400.0;
const MARGIN: f64 = 20.0;

fn fill(c: Category) -> &'static str {
    match c {
        Category::PrimaryBase => "#8c6d46",
        Category::SecondaryBase => "#4e79a7",
        Category::LowMass => "#59a14f",
        Category::HighMass => "#e15759",
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Renders `state` and, if given, the manipulator path of `plan`.
///
/// Each action draws two polylines: the approach to the pick (class
/// `pick`, dashed) and the carry to the place (class `place`).
pub fn render_svg(state: &SceneState, plan: Option<&Plan>) -> String {
    let table = state.layout().table;
    let width = table.w * PX + 2.0 * MARGIN;
    let height = table.h * PX + 2.0 * MARGIN + if plan.is_some() { 24.0 } else { 0.0 };
    // Table y grows away from the robot; draw it growing upwards.
    let sx = |x: f64| MARGIN + x * PX;
    let sy = |y: f64| MARGIN + (table.h - y) * PX;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width:.1}" height="{height:.1}" viewBox="0 0 {width:.1} {height:.1}">"#
    );
    out.push_str(
        "<style>.pick{fill:none;stroke:#555;stroke-width:1.5;stroke-dasharray:4 3}\
         .place{fill:none;stroke:#111;stroke-width:2}\
         .obj{stroke:#222;stroke-width:1;fill-opacity:0.85}\
         text{font-family:sans-serif;font-size:11px}</style>\n",
    );
    let _ = writeln!(
        out,
        r##"<rect class="table" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#f4f1ea" stroke="#333" stroke-width="2"/>"##,
        sx(0.0),
        sy(table.h),
        table.w * PX,
        table.h * PX
    );

    for id in state.roots() {
        let spec = state.spec(id);
        let p = state.position(id);
        let (w, d) = (spec.footprint.w, spec.footprint.d);
        let _ = writeln!(
            out,
            r#"<rect class="obj" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
            sx(p.x - w / 2.0),
            sy(p.y + d / 2.0),
            w * PX,
            d * PX,
            fill(spec.category)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            sx(p.x),
            sy(p.y) + 4.0,
            escape(&spec.name)
        );
        // Stacked items as a badge listing the stack upwards.
        let above: Vec<String> = state.dependents(id).map(|t| escape(&state.spec(t).name)).collect();
        if !above.is_empty() {
            let bx = sx(p.x + w / 2.0) - 4.0;
            let by = sy(p.y + d / 2.0) + 4.0;
            let _ = writeln!(
                out,
                r##"<g class="badge"><circle cx="{bx:.2}" cy="{by:.2}" r="8" fill="#fff" stroke="#222"/><text x="{bx:.2}" y="{:.2}" text-anchor="middle">{}</text><text x="{bx:.2}" y="{:.2}">{}</text></g>"##,
                by + 4.0,
                above.len(),
                by - 10.0,
                above.join("/")
            );
        }
    }

    if let Some(plan) = plan {
        let poly = |class: &str, a: Point, b: Point| {
            format!(
                r#"<polyline class="{class}" points="{:.2},{:.2} {:.2},{:.2}"/>"#,
                sx(a.x),
                sy(a.y),
                sx(b.x),
                sy(b.y)
            )
        };
        let mut manip = state.manipulator();
        for a in &plan.actions {
            out.push_str(&poly("pick", manip, a.pick));
            out.push('\n');
            out.push_str(&poly("place", a.pick, a.place));
            out.push('\n');
            manip = a.place;
        }
        let _ = writeln!(
            out,
            r#"<text class="cost" x="{:.2}" y="{:.2}">cost {:.4} ({} actions)</text>"#,
            MARGIN,
            height - 8.0,
            plan.total_cost,
            plan.len()
        );
    }
    out.push_str("</svg>\n");
    out
}

pub fn write_svg(path: &Path, state: &SceneState, plan: Option<&Plan>) -> Result<()> {
    std::fs::write(path, render_svg(state, plan))?;
    Ok(())
}
