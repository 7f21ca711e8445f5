//! SVG drawings of finite maps.

use std::fmt::Write as _;
use std::path::Path;

use causal_core::{CausalMap, EdgeKind, MapKind};

use crate::error::{CliError, Result};

const SCALE: f64 = 24.0;
const MARGIN: f64 = 16.0;
const RADIUS: f64 = 3.0;

/// Concentric layout for causal maps (radius `height + 1`, angle by level
/// rank), columns for slices and half-plane windows. Wrap edges of a causal
/// map are drawn as arcs.
pub fn svg_string(m: &CausalMap) -> String {
    let pos: Vec<(f64, f64)> = m.positions().into_iter().map(|(x, y)| (x * SCALE, -y * SCALE)).collect();
    let (mut x0, mut y0, mut x1, mut y1) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for &(x, y) in &pos {
        (x0, y0, x1, y1) = (x0.min(x), y0.min(y), x1.max(x), y1.max(y));
    }
    if m.kind() == MapKind::Causal {
        let r = (m.max_height() + 1) as f64 * SCALE;
        (x0, y0, x1, y1) = (-r, -r, r, r);
    }
    let (w, h) = (x1 - x0 + 2.0 * MARGIN, y1 - y0 + 2.0 * MARGIN);
    let (dx, dy) = (MARGIN - x0, MARGIN - y0);
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w:.1}" height="{h:.1}" viewBox="0 0 {w:.1} {h:.1}">"#
    );
    let _ = writeln!(s, r#"<g stroke="black" stroke-width="1" fill="none">"#);
    for e in m.edges() {
        let (a, b) = (pos[e.u as usize], pos[e.v as usize]);
        let (ax, ay, bx, by) = (a.0 + dx, a.1 + dy, b.0 + dx, b.1 + dy);
        let class = e.kind.as_str();
        if m.kind() == MapKind::Causal && matches!(e.kind, EdgeKind::Horizontal | EdgeKind::Wrap) {
            let r = (m.vertex(e.u).height + 1) as f64 * SCALE;
            let _ = writeln!(
                s,
                r#"<path class="{class}" d="M {ax:.2} {ay:.2} A {r:.2} {r:.2} 0 0 1 {bx:.2} {by:.2}"/>"#
            );
        } else {
            let _ = writeln!(s, r#"<line class="{class}" x1="{ax:.2}" y1="{ay:.2}" x2="{bx:.2}" y2="{by:.2}"/>"#);
        }
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<g fill="black">"#);
    for (i, &(x, y)) in pos.iter().enumerate() {
        let v = m.vertex(i as u32);
        let fill = if v.backbone { r#" fill="red""# } else { "" };
        let _ = writeln!(
            s,
            r#"<circle id="v{i}" data-height="{}" cx="{:.2}" cy="{:.2}" r="{RADIUS}"{fill}/>"#,
            v.height,
            x + dx,
            y + dy
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, "</svg>");
    s
}

pub fn render_svg(m: &CausalMap, path: &Path) -> Result<()> {
    std::fs::write(path, svg_string(m)).map_err(|e| CliError::io(path, e))
}
