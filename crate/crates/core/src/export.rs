//! Per-level trajectory overlays: a CSV of all samples and an SVG with
//! every session's path drawn over the level grid.

use std::fmt::Write as _;

use thiserror::Error;

use crate::engine::SessionDocument;
use crate::level::{CellKind, LevelSpec};

/// Pixels per cell in the SVG output.
pub const CELL_PX: f64 = 24.0;

const PALETTE: [&str; 8] = [
    "#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#e377c2", "#8c564b",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExportError {
    #[error("session `{session_id}` belongs to level `{found}`, not `{expected}`")]
    LevelMismatch {
        session_id: String,
        expected: String,
        found: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrajectoryOverlay {
    pub csv: String,
    pub svg: String,
}

/// Pixel coordinate of a cell-unit coordinate (cell centres at integers).
pub fn to_px(v: f64) -> f64 {
    v * CELL_PX + CELL_PX / 2.0
}

pub fn export_trajectories(
    level: &LevelSpec,
    sessions: &[SessionDocument],
) -> Result<TrajectoryOverlay, ExportError> {
    if let Some(bad) = sessions.iter().find(|s| s.level_id != level.level_id) {
        return Err(ExportError::LevelMismatch {
            session_id: bad.session_id.clone(),
            expected: level.level_id.clone(),
            found: bad.level_id.clone(),
        });
    }

    let mut csv = String::from("session_id,t_ms,x,y\r\n");
    for s in sessions {
        for p in &s.trajectory {
            let _ = write!(csv, "{},{},{},{}\r\n", csv_field(&s.session_id), p.t_ms, p.x, p.y);
        }
    }

    let w = f64::from(level.width) * CELL_PX;
    let h = f64::from(level.height) * CELL_PX;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(svg, r##"<rect class="ground" x="0" y="0" width="{w}" height="{h}" fill="#9bc46a"/>"##);
    let _ = writeln!(svg, r#"<g class="terrain">"#);
    for (y, row) in level.terrain.0.iter().enumerate() {
        for (x, kind) in row.iter().enumerate() {
            if *kind == CellKind::Blocked {
                let _ = writeln!(
                    svg,
                    r##"<rect x="{}" y="{}" width="{CELL_PX}" height="{CELL_PX}" fill="#5b5b5b"/>"##,
                    x as f64 * CELL_PX,
                    y as f64 * CELL_PX
                );
            }
        }
    }
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(svg, r#"<g class="checkpoints">"#);
    for cp in &level.checkpoints {
        for z in &cp.zone {
            let _ = writeln!(
                svg,
                r##"<rect x="{}" y="{}" width="{CELL_PX}" height="{CELL_PX}" fill="#b5523b" opacity="0.6"/>"##,
                f64::from(z.x) * CELL_PX,
                f64::from(z.y) * CELL_PX
            );
        }
        let _ = writeln!(
            svg,
            r##"<rect class="chest" x="{}" y="{}" width="{CELL_PX}" height="{CELL_PX}" fill="#a0522d"/>"##,
            f64::from(cp.chest.x) * CELL_PX,
            f64::from(cp.chest.y) * CELL_PX
        );
        let _ = writeln!(
            svg,
            r##"<text x="{}" y="{}" font-size="14" font-family="sans-serif" text-anchor="middle" fill="#fff">{}</text>"##,
            to_px(f64::from(cp.chest.x)),
            to_px(f64::from(cp.chest.y)) + 5.0,
            cp.order
        );
    }
    let _ = writeln!(svg, "</g>");
    let start = level.start_cell();
    let _ = writeln!(
        svg,
        r##"<circle class="start" cx="{}" cy="{}" r="{}" fill="#ffd700" stroke="#000"/>"##,
        to_px(f64::from(start.x)),
        to_px(f64::from(start.y)),
        CELL_PX / 3.0
    );
    let _ = writeln!(svg, r#"<g class="trajectories" fill="none" stroke-width="2">"#);
    for (i, s) in sessions.iter().enumerate() {
        let points: Vec<String> = s
            .trajectory
            .iter()
            .map(|p| format!("{},{}", to_px(p.x), to_px(p.y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline data-session-id="{}" stroke="{}" points="{}"/>"#,
            xml_escape(&s.session_id),
            PALETTE[i % PALETTE.len()],
            points.join(" ")
        );
    }
    let _ = writeln!(svg, "</g>");
    svg.push_str("</svg>\n");
    Ok(TrajectoryOverlay { csv, svg })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\r', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}
