//! SVG maps of a layout with triangles colored by serving hexagon.

use std::fmt::Write;

use crate::hexgrid::{HexLayout, Point};
use crate::pct::Assignment;

const PALETTE: [&str; 10] = [
    "#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac",
];

pub fn color(hex: usize) -> &'static str {
    PALETTE[hex % PALETTE.len()]
}

#[derive(Debug, Clone, Default)]
pub struct SvgOptions<'a> {
    pub title: Option<&'a str>,
    /// Per-microcell labels (flat order), typically scores.
    pub scores: Option<&'a [f64]>,
    /// Pixels per unit of side length.
    pub scale: Option<f64>,
}

pub fn render(layout: &HexLayout, assignment: &Assignment, opts: &SvgOptions<'_>) -> String {
    let scale = opts.scale.unwrap_or(120.0);
    let side = layout.side();
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for c in layout.centers() {
        x0 = x0.min(c.x - side);
        x1 = x1.max(c.x + side);
        y0 = y0.min(c.y - side);
        y1 = y1.max(c.y + side);
    }
    let margin = 0.15 * side;
    let title_h = if opts.title.is_some() { 0.3 * side } else { 0.0 };
    let px = |p: Point| ((p.x - x0 + margin) * scale, (y1 - p.y + margin + title_h) * scale);
    let width = (x1 - x0 + 2.0 * margin) * scale;
    let height = (y1 - y0 + 2.0 * margin + title_h) * scale;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.1} {height:.1}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    if let Some(title) = opts.title {
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="{:.1}" text-anchor="middle">{}</text>"#,
            width / 2.0,
            0.22 * side * scale,
            0.14 * side * scale,
            escape(title)
        );
    }
    for t in layout.triangle_ids() {
        let v = layout.triangle_vertices(t).expect("valid triangle");
        let pts: Vec<String> = v
            .iter()
            .map(|&p| {
                let (x, y) = px(p);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let server = assignment.server(t);
        let _ = writeln!(
            out,
            r##"<polygon points="{}" fill="{}" stroke="#ffffff" stroke-width="1"><title>hex {} tri {} served by {}</title></polygon>"##,
            pts.join(" "),
            color(server),
            t.hex,
            t.local,
            server
        );
        if let Some(scores) = opts.scores {
            let c = layout.triangle_centroid(t).expect("valid triangle");
            let (x, y) = px(c);
            let _ = writeln!(
                out,
                r##"<text x="{x:.2}" y="{:.2}" font-size="{:.1}" text-anchor="middle" fill="#1b1b1b">{:.1}</text>"##,
                y + 0.025 * side * scale,
                0.065 * side * scale,
                scores[t.flat()]
            );
        }
    }
    for (h, &c) in layout.centers().iter().enumerate() {
        let pts: Vec<String> = (0..6)
            .map(|k| {
                let a = (60.0 * k as f64).to_radians();
                let (x, y) = px(Point::new(c.x + side * a.cos(), c.y + side * a.sin()));
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            out,
            r##"<polygon points="{}" fill="none" stroke="#222222" stroke-width="2.5"/>"##,
            pts.join(" ")
        );
        let (x, y) = px(c);
        let _ = writeln!(
            out,
            r##"<circle cx="{x:.2}" cy="{y:.2}" r="{:.1}" fill="#222222"/><text x="{x:.2}" y="{:.2}" font-size="{:.1}" text-anchor="middle" fill="#ffffff">{h}</text>"##,
            0.07 * side * scale,
            y + 0.03 * side * scale,
            0.08 * side * scale
        );
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hexgrid::preset_wnl1;

    #[test]
    fn one_polygon_per_triangle_plus_outlines() {
        let l = preset_wnl1();
        let svg = render(&l, &Assignment::identity(&l), &SvgOptions::default());
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polygon").count(), 72 + 3);
        assert!(svg.contains(color(0)) && svg.contains(color(2)));
    }

    #[test]
    fn title_is_escaped() {
        let l = preset_wnl1();
        let opts = SvgOptions {
            title: Some("a<b"),
            ..Default::default()
        };
        assert!(render(&l, &Assignment::identity(&l), &opts).contains("a&lt;b"));
    }
}
