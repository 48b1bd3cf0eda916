//! SVG heatmaps of similarity matrices with a `λ_max` trace above.
//!
//! Colors come from ten viridis stops (the `viridis(10)` palette) joined by
//! linear interpolation in sRGB. Each panel is normalized on its own:
//! `t = S / max S` (0 when every entry is 0) and the cell gets
//! `viridis(1 - t)`, so identical subspaces are yellow and the most
//! misaligned pair of the panel is dark purple.

use std::fmt::Write;

use landscape::geometry::SimilarityMatrix;

pub const VIRIDIS: [(u8, u8, u8); 10] = [
    (0x44, 0x01, 0x54),
    (0x48, 0x28, 0x78),
    (0x3E, 0x4A, 0x89),
    (0x31, 0x68, 0x8E),
    (0x26, 0x82, 0x8E),
    (0x1F, 0x9E, 0x89),
    (0x35, 0xB7, 0x79),
    (0x6D, 0xCD, 0x59),
    (0xB4, 0xDE, 0x2C),
    (0xFD, 0xE7, 0x25),
];

pub const NORMALIZATION: &str = "per-panel: t = S / max(S), or 0 when max(S) = 0; fill = viridis(1 - t)";

const WIDTH: f64 = 680.0;
const LEFT: f64 = 70.0;
const GRID: f64 = 480.0;
const TRACE_TOP: f64 = 40.0;
const TRACE_HEIGHT: f64 = 120.0;
const GRID_TOP: f64 = 200.0;
const HEIGHT: f64 = GRID_TOP + GRID + 50.0;
const LEGEND_X: f64 = LEFT + GRID + 30.0;

/// Viridis at `x ∈ [0, 1]`, clamped.
pub fn viridis(x: f64) -> (u8, u8, u8) {
    let x = if x.is_nan() { 0.0 } else { x.clamp(0.0, 1.0) };
    let pos = x * 9.0;
    let i = (pos.floor() as usize).min(8);
    let f = pos - i as f64;
    let (a, b) = (VIRIDIS[i], VIRIDIS[i + 1]);
    let mix = |p: u8, q: u8| (p as f64 + (q as f64 - p as f64) * f).round() as u8;
    (mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

pub fn hex((r, g, b): (u8, u8, u8)) -> String {
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Fill of a cell with misalignment `s` in a panel whose largest entry is `max`.
pub fn cell_color(s: f64, max: f64) -> String {
    let t = if max > 0.0 { s / max } else { 0.0 };
    hex(viridis(1.0 - t))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn ticks(n: usize) -> Vec<usize> {
    if n <= 6 {
        return (0..n).collect();
    }
    let mut t: Vec<usize> = (0..6).map(|k| k * (n - 1) / 5).collect();
    t.dedup();
    t
}

pub fn emit_heatmap_svg(matrix: &SimilarityMatrix, trace: &[(usize, f64)], title: &str) -> landscape::Result<String> {
    let n = matrix.len();
    if n == 0 {
        return Err(landscape::Error::InvalidArgument("heatmap of an empty matrix".into()));
    }
    let values = matrix.values().as_slice();
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(landscape::Error::NonFinite { what: "similarity matrix", index });
    }
    if let Some(index) = trace.iter().position(|(_, l)| !l.is_finite()) {
        return Err(landscape::Error::NonFinite { what: "lambda_max trace", index });
    }
    let max = values.iter().copied().fold(0.0, f64::max);
    let cell = GRID / n as f64;
    let first = matrix.labels[0] as f64;
    let last = matrix.labels[n - 1] as f64;
    let x_of_epoch = |e: f64| {
        if last > first {
            LEFT + cell / 2.0 + (e - first) / (last - first) * (GRID - cell)
        } else {
            LEFT + GRID / 2.0
        }
    };

    let mut s = String::new();
    let w = &mut s;
    writeln!(w, r#"<?xml version="1.0" encoding="UTF-8"?>"#).unwrap();
    writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{HEIGHT:.0}" viewBox="0 0 {WIDTH:.0} {HEIGHT:.0}" font-family="sans-serif" font-size="11">"#
    )
    .unwrap();
    writeln!(w, "<title>{}</title>", escape(title)).unwrap();
    writeln!(w, "<metadata>normalization: {}; max(S) = {max:.6}</metadata>", escape(NORMALIZATION)).unwrap();
    writeln!(w, r#"<rect x="0" y="0" width="{WIDTH:.0}" height="{HEIGHT:.0}" fill="white"/>"#).unwrap();
    writeln!(w, r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="13">{}</text>"#, LEFT + GRID / 2.0, escape(title)).unwrap();

    // trace panel
    writeln!(w, r#"<g id="trace">"#).unwrap();
    writeln!(
        w,
        r#"<rect x="{LEFT:.1}" y="{TRACE_TOP:.1}" width="{GRID:.1}" height="{TRACE_HEIGHT:.1}" fill="none" stroke="black"/>"#
    )
    .unwrap();
    let (lo, hi) = trace.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &(_, l)| (a.min(l), b.max(l)));
    if !trace.is_empty() {
        let span = if hi > lo { hi - lo } else { 1.0 };
        let y_of = |l: f64| TRACE_TOP + TRACE_HEIGHT - 5.0 - (l - lo) / span * (TRACE_HEIGHT - 10.0);
        let points: Vec<String> = trace
            .iter()
            .map(|&(e, l)| format!("{:.2},{:.2}", x_of_epoch(e as f64), y_of(l)))
            .collect();
        writeln!(w, r#"<polyline fill="none" stroke="black" stroke-width="1.5" points="{}"/>"#, points.join(" ")).unwrap();
        writeln!(w, r#"<text x="{:.1}" y="{:.2}" text-anchor="end">{hi:.3}</text>"#, LEFT - 4.0, y_of(hi) + 4.0).unwrap();
        writeln!(w, r#"<text x="{:.1}" y="{:.2}" text-anchor="end">{lo:.3}</text>"#, LEFT - 4.0, y_of(lo) + 4.0).unwrap();
    }
    writeln!(
        w,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">λ_max</text>"#,
        TRACE_TOP + TRACE_HEIGHT / 2.0,
        TRACE_TOP + TRACE_HEIGHT / 2.0
    )
    .unwrap();
    writeln!(w, "</g>").unwrap();

    // cell grid
    writeln!(w, r#"<g id="grid" shape-rendering="crispEdges">"#).unwrap();
    for i in 0..n {
        for j in 0..n {
            writeln!(
                w,
                r#"<rect x="{:.3}" y="{:.3}" width="{cell:.3}" height="{cell:.3}" fill="{}"/>"#,
                LEFT + j as f64 * cell,
                GRID_TOP + i as f64 * cell,
                cell_color(matrix.get(i, j), max)
            )
            .unwrap();
        }
    }
    writeln!(w, "</g>").unwrap();

    // axes
    writeln!(w, r#"<g id="axes">"#).unwrap();
    for k in ticks(n) {
        let c = (k as f64 + 0.5) * cell;
        let label = matrix.labels[k];
        writeln!(w, r#"<text x="{:.3}" y="{:.1}" text-anchor="middle">{label}</text>"#, LEFT + c, GRID_TOP + GRID + 14.0).unwrap();
        writeln!(w, r#"<text x="{:.1}" y="{:.3}" text-anchor="end">{label}</text>"#, LEFT - 4.0, GRID_TOP + c + 4.0).unwrap();
    }
    writeln!(w, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">epoch</text>"#, LEFT + GRID / 2.0, GRID_TOP + GRID + 34.0).unwrap();
    writeln!(
        w,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">epoch</text>"#,
        GRID_TOP + GRID / 2.0,
        GRID_TOP + GRID / 2.0
    )
    .unwrap();
    writeln!(w, "</g>").unwrap();

    // legend: top is S = 0, bottom is max S
    writeln!(w, r#"<g id="legend">"#).unwrap();
    let band = GRID / VIRIDIS.len() as f64;
    for (k, c) in VIRIDIS.iter().rev().enumerate() {
        writeln!(
            w,
            r#"<rect x="{LEGEND_X:.1}" y="{:.3}" width="16" height="{band:.3}" fill="{}"/>"#,
            GRID_TOP + k as f64 * band,
            hex(*c)
        )
        .unwrap();
    }
    writeln!(w, r#"<text x="{:.1}" y="{:.1}">S = 0</text>"#, LEGEND_X + 20.0, GRID_TOP + 10.0).unwrap();
    writeln!(w, r#"<text x="{:.1}" y="{:.1}">S = {max:.4}</text>"#, LEGEND_X + 20.0, GRID_TOP + GRID).unwrap();
    writeln!(w, "</g>").unwrap();
    writeln!(w, "</svg>").unwrap();
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn palette_endpoints() {
        assert_eq!(viridis(0.0), VIRIDIS[0]);
        assert_eq!(viridis(1.0), VIRIDIS[9]);
        assert_eq!(viridis(5.0 / 9.0), VIRIDIS[5]);
        assert_eq!(cell_color(0.0, 0.0), "#fde725");
        assert_eq!(cell_color(0.7, 0.7), "#440154");
    }
}
