//! Precision/recall figures: one curve per report, overlaid on shared axes,
//! rendered to SVG or PNG.

use std::fmt::Write as _;
use std::path::Path;

use aerocamo_core::eval::{Condition, PrPoint};
use aerocamo_core::EvalReport;

use crate::error::{AppError, Result};
use crate::imageio;

const WIDTH: u32 = 640;
const HEIGHT: u32 = 480;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;

const PALETTE: [[u8; 3]; 6] =
    [[31, 119, 180], [255, 127, 14], [214, 39, 40], [44, 160, 44], [148, 103, 189], [140, 86, 75]];

fn condition_color(c: Condition, k: usize) -> [u8; 3] {
    match c {
        Condition::Clean => PALETTE[0],
        Condition::Noise => PALETTE[1],
        Condition::Patch => PALETTE[2 + k % 4],
    }
}

/// Legend label and color for each report, in input order.
fn legend(reports: &[EvalReport]) -> Vec<(String, [u8; 3])> {
    let mut patches = 0;
    reports
        .iter()
        .map(|r| {
            let color = condition_color(r.condition, patches);
            if r.condition == Condition::Patch {
                patches += 1;
            }
            let mut label = r.condition.as_str().to_string();
            if let Some(c) = r.patch_config {
                write!(label, " {:.3}x{:.3}", c.rel_width, c.rel_height).unwrap();
            }
            write!(label, " AP={:.1}%", 100.0 * r.ap).unwrap();
            (label, color)
        })
        .collect()
}

/// Step-shaped curve: recall on x, precision on y, starting at recall 0.
fn curve(points: &[PrPoint]) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(2 * points.len() + 1);
    let first = points.first().map_or(1.0, |p| p.precision);
    out.push((0.0, first));
    let mut prev = first;
    for p in points {
        out.push((p.recall, prev));
        out.push((p.recall, p.precision));
        prev = p.precision;
    }
    out
}

fn to_px(r: f64, p: f64) -> (f64, f64) {
    let w = WIDTH as f64 - LEFT - RIGHT;
    let h = HEIGHT as f64 - TOP - BOTTOM;
    (LEFT + r * w, TOP + (1.0 - p) * h)
}

fn hex(c: [u8; 3]) -> String {
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

pub fn render_svg(reports: &[EvalReport]) -> String {
    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#).unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    for i in 0..=10 {
        let v = i as f64 / 10.0;
        let (x, y0) = to_px(v, 0.0);
        let (x0, y) = to_px(0.0, v);
        let (x1, _) = to_px(1.0, 0.0);
        let (_, yt) = to_px(0.0, 1.0);
        writeln!(s, r##"<line x1="{x:.1}" y1="{yt:.1}" x2="{x:.1}" y2="{y0:.1}" stroke="#e0e0e0"/>"##).unwrap();
        writeln!(s, r##"<line x1="{x0:.1}" y1="{y:.1}" x2="{x1:.1}" y2="{y:.1}" stroke="#e0e0e0"/>"##).unwrap();
        writeln!(s, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{v:.1}</text>"#, y0 + 16.0).unwrap();
        writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v:.1}</text>"#, x0 - 6.0, y + 4.0).unwrap();
    }
    let (ox, oy) = to_px(0.0, 0.0);
    let (ex, ey) = to_px(1.0, 1.0);
    writeln!(s, r#"<rect x="{ox:.1}" y="{ey:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#, ex - ox, oy - ey).unwrap();
    writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">Recall</text>"#, (ox + ex) / 2.0, HEIGHT as f64 - 20.0).unwrap();
    writeln!(s, r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">Precision</text>"#, (oy + ey) / 2.0, (oy + ey) / 2.0).unwrap();
    for (r, (label, color)) in reports.iter().zip(legend(reports)) {
        let pts: Vec<String> = curve(&r.pr_points)
            .into_iter()
            .map(|(rc, p)| {
                let (x, y) = to_px(rc, p);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        writeln!(s, r#"<polyline fill="none" stroke="{}" stroke-width="2" points="{}"><title>{label}</title></polyline>"#, hex(color), pts.join(" ")).unwrap();
    }
    for (k, (label, color)) in legend(reports).into_iter().enumerate() {
        let y = oy - 16.0 - 18.0 * (reports.len() - 1 - k) as f64;
        let x = ox + 12.0;
        writeln!(s, r#"<line x1="{x:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{}" stroke-width="3"/>"#, x + 20.0, hex(color)).unwrap();
        writeln!(s, r#"<text x="{:.1}" y="{:.1}">{label}</text>"#, x + 26.0, y + 4.0).unwrap();
    }
    s.push_str("</svg>\n");
    s
}

// 5x7 bitmap glyphs, one byte per row, low 5 bits used (bit 4 is leftmost).
fn glyph(c: char) -> [u8; 7] {
    match c.to_ascii_uppercase() {
        '0' => [14, 17, 19, 21, 25, 17, 14],
        '1' => [4, 12, 4, 4, 4, 4, 14],
        '2' => [14, 17, 1, 2, 4, 8, 31],
        '3' => [31, 2, 4, 2, 1, 17, 14],
        '4' => [2, 6, 10, 18, 31, 2, 2],
        '5' => [31, 16, 30, 1, 1, 17, 14],
        '6' => [6, 8, 16, 30, 17, 17, 14],
        '7' => [31, 1, 2, 4, 8, 8, 8],
        '8' => [14, 17, 17, 14, 17, 17, 14],
        '9' => [14, 17, 17, 15, 1, 2, 12],
        'A' => [14, 17, 17, 31, 17, 17, 17],
        'B' => [30, 17, 17, 30, 17, 17, 30],
        'C' => [14, 17, 16, 16, 16, 17, 14],
        'D' => [28, 18, 17, 17, 17, 18, 28],
        'E' => [31, 16, 16, 30, 16, 16, 31],
        'F' => [31, 16, 16, 30, 16, 16, 16],
        'G' => [14, 17, 16, 23, 17, 17, 15],
        'H' => [17, 17, 17, 31, 17, 17, 17],
        'I' => [14, 4, 4, 4, 4, 4, 14],
        'J' => [7, 2, 2, 2, 2, 18, 12],
        'K' => [17, 18, 20, 24, 20, 18, 17],
        'L' => [16, 16, 16, 16, 16, 16, 31],
        'M' => [17, 27, 21, 21, 17, 17, 17],
        'N' => [17, 17, 25, 21, 19, 17, 17],
        'O' => [14, 17, 17, 17, 17, 17, 14],
        'P' => [30, 17, 17, 30, 16, 16, 16],
        'Q' => [14, 17, 17, 17, 21, 18, 13],
        'R' => [30, 17, 17, 30, 20, 18, 17],
        'S' => [15, 16, 16, 14, 1, 1, 30],
        'T' => [31, 4, 4, 4, 4, 4, 4],
        'U' => [17, 17, 17, 17, 17, 17, 14],
        'V' => [17, 17, 17, 17, 17, 10, 4],
        'W' => [17, 17, 17, 21, 21, 21, 10],
        'X' => [17, 17, 10, 4, 10, 17, 17],
        'Y' => [17, 17, 17, 10, 4, 4, 4],
        'Z' => [31, 1, 2, 4, 8, 16, 31],
        '.' => [0, 0, 0, 0, 0, 12, 12],
        '=' => [0, 0, 31, 0, 31, 0, 0],
        '-' => [0, 0, 0, 31, 0, 0, 0],
        '%' => [24, 25, 2, 4, 8, 19, 3],
        _ => [0; 7],
    }
}

struct Canvas(image::RgbImage);

impl Canvas {
    fn dot(&mut self, x: i64, y: i64, c: [u8; 3]) {
        if x >= 0 && y >= 0 && (x as u32) < WIDTH && (y as u32) < HEIGHT {
            self.0.put_pixel(x as u32, y as u32, image::Rgb(c));
        }
    }

    fn line(&mut self, (x0, y0): (f64, f64), (x1, y1): (f64, f64), c: [u8; 3], thick: i64) {
        let n = ((x1 - x0).abs().max((y1 - y0).abs()).ceil() as usize).max(1);
        for i in 0..=n {
            let t = i as f64 / n as f64;
            let (x, y) = ((x0 + t * (x1 - x0)).round() as i64, (y0 + t * (y1 - y0)).round() as i64);
            for d in 0..thick {
                let o = d - thick / 2;
                self.dot(x + o, y, c);
                self.dot(x, y + o, c);
            }
        }
    }

    /// Text at 2x scale with its top-left corner at `(x, y)`.
    fn text(&mut self, x: f64, y: f64, s: &str, c: [u8; 3]) {
        for (k, ch) in s.chars().enumerate() {
            let g = glyph(ch);
            for (row, bits) in g.iter().enumerate() {
                for col in 0..5 {
                    if bits & (16 >> col) != 0 {
                        for (dx, dy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                            let px = x as i64 + 12 * k as i64 + 2 * col + dx;
                            self.dot(px, y as i64 + 2 * row as i64 + dy, c);
                        }
                    }
                }
            }
        }
    }
}

pub fn render_png(reports: &[EvalReport]) -> image::RgbImage {
    let mut cv = Canvas(image::RgbImage::from_pixel(WIDTH, HEIGHT, image::Rgb([255, 255, 255])));
    let grid = [224, 224, 224];
    let black = [0, 0, 0];
    for i in 0..=10 {
        let v = i as f64 / 10.0;
        cv.line(to_px(v, 0.0), to_px(v, 1.0), grid, 1);
        cv.line(to_px(0.0, v), to_px(1.0, v), grid, 1);
        let (x, y) = to_px(v, 0.0);
        cv.text(x - 17.0, y + 6.0, &format!("{v:.1}"), black);
        let (x, y) = to_px(0.0, v);
        cv.text(x - 42.0, y - 7.0, &format!("{v:.1}"), black);
    }
    for (a, b) in [((0.0, 0.0), (1.0, 0.0)), ((1.0, 0.0), (1.0, 1.0)), ((1.0, 1.0), (0.0, 1.0)), ((0.0, 1.0), (0.0, 0.0))] {
        cv.line(to_px(a.0, a.1), to_px(b.0, b.1), black, 1);
    }
    cv.text(WIDTH as f64 / 2.0 - 36.0, HEIGHT as f64 - 26.0, "RECALL", black);
    cv.text(4.0, 8.0, "PRECISION", black);
    let labels = legend(reports);
    for (r, (_, color)) in reports.iter().zip(&labels) {
        let pts = curve(&r.pr_points);
        for w in pts.windows(2) {
            cv.line(to_px(w[0].0, w[0].1), to_px(w[1].0, w[1].1), *color, 3);
        }
    }
    let (ox, oy) = to_px(0.0, 0.0);
    for (k, (label, color)) in labels.iter().enumerate() {
        let y = oy - 22.0 - 20.0 * (labels.len() - 1 - k) as f64;
        cv.line((ox + 10.0, y + 7.0), (ox + 30.0, y + 7.0), *color, 3);
        cv.text(ox + 36.0, y, label, black);
    }
    cv.0
}

/// Writes the figure; the format follows the extension (`.svg` or `.png`).
pub fn save_plot(path: &Path, reports: &[EvalReport]) -> Result<()> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("svg") => crate::error::write(path, render_svg(reports)),
        Some("png") => imageio::encode_png(path, &render_png(reports)),
        _ => Err(AppError::Usage(format!("plot output must end in .svg or .png: {}", path.display()))),
    }
}
