//! Result files: JSON with 17 significant digits, CSV tables and plain SVG
//! line plots.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;

use crate::integrate::fmt17;

/// `serde_json` formatter that prints every float as `fmt17`.
struct Digits17;

impl serde_json::ser::Formatter for Digits17 {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(fmt17(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(value))
    }
}

pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Digits17);
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> anyhow::Result<()> {
    write_file(path, to_json_string(value)?.as_bytes())
}

pub fn write_file(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(path, bytes).map_err(|e| anyhow::anyhow!("cannot write {}: {e}", path.display()))
}

/// One CSV cell: floats as `fmt17`, missing values empty.
pub fn cell(v: Option<f64>) -> String {
    v.map(fmt17).unwrap_or_default()
}

/// Builds a CSV table in memory.
#[derive(Debug, Clone)]
pub struct Csv {
    text: String,
    width: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Csv {
            text: format!("{}\n", header.join(",")),
            width: header.len(),
        }
    }

    pub fn row<S: AsRef<str>>(&mut self, cells: &[S]) {
        assert_eq!(cells.len(), self.width, "CSV row width");
        let line: Vec<&str> = cells.iter().map(AsRef::as_ref).collect();
        self.text.push_str(&line.join(","));
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stroke {
    Solid,
    Dashed,
    Dotted,
}

#[derive(Debug, Clone)]
struct Series {
    points: Vec<[f64; 2]>,
    color: &'static str,
    stroke: Stroke,
    label: String,
}

/// A panel of polylines in data coordinates.
#[derive(Debug, Clone)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    series: Vec<Series>,
    marks: Vec<([f64; 2], &'static str)>,
}

impl Panel {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Panel {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            series: Vec::new(),
            marks: Vec::new(),
        }
    }

    pub fn line(&mut self, points: Vec<[f64; 2]>, color: &'static str, stroke: Stroke, label: &str) -> &mut Self {
        let points = points.into_iter().filter(|p| p[0].is_finite() && p[1].is_finite()).collect();
        self.series.push(Series {
            points,
            color,
            stroke,
            label: label.into(),
        });
        self
    }

    pub fn mark(&mut self, p: [f64; 2], color: &'static str) -> &mut Self {
        self.marks.push((p, color));
        self
    }

    fn bounds(&self) -> [f64; 4] {
        let mut b = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
        let all = self.series.iter().flat_map(|s| s.points.iter()).chain(self.marks.iter().map(|m| &m.0));
        for p in all {
            b[0] = b[0].min(p[0]);
            b[1] = b[1].max(p[0]);
            b[2] = b[2].min(p[1]);
            b[3] = b[3].max(p[1]);
        }
        if !b[0].is_finite() {
            return [-1.0, 1.0, -1.0, 1.0];
        }
        for k in [0, 2] {
            let pad = 0.05 * (b[k + 1] - b[k]).max(1e-9);
            b[k] -= pad;
            b[k + 1] += pad;
        }
        b
    }

    fn render(&self, out: &mut String, x0: f64, y0: f64, w: f64, h: f64) {
        let [xl, xh, yl, yh] = self.bounds();
        let (left, top, pw, ph) = (x0 + 60.0, y0 + 30.0, w - 80.0, h - 70.0);
        let sx = |x: f64| left + (x - xl) / (xh - xl) * pw;
        let sy = |y: f64| top + ph - (y - yl) / (yh - yl) * ph;
        let _ = writeln!(
            out,
            r#"<rect x="{left:.2}" y="{top:.2}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="black"/>"#
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="14">{}</text>"#,
            left + pw / 2.0,
            y0 + 20.0,
            escape(&self.title)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="12">{}</text>"#,
            left + pw / 2.0,
            top + ph + 34.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="12" transform="rotate(-90 {:.2} {:.2})">{}</text>"#,
            x0 + 16.0,
            top + ph / 2.0,
            x0 + 16.0,
            top + ph / 2.0,
            escape(&self.y_label)
        );
        for i in 0..=4 {
            let fx = xl + (xh - xl) * i as f64 / 4.0;
            let fy = yl + (yh - yl) * i as f64 / 4.0;
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="10">{:.3}</text>"#,
                sx(fx),
                top + ph + 14.0,
                fx
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-size="10">{:.3}</text>"#,
                left - 4.0,
                sy(fy) + 3.0,
                fy
            );
        }
        for (k, s) in self.series.iter().enumerate() {
            if s.points.len() < 2 {
                continue;
            }
            let dash = match s.stroke {
                Stroke::Solid => "",
                Stroke::Dashed => r#" stroke-dasharray="6 4""#,
                Stroke::Dotted => r#" stroke-dasharray="2 3""#,
            };
            let mut d = String::new();
            for (i, p) in s.points.iter().enumerate() {
                let _ = write!(d, "{}{:.2},{:.2} ", if i == 0 { "M" } else { "L" }, sx(p[0]), sy(p[1]));
            }
            let _ = writeln!(
                out,
                r#"<path d="{}" fill="none" stroke="{}" stroke-width="1.4"{dash}/>"#,
                d.trim_end(),
                s.color
            );
            if !s.label.is_empty() {
                let ly = top + 14.0 + 14.0 * k as f64;
                let _ = writeln!(
                    out,
                    r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{}"{dash}/><text x="{:.2}" y="{:.2}" font-size="10">{}</text>"#,
                    left + pw - 120.0,
                    left + pw - 96.0,
                    s.color,
                    left + pw - 90.0,
                    ly + 3.0,
                    escape(&s.label)
                );
            }
        }
        for (p, color) in &self.marks {
            let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, sx(p[0]), sy(p[1]));
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Panels side by side in one standalone SVG document.
pub fn svg(panels: &[Panel]) -> String {
    let (w, h) = (480.0, 400.0);
    let total = w * panels.len().max(1) as f64;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{h}" viewBox="0 0 {total} {h}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, p) in panels.iter().enumerate() {
        p.render(&mut out, w * i as f64, 0.0, w, h);
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_floats_carry_17_digits() {
        let s = to_json_string(&serde_json::json!({ "x": 0.1, "n": 3, "nan": f64::NAN })).unwrap();
        assert_eq!(s, "{\"n\":3,\"nan\":null,\"x\":1.0000000000000001e-1}\n");
        let back: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["x"].as_f64(), Some(0.1));
    }

    #[test]
    fn svg_is_standalone() {
        let mut p = Panel::new("t", "x", "y");
        p.line(vec![[0.0, 0.0], [1.0, 1.0]], "black", Stroke::Dashed, "a<b");
        let s = svg(&[p]);
        assert!(s.starts_with("<svg") && s.ends_with("</svg>\n"));
        assert!(!s.contains("href"));
        assert!(s.contains("a&lt;b"));
    }
}
