//! Dependency-free SVG emission for the chart commands. Coordinates are
//! formatted to fixed precision so identical inputs give identical bytes.

use std::fmt::Write as _;

pub const GREEN_HUE: f64 = 135.0;
pub const PURPLE_HUE: f64 = 275.0;

/// Lightness anchors of the uncertainty shading: the lightest shade means
/// certainty, the darkest shade means an uncertainty of one.
pub const LIGHT_ANCHOR: f64 = 86.0;
pub const DARK_ANCHOR: f64 = 24.0;

/// Shade of one hue with darkness increasing linearly in `value` over [0, 1].
pub fn shade(hue: f64, value: f64) -> String {
    let v = if value.is_nan() { 0.0 } else { value.clamp(0.0, 1.0) };
    let l = LIGHT_ANCHOR + (DARK_ANCHOR - LIGHT_ANCHOR) * v;
    format!("hsl({hue:.0},65%,{l:.1}%)")
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Linear map from a data interval to a pixel interval.
#[derive(Debug, Clone, Copy)]
pub struct Scale {
    pub domain: (f64, f64),
    pub range: (f64, f64),
}

impl Scale {
    /// Degenerate domains are widened so every value maps to the midrange.
    pub fn new(domain: (f64, f64), range: (f64, f64)) -> Scale {
        let (lo, hi) = domain;
        let domain = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
        Scale { domain, range }
    }

    pub fn apply(&self, v: f64) -> f64 {
        let t = (v - self.domain.0) / (self.domain.1 - self.domain.0);
        self.range.0 + t * (self.range.1 - self.range.0)
    }

    pub fn ticks(&self, count: usize) -> Vec<f64> {
        let n = count.max(2);
        (0..n)
            .map(|i| {
                self.domain.0 + (self.domain.1 - self.domain.0) * i as f64 / (n - 1) as f64
            })
            .collect()
    }
}

pub struct SvgDoc {
    width: f64,
    height: f64,
    body: String,
}

impl SvgDoc {
    pub fn new(width: f64, height: f64) -> SvgDoc {
        let mut doc = SvgDoc { width, height, body: String::new() };
        let _ = writeln!(
            doc.body,
            r#"<rect x="0" y="0" width="{width:.0}" height="{height:.0}" fill="white"/>"#
        );
        doc
    }

    pub fn circle(&mut self, x: f64, y: f64, r: f64, fill: &str) {
        let _ = writeln!(
            self.body,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="{r:.2}" fill="{fill}"/>"#
        );
    }

    pub fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, width: f64) {
        let _ = writeln!(
            self.body,
            r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{stroke}" stroke-width="{width:.2}"/>"#
        );
    }

    pub fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        let _ = writeln!(
            self.body,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}" fill="{fill}"/>"#
        );
    }

    /// `anchor` is an SVG text-anchor: start, middle or end.
    pub fn text(&mut self, x: f64, y: f64, anchor: &str, size: f64, content: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}" font-family="sans-serif" font-size="{size:.0}">{}</text>"#,
            esc(content)
        );
    }

    /// Cross marker, used where a second marker style must stay readable on
    /// top of filled circles.
    pub fn cross(&mut self, x: f64, y: f64, arm: f64, stroke: &str) {
        self.line(x - arm, y - arm, x + arm, y + arm, stroke, 1.6);
        self.line(x - arm, y + arm, x + arm, y - arm, stroke, 1.6);
    }

    pub fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"{:.0}\" viewBox=\"0 0 {:.0} {:.0}\">\n{}</svg>\n",
            self.width, self.height, self.width, self.height, self.body
        )
    }
}

/// Draws the plot frame: axis lines, ticks with labels, axis titles and a
/// top title. Returns nothing; the caller plots into the same scales.
pub fn frame(
    doc: &mut SvgDoc,
    x: &Scale,
    y: &Scale,
    title: &str,
    x_label: &str,
    y_label: &str,
) {
    let (x0, x1) = x.range;
    // Pixel y runs downward; the scale's range already encodes that.
    let (y0, y1) = (y.range.0, y.range.1);
    let axis_y = y0.max(y1);
    let axis_x = x0.min(x1);
    doc.line(x0.min(x1), axis_y, x0.max(x1), axis_y, "#333", 1.0);
    doc.line(axis_x, y0.min(y1), axis_x, y0.max(y1), "#333", 1.0);
    for t in x.ticks(5) {
        let px = x.apply(t);
        doc.line(px, axis_y, px, axis_y + 4.0, "#333", 1.0);
        doc.text(px, axis_y + 16.0, "middle", 11.0, &format!("{t:.2}"));
    }
    for t in y.ticks(5) {
        let py = y.apply(t);
        doc.line(axis_x - 4.0, py, axis_x, py, "#333", 1.0);
        doc.text(axis_x - 6.0, py + 4.0, "end", 11.0, &format!("{t:.2}"));
    }
    let mid_x = (x0 + x1) / 2.0;
    doc.text(mid_x, axis_y + 32.0, "middle", 12.0, x_label);
    doc.text(axis_x, y0.min(y1) - 10.0, "start", 12.0, y_label);
    doc.text(mid_x, 18.0, "middle", 14.0, title);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shade_darkens_with_value_and_clamps() {
        let light = shade(GREEN_HUE, 0.0);
        let dark = shade(GREEN_HUE, 1.0);
        assert!(light.contains("86.0%"));
        assert!(dark.contains("24.0%"));
        assert_eq!(shade(GREEN_HUE, 2.0), dark);
        assert_eq!(shade(GREEN_HUE, -1.0), light);
        assert_eq!(shade(GREEN_HUE, f64::NAN), light);
    }

    #[test]
    fn scale_maps_endpoints_and_survives_flat_domains() {
        let s = Scale::new((2.0, 4.0), (100.0, 300.0));
        assert_eq!(s.apply(2.0), 100.0);
        assert_eq!(s.apply(4.0), 300.0);
        assert_eq!(s.apply(3.0), 200.0);
        let flat = Scale::new((5.0, 5.0), (0.0, 10.0));
        assert_eq!(flat.apply(5.0), 5.0);
    }

    #[test]
    fn text_is_escaped() {
        let mut doc = SvgDoc::new(100.0, 100.0);
        doc.text(1.0, 1.0, "start", 10.0, "a<b&c");
        let out = doc.finish();
        assert!(out.contains("a&lt;b&amp;c"));
    }
}
