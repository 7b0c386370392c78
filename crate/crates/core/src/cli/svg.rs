//! Static scatter plot of a 2-D projection.

use std::path::Path;

use crate::analysis::ProjectionReport;
use super::write;
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};

const CANVAS: f64 = 480.0;
const MARGIN: f64 = 0.05;
const RADIUS: f64 = 4.0;

/// Linear ramp from red (polarity 0) to blue (polarity 1).
pub fn polarity_color(p: f64) -> String {
    let p = if p.is_finite() { p.clamp(0.0, 1.0) } else { 0.5 };
    let r = (255.0 * (1.0 - p)).round() as u8;
    let b = (255.0 * p).round() as u8;
    format!("#{r:02x}00{b:02x}")
}

/// Maps `[lo, hi]` plus a 5% margin on each side onto `[0, CANVAS]`. A
/// degenerate range is centered.
fn axis(lo: f64, hi: f64) -> impl Fn(f64) -> f64 {
    let span = hi - lo;
    move |v| {
        if span <= 0.0 {
            CANVAS / 2.0
        } else {
            let lo = lo - MARGIN * span;
            (v - lo) / (span * (1.0 + 2.0 * MARGIN)) * CANVAS
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn render_scatter_svg(p: &ProjectionReport, vocab: &Vocabulary, labels: &[usize]) -> Result<String> {
    if p.points.is_empty() {
        return Err(Error::Config("projection has no points".into()));
    }
    let bounds = |f: fn(&crate::analysis::ProjectedPoint) -> f64| {
        p.points.iter().map(f).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        })
    };
    let (x0, x1) = bounds(|q| q.px);
    let (y0, y1) = bounds(|q| q.py);
    let sx = axis(x0, x1);
    let sy = axis(y0, y1);

    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{CANVAS}\" height=\"{CANVAS}\" viewBox=\"0 0 {CANVAS} {CANVAS}\">\n"
    );
    out.push_str(&format!("<rect width=\"{CANVAS}\" height=\"{CANVAS}\" fill=\"white\"/>\n"));
    for q in &p.points {
        // SVG y grows downward.
        let (cx, cy) = (sx(q.px), CANVAS - sy(q.py));
        out.push_str(&format!(
            "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"{RADIUS}\" fill=\"{}\"/>\n",
            polarity_color(q.polarity)
        ));
        if labels.contains(&q.token) {
            out.push_str(&format!(
                "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" font-family=\"sans-serif\">{}</text>\n",
                cx + RADIUS + 2.0,
                cy - RADIUS,
                escape(vocab.surface(q.token))
            ));
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn emit_scatter_svg(p: &ProjectionReport, vocab: &Vocabulary, labels: &[usize], path: &Path) -> Result<()> {
    write(path, &render_scatter_svg(p, vocab, labels)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::ProjectedPoint;

    fn vocab() -> Vocabulary {
        Vocabulary::build(&Default::default()).unwrap()
    }

    fn point(token: usize, px: f64, py: f64, polarity: f64) -> ProjectedPoint {
        ProjectedPoint { token, px, py, polarity }
    }

    #[test]
    fn ramp_endpoints_and_midpoint() {
        assert_eq!(polarity_color(0.0), "#ff0000");
        assert_eq!(polarity_color(1.0), "#0000ff");
        assert_eq!(polarity_color(0.5), "#800080");
    }

    #[test]
    fn single_point_is_centered() {
        let p = ProjectionReport {
            points: vec![point(10, 3.0, -2.0, 0.5)],
            explained: (0.0, 0.0),
        };
        let svg = render_scatter_svg(&p, &vocab(), &[]).unwrap();
        assert!(svg.contains("cx=\"240.00\" cy=\"240.00\""));
        assert_eq!(svg.matches("<circle").count(), 1);
    }

    #[test]
    fn margin_and_labels() {
        let v = vocab();
        let p = ProjectionReport {
            points: vec![point(10, 0.0, 0.0, 0.0), point(11, 1.0, 1.0, 1.0)],
            explained: (1.0, 0.0),
        };
        let svg = render_scatter_svg(&p, &v, &[11]).unwrap();
        let lo = 0.05 / 1.1 * CANVAS;
        assert!(svg.contains(&format!("cx=\"{lo:.2}\" cy=\"{:.2}\"", CANVAS - lo)));
        assert_eq!(svg.matches("<text").count(), 1);
        assert!(svg.contains(v.surface(11)));
        assert_eq!(svg, render_scatter_svg(&p, &v, &[11]).unwrap());
    }

    #[test]
    fn empty_projection_is_rejected() {
        let p = ProjectionReport { points: vec![], explained: (0.0, 0.0) };
        assert!(render_scatter_svg(&p, &vocab(), &[]).is_err());
    }
}
