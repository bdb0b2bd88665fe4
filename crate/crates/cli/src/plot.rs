//! Minimal SVG scatter plots for two-dimensional datasets.

use std::fmt::Write as _;

use tnfclust::Matrix;

use crate::error::{Error, Result};

pub const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

const SIZE: f64 = 480.0;
const MARGIN: f64 = 20.0;

pub fn color_for(label: usize) -> &'static str {
    PALETTE[label % PALETTE.len()]
}

/// Renders `points` (n × 2) coloured by `labels`. Output is a pure function
/// of the inputs.
pub fn scatter_svg(points: &Matrix, labels: &[usize], title: &str) -> Result<String> {
    if points.cols() != 2 {
        return Err(Error::Invalid(format!(
            "scatter plots need 2-dimensional points, got {}",
            points.cols()
        )));
    }
    if labels.len() != points.rows() {
        return Err(Error::Invalid(format!(
            "{} labels for {} points",
            labels.len(),
            points.rows()
        )));
    }
    let bounds = |c: usize| {
        let col = points.column(c);
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, if hi > lo { hi - lo } else { 1.0 })
    };
    let (x0, xr) = bounds(0);
    let (y0, yr) = bounds(1);
    let inner = SIZE - 2.0 * MARGIN;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(svg, "<title>{}</title>", escape(title));
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (row, &label) in points.row_iter().zip(labels) {
        let x = MARGIN + (row[0] - x0) / xr * inner;
        let y = SIZE - MARGIN - (row[1] - y0) / yr * inner;
        let _ = writeln!(
            svg,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{}"/>"#,
            color_for(label)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
